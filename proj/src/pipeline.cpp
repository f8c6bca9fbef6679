/// @file pipeline.cpp
#include "pipeline.hpp"

#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <thread>
#include <utility>

#include "stopwatch.hpp"

namespace condsim {

namespace {

constexpr int kMaxDoublings = 3;
constexpr int64_t kPredictChunk = 2048;

std::pair<int64_t, int64_t> box_key(const RegularGrid &g, Point p) {
  return {box_of(p.x, g.x0, g.dx), box_of(p.y, g.y0, g.dy)};
}

bool has_shared_box(const ObservationSet &obs, const RegularGrid &g) {
  std::map<std::pair<int64_t, int64_t>, int> seen;
  for (const Point &p : obs.locs)
    if (++seen[box_key(g, p)] > 1) return true;
  return false;
}

/// Replaces every set of co-boxed observations by a single one at their
/// centroid with the mean value and noise variance sum(phi_i^2)/k^2.
ObservationSet average_by_box(const ObservationSet &obs,
                              const RegularGrid &g) {
  std::map<std::pair<int64_t, int64_t>, size_t> slot;
  std::vector<std::vector<int64_t>> groups;
  for (int64_t i = 0; i < obs.n(); ++i) {
    auto key = box_key(g, obs.locs[size_t(i)]);
    auto it = slot.find(key);
    if (it == slot.end()) {
      slot.emplace(key, groups.size());
      groups.push_back({i});
    } else {
      groups[it->second].push_back(i);
    }
  }
  ObservationSet out;
  out.locs.reserve(groups.size());
  out.values.resize(int64_t(groups.size()));
  out.noise_var.resize(int64_t(groups.size()));
  for (size_t gi = 0; gi < groups.size(); ++gi) {
    const auto &mem = groups[gi];
    const double k = double(mem.size());
    Point c{0.0, 0.0};
    double val = 0.0, nv = 0.0;
    for (int64_t i : mem) {
      c.x += obs.locs[size_t(i)].x;
      c.y += obs.locs[size_t(i)].y;
      val += obs.values[i];
      nv += obs.noise_var[i];
    }
    out.locs.push_back({c.x / k, c.y / k});
    out.values[int64_t(gi)] = val / k;
    out.noise_var[int64_t(gi)] = nv / (k * k);
  }
  return out;
}

/// Covariance between output-grid nodes [t0, t0+c) and the source points.
void cross_cov_chunk(const CovarianceModel &m, const RegularGrid &g,
                     int64_t t0, int64_t c, const std::vector<Point> &src,
                     Eigen::MatrixXd &K) {
  K.resize(c, int64_t(src.size()));
  for (size_t i = 0; i < src.size(); ++i) {
    const Point s = src[i];
    for (int64_t j = 0; j < c; ++j) {
      const Point p = g.node(t0 + j);
      const double ddx = p.x - s.x, ddy = p.y - s.y;
      K(j, int64_t(i)) = matern(m, std::sqrt(ddx * ddx + ddy * ddy));
    }
  }
}

} // namespace

Pipeline::Pipeline(const RegularGrid &grid, const CovarianceModel &model,
                   const ObservationSet &obs, double tau2, Method method,
                   int np, BoxPolicy policy, int max_refine,
                   int64_t dense_cap, bool share_step_factors)
    : model_(model), tau2_(tau2), method_(method), np_(np),
      dense_cap_(dense_cap) {
  grid.validate();
  model_.validate();
  obs.validate();
  require(std::isfinite(tau2_) && tau2_ >= 0.0, CS_EINVAL,
          "pipeline: tau2 must be finite and >= 0");
  require(max_refine >= 0, CS_EINVAL, "pipeline: max_refine must be >= 0");
  if (method_ == Method::Local)
    require(np_ >= 1, CS_EINVAL, "pipeline: local method requires n_p >= 1");
  if (method_ == Method::NearestNeighbor)
    require(np_ >= 0, CS_EINVAL, "pipeline: n_p must be >= 0");

  Stopwatch sw;
  out_ = grid;
  obs_ = obs;
  if (policy == BoxPolicy::Average) {
    obs_ = average_by_box(obs_, out_);
  } else if (policy == BoxPolicy::Refine) {
    int level = 0;
    while (has_shared_box(obs_, out_)) {
      if (level == max_refine) {
        obs_ = average_by_box(obs_, out_);
        break;
      }
      out_.dx *= 0.5;
      out_.dy *= 0.5;
      out_.m1 = 2 * out_.m1 - 1;
      out_.m2 = 2 * out_.m2 - 1;
      ++level;
    }
  }

  const bool stenciled =
      method_ == Method::Local ||
      (method_ == Method::NearestNeighbor && np_ > 0);
  sim_ = (stenciled && obs_.n() > 0)
             ? pad_for_observations(out_, obs_.locs, np_)
             : out_;
  const int64_t ox = llround((out_.x0 - sim_.x0) / sim_.dx);
  const int64_t oy = llround((out_.y0 - sim_.y0) / sim_.dy);
  out_to_sim_.resize(size_t(out_.nodes()));
  for (int64_t iy = 0; iy < out_.m2; ++iy)
    for (int64_t ix = 0; ix < out_.m1; ++ix)
      out_to_sim_[size_t(out_.flat(ix, iy))] = sim_.flat(ix + ox, iy + oy);
  times_.off_setup += sw.lap();

  embedding_ =
      std::make_unique<CirculantEmbedding>(sim_, model_, kMaxDoublings);
  times_.ce_setup += sw.lap();

  if (obs_.n() > 0) {
    switch (method_) {
    case Method::Local:
      setup_local();
      break;
    case Method::NearestNeighbor:
      setup_nn();
      break;
    case Method::Exact:
      setup_exact();
      break;
    }
    times_.off_setup += sw.lap();

    // Step-4 gram factor, plus the step-1 prediction cached across draws.
    if (method_ == Method::NearestNeighbor) {
      src_.reserve(size_t(surrogate_.size()));
      for (int64_t id : surrogate_.nodes) src_.push_back(sim_.node(id));
      Eigen::MatrixXd A = cov_matrix(model_, src_, src_);
      A.diagonal().array() += tau2_;
      llt4_ = jittered_llt(std::move(A), model_.sigma2);
      cache_prediction(surrogate_.values, llt4_);
    } else {
      src_ = obs_.locs;
      const bool same_gram =
          method_ == Method::Exact ||
          (obs_.noise_var.array() == tau2_).all();
      if (same_gram && share_step_factors) {
        Eigen::MatrixXd A = cov_matrix(model_, src_, src_);
        if (method_ == Method::Exact)
          A.diagonal() += obs_.noise_var;
        else
          A.diagonal().array() += tau2_;
        llt4_ = jittered_llt(std::move(A), model_.sigma2);
        cache_prediction(obs_.values, llt4_);
      } else {
        Eigen::MatrixXd Koo = cov_matrix(model_, src_, src_);
        Eigen::MatrixXd A4 = Koo;
        if (method_ == Method::Exact)
          A4.diagonal() += obs_.noise_var;
        else
          A4.diagonal().array() += tau2_;
        llt4_ = jittered_llt(std::move(A4), model_.sigma2);
        Koo.diagonal() += obs_.noise_var;
        auto llt1 = jittered_llt(std::move(Koo), model_.sigma2);
        cache_prediction(obs_.values, llt1);
      }
    }
    times_.predict += sw.lap();
  } else {
    yhat_ = Eigen::VectorXd::Zero(out_.nodes());
  }
}

void Pipeline::setup_local() {
  sampler_ = build_local_sampler(sim_, obs_.locs, model_, np_);
}

void Pipeline::setup_nn() {
  surrogate_ = build_surrogate(sim_, obs_, model_, np_);
  check_dense_cap(surrogate_.size(), obs_.n(), dense_cap_);
}

void Pipeline::setup_exact() {
  const int64_t M = sim_.nodes();
  const int64_t n = obs_.n();
  check_dense_cap(M, n, dense_cap_);
  auto grid_llt = grid_cov_factor(sim_, model_, dense_cap_);
  Eigen::MatrixXd KTo(M, n);
  for (int64_t t = 0; t < M; ++t) {
    const Point p = sim_.node(t);
    for (int64_t i = 0; i < n; ++i) {
      const double ddx = p.x - obs_.locs[size_t(i)].x;
      const double ddy = p.y - obs_.locs[size_t(i)].y;
      KTo(t, i) = matern(model_, std::sqrt(ddx * ddx + ddy * ddy));
    }
  }
  exact_w_ = grid_llt.solve(KTo);
  Eigen::MatrixXd gamma =
      cov_matrix(model_, obs_.locs, obs_.locs) - KTo.transpose() * exact_w_;
  gamma = 0.5 * (gamma + gamma.transpose()).eval();
  exact_chol_ = Eigen::MatrixXd(
      jittered_llt(std::move(gamma), model_.sigma2).matrixL());
}

void Pipeline::cache_prediction(const Eigen::VectorXd &rhs,
                                const Eigen::LLT<Eigen::MatrixXd> &gram) {
  const Eigen::VectorXd alpha = gram.solve(rhs);
  const int64_t M = out_.nodes();
  yhat_.resize(M);
  Eigen::MatrixXd Kc;
  Eigen::VectorXd yt;
  for (int64_t t0 = 0; t0 < M; t0 += kPredictChunk) {
    const int64_t c = std::min(kPredictChunk, M - t0);
    cross_cov_chunk(model_, out_, t0, c, src_, Kc);
    yt.resize(c);
    yt.noalias() = Kc * alpha;
    yhat_.segment(t0, c) = yt;
  }
}

Eigen::VectorXd Pipeline::synthetic_obs(const double *field,
                                        RandomStream &stream) const {
  switch (method_) {
  case Method::Local:
    return sample_offgrid(
        sampler_, field, Eigen::VectorXd::Constant(obs_.n(), tau2_), stream);
  case Method::NearestNeighbor:
    return nn_draw_inputs(surrogate_, field, tau2_, stream);
  case Method::Exact:
  default: {
    const int64_t n = obs_.n();
    Eigen::Map<const Eigen::VectorXd> f(field, sim_.nodes());
    Eigen::VectorXd z = exact_w_.transpose() * f;
    Eigen::VectorXd eta(n), xi(n);
    for (int64_t i = 0; i < n; ++i) eta[i] = stream.normal();
    for (int64_t i = 0; i < n; ++i) xi[i] = stream.normal();
    z.noalias() += exact_chol_.triangularView<Eigen::Lower>() * eta;
    z.array() += obs_.noise_var.array().sqrt() * xi.array();
    return z;
  }
  }
}

void Pipeline::extract_output(const double *field, double *out) const {
  const int64_t M = out_.nodes();
  for (int64_t k = 0; k < M; ++k) out[k] = field[out_to_sim_[size_t(k)]];
}

void Pipeline::finish_draws(const Eigen::MatrixXd &zstar,
                            std::vector<Eigen::VectorXd> &out) {
  Stopwatch sw;
  const int64_t s = int64_t(src_.size());
  if (s == 0) { // unconditional limit: v = z
    times_.predict += sw.lap();
    return;
  }
  // Per-column solves and per-column GEMV keep every draw on the exact
  // floating-point path of draw(), whatever the batch size.
  std::vector<Eigen::VectorXd> alphas(out.size());
  for (size_t k = 0; k < out.size(); ++k) {
    const Eigen::VectorXd zc = zstar.col(int64_t(k));
    alphas[k] = llt4_.solve(zc);
  }
  const int64_t M = out_.nodes();
  Eigen::MatrixXd Kc;
  Eigen::VectorXd yt;
  for (int64_t t0 = 0; t0 < M; t0 += kPredictChunk) {
    const int64_t c = std::min(kPredictChunk, M - t0);
    cross_cov_chunk(model_, out_, t0, c, src_, Kc);
    yt.resize(c);
    for (size_t k = 0; k < out.size(); ++k) {
      yt.noalias() = Kc * alphas[k];
      out[k].segment(t0, c) += yhat_.segment(t0, c) - yt;
    }
  }
  times_.predict += sw.lap();
}

Eigen::VectorXd Pipeline::draw(uint64_t seed, uint64_t index) {
  require(index <= 0xffffffffULL, CS_EINVAL,
          "draw: index must fit in 32 bits");
  Stopwatch sw;
  Eigen::VectorXd a(sim_.nodes()), b(sim_.nodes());
  embedding_->simulate_pair(seed, index / 2, a.data(), b.data());
  times_.ce += sw.lap();
  const double *field = (index % 2) ? b.data() : a.data();
  std::vector<Eigen::VectorXd> out(1, Eigen::VectorXd(out_.nodes()));
  extract_output(field, out[0].data());
  Eigen::MatrixXd zstar(int64_t(src_.size()), 1);
  if (obs_.n() > 0) {
    RandomStream stream(seed, StreamPurpose::OffGrid, uint32_t(index));
    zstar.col(0) = synthetic_obs(field, stream);
  }
  times_.off_grid += sw.lap();
  finish_draws(zstar, out);
  return std::move(out[0]);
}

FieldEnsemble Pipeline::run(uint64_t seed, int64_t n_draws, int n_threads) {
  require(n_draws >= 1, CS_EINVAL, "run: n_draws must be >= 1");
  require(n_draws <= 0x100000000LL, CS_EINVAL,
          "run: draw indices must fit in 32 bits");
  require(n_threads >= 1, CS_EINVAL, "run: n_threads must be >= 1");

  const int64_t Msim = sim_.nodes();
  const int64_t s = int64_t(src_.size());
  FieldEnsemble ens;
  ens.grid = out_;
  ens.draws.assign(size_t(n_draws), Eigen::VectorXd(out_.nodes()));
  Eigen::MatrixXd zstar(s, n_draws);
  const int64_t n_pairs = (n_draws + 1) / 2;

  std::mutex time_mutex;
  double ce_acc = 0.0, off_acc = 0.0;
  std::atomic<int64_t> next{0};
  auto work = [&]() {
    Eigen::VectorXd a(Msim), b(Msim);
    double tce = 0.0, toff = 0.0;
    Stopwatch sw;
    for (;;) {
      const int64_t p = next.fetch_add(1);
      if (p >= n_pairs) break;
      sw.lap();
      embedding_->simulate_pair(seed, uint64_t(p), a.data(), b.data());
      tce += sw.lap();
      for (int half = 0; half < 2; ++half) {
        const int64_t k = 2 * p + half;
        if (k >= n_draws) break;
        const double *field = half ? b.data() : a.data();
        extract_output(field, ens.draws[size_t(k)].data());
        if (s > 0) {
          RandomStream stream(seed, StreamPurpose::OffGrid, uint32_t(k));
          zstar.col(k) = synthetic_obs(field, stream);
        }
      }
      toff += sw.lap();
    }
    std::lock_guard<std::mutex> lock(time_mutex);
    ce_acc += tce;
    off_acc += toff;
  };

  const int64_t nw = std::min<int64_t>(n_threads, n_pairs);
  if (nw <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(size_t(nw));
    for (int64_t t = 0; t < nw; ++t) pool.emplace_back(work);
    for (auto &t : pool) t.join();
  }
  times_.ce += ce_acc;
  times_.off_grid += off_acc;

  finish_draws(zstar, ens.draws);

  ens.mean = Eigen::VectorXd::Zero(out_.nodes());
  for (const auto &d : ens.draws) ens.mean += d;
  ens.mean /= double(n_draws);
  if (n_draws >= 2) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(out_.nodes());
    for (const auto &d : ens.draws) acc += (d - ens.mean).cwiseAbs2();
    ens.mc_se = (acc / double(n_draws - 1)).cwiseSqrt();
  }
  return ens;
}

} // namespace condsim
