/// @file eval.cpp
#include "eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "offgrid_local.hpp"
#include "offgrid_nn.hpp"
#include "rng.hpp"
#include "stopwatch.hpp"

namespace condsim {

std::string sigfig_key(double x, int digits) {
  require(digits >= 1 && digits <= 12, CS_EINVAL,
          "sigfig_key: digits must be in [1, 12]");
  if (x == 0.0) return "0";
  if (!std::isfinite(x)) return std::isnan(x) ? "nan" : (x < 0 ? "-inf" : "inf");
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.14e", std::fabs(x)); // d.dddddddddddddde±XX
  char digs[16];
  digs[0] = buf[0];
  std::memcpy(digs + 1, buf + 2, 14);
  digs[15] = '\0';
  long value = 0;
  for (int i = 0; i < digits; ++i) value = value * 10 + (digs[i] - '0');
  if (digs[digits] >= '5') ++value;
  int exp = std::atoi(std::strchr(buf, 'e') + 1);
  long cap = 1;
  for (int i = 0; i < digits; ++i) cap *= 10;
  if (value == cap) {
    value /= 10;
    ++exp;
  }
  return (x < 0 ? "-" : "") + std::to_string(value) + "e" + std::to_string(exp);
}

double sigfig_agreement(const double *a, const double *b, int64_t n,
                        int digits) {
  require(a != nullptr && b != nullptr, CS_EINVAL,
          "sigfig_agreement: null input");
  require(n >= 1, CS_EINVAL, "sigfig_agreement: need at least one entry");
  int64_t hits = 0;
  for (int64_t i = 0; i < n; ++i)
    if (sigfig_key(a[i], digits) == sigfig_key(b[i], digits)) ++hits;
  return double(hits) / double(n);
}

double percentile(std::vector<double> v, double pct) {
  require(!v.empty(), CS_EINVAL, "percentile: empty input");
  require(pct >= 0.0 && pct <= 100.0, CS_EINVAL,
          "percentile: pct must be in [0, 100]");
  std::sort(v.begin(), v.end());
  const double h = (double(v.size()) - 1.0) * pct / 100.0;
  const size_t lo = size_t(std::floor(h));
  if (lo + 1 >= v.size()) return v.back();
  const double frac = h - double(lo);
  return v[lo] + frac * (v[lo + 1] - v[lo]);
}

std::vector<double> rel_error_pct(const Eigen::VectorXd &approx,
                                  const Eigen::VectorXd &exact,
                                  int64_t &n_excluded) {
  require(approx.size() == exact.size(), CS_EINVAL,
          "rel_error_pct: length mismatch");
  std::vector<double> out;
  out.reserve(size_t(exact.size()));
  n_excluded = 0;
  for (int64_t i = 0; i < exact.size(); ++i) {
    if (exact[i] > 0.0)
      out.push_back(100.0 * (approx[i] - exact[i]) / exact[i]);
    else
      ++n_excluded;
  }
  return out;
}

ObservationSet design_observations(const CovarianceModel &model, double tau,
                                   int64_t n_obs, double lo, double hi,
                                   uint64_t seed, uint32_t config) {
  model.validate();
  require(n_obs >= 1, CS_EINVAL, "design_observations: n_obs must be >= 1");
  require(hi > lo, CS_EINVAL, "design_observations: empty placement box");
  require(std::isfinite(tau) && tau >= 0.0, CS_EINVAL,
          "design_observations: tau must be finite and >= 0");
  ObservationSet obs;
  obs.locs.reserve(size_t(n_obs));
  RandomStream coords(seed, StreamPurpose::Design, config);
  for (int64_t i = 0; i < n_obs; ++i) {
    const double x = lo + coords.uniform() * (hi - lo);
    const double y = lo + coords.uniform() * (hi - lo);
    obs.locs.push_back({x, y});
  }
  auto llt = jittered_llt(cov_matrix(model, obs.locs, obs.locs), model.sigma2);
  RandomStream values(seed, StreamPurpose::Values, config);
  Eigen::VectorXd eta(n_obs);
  for (int64_t i = 0; i < n_obs; ++i) eta[i] = values.normal();
  obs.values = Eigen::MatrixXd(llt.matrixL()) * eta;
  for (int64_t i = 0; i < n_obs; ++i)
    obs.values[i] += tau * values.normal();
  obs.noise_var = Eigen::VectorXd::Constant(n_obs, tau * tau);
  return obs;
}

namespace {

Eigen::VectorXd extract_subgrid(const RegularGrid &sub, const RegularGrid &g,
                                const Eigen::VectorXd &v) {
  const int64_t ox = llround((sub.x0 - g.x0) / g.dx);
  const int64_t oy = llround((sub.y0 - g.y0) / g.dy);
  Eigen::VectorXd out(sub.nodes());
  for (int64_t iy = 0; iy < sub.m2; ++iy)
    for (int64_t ix = 0; ix < sub.m1; ++ix)
      out[sub.flat(ix, iy)] = v[g.flat(ix + ox, iy + oy)];
  return out;
}

DesignRow make_row(double nu, double theta, double tau, int config,
                   const char *method, int np, const Eigen::VectorXd &se,
                   const Eigen::VectorXd &se_exact) {
  DesignRow row;
  row.nu = nu;
  row.theta = theta;
  row.tau = tau;
  row.config = config;
  row.method = method;
  row.np = np;
  auto rel = rel_error_pct(se, se_exact, row.n_excluded);
  for (double &r : rel) r = std::fabs(r);
  row.p95_abs_rel_pct = percentile(std::move(rel), 95.0);
  row.frac_sigfig3 =
      sigfig_agreement(se.data(), se_exact.data(), se.size(), 3);
  return row;
}

void write_design_csv(const std::string &path,
                      const std::vector<DesignRow> &rows) {
  std::ofstream out(path);
  require(out.good(), CS_EIO, "cannot open for writing: " + path);
  out << "nu,theta,tau,config,method,np,p95_abs_rel_pct,frac_sigfig3,"
         "n_excluded\n";
  char line[256];
  for (const DesignRow &r : rows) {
    std::snprintf(line, sizeof(line), "%.10g,%.10g,%.10g,%d,%s,", r.nu,
                  r.theta, r.tau, r.config, r.method.c_str());
    out << line;
    if (r.np == 0)
      out << "full";
    else
      out << r.np;
    std::snprintf(line, sizeof(line), ",%.10g,%.10g,%lld\n",
                  r.p95_abs_rel_pct, r.frac_sigfig3,
                  static_cast<long long>(r.n_excluded));
    out << line;
  }
  require(out.good(), CS_EIO, "write failed: " + path);
}

} // namespace

std::vector<DesignRow> run_design(double nu, double theta, double tau,
                                  const std::vector<int> &np_levels,
                                  int n_configs, uint64_t seed,
                                  const std::string &csv_path) {
  require(n_configs >= 1, CS_EINVAL, "run_design: n_configs must be >= 1");
  require(!np_levels.empty(), CS_EINVAL, "run_design: no np levels");
  for (int np : np_levels)
    require(np >= 0, CS_EINVAL, "run_design: np levels must be >= 0");
  const CovarianceModel model{1.0, theta, nu};
  model.validate();
  const double tau2 = tau * tau;
  const RegularGrid core{0.0, 0.0, 1.0, 1.0, 61, 61};

  const bool need_full =
      std::find(np_levels.begin(), np_levels.end(), 0) != np_levels.end();
  Eigen::LLT<Eigen::MatrixXd> core_factor;
  if (need_full) core_factor = grid_cov_factor(core, model, kDefaultDenseCap);

  std::vector<DesignRow> rows;
  rows.reserve(size_t(n_configs) * np_levels.size() * 2);
  for (int c = 0; c < n_configs; ++c) {
    const ObservationSet obs =
        design_observations(model, tau, 35, 0.0, 60.0, seed, uint32_t(c));
    const Eigen::VectorXd se_exact = exact_se_grid(core, obs, model);
    for (int np : np_levels) {
      Eigen::VectorXd se_l, se_n;
      if (np == 0) {
        se_l = local_se_grid_full(core, obs, model, kDefaultDenseCap,
                                  &core_factor);
        se_n = nn_se_grid(core, obs, model, 0, tau2);
      } else {
        const RegularGrid gp = pad_for_observations(core, obs.locs, np);
        se_l = extract_subgrid(core, gp, local_se_grid(gp, obs, model, np));
        se_n = extract_subgrid(core, gp,
                               nn_se_grid(gp, obs, model, np, tau2));
      }
      rows.push_back(make_row(nu, theta, tau, c, "local", np, se_l, se_exact));
      rows.push_back(make_row(nu, theta, tau, c, "nn", np, se_n, se_exact));
    }
  }
  if (!csv_path.empty()) write_design_csv(csv_path, rows);
  return rows;
}

double misspec_conditional_correlation(const CovarianceModel &model, Point a,
                                       Point b) {
  const RegularGrid g{-10.0, -10.0, 1.0, 1.0, 21, 21};
  auto na = locate_neighbors(g, a, 2);
  auto nb = locate_neighbors(g, b, 2);
  na.insert(na.end(), nb.begin(), nb.end());
  std::sort(na.begin(), na.end());
  na.erase(std::unique(na.begin(), na.end()), na.end());
  std::vector<Point> pts;
  pts.reserve(na.size());
  for (int64_t id : na) pts.push_back(g.node(id));

  Eigen::MatrixXd Knn = cov_matrix(model, pts, pts);
  Knn.diagonal().array() += 1e-12 * model.sigma2;
  auto llt = jittered_llt(std::move(Knn), model.sigma2);
  const std::vector<Point> pair{a, b};
  const Eigen::MatrixXd KpN = cov_matrix(model, pair, pts); // 2 x B
  const Eigen::MatrixXd V = llt.matrixL().solve(KpN.transpose());
  const Eigen::MatrixXd S =
      cov_matrix(model, pair, pair) - V.transpose() * V;
  return S(0, 1) / std::sqrt(S(0, 0) * S(1, 1));
}

void misspec_study(double &max_unit, double &max_half) {
  const Point unit_a{0.0, 0.5}, unit_b{1.0, 0.5};
  const Point half_a{-0.25, 0.5}, half_b{0.25, 0.5};
  max_unit = -1.0;
  max_half = -1.0;
  for (int i = 0; i < 50; ++i) {
    const double theta = 0.2 + double(i) * (10.0 - 0.2) / 49.0;
    for (int j = 0; j < 21; ++j) {
      const double nu = 0.5 + double(j) / 20.0;
      const CovarianceModel model{1.0, theta, nu};
      max_unit = std::max(
          max_unit, misspec_conditional_correlation(model, unit_a, unit_b));
      max_half = std::max(
          max_half, misspec_conditional_correlation(model, half_a, half_b));
    }
  }
}

namespace {

ObservationSet bench_observations(int64_t n_obs, double lo, double hi,
                                  uint64_t seed, uint32_t config) {
  ObservationSet obs;
  obs.locs.reserve(size_t(n_obs));
  RandomStream coords(seed, StreamPurpose::Design, config);
  for (int64_t i = 0; i < n_obs; ++i) {
    const double x = lo + coords.uniform() * (hi - lo);
    const double y = lo + coords.uniform() * (hi - lo);
    obs.locs.push_back({x, y});
  }
  RandomStream values(seed, StreamPurpose::Values, config);
  obs.values.resize(n_obs);
  for (int64_t i = 0; i < n_obs; ++i) obs.values[i] = values.normal();
  obs.noise_var = Eigen::VectorXd::Constant(n_obs, 0.01);
  return obs;
}

} // namespace

std::vector<BenchRow> timing_bench(const std::vector<int64_t> &grid_sizes,
                                   const std::vector<int64_t> &obs_counts,
                                   int np, int64_t n_draws, uint64_t seed,
                                   const std::string &csv_path) {
  require(!grid_sizes.empty() && !obs_counts.empty(), CS_EINVAL,
          "timing_bench: empty sweep");
  require(np >= 1, CS_EINVAL, "timing_bench: np must be >= 1");
  require(n_draws >= 1, CS_EINVAL, "timing_bench: n_draws must be >= 1");
  const CovarianceModel model{1.0, 20.0, 0.5};
  std::vector<BenchRow> rows;
  uint32_t config = 0;
  for (int64_t m : grid_sizes) {
    require(m > 2 * np + 1, CS_EINVAL,
            "timing_bench: grid too small for the neighborhood order");
    const RegularGrid g{0.0, 0.0, 1.0, 1.0, m, m};
    for (int64_t n_obs : obs_counts) {
      const ObservationSet obs = bench_observations(
          n_obs, double(np), double(m - 1 - np), seed, config++);
      Pipeline pipe(g, model, obs, 0.01, Method::Local, np,
                    BoxPolicy::Block, 0);
      pipe.run(seed, n_draws, 1);
      rows.push_back({m, n_obs, np, n_draws, pipe.times()});
    }
  }
  if (!csv_path.empty()) {
    std::ofstream out(csv_path);
    require(out.good(), CS_EIO, "cannot open for writing: " + csv_path);
    out << "m,n_obs,np,n_draws,CESetup,OffSetup,CE,OffGrid,predict,total\n";
    char line[256];
    for (const BenchRow &r : rows) {
      std::snprintf(line, sizeof(line),
                    "%lld,%lld,%d,%lld,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                    static_cast<long long>(r.m),
                    static_cast<long long>(r.n_obs), r.np,
                    static_cast<long long>(r.n_draws), r.times.ce_setup,
                    r.times.off_setup, r.times.ce, r.times.off_grid,
                    r.times.predict, r.times.total());
      out << line;
    }
    require(out.good(), CS_EIO, "write failed: " + csv_path);
  }
  return rows;
}

double time_local_setup(int64_t m, int64_t n_obs, int np, uint64_t seed) {
  require(np >= 1 && m > 2 * np + 1, CS_EINVAL,
          "time_local_setup: grid too small for the neighborhood order");
  const CovarianceModel model{1.0, 20.0, 0.5};
  const RegularGrid g{0.0, 0.0, 1.0, 1.0, m, m};
  const ObservationSet obs =
      bench_observations(n_obs, double(np), double(m - 1 - np), seed, 0);
  Stopwatch sw;
  const LocalSampler sampler = build_local_sampler(g, obs.locs, model, np);
  const double elapsed = sw.lap();
  require(sampler.gamma.size() == n_obs, CS_ENUMERIC,
          "time_local_setup: sampler build incomplete");
  return elapsed;
}

} // namespace condsim
