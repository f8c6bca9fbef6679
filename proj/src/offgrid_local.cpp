/// @file offgrid_local.cpp
#include "offgrid_local.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <unordered_map>

namespace condsim {

NeighborhoodMap locate_all(const RegularGrid &grid,
                           const std::vector<Point> &obs, int np) {
  NeighborhoodMap map;
  map.np = np;
  map.indices.reserve(obs.size());
  map.box.reserve(obs.size());
  for (const Point &p : obs) {
    map.indices.push_back(locate_neighbors(grid, p, np));
    map.box.emplace_back(box_of(p.x, grid.x0, grid.dx),
                         box_of(p.y, grid.y0, grid.dy));
  }
  return map;
}

namespace {

/// Covariance among the (2 n_p)^2 stencil nodes in relative coordinates;
/// identical for every observation by stationarity.
Eigen::MatrixXd stencil_cov(const CovarianceModel &model, int np, double dx,
                            double dy) {
  const int side = 2 * np;
  const int s = side * side;
  std::vector<Point> rel;
  rel.reserve(size_t(s));
  for (int iy = 0; iy < side; ++iy)
    for (int ix = 0; ix < side; ++ix)
      rel.push_back({double(ix) * dx, double(iy) * dy});
  return cov_matrix(model, rel, rel);
}

/// Covariance between an observation (at its offset inside the stencil)
/// and the stencil nodes.
void stencil_cross(const CovarianceModel &model, int np, double dx,
                   double dy, double off_x, double off_y,
                   Eigen::VectorXd &k) {
  const int side = 2 * np;
  int s = 0;
  for (int iy = 0; iy < side; ++iy)
    for (int ix = 0; ix < side; ++ix, ++s) {
      double ddx = off_x - double(ix) * dx;
      double ddy = off_y - double(iy) * dy;
      k[s] = matern(model, std::sqrt(ddx * ddx + ddy * ddy));
    }
}

} // namespace

LocalSampler build_local_sampler(const RegularGrid &grid,
                                 const std::vector<Point> &obs,
                                 const CovarianceModel &model, int np) {
  model.validate();
  grid.validate();
  LocalSampler sampler;
  sampler.grid = grid;
  sampler.neighborhoods = locate_all(grid, obs, np);

  const int n = int(obs.size());
  const int side = 2 * np;
  const int s = side * side;
  auto llt = jittered_llt(stencil_cov(model, np, grid.dx, grid.dy),
                          model.sigma2);

  sampler.weights.resize(s, n);
  sampler.gamma.resize(n);
  Eigen::VectorXd k(s);
  for (int i = 0; i < n; ++i) {
    // offset of the observation from the stencil's lower-left node
    auto [bx, by] = sampler.neighborhoods.box[size_t(i)];
    Point corner = grid.node(bx - np + 1, by - np + 1);
    stencil_cross(model, np, grid.dx, grid.dy, obs[size_t(i)].x - corner.x,
                  obs[size_t(i)].y - corner.y, k);
    sampler.weights.col(i) = llt.solve(k);
    double g = model.sigma2 - k.dot(sampler.weights.col(i));
    sampler.gamma[i] = std::min(std::max(g, 0.0), model.sigma2);
  }

  // group observations sharing a grid box (identical stencils)
  std::map<std::pair<int64_t, int64_t>, std::vector<int>> by_box;
  for (int i = 0; i < n; ++i)
    by_box[sampler.neighborhoods.box[size_t(i)]].push_back(i);
  sampler.group_of.assign(size_t(n), -1);
  for (auto &[box, members] : by_box) {
    if (members.size() < 2) continue;
    const int g = int(sampler.groups.size());
    const int kk = int(members.size());
    // joint conditional covariance: K_mm - K_mS Knn^-1 K_Sm, where the
    // cross rows are exactly the per-observation k vectors
    Eigen::MatrixXd gram(kk, kk);
    std::vector<Point> pts;
    pts.reserve(size_t(kk));
    for (int a : members) pts.push_back(obs[size_t(a)]);
    Eigen::MatrixXd Kmm = cov_matrix(model, pts, pts);
    Eigen::VectorXd ka(s);
    for (int a = 0; a < kk; ++a) {
      auto [bx, by] = box;
      Point corner = grid.node(bx - np + 1, by - np + 1);
      stencil_cross(model, np, grid.dx, grid.dy,
                    pts[size_t(a)].x - corner.x, pts[size_t(a)].y - corner.y,
                    ka);
      for (int b = 0; b < kk; ++b)
        gram(a, b) = ka.dot(sampler.weights.col(members[size_t(b)]));
    }
    Eigen::MatrixXd cond = Kmm - gram;
    cond = 0.5 * (cond + cond.transpose()); // symmetrize roundoff
    auto cllt = jittered_llt(cond, model.sigma2);
    LocalSampler::BoxGroup group;
    group.members = members;
    group.chol = cllt.matrixL();
    sampler.groups.push_back(std::move(group));
    for (int a : members) sampler.group_of[size_t(a)] = g;
  }
  return sampler;
}

Eigen::VectorXd sample_offgrid(const LocalSampler &sampler,
                               const double *field,
                               const Eigen::VectorXd &noise_var,
                               RandomStream &stream) {
  const int n = int(sampler.neighborhoods.indices.size());
  require(noise_var.size() == n, CS_EINVAL,
          "sample_offgrid: noise vector length mismatch");
  Eigen::VectorXd z(n);
  std::vector<bool> done(size_t(n), false);
  for (int i = 0; i < n; ++i) {
    if (done[size_t(i)]) continue;
    int g = sampler.group_of[size_t(i)];
    if (g < 0) {
      double sd = std::sqrt(sampler.gamma[i] + noise_var[i]);
      z[i] = sampler.apply_row(i, field) + sd * stream.normal();
      done[size_t(i)] = true;
      continue;
    }
    // joint draw for the whole box at its first member
    const auto &group = sampler.groups[size_t(g)];
    const int kk = int(group.members.size());
    Eigen::VectorXd eta(kk), xi(kk);
    for (int a = 0; a < kk; ++a) eta[a] = stream.normal();
    for (int a = 0; a < kk; ++a) xi[a] = stream.normal();
    Eigen::VectorXd corr = group.chol * eta;
    for (int a = 0; a < kk; ++a) {
      int m = group.members[size_t(a)];
      z[m] = sampler.apply_row(m, field) + corr[a] +
             std::sqrt(noise_var[m]) * xi[a];
      done[size_t(m)] = true;
    }
  }
  return z;
}

// ---------------------------------------------------------------------------
// approximate conditional SE
// ---------------------------------------------------------------------------

namespace {

/// Shared tail of the SE_L evaluators: given per-observation quantities
/// T1 = W1 K11 W1', Phi, and a callback producing A = (W1 K11) columns for
/// a chunk of grid nodes, streams
///   se^2(t) = sigma2 - 2 w2_t . a_t + w2_t' T1 w2_t + sum_i w2_ti^2 Phi_i.
template <typename AChunkFn>
Eigen::VectorXd stream_se(const RegularGrid &grid, const ObservationSet &obs,
                          const CovarianceModel &model,
                          const Eigen::MatrixXd &T1,
                          const Eigen::VectorXd &phi, AChunkFn a_chunk) {
  const int64_t M = grid.nodes();
  const int64_t n = obs.n();
  Eigen::MatrixXd A22 = cov_matrix(model, obs.locs, obs.locs);
  A22.diagonal() += obs.noise_var;
  auto llt = jittered_llt(A22, model.sigma2);

  Eigen::VectorXd se(M);
  const int64_t chunk = 2048;
  Eigen::MatrixXd K2T(n, chunk), A(n, chunk);
  for (int64_t t0 = 0; t0 < M; t0 += chunk) {
    const int64_t c = std::min(chunk, M - t0);
    for (int64_t j = 0; j < c; ++j) {
      Point p = grid.node(t0 + j);
      for (int64_t i = 0; i < n; ++i) {
        double ddx = obs.locs[size_t(i)].x - p.x;
        double ddy = obs.locs[size_t(i)].y - p.y;
        K2T(i, j) = matern(model, std::sqrt(ddx * ddx + ddy * ddy));
      }
    }
    a_chunk(t0, c, K2T, A);
    Eigen::MatrixXd W2 = llt.solve(K2T.leftCols(c)); // n x c, column per node
    for (int64_t j = 0; j < c; ++j) {
      const auto w2 = W2.col(j);
      double v = model.sigma2 - 2.0 * w2.dot(A.col(j)) +
                 w2.dot(T1 * w2) + w2.array().square().matrix().dot(phi);
      se[t0 + j] = std::sqrt(std::min(std::max(v, 0.0), model.sigma2));
    }
  }
  return se;
}

} // namespace

Eigen::VectorXd local_se_grid(const RegularGrid &grid,
                              const ObservationSet &obs,
                              const CovarianceModel &model, int np,
                              int64_t dense_cap) {
  obs.validate();
  check_dense_cap(grid.nodes(), obs.n(), dense_cap);
  LocalSampler sampler = build_local_sampler(grid, obs.locs, model, np);
  const int64_t n = obs.n();

  // union of all stencil nodes and per-observation positions within it
  std::vector<int64_t> uni;
  for (const auto &idx : sampler.neighborhoods.indices)
    uni.insert(uni.end(), idx.begin(), idx.end());
  std::sort(uni.begin(), uni.end());
  uni.erase(std::unique(uni.begin(), uni.end()), uni.end());
  const int64_t B = int64_t(uni.size());
  std::unordered_map<int64_t, int64_t> pos;
  pos.reserve(size_t(B) * 2);
  for (int64_t b = 0; b < B; ++b) pos[uni[size_t(b)]] = b;

  // scatter weight columns into the union frame: P is n x B
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, B);
  for (int64_t i = 0; i < n; ++i) {
    const auto &idx = sampler.neighborhoods.indices[size_t(i)];
    for (size_t s = 0; s < idx.size(); ++s)
      P(i, pos[idx[s]]) = sampler.weights(Eigen::Index(s), int(i));
  }

  std::vector<Point> upts;
  upts.reserve(size_t(B));
  for (int64_t id : uni) upts.push_back(grid.node(id));
  Eigen::MatrixXd KUU = cov_matrix(model, upts, upts);
  Eigen::MatrixXd PK = P * KUU;                 // n x B
  Eigen::MatrixXd T1 = PK * P.transpose();      // W1 K11 W1'
  Eigen::VectorXd phi = sampler.gamma + obs.noise_var;

  auto a_chunk = [&](int64_t t0, int64_t c, const Eigen::MatrixXd &,
                     Eigen::MatrixXd &A) {
    // A(:,j) = W1 K11[:, t0+j]; needs covariance of union nodes vs targets
    Eigen::MatrixXd KUT(B, c);
    for (int64_t j = 0; j < c; ++j) {
      Point p = grid.node(t0 + j);
      for (int64_t b = 0; b < B; ++b) {
        double ddx = upts[size_t(b)].x - p.x;
        double ddy = upts[size_t(b)].y - p.y;
        KUT(b, j) = matern(model, std::sqrt(ddx * ddx + ddy * ddy));
      }
    }
    A.leftCols(c) = P * KUT;
  };
  return stream_se(grid, obs, model, T1, phi, a_chunk);
}

Eigen::LLT<Eigen::MatrixXd> grid_cov_factor(const RegularGrid &grid,
                                            const CovarianceModel &model,
                                            int64_t dense_cap) {
  check_dense_cap(grid.nodes(), 0, dense_cap);
  const int64_t M = grid.nodes();
  std::vector<Point> pts;
  pts.reserve(size_t(M));
  for (int64_t t = 0; t < M; ++t) pts.push_back(grid.node(t));
  return jittered_llt(cov_matrix(model, pts, pts), model.sigma2);
}

Eigen::VectorXd local_se_grid_full(
    const RegularGrid &grid, const ObservationSet &obs,
    const CovarianceModel &model, int64_t dense_cap,
    const Eigen::LLT<Eigen::MatrixXd> *grid_factor) {
  obs.validate();
  check_dense_cap(grid.nodes(), obs.n(), dense_cap);
  Eigen::LLT<Eigen::MatrixXd> own;
  if (!grid_factor) {
    own = grid_cov_factor(grid, model, dense_cap);
    grid_factor = &own;
  }
  const int64_t M = grid.nodes();
  const int64_t n = obs.n();

  // conditioning on the whole grid: W1 K11 = K_obs,grid and
  // T1 = K_obs,grid K11^-1 K_grid,obs
  Eigen::MatrixXd KTo(M, n);
  for (int64_t t = 0; t < M; ++t) {
    Point p = grid.node(t);
    for (int64_t i = 0; i < n; ++i) {
      double ddx = obs.locs[size_t(i)].x - p.x;
      double ddy = obs.locs[size_t(i)].y - p.y;
      KTo(t, i) = matern(model, std::sqrt(ddx * ddx + ddy * ddy));
    }
  }
  Eigen::MatrixXd D = grid_factor->matrixL().solve(KTo); // M x n
  Eigen::MatrixXd T1 = D.transpose() * D;                // n x n
  Eigen::VectorXd gamma(n);
  for (int64_t i = 0; i < n; ++i) {
    double g = model.sigma2 - T1(i, i);
    gamma[i] = std::min(std::max(g, 0.0), model.sigma2);
  }
  Eigen::VectorXd phi = gamma + obs.noise_var;

  auto a_chunk = [&](int64_t /*t0*/, int64_t c, const Eigen::MatrixXd &K2T,
                     Eigen::MatrixXd &A) {
    // W1 K11 = K_obs,grid: columns are exactly the target cross rows
    A.leftCols(c) = K2T.leftCols(c);
  };
  return stream_se(grid, obs, model, T1, phi, a_chunk);
}

} // namespace condsim
