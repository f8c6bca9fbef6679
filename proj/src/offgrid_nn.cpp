/// @file offgrid_nn.cpp
#include "offgrid_nn.hpp"

#include <algorithm>
#include <cmath>

#include "offgrid_local.hpp"

namespace condsim {

namespace {

std::vector<int64_t> surrogate_nodes(const RegularGrid &grid,
                                     const std::vector<Point> &obs, int np) {
  if (np == 0) {
    std::vector<int64_t> all(size_t(grid.nodes()));
    for (int64_t t = 0; t < grid.nodes(); ++t) all[size_t(t)] = t;
    return all;
  }
  std::vector<int64_t> uni;
  for (const Point &p : obs) {
    auto idx = locate_neighbors(grid, p, np);
    uni.insert(uni.end(), idx.begin(), idx.end());
  }
  std::sort(uni.begin(), uni.end());
  uni.erase(std::unique(uni.begin(), uni.end()), uni.end());
  return uni;
}

} // namespace

SurrogateSet build_surrogate(const RegularGrid &grid,
                             const ObservationSet &obs,
                             const CovarianceModel &model, int np) {
  obs.validate();
  model.validate();
  grid.validate();
  require(np >= 0, CS_EINVAL, "build_surrogate: n_p must be >= 0");

  SurrogateSet s;
  s.grid = grid;
  s.nodes = surrogate_nodes(grid, obs.locs, np);
  const int64_t B = s.size();

  Eigen::MatrixXd A = cov_matrix(model, obs.locs, obs.locs);
  A.diagonal() += obs.noise_var;
  auto llt = jittered_llt(A, model.sigma2);

  std::vector<Point> pts;
  pts.reserve(size_t(B));
  for (int64_t id : s.nodes) pts.push_back(grid.node(id));
  Eigen::MatrixXd KoN = cov_matrix(model, obs.locs, pts); // n x B

  s.spread = llt.solve(KoN).transpose(); // B x n
  s.values = s.spread * obs.values;
  Eigen::MatrixXd C = llt.matrixL().solve(KoN); // n x B
  s.sig2.resize(B);
  for (int64_t b = 0; b < B; ++b) {
    double v = model.sigma2 - C.col(b).squaredNorm();
    s.sig2[b] = std::min(std::max(v, 0.0), model.sigma2);
  }
  return s;
}

Eigen::VectorXd nn_draw_inputs(const SurrogateSet &surrogate,
                               const double *field, double tau2,
                               RandomStream &stream) {
  const int64_t B = surrogate.size();
  Eigen::VectorXd z(B);
  for (int64_t b = 0; b < B; ++b) {
    double sd = std::sqrt(surrogate.sig2[b] + tau2);
    z[b] = field[surrogate.nodes[size_t(b)]] + sd * stream.normal();
  }
  return z;
}

Eigen::VectorXd nn_se_grid(const RegularGrid &grid, const ObservationSet &obs,
                           const CovarianceModel &model, int np, double tau2,
                           int64_t dense_cap) {
  obs.validate();
  model.validate();
  check_dense_cap(grid.nodes(), obs.n(), dense_cap);
  const int64_t M = grid.nodes();
  const int64_t n = obs.n();
  Eigen::VectorXd se(M);
  if (n == 0) {
    se.setConstant(std::sqrt(model.sigma2));
    return se;
  }

  Eigen::MatrixXd A = cov_matrix(model, obs.locs, obs.locs);
  A.diagonal() += obs.noise_var;
  auto llt = jittered_llt(A, model.sigma2);

  // With spread weights W = K_No A^-1:
  //   B_z = K_To A^-1 K_oN,  S_z = K_No A^-1 K_oN,
  // and by the push-through identity
  //   B_z (S_z + tau2 I)^-1 B_z' = D' G (G + tau2 I)^-1 D,
  // where C = L^-1 K_oN, D = L^-1 K_oT, G = C C'.
  std::vector<int64_t> nodes = surrogate_nodes(grid, obs.locs, np);
  std::vector<Point> pts;
  pts.reserve(nodes.size());
  for (int64_t id : nodes) pts.push_back(grid.node(id));
  Eigen::MatrixXd KoN = cov_matrix(model, obs.locs, pts);
  Eigen::MatrixXd C = llt.matrixL().solve(KoN); // n x B
  Eigen::MatrixXd G = C * C.transpose();        // n x n
  Eigen::MatrixXd Greg = G;
  Greg.diagonal().array() += tau2;
  Eigen::MatrixXd H = jittered_llt(std::move(Greg), model.sigma2).solve(G);
  H = 0.5 * (H + H.transpose()); // G (G + tau2 I)^-1, symmetrized

  const int64_t chunk = 4096;
  Eigen::MatrixXd KoT(n, std::min(chunk, M));
  for (int64_t t0 = 0; t0 < M; t0 += chunk) {
    const int64_t c = std::min(chunk, M - t0);
    for (int64_t j = 0; j < c; ++j) {
      Point p = grid.node(t0 + j);
      for (int64_t i = 0; i < n; ++i) {
        double ddx = obs.locs[size_t(i)].x - p.x;
        double ddy = obs.locs[size_t(i)].y - p.y;
        KoT(i, j) = matern(model, std::sqrt(ddx * ddx + ddy * ddy));
      }
    }
    Eigen::MatrixXd D = llt.matrixL().solve(KoT.leftCols(c)); // n x c
    Eigen::MatrixXd HD = H * D;
    for (int64_t j = 0; j < c; ++j) {
      double v = model.sigma2 - D.col(j).dot(HD.col(j));
      se[t0 + j] = std::sqrt(std::min(std::max(v, 0.0), model.sigma2));
    }
  }
  return se;
}

} // namespace condsim
