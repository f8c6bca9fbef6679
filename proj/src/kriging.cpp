/// @file kriging.cpp
#include "kriging.hpp"

#include <cmath>
#include <string>

namespace condsim {

void ObservationSet::validate() const {
  require(values.size() == n() && noise_var.size() == n(), CS_EINVAL,
          "observations: locations, values and noise lengths must agree");
  for (int64_t i = 0; i < n(); ++i) {
    require(std::isfinite(locs[size_t(i)].x) &&
                std::isfinite(locs[size_t(i)].y) &&
                std::isfinite(values[i]),
            CS_EINVAL,
            "observations: non-finite entry at index " + std::to_string(i));
    require(noise_var[i] >= 0.0, CS_EINVAL,
            "observations: negative noise variance at index " +
                std::to_string(i));
  }
}

Eigen::LLT<Eigen::MatrixXd> jittered_llt(Eigen::MatrixXd A, double sigma2) {
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() == Eigen::Success) return llt;
  A.diagonal().array() += 1e-10 * sigma2;
  llt.compute(A);
  require(llt.info() == Eigen::Success, CS_ENUMERIC,
          "Cholesky factorization failed after jitter retry (order " +
              std::to_string(A.rows()) + ")");
  return llt;
}

void check_dense_cap(int64_t n_targets, int64_t n_obs, int64_t cap) {
  require(n_targets + n_obs <= cap, CS_ECAP,
          "dense problem size " + std::to_string(n_targets + n_obs) +
              " exceeds cap " + std::to_string(cap) +
              " (raise the cap to proceed)");
}

namespace {
Eigen::MatrixXd obs_gram(const ObservationSet &obs,
                         const CovarianceModel &model) {
  Eigen::MatrixXd A = cov_matrix(model, obs.locs, obs.locs);
  A.diagonal() += obs.noise_var;
  return A;
}
} // namespace

Eigen::VectorXd krige_predict(const ObservationSet &obs,
                              const CovarianceModel &model,
                              const std::vector<Point> &targets,
                              int64_t dense_cap) {
  obs.validate();
  model.validate();
  const auto nt = static_cast<int64_t>(targets.size());
  check_dense_cap(nt, obs.n(), dense_cap);
  if (obs.n() == 0) return Eigen::VectorXd::Zero(nt);
  auto llt = jittered_llt(obs_gram(obs, model), model.sigma2);
  Eigen::VectorXd alpha = llt.solve(obs.values);
  Eigen::MatrixXd K12 = cov_matrix(model, targets, obs.locs);
  return K12 * alpha;
}

Eigen::VectorXd exact_cond_variance(const ObservationSet &obs,
                                    const CovarianceModel &model,
                                    const std::vector<Point> &targets,
                                    int64_t dense_cap) {
  obs.validate();
  model.validate();
  const auto nt = static_cast<int64_t>(targets.size());
  check_dense_cap(nt, obs.n(), dense_cap);
  if (obs.n() == 0)
    return Eigen::VectorXd::Constant(nt, model.sigma2);
  auto llt = jittered_llt(obs_gram(obs, model), model.sigma2);
  Eigen::MatrixXd K21 = cov_matrix(model, obs.locs, targets);
  Eigen::MatrixXd D = llt.matrixL().solve(K21);
  Eigen::VectorXd v =
      Eigen::VectorXd::Constant(nt, model.sigma2) -
      D.colwise().squaredNorm().transpose();
  for (int64_t t = 0; t < nt; ++t) {
    require(v[t] >= -1e-10 * model.sigma2, CS_ENUMERIC,
            "conditional variance " + std::to_string(v[t]) +
                " below tolerance at target " + std::to_string(t));
    v[t] = std::min(std::max(v[t], 0.0), model.sigma2);
  }
  return v;
}

Eigen::VectorXd exact_se_grid(const RegularGrid &grid,
                              const ObservationSet &obs,
                              const CovarianceModel &model,
                              int64_t dense_cap) {
  obs.validate();
  model.validate();
  grid.validate();
  const int64_t M = grid.nodes();
  check_dense_cap(M, obs.n(), dense_cap);
  const int64_t n = obs.n();
  Eigen::VectorXd se(M);
  if (n == 0) {
    se.setConstant(std::sqrt(model.sigma2));
    return se;
  }
  auto llt = jittered_llt(obs_gram(obs, model), model.sigma2);
  const int64_t chunk = 4096;
  Eigen::MatrixXd K21(n, std::min(chunk, M));
  for (int64_t t0 = 0; t0 < M; t0 += chunk) {
    int64_t c = std::min(chunk, M - t0);
    for (int64_t j = 0; j < c; ++j) {
      Point p = grid.node(t0 + j);
      for (int64_t i = 0; i < n; ++i) {
        double ddx = obs.locs[size_t(i)].x - p.x;
        double ddy = obs.locs[size_t(i)].y - p.y;
        K21(i, j) = matern(model, std::sqrt(ddx * ddx + ddy * ddy));
      }
    }
    Eigen::MatrixXd D = llt.matrixL().solve(K21.leftCols(c));
    for (int64_t j = 0; j < c; ++j) {
      double v = model.sigma2 - D.col(j).squaredNorm();
      se[t0 + j] = std::sqrt(std::min(std::max(v, 0.0), model.sigma2));
    }
  }
  return se;
}

} // namespace condsim
