/// @file covariance.cpp
#include "covariance.hpp"

#include <cmath>

#include "errors.hpp"

namespace condsim {

void CovarianceModel::validate() const {
  require(std::isfinite(sigma2) && sigma2 > 0.0, CS_EINVAL,
          "covariance model: sigma2 must be finite and > 0");
  require(std::isfinite(theta) && theta > 0.0, CS_EINVAL,
          "covariance model: theta must be finite and > 0");
  require(std::isfinite(nu) && nu > 0.0, CS_EINVAL,
          "covariance model: nu must be finite and > 0");
}

double matern(const CovarianceModel &model, double d) {
  require(std::isfinite(d) && d >= 0.0, CS_EINVAL,
          "matern: distance must be finite and >= 0");
  if (d == 0.0) return model.sigma2; // avoid 0 * inf in the general formula
  if (model.nu == 0.5) {
    return model.sigma2 * std::exp(-d / model.theta);
  }
  if (model.nu == 1.5) {
    double s = std::sqrt(3.0) * d / model.theta;
    return model.sigma2 * (1.0 + s) * std::exp(-s);
  }
  double s = std::sqrt(2.0 * model.nu) * d / model.theta;
  // s^nu * K_nu(s) -> Gamma(nu) 2^(nu-1) as s -> 0; below ~1e-10 the
  // product is sigma2 to machine precision for every nu of interest.
  if (s < 1e-10) return model.sigma2;
  if (s > 700.0) return 0.0; // K_nu underflows
  double scale = std::pow(2.0, 1.0 - model.nu) / std::tgamma(model.nu);
  return model.sigma2 * scale * std::pow(s, model.nu) *
         std::cyl_bessel_k(model.nu, s);
}

Eigen::MatrixXd cov_matrix(const CovarianceModel &model,
                           const std::vector<Point> &locsA,
                           const std::vector<Point> &locsB) {
  const auto rows = static_cast<Eigen::Index>(locsA.size());
  const auto cols = static_cast<Eigen::Index>(locsB.size());
  Eigen::MatrixXd K(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      double dx = locsA[i].x - locsB[j].x;
      double dy = locsA[i].y - locsB[j].y;
      K(i, j) = matern(model, std::sqrt(dx * dx + dy * dy));
    }
  }
  return K;
}

double range_for_correlation(double nu, double rho, double d) {
  require(rho > 0.0 && rho < 1.0, CS_EINVAL,
          "range_for_correlation: rho must lie in (0,1)");
  require(std::isfinite(d) && d > 0.0, CS_EINVAL,
          "range_for_correlation: d must be finite and > 0");
  double lo = 1e-6 * d, hi = 1e6 * d;
  auto corr = [&](double theta) {
    CovarianceModel m{1.0, theta, nu};
    return matern(m, d);
  };
  // correlation at distance d increases with theta
  require(corr(lo) <= rho && corr(hi) >= rho, CS_ENUMERIC,
          "range_for_correlation: target not bracketed in [1e-6 d, 1e6 d]");
  while (hi - lo > 1e-8 * lo) {
    double mid = 0.5 * (lo + hi);
    if (corr(mid) < rho)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

} // namespace condsim
