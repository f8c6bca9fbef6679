/// @file covariance.hpp
/// @brief Matérn covariance family, covariance matrices, range calibration.
#ifndef CONDSIM_COVARIANCE_HPP
#define CONDSIM_COVARIANCE_HPP

#include <Eigen/Dense>
#include <vector>

namespace condsim {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Matérn parameters: sill sigma2, range theta, smoothness nu.
/// C(0) = sigma2 exactly and C is non-increasing in distance.
struct CovarianceModel {
  double sigma2 = 1.0;
  double theta = 1.0;
  double nu = 0.5;

  void validate() const;
};

/// Matérn covariance at distance d >= 0:
///   sigma2 * 2^(1-nu)/Gamma(nu) * s^nu * K_nu(s),  s = sqrt(2 nu) d / theta.
/// Closed forms for nu = 1/2 (exponential) and nu = 3/2 are used as fast
/// paths; other nu go through the modified Bessel function of the second
/// kind.
double matern(const CovarianceModel &model, double d);

/// Dense covariance matrix between two point sets: entry (i,j) is the
/// covariance at the Euclidean distance between locsA[i] and locsB[j].
Eigen::MatrixXd cov_matrix(const CovarianceModel &model,
                           const std::vector<Point> &locsA,
                           const std::vector<Point> &locsB);

/// Solve matern(sigma2=1, theta, nu; d) = rho for theta by bisection on
/// [1e-6 d, 1e6 d] to relative tolerance 1e-8.
double range_for_correlation(double nu, double rho, double d);

} // namespace condsim

#endif
