/// @file kriging.hpp
/// @brief Dense exact simple-Kriging prediction and conditional variance —
///        the ground-truth oracle for the grid-based approximations.
#ifndef CONDSIM_KRIGING_HPP
#define CONDSIM_KRIGING_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "covariance.hpp"
#include "grid.hpp"

namespace condsim {

constexpr int64_t kDefaultDenseCap = 20000;

/// Irregular observations: locations, values, per-observation noise
/// variance phi_i^2 (nominal tau^2 for raw data).
struct ObservationSet {
  std::vector<Point> locs;
  Eigen::VectorXd values;
  Eigen::VectorXd noise_var;

  int64_t n() const { return static_cast<int64_t>(locs.size()); }
  void validate() const;
};

/// Cholesky with one retry adding jitter 1e-10*sigma2 to the diagonal;
/// numeric error if the retry also fails.
Eigen::LLT<Eigen::MatrixXd> jittered_llt(Eigen::MatrixXd A, double sigma2);

/// Refuses dense problems with n_targets + n_obs above the cap.
void check_dense_cap(int64_t n_targets, int64_t n_obs, int64_t cap);

/// Simple-Kriging prediction K12 (K22 + diag(phi^2))^-1 z at the targets;
/// zero observations predict 0 (zero-mean model).
Eigen::VectorXd krige_predict(const ObservationSet &obs,
                              const CovarianceModel &model,
                              const std::vector<Point> &targets,
                              int64_t dense_cap = kDefaultDenseCap);

/// diag(K11 - K12 (K22 + diag(phi^2))^-1 K21) at the targets, each entry
/// clamped to [0, sigma2]; values below -1e-10*sigma2 are a numeric error.
Eigen::VectorXd exact_cond_variance(const ObservationSet &obs,
                                    const CovarianceModel &model,
                                    const std::vector<Point> &targets,
                                    int64_t dense_cap = kDefaultDenseCap);

/// Exact conditional SE at every grid node (sqrt of exact_cond_variance),
/// evaluated in chunks so only O(chunk * n) covariance entries are live.
Eigen::VectorXd exact_se_grid(const RegularGrid &grid,
                              const ObservationSet &obs,
                              const CovarianceModel &model,
                              int64_t dense_cap = kDefaultDenseCap);

} // namespace condsim

#endif
