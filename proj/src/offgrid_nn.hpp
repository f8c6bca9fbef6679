/// @file offgrid_nn.hpp
/// @brief Nearest-neighbor-Kriging surrogate: observational information
///        moved onto grid nodes with inflated noise, plus the surrogate
///        model's approximate conditional variance.
#ifndef CONDSIM_OFFGRID_NN_HPP
#define CONDSIM_OFFGRID_NN_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "covariance.hpp"
#include "grid.hpp"
#include "kriging.hpp"
#include "rng.hpp"

namespace condsim {

/// Pseudo-observations at the union of all observation neighborhoods.
struct SurrogateSet {
  RegularGrid grid;
  std::vector<int64_t> nodes; // sorted unique grid indices (n_N total)
  Eigen::MatrixXd spread;     // n_N x n Kriging weights, observations->nodes
  Eigen::VectorXd values;     // z_N = spread * z
  Eigen::VectorXd sig2;       // prediction-error variance per node

  int64_t size() const { return static_cast<int64_t>(nodes.size()); }
};

/// Builds the surrogate: node set = union of n_p-order neighborhoods
/// (set-union semantics for overlaps); values and variances are the exact
/// Kriging prediction from the full observation set to those nodes using
/// the nugget-regularized solve.  np = 0 selects every grid node.
SurrogateSet build_surrogate(const RegularGrid &grid,
                             const ObservationSet &obs,
                             const CovarianceModel &model, int np);

/// Synthetic surrogate vector for one draw: z*_k = field at node k plus
/// independent N(0, sig2_k + tau2).
Eigen::VectorXd nn_draw_inputs(const SurrogateSet &surrogate,
                               const double *field, double tau2,
                               RandomStream &stream);

/// Approximate conditional SE on every grid node (SE_N) under the
/// surrogate observation model: with B_z = cov(grid, z_N) and
/// S_z = cov(z_N) implied by the spread weights,
///   SE_N = sqrt(diag(K11 - B_z (S_z + tau2 I)^-1 B_z')).
/// Evaluated through the equivalent n x n form (the spread weights have
/// rank at most n), which is exact and independent of the surrogate count.
Eigen::VectorXd nn_se_grid(const RegularGrid &grid, const ObservationSet &obs,
                           const CovarianceModel &model, int np, double tau2,
                           int64_t dense_cap = kDefaultDenseCap);

} // namespace condsim

#endif
