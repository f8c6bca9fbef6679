/// @file offgrid_local.hpp
/// @brief Local-Kriging off-grid sampler: neighborhood lookup, sparse
///        weight rows, block sampling for shared grid boxes, and the dense
///        approximate-conditional-variance evaluator.
#ifndef CONDSIM_OFFGRID_LOCAL_HPP
#define CONDSIM_OFFGRID_LOCAL_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "covariance.hpp"
#include "grid.hpp"
#include "kriging.hpp"
#include "rng.hpp"

namespace condsim {

/// Per-observation neighborhood indices and grid-box ids.
struct NeighborhoodMap {
  int np = 1;
  std::vector<std::vector<int64_t>> indices; // (2 n_p)^2 node ids per obs
  std::vector<std::pair<int64_t, int64_t>> box;
};

NeighborhoodMap locate_all(const RegularGrid &grid,
                           const std::vector<Point> &obs, int np);

/// Sparse off-grid sampler: row i of the implicit n x M weight matrix W1
/// holds weights[.,i] scattered to columns indices[i], and gamma[i] is the
/// conditional variance of observation i given its neighborhood.
/// Observations sharing a grid box are sampled jointly through a stored
/// Cholesky factor of their joint conditional covariance.
struct LocalSampler {
  RegularGrid grid;
  NeighborhoodMap neighborhoods;
  Eigen::MatrixXd weights; // stencil-size x n, one column per observation
  Eigen::VectorXd gamma;   // conditional variance given the neighborhood

  struct BoxGroup {
    std::vector<int> members;  // >= 2 observations sharing one grid box
    Eigen::MatrixXd chol;      // lower factor of the joint conditional cov
  };
  std::vector<BoxGroup> groups;
  std::vector<int> group_of;   // per obs: group id or -1 for singletons

  /// W1 * field for observation i.
  double apply_row(int i, const double *field) const {
    const auto &idx = neighborhoods.indices[size_t(i)];
    double acc = 0.0;
    for (size_t s = 0; s < idx.size(); ++s)
      acc += weights(Eigen::Index(s), i) * field[idx[s]];
    return acc;
  }
};

/// Computes the shared neighbor-covariance inverse once (the stencil
/// geometry is identical for every observation), fills the weight rows and
/// gamma, and prepares joint factors for multi-observation boxes.
LocalSampler build_local_sampler(const RegularGrid &grid,
                                 const std::vector<Point> &obs,
                                 const CovarianceModel &model, int np);

/// Synthetic observation vector z*: singletons get W1.field plus
/// N(0, gamma_i + noise_var_i); co-boxed groups draw jointly through the
/// stored factor plus independent per-observation noise.  Noise is consumed
/// from `stream` in observation order (group noise at the first member).
Eigen::VectorXd sample_offgrid(const LocalSampler &sampler,
                               const double *field,
                               const Eigen::VectorXd &noise_var,
                               RandomStream &stream);

/// Approximate conditional SE on every grid node (SE_L).
///
/// With W2 = K12 (K22 + diag(phi^2))^-1 (weights from the actual nugget
/// only) and Phi = diag(gamma_i + phi_i^2), evaluates
///   sqrt(diag((Lam - I) K11 (Lam - I)' + W2 Phi W2')),   Lam = W2 W1,
/// streamed so that only covariance rows at stencil nodes are formed.
Eigen::VectorXd local_se_grid(const RegularGrid &grid,
                              const ObservationSet &obs,
                              const CovarianceModel &model, int np,
                              int64_t dense_cap = kDefaultDenseCap);

/// Full-neighborhood limit of SE_L: every observation conditioned on the
/// whole grid.  The grid Cholesky factor may be supplied to amortize it
/// across calls with the same grid and model.
Eigen::VectorXd local_se_grid_full(
    const RegularGrid &grid, const ObservationSet &obs,
    const CovarianceModel &model, int64_t dense_cap = kDefaultDenseCap,
    const Eigen::LLT<Eigen::MatrixXd> *grid_factor = nullptr);

/// Dense covariance factor of the full grid (for local_se_grid_full reuse).
Eigen::LLT<Eigen::MatrixXd> grid_cov_factor(const RegularGrid &grid,
                                            const CovarianceModel &model,
                                            int64_t dense_cap);

} // namespace condsim

#endif
