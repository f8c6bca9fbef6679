/// @file embedding.hpp
/// @brief Circulant embedding of the covariance on a torus and exact
///        unconditional simulation of the stationary field on the grid.
#ifndef CONDSIM_EMBEDDING_HPP
#define CONDSIM_EMBEDDING_HPP

#include <cstdint>
#include <vector>

#include "covariance.hpp"
#include "grid.hpp"

// opaque FFTW plan, kept out of this header
struct fftw_plan_s;

namespace condsim {

/// Covariance embedded on an (N1, N2) torus, diagonalized by the FFT.
///
/// The torus sizes are the smallest even 5-smooth (2^a 3^b 5^c) integers
/// >= 2*m_i, doubled per axis when the spectrum comes out negative beyond
/// tolerance.  Spectral weights are the real DFT of the wrapped covariance
/// ring; tiny negative weights (magnitude <= 1e-10 * sigma2) are clamped
/// to zero.
class CirculantEmbedding {
public:
  /// Builds the embedding, growing it up to max_doublings times if the
  /// spectrum has negative weights beyond tolerance.
  CirculantEmbedding(const RegularGrid &grid, const CovarianceModel &model,
                     int max_doublings);
  ~CirculantEmbedding();
  CirculantEmbedding(const CirculantEmbedding &) = delete;
  CirculantEmbedding &operator=(const CirculantEmbedding &) = delete;

  /// Two independent zero-mean draws of the field on the grid per call.
  /// Deterministic in (seed, index); distinct indices give disjoint noise
  /// streams, so calls may run concurrently.
  void simulate_pair(uint64_t seed, uint64_t index, double *out_a,
                     double *out_b) const;

  const RegularGrid &grid() const { return grid_; }
  int64_t n1() const { return n1_; }
  int64_t n2() const { return n2_; }
  double min_weight() const { return min_weight_; }
  double max_weight() const { return max_weight_; }
  const std::vector<double> &weights() const { return weights_; }

private:
  void build(const CovarianceModel &model, int max_doublings);

  RegularGrid grid_;
  int64_t n1_ = 0, n2_ = 0;
  std::vector<double> weights_; // spectral weights, length N1*N2
  std::vector<double> amp_;     // sqrt(weight / (N1*N2)) per frequency
  double min_weight_ = 0.0, max_weight_ = 0.0;
  fftw_plan_s *plan_ = nullptr; // backward c2c plan on the torus
};

/// Smallest even 2,3,5-smooth integer >= 2*m (transform-friendly size).
int64_t embedding_size(int64_t m);

} // namespace condsim

#endif
