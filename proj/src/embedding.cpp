/// @file embedding.cpp
#include "embedding.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <mutex>
#include <string>

#include "rng.hpp"

namespace condsim {

namespace {
// FFTW plan creation/destruction is not thread-safe; executes are.
std::mutex &fftw_mutex() {
  static std::mutex m;
  return m;
}

bool smooth235(int64_t n) {
  for (int64_t f : {2, 3, 5})
    while (n % f == 0) n /= f;
  return n == 1;
}
} // namespace

int64_t embedding_size(int64_t m) {
  int64_t n = 2 * m;
  if (n % 2 != 0) ++n;
  while (!smooth235(n)) n += 2;
  return n;
}

CirculantEmbedding::CirculantEmbedding(const RegularGrid &grid,
                                       const CovarianceModel &model,
                                       int max_doublings)
    : grid_(grid) {
  grid_.validate();
  model.validate();
  require(max_doublings >= 0, CS_EINVAL,
          "embedding: max_doublings must be >= 0");
  build(model, max_doublings);
}

CirculantEmbedding::~CirculantEmbedding() {
  if (plan_) {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    fftw_destroy_plan(reinterpret_cast<fftw_plan>(plan_));
  }
}

void CirculantEmbedding::build(const CovarianceModel &model,
                               int max_doublings) {
  const double tol = 1e-10 * model.sigma2;
  int64_t n1 = embedding_size(grid_.m1);
  int64_t n2 = embedding_size(grid_.m2);

  for (int attempt = 0;; ++attempt) {
    const int64_t total = n1 * n2;
    fftw_complex *buf;
    fftw_plan plan;
    {
      std::lock_guard<std::mutex> lock(fftw_mutex());
      buf = fftw_alloc_complex(size_t(total));
      plan = fftw_plan_dft_2d(int(n2), int(n1), buf, buf, FFTW_BACKWARD,
                              FFTW_ESTIMATE);
    }

    // wrapped covariance ring: lag distance min(j, N-j) per axis
    for (int64_t j2 = 0; j2 < n2; ++j2) {
      double ly = double(std::min(j2, n2 - j2)) * grid_.dy;
      for (int64_t j1 = 0; j1 < n1; ++j1) {
        double lx = double(std::min(j1, n1 - j1)) * grid_.dx;
        int64_t k = j2 * n1 + j1;
        buf[k][0] = matern(model, std::sqrt(lx * lx + ly * ly));
        buf[k][1] = 0.0;
      }
    }
    fftw_execute(plan);

    double min_w = buf[0][0], max_w = buf[0][0];
    for (int64_t k = 0; k < total; ++k) {
      min_w = std::min(min_w, buf[k][0]);
      max_w = std::max(max_w, buf[k][0]);
    }

    if (min_w >= -tol) {
      weights_.resize(size_t(total));
      amp_.resize(size_t(total));
      for (int64_t k = 0; k < total; ++k) {
        double w = buf[k][0] < 0.0 ? 0.0 : buf[k][0];
        weights_[size_t(k)] = w;
        amp_[size_t(k)] = std::sqrt(w / double(total));
      }
      min_weight_ = std::max(min_w, 0.0);
      max_weight_ = max_w;
      n1_ = n1;
      n2_ = n2;
      plan_ = reinterpret_cast<fftw_plan_s *>(plan);
      std::lock_guard<std::mutex> lock(fftw_mutex());
      fftw_free(buf);
      return;
    }

    {
      std::lock_guard<std::mutex> lock(fftw_mutex());
      fftw_destroy_plan(plan);
      fftw_free(buf);
    }
    if (attempt >= max_doublings) {
      fail(CS_ESPECTRUM,
           "embedding spectrum not nonnegative after " +
               std::to_string(max_doublings) +
               " doublings; most negative eigenvalue = " +
               std::to_string(min_w));
    }
    n1 *= 2;
    n2 *= 2;
  }
}

void CirculantEmbedding::simulate_pair(uint64_t seed, uint64_t index,
                                       double *out_a, double *out_b) const {
  require(index <= 0xffffffffull, CS_EINVAL,
          "simulate: draw index exceeds 32-bit stream range");
  const int64_t total = n1_ * n2_;
  fftw_complex *buf;
  {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    buf = fftw_alloc_complex(size_t(total));
  }

  // one addressable noise block per frequency: order-independent assembly
  for (int64_t k = 0; k < total; ++k) {
    double a, b;
    normal_pair_at(seed, StreamPurpose::Spectrum, uint32_t(index),
                   uint64_t(k), a, b);
    buf[k][0] = amp_[size_t(k)] * a;
    buf[k][1] = amp_[size_t(k)] * b;
  }
  fftw_execute_dft(reinterpret_cast<fftw_plan>(plan_), buf, buf);

  // real / imaginary parts of the m1 x m2 subarray: two independent draws
  for (int64_t iy = 0; iy < grid_.m2; ++iy) {
    for (int64_t ix = 0; ix < grid_.m1; ++ix) {
      int64_t src = iy * n1_ + ix;
      int64_t dst = iy * grid_.m1 + ix;
      out_a[dst] = buf[src][0];
      out_b[dst] = buf[src][1];
    }
  }
  std::lock_guard<std::mutex> lock(fftw_mutex());
  fftw_free(buf);
}

} // namespace condsim
