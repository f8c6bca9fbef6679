/// @file eval.hpp
/// @brief Evaluation harness: accuracy design over randomized observation
///        configurations, misspecification sweep, and timing benchmarks.
#ifndef CONDSIM_EVAL_HPP
#define CONDSIM_EVAL_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "covariance.hpp"
#include "grid.hpp"
#include "kriging.hpp"
#include "pipeline.hpp"

namespace condsim {

/// Decimal rounding key with `digits` significant figures, rounded half
/// away from zero (1.234 -> "123e0", 1.235 -> "124e0"). Two values agree
/// to `digits` significant figures iff their keys are equal.
std::string sigfig_key(double x, int digits);

/// Fraction of positions where a and b round to the same key.
double sigfig_agreement(const double *a, const double *b, int64_t n,
                        int digits);

/// Percentile with linear interpolation between order statistics,
/// pct in [0, 100].
double percentile(std::vector<double> v, double pct);

/// Relative percent errors 100 (approx - exact) / exact at nodes with
/// exact > 0; zero-exact nodes are counted in n_excluded and skipped.
std::vector<double> rel_error_pct(const Eigen::VectorXd &approx,
                                  const Eigen::VectorXd &exact,
                                  int64_t &n_excluded);

/// One observation configuration of the accuracy design: n coordinates
/// uniform on [lo, hi]^2 and values drawn from the model plus
/// N(0, tau^2) noise, all from (seed, config)-addressed streams.
ObservationSet design_observations(const CovarianceModel &model, double tau,
                                   int64_t n_obs, double lo, double hi,
                                   uint64_t seed, uint32_t config);

struct DesignRow {
  double nu = 0, theta = 0, tau = 0;
  int config = 0;
  std::string method; // "local" | "nn"
  int np = 0;         // 0 = full grid
  double p95_abs_rel_pct = 0;
  double frac_sigfig3 = 0;
  int64_t n_excluded = 0;
};

/// Accuracy study for one covariance cell: 61x61 unit grid on [0,60]^2,
/// 35 observations per configuration; per (config, np level) emits one
/// row per method with the 95th-percentile absolute relative SE error
/// and the 3-sig-fig agreement fraction against the exact SE.
/// np level 0 means the full-grid variants. csv_path may be empty.
std::vector<DesignRow> run_design(double nu, double theta, double tau,
                                  const std::vector<int> &np_levels,
                                  int n_configs, uint64_t seed,
                                  const std::string &csv_path);

/// Correlation of the field at a and b conditional on the union of their
/// order-2 node neighborhoods (unit-spacing grid).
double misspec_conditional_correlation(const CovarianceModel &model, Point a,
                                       Point b);

/// Maximum of the conditional correlation for the unit-spacing pair
/// (0,0.5)-(1,0.5) and the half-spacing pair (-0.25,0.5)-(0.25,0.5) over
/// the 50x21 lattice theta in [0.2,10], nu in [0.5,1.5].
void misspec_study(double &max_unit, double &max_half);

struct BenchRow {
  int64_t m = 0, n_obs = 0;
  int np = 0;
  int64_t n_draws = 0;
  StageTimes times;
};

/// Local-method pipeline timings over m x m grids and observation counts;
/// CSV columns mirror the stage names. csv_path may be empty.
std::vector<BenchRow> timing_bench(const std::vector<int64_t> &grid_sizes,
                                   const std::vector<int64_t> &obs_counts,
                                   int np, int64_t n_draws, uint64_t seed,
                                   const std::string &csv_path);

/// Construction time (seconds) of the local off-grid sampler alone for
/// n_obs uniformly placed observations on an m x m grid.
double time_local_setup(int64_t m, int64_t n_obs, int np, uint64_t seed);

} // namespace condsim

#endif
