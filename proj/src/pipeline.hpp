/// @file pipeline.hpp
/// @brief Conditional-simulation pipeline: unconditional torus draws plus a
///        Kriging correction through synthetic off-grid observations.
///
/// A draw is v = yhat + z - ytilde where yhat is the Kriging prediction
/// from the real data (step 1, cached), z an unconditional circulant
/// draw (step 2), z* synthetic observations sampled from z by the
/// configured off-grid method (step 3), and ytilde the re-Kriging of z*
/// (step 4). Draws are addressed by (seed, index) and are identical for
/// any thread count.
#ifndef CONDSIM_PIPELINE_HPP
#define CONDSIM_PIPELINE_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <vector>

#include "covariance.hpp"
#include "embedding.hpp"
#include "grid.hpp"
#include "kriging.hpp"
#include "offgrid_local.hpp"
#include "offgrid_nn.hpp"

namespace condsim {

enum class Method { Local = 0, NearestNeighbor = 1, Exact = 2 };

/// How observations sharing one grid box are handled: jointly sampled
/// (block), merged into one averaged pseudo-observation (average), or
/// separated by halving the grid spacing up to max_refine times with
/// averaging of whatever still collides (refine).
enum class BoxPolicy { Block = 0, Average = 1, Refine = 2 };

/// Cumulative wall-clock seconds per stage.
struct StageTimes {
  double ce_setup = 0.0;  // embedding construction
  double off_setup = 0.0; // off-grid sampler / surrogate construction
  double ce = 0.0;        // per-draw spectral simulation
  double off_grid = 0.0;  // per-draw synthetic observations
  double predict = 0.0;   // Kriging grams, factors, predictions
  double total() const {
    return ce_setup + off_setup + ce + off_grid + predict;
  }
};

struct FieldEnsemble {
  RegularGrid grid;
  std::vector<Eigen::VectorXd> draws;
  Eigen::VectorXd mean;
  Eigen::VectorXd mc_se; // unbiased (n-1) per-node sample sd; empty if n < 2
};

class Pipeline {
public:
  /// Applies the box policy, pads the grid for the neighborhood margin,
  /// builds the embedding and the method state, and caches the step-1
  /// prediction. share_step_factors disables reusing the step-1 gram
  /// factor for step 4 even when the grams coincide (testing hook).
  Pipeline(const RegularGrid &grid, const CovarianceModel &model,
           const ObservationSet &obs, double tau2, Method method, int np,
           BoxPolicy policy, int max_refine,
           int64_t dense_cap = kDefaultDenseCap,
           bool share_step_factors = true);

  /// One conditional draw on the output grid. Index addresses the draw:
  /// embedding pair index/2, pair half index%2, noise stream index.
  Eigen::VectorXd draw(uint64_t seed, uint64_t index);

  /// n_draws conditional draws plus per-node mean and MC standard error.
  /// Identical results for every n_threads >= 1.
  FieldEnsemble run(uint64_t seed, int64_t n_draws, int n_threads);

  /// Step-1 Kriging prediction on the output grid.
  const Eigen::VectorXd &prediction() const { return yhat_; }
  /// Input grid, or its refinement under the refine policy.
  const RegularGrid &output_grid() const { return out_; }
  /// Padded grid the unconditional draws are simulated on.
  const RegularGrid &sim_grid() const { return sim_; }
  /// Observations after box-policy reduction.
  const ObservationSet &effective_obs() const { return obs_; }
  StageTimes times() const { return times_; }

private:
  void setup_local();
  void setup_nn();
  void setup_exact();
  void cache_prediction(const Eigen::VectorXd &rhs,
                        const Eigen::LLT<Eigen::MatrixXd> &gram);
  /// Step 3 (method dispatch): synthetic observations from a sim-grid field.
  Eigen::VectorXd synthetic_obs(const double *field,
                                RandomStream &stream) const;
  void extract_output(const double *field, double *out) const;
  /// Step 4 + 5 for a batch: out[k] holds z at output nodes on entry and
  /// the finished draw v on exit.
  void finish_draws(const Eigen::MatrixXd &zstar,
                    std::vector<Eigen::VectorXd> &out);

  CovarianceModel model_;
  double tau2_;
  Method method_;
  int np_;
  int64_t dense_cap_;
  RegularGrid out_;
  RegularGrid sim_;
  std::vector<int64_t> out_to_sim_; // output node -> sim node index
  ObservationSet obs_;
  std::unique_ptr<CirculantEmbedding> embedding_;

  LocalSampler sampler_;     // Local
  SurrogateSet surrogate_;   // NearestNeighbor
  Eigen::MatrixXd exact_w_;  // Exact: M x n, K_grid^-1 K_grid,obs
  Eigen::MatrixXd exact_chol_; // Exact: lower factor of cond. covariance

  std::vector<Point> src_;           // step-4 source locations
  Eigen::LLT<Eigen::MatrixXd> llt4_; // step-4 gram factor
  Eigen::VectorXd yhat_;
  StageTimes times_;
};

} // namespace condsim

#endif
