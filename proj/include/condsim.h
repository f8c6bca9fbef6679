/* condsim — conditional simulation of stationary Gaussian random fields on
 * regular grids via circulant embedding, with local-Kriging and
 * nearest-neighbor-Kriging off-grid approximations and an exact-Kriging
 * oracle.
 *
 * C API: every object is an opaque handle created/destroyed through these
 * functions; every fallible call returns cs_status and leaves a
 * human-readable message in cs_last_error() (thread-local) on failure.
 *
 * Grid ordering: nodes are flattened row-major with y as the slow index,
 * flat = iy * m1 + ix, node(ix,iy) = (x0 + ix*dx, y0 + iy*dy).
 */
#ifndef CONDSIM_H
#define CONDSIM_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cs_status {
  CS_OK = 0,
  CS_EINVAL = 1,    /* invalid argument */
  CS_ENUMERIC = 2,  /* factorization / numeric failure */
  CS_EMARGIN = 3,   /* observation too close to the grid boundary */
  CS_ESPECTRUM = 4, /* circulant embedding spectrum not nonnegative */
  CS_ECAP = 5,      /* dense problem size exceeds the configured cap */
  CS_EIO = 6        /* file I/O failure */
} cs_status;

/* Thread-local message for the most recent failure in this thread. */
const char *cs_last_error(void);

/* ---- covariance model ------------------------------------------------- */

typedef struct cs_model cs_model;

cs_status cs_model_create(double sigma2, double theta, double nu,
                          cs_model **out);
void cs_model_destroy(cs_model *m);

/* Matérn covariance at distance d (d >= 0). */
cs_status cs_model_matern(const cs_model *m, double d, double *out);

/* Solve matern(theta; nu, d) = rho * sigma2 for theta by bisection. */
cs_status cs_range_for_correlation(double nu, double rho, double d,
                                   double *theta_out);

/* ---- regular grid ------------------------------------------------------ */

typedef struct cs_grid cs_grid;

cs_status cs_grid_create(double x0, double y0, double dx, double dy,
                         int64_t m1, int64_t m2, cs_grid **out);
void cs_grid_destroy(cs_grid *g);
cs_status cs_grid_dims(const cs_grid *g, int64_t *m1, int64_t *m2);
cs_status cs_grid_origin(const cs_grid *g, double *x0, double *y0);
cs_status cs_grid_spacing(const cs_grid *g, double *dx, double *dy);

/* Smallest grid with the same spacing/alignment containing every
 * observation with an interior margin of at least np nodes. */
cs_status cs_grid_pad_for_observations(const cs_grid *g, const double *xy,
                                       int64_t n, int np, cs_grid **out);

/* ---- observations ------------------------------------------------------ */

typedef struct cs_obs cs_obs;

/* xy: n pairs (x,y) interleaved; values length n; noise_sd length n or NULL
 * (NULL means every observation uses sd = tau). */
cs_status cs_obs_create(const double *xy, const double *values,
                        const double *noise_sd, int64_t n, double tau,
                        cs_obs **out);
void cs_obs_destroy(cs_obs *o);
cs_status cs_obs_count(const cs_obs *o, int64_t *n);

/* ---- circulant embedding / unconditional simulation -------------------- */

typedef struct cs_embedding cs_embedding;

cs_status cs_embedding_build(const cs_grid *g, const cs_model *m,
                             int max_doublings, cs_embedding **out);
void cs_embedding_destroy(cs_embedding *e);
cs_status cs_embedding_info(const cs_embedding *e, int64_t *n1, int64_t *n2,
                            double *min_weight, double *max_weight);

/* Two independent zero-mean draws of the field on the grid per call.
 * out_a and out_b each hold m1*m2 values. Deterministic in (seed, index). */
cs_status cs_simulate_pair(const cs_embedding *e, uint64_t seed,
                           uint64_t index, double *out_a, double *out_b);

/* ---- exact Kriging oracle ---------------------------------------------- */

/* dense_cap below bounds n_targets + n_obs for dense factorizations;
 * passing <= 0 selects the built-in default (20000). */

/* targets_xy: nt (x,y) pairs. Writes nt predictions. */
cs_status cs_krige_predict(const cs_obs *o, const cs_model *m,
                           const double *targets_xy, int64_t nt,
                           int64_t dense_cap, double *out);

/* Writes nt conditional variances (not SDs). */
cs_status cs_exact_cond_variance(const cs_obs *o, const cs_model *m,
                                 const double *targets_xy, int64_t nt,
                                 int64_t dense_cap, double *out);

/* ---- approximate standard errors on the grid --------------------------- */

/* SE per grid node (length m1*m2), local-Kriging approximation.
 * np = 0 selects the dense full-neighborhood variant. */
cs_status cs_local_se(const cs_grid *g, const cs_obs *o, const cs_model *m,
                      int np, int64_t dense_cap, double *out);

/* SE per grid node, nearest-neighbor-Kriging approximation.
 * np = 0 selects the full grid as the surrogate set. */
cs_status cs_nn_se(const cs_grid *g, const cs_obs *o, const cs_model *m,
                   int np, int64_t dense_cap, double *out);

/* SE per grid node from the dense exact formula (oracle). */
cs_status cs_exact_se(const cs_grid *g, const cs_obs *o, const cs_model *m,
                      int64_t dense_cap, double *out);

/* ---- conditional-simulation pipeline ----------------------------------- */

typedef struct cs_pipeline cs_pipeline;
typedef struct cs_ensemble cs_ensemble;

typedef enum cs_method {
  CS_METHOD_LOCAL = 0,
  CS_METHOD_NN = 1,
  CS_METHOD_EXACT = 2
} cs_method;

typedef enum cs_box_policy {
  CS_BOX_BLOCK = 0,
  CS_BOX_AVERAGE = 1,
  CS_BOX_REFINE = 2
} cs_box_policy;

/* Wall-clock seconds per stage, cumulative over the pipeline lifetime. */
typedef struct cs_stage_times {
  double ce_setup;
  double off_setup;
  double ce;
  double off_grid;
  double predict;
  double total;
} cs_stage_times;

cs_status cs_pipeline_create(const cs_grid *g, const cs_model *m,
                             const cs_obs *o, cs_method method, int np,
                             cs_box_policy policy, int max_refine,
                             int64_t dense_cap, cs_pipeline **out);
void cs_pipeline_destroy(cs_pipeline *p);

/* One conditional draw (length m1*m2) for the given draw index. */
cs_status cs_pipeline_draw(cs_pipeline *p, uint64_t seed, uint64_t index,
                           double *out);

/* Step-1 Kriging prediction on the grid (length m1*m2). */
cs_status cs_pipeline_prediction(cs_pipeline *p, double *out);

/* Number of observations after box-policy reduction (average/refine). */
cs_status cs_pipeline_effective_obs(const cs_pipeline *p, int64_t *n);

/* Grid actually simulated on (refine policy may replace the input grid). */
cs_status cs_pipeline_grid(const cs_pipeline *p, cs_grid **out);

cs_status cs_pipeline_times(const cs_pipeline *p, cs_stage_times *out);

/* n_draws conditional draws with per-draw streams; results are identical
 * for any n_threads >= 1. */
cs_status cs_pipeline_run(cs_pipeline *p, uint64_t seed, int64_t n_draws,
                          int n_threads, cs_ensemble **out);
void cs_ensemble_destroy(cs_ensemble *e);
cs_status cs_ensemble_size(const cs_ensemble *e, int64_t *n);
cs_status cs_ensemble_draw(const cs_ensemble *e, int64_t i, double *out);
cs_status cs_ensemble_mean(const cs_ensemble *e, double *out);
/* Per-node Monte Carlo SE (unbiased, n-1). Requires n >= 2. */
cs_status cs_ensemble_mc_se(const cs_ensemble *e, double *out);

/* ---- evaluation harness ------------------------------------------------ */

/* Fraction of entries where a and b round to the same `digits`-significant-
 * figure decimal representation (round half away from zero). */
cs_status cs_sigfig_agreement(const double *a, const double *b, int64_t n,
                              int digits, double *out);

/* Accuracy study on the paper design: 61x61 unit grid on [0,60]^2, 35
 * uniform observations per configuration. Writes one long-format CSV row
 * per (method, np, config) with p95 relative errors and sig-fig fractions.
 * np_levels: array of neighborhood orders, 0 = full grid. */
cs_status cs_run_design(double nu, double theta, double tau,
                        const int *np_levels, int n_np, int n_configs,
                        uint64_t seed, const char *csv_path);

/* Misspecification study: maximum conditional correlation between the two
 * fixed observation pairs given the union of their order-2 neighborhoods,
 * over theta in [0.2,10] x nu in [0.5,1.5] (50x21 lattice).
 * Writes the two maxima (unit spacing, half spacing). */
cs_status cs_misspec_study(double *max_unit, double *max_half);

/* Timing benchmark across grid sizes and observation counts; CSV columns
 * mirror the pipeline stages. */
cs_status cs_timing_bench(const int64_t *grid_sizes, int n_grid,
                          const int64_t *obs_counts, int n_obs, int np,
                          int64_t n_draws, uint64_t seed,
                          const char *csv_path);

/* ---- raster I/O --------------------------------------------------------- */

/* Little-endian float32 row-major raster plus a JSON sidecar
 * (<path>.json) holding origin/spacing/dims/seed. */
cs_status cs_write_raster(const char *path, const cs_grid *g,
                          const double *values, uint64_t seed);
cs_status cs_read_raster(const char *path, cs_grid **g_out, double **values_out,
                         int64_t *count_out);
void cs_free(void *p);

/* Long-format CSV x,y,value[,sd]. sd may be NULL. */
cs_status cs_write_csv(const char *path, const cs_grid *g,
                       const double *values, const double *sd);

/* Observation CSV with header x,y,value[,sd]. Returns arrays via cs_free. */
cs_status cs_read_observations(const char *path, double **xy, double **values,
                               double **sd, int64_t *n);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* CONDSIM_H */
