/// @file capi.cpp
/// @brief extern "C" surface: opaque handles over the core, status codes,
///        and a thread-local error message.
#include "condsim.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include "covariance.hpp"
#include "embedding.hpp"
#include "errors.hpp"
#include "eval.hpp"
#include "grid.hpp"
#include "io_util.hpp"
#include "kriging.hpp"
#include "offgrid_local.hpp"
#include "offgrid_nn.hpp"
#include "pipeline.hpp"

struct cs_model {
  condsim::CovarianceModel m;
};
struct cs_grid {
  condsim::RegularGrid g;
};
struct cs_obs {
  condsim::ObservationSet o;
  double tau = 0.0;
};
struct cs_embedding {
  condsim::CirculantEmbedding e;
};
struct cs_pipeline {
  condsim::Pipeline p;
};
struct cs_ensemble {
  condsim::FieldEnsemble e;
};

namespace {

thread_local std::string t_last_error;

template <typename Fn> cs_status guarded(Fn &&fn) {
  try {
    fn();
    return CS_OK;
  } catch (const condsim::Error &e) {
    t_last_error = e.what();
    return e.code();
  } catch (const std::bad_alloc &) {
    t_last_error = "out of memory";
    return CS_ENUMERIC;
  } catch (const std::exception &e) {
    t_last_error = e.what();
    return CS_ENUMERIC;
  }
}

void check(bool ok, const char *msg) { condsim::require(ok, CS_EINVAL, msg); }

std::vector<condsim::Point> to_points(const double *xy, int64_t n) {
  check(n >= 0, "point count must be >= 0");
  check(xy != nullptr || n == 0, "coordinate array is null");
  std::vector<condsim::Point> pts(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i)
    pts[static_cast<size_t>(i)] = {xy[2 * i], xy[2 * i + 1]};
  return pts;
}

int64_t cap_or_default(int64_t dense_cap) {
  return dense_cap > 0 ? dense_cap : condsim::kDefaultDenseCap;
}

// malloc-backed copy handed to the caller; released with cs_free().
using MallocPtr = std::unique_ptr<double, decltype(&std::free)>;

MallocPtr malloc_copy(const double *src, int64_t n) {
  auto *p = static_cast<double *>(std::malloc(sizeof(double) * size_t(n)));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, src, sizeof(double) * size_t(n));
  return MallocPtr(p, &std::free);
}

} // namespace

extern "C" {

const char *cs_last_error(void) { return t_last_error.c_str(); }

/* ---- covariance model ------------------------------------------------- */

cs_status cs_model_create(double sigma2, double theta, double nu,
                          cs_model **out) {
  return guarded([&] {
    check(out != nullptr, "out is null");
    condsim::CovarianceModel m{sigma2, theta, nu};
    m.validate();
    *out = new cs_model{m};
  });
}

void cs_model_destroy(cs_model *m) { delete m; }

cs_status cs_model_matern(const cs_model *m, double d, double *out) {
  return guarded([&] {
    check(m != nullptr && out != nullptr, "null argument");
    *out = condsim::matern(m->m, d);
  });
}

cs_status cs_range_for_correlation(double nu, double rho, double d,
                                   double *theta_out) {
  return guarded([&] {
    check(theta_out != nullptr, "theta_out is null");
    *theta_out = condsim::range_for_correlation(nu, rho, d);
  });
}

/* ---- regular grid ------------------------------------------------------ */

cs_status cs_grid_create(double x0, double y0, double dx, double dy,
                         int64_t m1, int64_t m2, cs_grid **out) {
  return guarded([&] {
    check(out != nullptr, "out is null");
    condsim::RegularGrid g{x0, y0, dx, dy, m1, m2};
    g.validate();
    *out = new cs_grid{g};
  });
}

void cs_grid_destroy(cs_grid *g) { delete g; }

cs_status cs_grid_dims(const cs_grid *g, int64_t *m1, int64_t *m2) {
  return guarded([&] {
    check(g != nullptr && m1 != nullptr && m2 != nullptr, "null argument");
    *m1 = g->g.m1;
    *m2 = g->g.m2;
  });
}

cs_status cs_grid_origin(const cs_grid *g, double *x0, double *y0) {
  return guarded([&] {
    check(g != nullptr && x0 != nullptr && y0 != nullptr, "null argument");
    *x0 = g->g.x0;
    *y0 = g->g.y0;
  });
}

cs_status cs_grid_spacing(const cs_grid *g, double *dx, double *dy) {
  return guarded([&] {
    check(g != nullptr && dx != nullptr && dy != nullptr, "null argument");
    *dx = g->g.dx;
    *dy = g->g.dy;
  });
}

cs_status cs_grid_pad_for_observations(const cs_grid *g, const double *xy,
                                       int64_t n, int np, cs_grid **out) {
  return guarded([&] {
    check(g != nullptr && out != nullptr, "null argument");
    *out = new cs_grid{
        condsim::pad_for_observations(g->g, to_points(xy, n), np)};
  });
}

/* ---- observations ------------------------------------------------------ */

cs_status cs_obs_create(const double *xy, const double *values,
                        const double *noise_sd, int64_t n, double tau,
                        cs_obs **out) {
  return guarded([&] {
    check(out != nullptr, "out is null");
    check(values != nullptr || n == 0, "values is null");
    check(std::isfinite(tau) && tau >= 0.0, "tau must be finite and >= 0");
    condsim::ObservationSet o;
    o.locs = to_points(xy, n);
    o.values = Eigen::Map<const Eigen::VectorXd>(values, n);
    o.noise_var.resize(n);
    for (int64_t i = 0; i < n; ++i) {
      const double sd = noise_sd ? noise_sd[i] : tau;
      check(std::isfinite(sd) && sd >= 0.0,
            "noise sd must be finite and >= 0");
      o.noise_var[i] = sd * sd;
    }
    o.validate();
    *out = new cs_obs{std::move(o), tau};
  });
}

void cs_obs_destroy(cs_obs *o) { delete o; }

cs_status cs_obs_count(const cs_obs *o, int64_t *n) {
  return guarded([&] {
    check(o != nullptr && n != nullptr, "null argument");
    *n = o->o.n();
  });
}

/* ---- circulant embedding / unconditional simulation -------------------- */

cs_status cs_embedding_build(const cs_grid *g, const cs_model *m,
                             int max_doublings, cs_embedding **out) {
  return guarded([&] {
    check(g != nullptr && m != nullptr && out != nullptr, "null argument");
    *out = new cs_embedding{
        condsim::CirculantEmbedding(g->g, m->m, max_doublings)};
  });
}

void cs_embedding_destroy(cs_embedding *e) { delete e; }

cs_status cs_embedding_info(const cs_embedding *e, int64_t *n1, int64_t *n2,
                            double *min_weight, double *max_weight) {
  return guarded([&] {
    check(e != nullptr, "embedding is null");
    if (n1) *n1 = e->e.n1();
    if (n2) *n2 = e->e.n2();
    if (min_weight) *min_weight = e->e.min_weight();
    if (max_weight) *max_weight = e->e.max_weight();
  });
}

cs_status cs_simulate_pair(const cs_embedding *e, uint64_t seed,
                           uint64_t index, double *out_a, double *out_b) {
  return guarded([&] {
    check(e != nullptr && out_a != nullptr && out_b != nullptr,
          "null argument");
    e->e.simulate_pair(seed, index, out_a, out_b);
  });
}

/* ---- exact Kriging oracle ---------------------------------------------- */

cs_status cs_krige_predict(const cs_obs *o, const cs_model *m,
                           const double *targets_xy, int64_t nt,
                           int64_t dense_cap, double *out) {
  return guarded([&] {
    check(o != nullptr && m != nullptr && out != nullptr, "null argument");
    const Eigen::VectorXd v = condsim::krige_predict(
        o->o, m->m, to_points(targets_xy, nt), cap_or_default(dense_cap));
    std::memcpy(out, v.data(), sizeof(double) * size_t(nt));
  });
}

cs_status cs_exact_cond_variance(const cs_obs *o, const cs_model *m,
                                 const double *targets_xy, int64_t nt,
                                 int64_t dense_cap, double *out) {
  return guarded([&] {
    check(o != nullptr && m != nullptr && out != nullptr, "null argument");
    const Eigen::VectorXd v = condsim::exact_cond_variance(
        o->o, m->m, to_points(targets_xy, nt), cap_or_default(dense_cap));
    std::memcpy(out, v.data(), sizeof(double) * size_t(nt));
  });
}

/* ---- approximate standard errors on the grid --------------------------- */

cs_status cs_local_se(const cs_grid *g, const cs_obs *o, const cs_model *m,
                      int np, int64_t dense_cap, double *out) {
  return guarded([&] {
    check(g != nullptr && o != nullptr && m != nullptr && out != nullptr,
          "null argument");
    check(np >= 0, "np must be >= 0");
    const Eigen::VectorXd se =
        np == 0 ? condsim::local_se_grid_full(g->g, o->o, m->m,
                                              cap_or_default(dense_cap))
                : condsim::local_se_grid(g->g, o->o, m->m, np,
                                         cap_or_default(dense_cap));
    std::memcpy(out, se.data(), sizeof(double) * size_t(se.size()));
  });
}

cs_status cs_nn_se(const cs_grid *g, const cs_obs *o, const cs_model *m,
                   int np, int64_t dense_cap, double *out) {
  return guarded([&] {
    check(g != nullptr && o != nullptr && m != nullptr && out != nullptr,
          "null argument");
    check(np >= 0, "np must be >= 0");
    const Eigen::VectorXd se =
        condsim::nn_se_grid(g->g, o->o, m->m, np, o->tau * o->tau,
                            cap_or_default(dense_cap));
    std::memcpy(out, se.data(), sizeof(double) * size_t(se.size()));
  });
}

cs_status cs_exact_se(const cs_grid *g, const cs_obs *o, const cs_model *m,
                      int64_t dense_cap, double *out) {
  return guarded([&] {
    check(g != nullptr && o != nullptr && m != nullptr && out != nullptr,
          "null argument");
    const Eigen::VectorXd se =
        condsim::exact_se_grid(g->g, o->o, m->m, cap_or_default(dense_cap));
    std::memcpy(out, se.data(), sizeof(double) * size_t(se.size()));
  });
}

/* ---- conditional-simulation pipeline ----------------------------------- */

cs_status cs_pipeline_create(const cs_grid *g, const cs_model *m,
                             const cs_obs *o, cs_method method, int np,
                             cs_box_policy policy, int max_refine,
                             int64_t dense_cap, cs_pipeline **out) {
  return guarded([&] {
    check(g != nullptr && m != nullptr && o != nullptr && out != nullptr,
          "null argument");
    check(method == CS_METHOD_LOCAL || method == CS_METHOD_NN ||
              method == CS_METHOD_EXACT,
          "unknown method");
    check(policy == CS_BOX_BLOCK || policy == CS_BOX_AVERAGE ||
              policy == CS_BOX_REFINE,
          "unknown box policy");
    *out = new cs_pipeline{condsim::Pipeline(
        g->g, m->m, o->o, o->tau * o->tau,
        static_cast<condsim::Method>(method), np,
        static_cast<condsim::BoxPolicy>(policy), max_refine,
        cap_or_default(dense_cap))};
  });
}

void cs_pipeline_destroy(cs_pipeline *p) { delete p; }

cs_status cs_pipeline_draw(cs_pipeline *p, uint64_t seed, uint64_t index,
                           double *out) {
  return guarded([&] {
    check(p != nullptr && out != nullptr, "null argument");
    const Eigen::VectorXd v = p->p.draw(seed, index);
    std::memcpy(out, v.data(), sizeof(double) * size_t(v.size()));
  });
}

cs_status cs_pipeline_prediction(cs_pipeline *p, double *out) {
  return guarded([&] {
    check(p != nullptr && out != nullptr, "null argument");
    const Eigen::VectorXd &v = p->p.prediction();
    std::memcpy(out, v.data(), sizeof(double) * size_t(v.size()));
  });
}

cs_status cs_pipeline_effective_obs(const cs_pipeline *p, int64_t *n) {
  return guarded([&] {
    check(p != nullptr && n != nullptr, "null argument");
    *n = p->p.effective_obs().n();
  });
}

cs_status cs_pipeline_grid(const cs_pipeline *p, cs_grid **out) {
  return guarded([&] {
    check(p != nullptr && out != nullptr, "null argument");
    *out = new cs_grid{p->p.output_grid()};
  });
}

cs_status cs_pipeline_times(const cs_pipeline *p, cs_stage_times *out) {
  return guarded([&] {
    check(p != nullptr && out != nullptr, "null argument");
    const condsim::StageTimes t = p->p.times();
    out->ce_setup = t.ce_setup;
    out->off_setup = t.off_setup;
    out->ce = t.ce;
    out->off_grid = t.off_grid;
    out->predict = t.predict;
    out->total = t.total();
  });
}

cs_status cs_pipeline_run(cs_pipeline *p, uint64_t seed, int64_t n_draws,
                          int n_threads, cs_ensemble **out) {
  return guarded([&] {
    check(p != nullptr && out != nullptr, "null argument");
    *out = new cs_ensemble{p->p.run(seed, n_draws, n_threads)};
  });
}

void cs_ensemble_destroy(cs_ensemble *e) { delete e; }

cs_status cs_ensemble_size(const cs_ensemble *e, int64_t *n) {
  return guarded([&] {
    check(e != nullptr && n != nullptr, "null argument");
    *n = static_cast<int64_t>(e->e.draws.size());
  });
}

cs_status cs_ensemble_draw(const cs_ensemble *e, int64_t i, double *out) {
  return guarded([&] {
    check(e != nullptr && out != nullptr, "null argument");
    check(i >= 0 && i < static_cast<int64_t>(e->e.draws.size()),
          "draw index out of range");
    const Eigen::VectorXd &v = e->e.draws[static_cast<size_t>(i)];
    std::memcpy(out, v.data(), sizeof(double) * size_t(v.size()));
  });
}

cs_status cs_ensemble_mean(const cs_ensemble *e, double *out) {
  return guarded([&] {
    check(e != nullptr && out != nullptr, "null argument");
    std::memcpy(out, e->e.mean.data(),
                sizeof(double) * size_t(e->e.mean.size()));
  });
}

cs_status cs_ensemble_mc_se(const cs_ensemble *e, double *out) {
  return guarded([&] {
    check(e != nullptr && out != nullptr, "null argument");
    check(e->e.mc_se.size() > 0, "MC standard error needs >= 2 draws");
    std::memcpy(out, e->e.mc_se.data(),
                sizeof(double) * size_t(e->e.mc_se.size()));
  });
}

/* ---- evaluation harness ------------------------------------------------ */

cs_status cs_sigfig_agreement(const double *a, const double *b, int64_t n,
                              int digits, double *out) {
  return guarded([&] {
    check(out != nullptr, "out is null");
    check((a != nullptr && b != nullptr) || n == 0, "null argument");
    *out = condsim::sigfig_agreement(a, b, n, digits);
  });
}

cs_status cs_run_design(double nu, double theta, double tau,
                        const int *np_levels, int n_np, int n_configs,
                        uint64_t seed, const char *csv_path) {
  return guarded([&] {
    check(np_levels != nullptr && n_np >= 1, "np_levels is empty");
    check(csv_path != nullptr, "csv_path is null");
    condsim::run_design(nu, theta, tau,
                        std::vector<int>(np_levels, np_levels + n_np),
                        n_configs, seed, csv_path);
  });
}

cs_status cs_misspec_study(double *max_unit, double *max_half) {
  return guarded([&] {
    check(max_unit != nullptr && max_half != nullptr, "null argument");
    condsim::misspec_study(*max_unit, *max_half);
  });
}

cs_status cs_timing_bench(const int64_t *grid_sizes, int n_grid,
                          const int64_t *obs_counts, int n_obs, int np,
                          int64_t n_draws, uint64_t seed,
                          const char *csv_path) {
  return guarded([&] {
    check(grid_sizes != nullptr && n_grid >= 1, "grid_sizes is empty");
    check(obs_counts != nullptr && n_obs >= 1, "obs_counts is empty");
    check(csv_path != nullptr, "csv_path is null");
    condsim::timing_bench(
        std::vector<int64_t>(grid_sizes, grid_sizes + n_grid),
        std::vector<int64_t>(obs_counts, obs_counts + n_obs), np, n_draws,
        seed, csv_path);
  });
}

/* ---- raster / CSV I/O --------------------------------------------------- */

cs_status cs_write_raster(const char *path, const cs_grid *g,
                          const double *values, uint64_t seed) {
  return guarded([&] {
    check(path != nullptr && g != nullptr && values != nullptr,
          "null argument");
    condsim::write_raster(path, g->g, values, seed);
  });
}

cs_status cs_read_raster(const char *path, cs_grid **g_out,
                         double **values_out, int64_t *count_out) {
  return guarded([&] {
    check(path != nullptr && g_out != nullptr && values_out != nullptr,
          "null argument");
    condsim::RasterData r = condsim::read_raster(path);
    const int64_t n = r.grid.nodes();
    MallocPtr vals = malloc_copy(r.values.data(), n);
    *g_out = new cs_grid{r.grid};
    *values_out = vals.release();
    if (count_out) *count_out = n;
  });
}

void cs_free(void *p) { std::free(p); }

cs_status cs_write_csv(const char *path, const cs_grid *g,
                       const double *values, const double *sd) {
  return guarded([&] {
    check(path != nullptr && g != nullptr && values != nullptr,
          "null argument");
    condsim::write_grid_csv(path, g->g, values, sd);
  });
}

cs_status cs_read_observations(const char *path, double **xy, double **values,
                               double **sd, int64_t *n) {
  return guarded([&] {
    check(path != nullptr && xy != nullptr && values != nullptr &&
              sd != nullptr && n != nullptr,
          "null argument");
    condsim::ObservationTable t = condsim::read_observations(path);
    const int64_t count = static_cast<int64_t>(t.locs.size());
    std::vector<double> flat(static_cast<size_t>(2 * count));
    for (int64_t i = 0; i < count; ++i) {
      flat[static_cast<size_t>(2 * i)] = t.locs[static_cast<size_t>(i)].x;
      flat[static_cast<size_t>(2 * i + 1)] = t.locs[static_cast<size_t>(i)].y;
    }
    MallocPtr pxy = malloc_copy(flat.data(), 2 * count);
    MallocPtr pval = malloc_copy(t.values.data(), count);
    MallocPtr psd(nullptr, &std::free);
    if (!t.sd.empty()) psd = malloc_copy(t.sd.data(), count);
    *xy = pxy.release();
    *values = pval.release();
    *sd = psd.release();
    *n = count;
  });
}

} /* extern "C" */
