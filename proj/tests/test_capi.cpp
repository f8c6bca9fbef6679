#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "condsim.h"

namespace {

// every handle type used below, wrapped for scope cleanup
struct Model {
  cs_model *h = nullptr;
  ~Model() { cs_model_destroy(h); }
};
struct Grid {
  cs_grid *h = nullptr;
  ~Grid() { cs_grid_destroy(h); }
};
struct Obs {
  cs_obs *h = nullptr;
  ~Obs() { cs_obs_destroy(h); }
};
struct Embedding {
  cs_embedding *h = nullptr;
  ~Embedding() { cs_embedding_destroy(h); }
};
struct PipelineH {
  cs_pipeline *h = nullptr;
  ~PipelineH() { cs_pipeline_destroy(h); }
};
struct EnsembleH {
  cs_ensemble *h = nullptr;
  ~EnsembleH() { cs_ensemble_destroy(h); }
};

struct TempFile {
  std::string path;
  explicit TempFile(std::string p) : path(std::move(p)) {}
  ~TempFile() {
    std::remove(path.c_str());
    std::remove((path + ".json").c_str());
  }
};

} // namespace

TEST_CASE("model handle evaluates the covariance and reports errors") {
  Model m;
  REQUIRE(cs_model_create(2.0, 3.0, 1.1, &m.h) == CS_OK);

  double v = 0;
  REQUIRE(cs_model_matern(m.h, 1.7, &v) == CS_OK);
  CHECK(v == doctest::Approx(1.405529683323316).epsilon(1e-12));
  REQUIRE(cs_model_matern(m.h, 0.0, &v) == CS_OK);
  CHECK(v == 2.0);

  CHECK(cs_model_matern(m.h, -1.0, &v) == CS_EINVAL);
  CHECK(std::strlen(cs_last_error()) > 0);
  CHECK(cs_model_matern(nullptr, 1.0, &v) == CS_EINVAL);
  CHECK(std::string(cs_last_error()) == "null argument");

  cs_model *bad = nullptr;
  CHECK(cs_model_create(-1.0, 3.0, 0.5, &bad) == CS_EINVAL);
  CHECK(cs_model_create(1.0, 0.0, 0.5, &bad) == CS_EINVAL);

  double theta = 0;
  REQUIRE(cs_range_for_correlation(0.5, 0.05, 20.0, &theta) == CS_OK);
  CHECK(theta == doctest::Approx(6.676164).epsilon(1e-5));
}

TEST_CASE("grid handle round-trips geometry and padding") {
  Grid g;
  REQUIRE(cs_grid_create(-1.0, 2.0, 0.5, 0.25, 12, 10, &g.h) == CS_OK);

  int64_t m1 = 0, m2 = 0;
  double x0 = 0, y0 = 0, dx = 0, dy = 0;
  REQUIRE(cs_grid_dims(g.h, &m1, &m2) == CS_OK);
  REQUIRE(cs_grid_origin(g.h, &x0, &y0) == CS_OK);
  REQUIRE(cs_grid_spacing(g.h, &dx, &dy) == CS_OK);
  CHECK(m1 == 12);
  CHECK(m2 == 10);
  CHECK(x0 == -1.0);
  CHECK(y0 == 2.0);
  CHECK(dx == 0.5);
  CHECK(dy == 0.25);

  cs_grid *bad = nullptr;
  CHECK(cs_grid_create(0, 0, 1, 1, 0, 4, &bad) == CS_EINVAL);
  CHECK(cs_grid_create(0, 0, -1, 1, 4, 4, &bad) == CS_EINVAL);

  // interior observations leave the grid unchanged
  Grid padded;
  const double xy[] = {1.6, 3.1};
  REQUIRE(cs_grid_pad_for_observations(g.h, xy, 1, 2, &padded.h) == CS_OK);
  REQUIRE(cs_grid_dims(padded.h, &m1, &m2) == CS_OK);
  REQUIRE(cs_grid_origin(padded.h, &x0, &y0) == CS_OK);
  CHECK(m1 == 12);
  CHECK(m2 == 10);
  CHECK(x0 == -1.0);
  CHECK(y0 == 2.0);
}

TEST_CASE("kriging oracle matches the reference solve through the C API") {
  Model m;
  REQUIRE(cs_model_create(1.3, 2.5, 0.5, &m.h) == CS_OK);

  const double xy[] = {0, 0, 2, 1, 1, 3};
  const double values[] = {1.0, -0.5, 0.25};
  const double sd[] = {0.1, 0.2, 0.0};
  Obs o;
  REQUIRE(cs_obs_create(xy, values, sd, 3, 0.0, &o.h) == CS_OK);
  int64_t n = 0;
  REQUIRE(cs_obs_count(o.h, &n) == CS_OK);
  CHECK(n == 3);

  const double targets[] = {0.7, 0.9, 10, 10, 1, 3};
  double pred[3], var[3];
  REQUIRE(cs_krige_predict(o.h, m.h, targets, 3, 0, pred) == CS_OK);
  REQUIRE(cs_exact_cond_variance(o.h, m.h, targets, 3, 0, var) == CS_OK);
  CHECK(pred[0] == doctest::Approx(0.3226607665488316).epsilon(1e-12));
  CHECK(pred[1] == doctest::Approx(-0.001083935232494).epsilon(1e-9));
  CHECK(pred[2] == doctest::Approx(0.25).epsilon(1e-10));
  CHECK(var[0] == doctest::Approx(0.5823495608832431).epsilon(1e-12));
  CHECK(var[1] == doctest::Approx(1.2998350514265211).epsilon(1e-12));
  CHECK(std::abs(var[2]) < 1e-10);

  // nt + n exceeds the dense cap
  CHECK(cs_krige_predict(o.h, m.h, targets, 3, 5, pred) == CS_ECAP);
  CHECK(cs_exact_cond_variance(o.h, m.h, targets, 3, 5, var) == CS_ECAP);

  // omitted per-observation sd falls back to tau
  Obs flat;
  REQUIRE(cs_obs_create(xy, values, nullptr, 3, 0.1, &flat.h) == CS_OK);
  double var_flat[3];
  REQUIRE(
      cs_exact_cond_variance(flat.h, m.h, targets, 3, 0, var_flat) == CS_OK);
  CHECK(var_flat[2] > 1e-4); // the on-site nugget keeps variance positive

  cs_obs *bad = nullptr;
  const double neg_sd[] = {0.1, -0.2, 0.0};
  CHECK(cs_obs_create(xy, values, neg_sd, 3, 0.0, &bad) == CS_EINVAL);
  CHECK(cs_obs_create(xy, values, nullptr, 3, -0.1, &bad) == CS_EINVAL);
}

TEST_CASE("embedding handle simulates deterministically") {
  Grid g;
  REQUIRE(cs_grid_create(0, 0, 0.7, 1.3, 3, 2, &g.h) == CS_OK);
  Model m;
  REQUIRE(cs_model_create(1.4, 1.0, 0.5, &m.h) == CS_OK);

  Embedding e;
  REQUIRE(cs_embedding_build(g.h, m.h, 0, &e.h) == CS_OK);
  int64_t n1 = 0, n2 = 0;
  double minw = -1, maxw = -1;
  REQUIRE(cs_embedding_info(e.h, &n1, &n2, &minw, &maxw) == CS_OK);
  CHECK(n1 == 6);
  CHECK(n2 == 4);
  CHECK(minw >= 0.0);
  CHECK(maxw >= minw);
  REQUIRE(cs_embedding_info(e.h, nullptr, nullptr, &minw, nullptr) == CS_OK);

  std::vector<double> a(6), b(6), a2(6), b2(6);
  REQUIRE(cs_simulate_pair(e.h, 42, 0, a.data(), b.data()) == CS_OK);
  REQUIRE(cs_simulate_pair(e.h, 42, 0, a2.data(), b2.data()) == CS_OK);
  CHECK(a == a2);
  CHECK(b == b2);
  REQUIRE(cs_simulate_pair(e.h, 42, 1, a2.data(), b2.data()) == CS_OK);
  CHECK(a != a2);
  CHECK(cs_simulate_pair(e.h, 42, uint64_t(1) << 32, a.data(), b.data()) ==
        CS_EINVAL);

  // spectrum failure surfaces as a status, not an exception
  Grid g8;
  REQUIRE(cs_grid_create(0, 0, 1, 1, 8, 8, &g8.h) == CS_OK);
  Model smooth;
  REQUIRE(cs_model_create(1.0, 4.0, 2.5, &smooth.h) == CS_OK);
  cs_embedding *bad = nullptr;
  CHECK(cs_embedding_build(g8.h, smooth.h, 0, &bad) == CS_ESPECTRUM);
  CHECK(std::strlen(cs_last_error()) > 0);
}

TEST_CASE("grid SE evaluators agree on an easy case and check margins") {
  Grid g;
  REQUIRE(cs_grid_create(0, 0, 1, 1, 9, 9, &g.h) == CS_OK);
  Model m;
  REQUIRE(cs_model_create(1.0, 3.0, 0.5, &m.h) == CS_OK);
  const double xy[] = {4.3, 4.6, 5.6, 3.9};
  const double values[] = {0.7, -0.2};
  Obs o;
  REQUIRE(cs_obs_create(xy, values, nullptr, 2, 0.1, &o.h) == CS_OK);

  std::vector<double> exact(81), local(81), local_full(81), nn(81);
  REQUIRE(cs_exact_se(g.h, o.h, m.h, 0, exact.data()) == CS_OK);
  REQUIRE(cs_local_se(g.h, o.h, m.h, 2, 0, local.data()) == CS_OK);
  REQUIRE(cs_local_se(g.h, o.h, m.h, 0, 0, local_full.data()) == CS_OK);
  REQUIRE(cs_nn_se(g.h, o.h, m.h, 2, 0, nn.data()) == CS_OK);
  for (int t = 0; t < 81; ++t) {
    CHECK(std::abs(local[t] - exact[t]) < 0.05);
    CHECK(std::abs(local_full[t] - exact[t]) < 0.05);
    CHECK(std::abs(nn[t] - exact[t]) < 0.05);
  }

  Obs edge;
  const double exy[] = {0.4, 5.0};
  const double ev[] = {1.0};
  REQUIRE(cs_obs_create(exy, ev, nullptr, 1, 0.1, &edge.h) == CS_OK);
  CHECK(cs_local_se(g.h, edge.h, m.h, 2, 0, local.data()) == CS_EMARGIN);
  CHECK(cs_local_se(g.h, o.h, m.h, -1, 0, local.data()) == CS_EINVAL);
}

TEST_CASE("pipeline handle draws, runs, and reports stage times") {
  Grid g;
  REQUIRE(cs_grid_create(0, 0, 1, 1, 10, 10, &g.h) == CS_OK);
  Model m;
  REQUIRE(cs_model_create(1.0, 3.0, 0.5, &m.h) == CS_OK);
  const double xy[] = {3.3, 4.2, 5.1, 5.7, 6.4, 3.8};
  const double values[] = {1.0, -0.4, 0.2};
  Obs o;
  REQUIRE(cs_obs_create(xy, values, nullptr, 3, 0.1, &o.h) == CS_OK);

  PipelineH p;
  REQUIRE(cs_pipeline_create(g.h, m.h, o.h, CS_METHOD_LOCAL, 2,
                             CS_BOX_BLOCK, 2, 0, &p.h) == CS_OK);

  int64_t n_eff = 0;
  REQUIRE(cs_pipeline_effective_obs(p.h, &n_eff) == CS_OK);
  CHECK(n_eff == 3);

  Grid out_grid;
  REQUIRE(cs_pipeline_grid(p.h, &out_grid.h) == CS_OK);
  int64_t m1 = 0, m2 = 0;
  REQUIRE(cs_grid_dims(out_grid.h, &m1, &m2) == CS_OK);
  CHECK(m1 == 10);
  CHECK(m2 == 10);

  std::vector<double> d0(100), d0_again(100), pred(100);
  REQUIRE(cs_pipeline_draw(p.h, 77, 0, d0.data()) == CS_OK);
  REQUIRE(cs_pipeline_draw(p.h, 77, 0, d0_again.data()) == CS_OK);
  CHECK(d0 == d0_again);
  REQUIRE(cs_pipeline_prediction(p.h, pred.data()) == CS_OK);

  EnsembleH ens;
  REQUIRE(cs_pipeline_run(p.h, 77, 4, 1, &ens.h) == CS_OK);
  int64_t n_draws = 0;
  REQUIRE(cs_ensemble_size(ens.h, &n_draws) == CS_OK);
  CHECK(n_draws == 4);

  std::vector<double> e0(100), mean(100), mc_se(100);
  REQUIRE(cs_ensemble_draw(ens.h, 0, e0.data()) == CS_OK);
  CHECK(e0 == d0); // run() and draw() share the per-index stream rule
  REQUIRE(cs_ensemble_mean(ens.h, mean.data()) == CS_OK);
  REQUIRE(cs_ensemble_mc_se(ens.h, mc_se.data()) == CS_OK);
  for (int t = 0; t < 100; ++t) CHECK(mc_se[t] >= 0.0);
  CHECK(cs_ensemble_draw(ens.h, 4, e0.data()) == CS_EINVAL);

  EnsembleH single;
  REQUIRE(cs_pipeline_run(p.h, 77, 1, 1, &single.h) == CS_OK);
  CHECK(cs_ensemble_mc_se(single.h, mc_se.data()) == CS_EINVAL);

  cs_stage_times times;
  REQUIRE(cs_pipeline_times(p.h, &times) == CS_OK);
  CHECK(times.total > 0.0);
  CHECK(times.ce >= 0.0);

  cs_pipeline *bad = nullptr;
  CHECK(cs_pipeline_create(g.h, m.h, o.h, cs_method(7), 2, CS_BOX_BLOCK, 2,
                           0, &bad) == CS_EINVAL);
  CHECK(cs_pipeline_create(g.h, m.h, o.h, CS_METHOD_LOCAL, 2,
                           cs_box_policy(9), 2, 0, &bad) == CS_EINVAL);
}

TEST_CASE("raster files round-trip through the sidecar") {
  Grid g;
  REQUIRE(cs_grid_create(-2.0, 1.0, 0.5, 0.5, 4, 3, &g.h) == CS_OK);
  std::vector<double> vals(12);
  for (int i = 0; i < 12; ++i) vals[size_t(i)] = 0.37 * i - 1.1;

  TempFile f("capi_raster_test.f32");
  REQUIRE(cs_write_raster(f.path.c_str(), g.h, vals.data(), 123) == CS_OK);

  Grid back;
  double *read_vals = nullptr;
  int64_t count = 0;
  REQUIRE(cs_read_raster(f.path.c_str(), &back.h, &read_vals, &count) ==
          CS_OK);
  CHECK(count == 12);
  int64_t m1 = 0, m2 = 0;
  double x0 = 0, y0 = 0;
  REQUIRE(cs_grid_dims(back.h, &m1, &m2) == CS_OK);
  REQUIRE(cs_grid_origin(back.h, &x0, &y0) == CS_OK);
  CHECK(m1 == 4);
  CHECK(m2 == 3);
  CHECK(x0 == -2.0);
  CHECK(y0 == 1.0);
  for (int i = 0; i < 12; ++i)
    CHECK(read_vals[i] == double(float(vals[size_t(i)])));
  cs_free(read_vals);

  cs_grid *gbad = nullptr;
  double *vbad = nullptr;
  CHECK(cs_read_raster("no_such_file.f32", &gbad, &vbad, &count) == CS_EIO);
}

TEST_CASE("grid CSV output is readable as an observation table") {
  Grid g;
  REQUIRE(cs_grid_create(0, 0, 1, 1, 3, 2, &g.h) == CS_OK);
  const double vals[] = {0.5, -1.25, 2.0, 0.0, 1e-7, 42.0};
  const double sds[] = {0.1, 0.1, 0.2, 0.0, 0.3, 0.1};

  TempFile f("capi_grid_test.csv");
  REQUIRE(cs_write_csv(f.path.c_str(), g.h, vals, sds) == CS_OK);

  double *xy = nullptr, *values = nullptr, *sd = nullptr;
  int64_t n = 0;
  REQUIRE(cs_read_observations(f.path.c_str(), &xy, &values, &sd, &n) ==
          CS_OK);
  REQUIRE(n == 6);
  REQUIRE(sd != nullptr);
  for (int i = 0; i < 6; ++i) {
    CHECK(values[i] == vals[i]);
    CHECK(sd[i] == sds[i]);
    CHECK(xy[2 * i] == double(i % 3));
    CHECK(xy[2 * i + 1] == double(i / 3));
  }
  cs_free(xy);
  cs_free(values);
  cs_free(sd);

  // without the sd column the pointer comes back null
  TempFile f2("capi_grid_test2.csv");
  REQUIRE(cs_write_csv(f2.path.c_str(), g.h, vals, nullptr) == CS_OK);
  REQUIRE(cs_read_observations(f2.path.c_str(), &xy, &values, &sd, &n) ==
          CS_OK);
  CHECK(n == 6);
  CHECK(sd == nullptr);
  cs_free(xy);
  cs_free(values);

  TempFile f3("capi_bad_header.csv");
  {
    std::ofstream out(f3.path);
    out << "x,y\n1,2\n";
  }
  CHECK(cs_read_observations(f3.path.c_str(), &xy, &values, &sd, &n) ==
        CS_EINVAL);
  CHECK(std::strlen(cs_last_error()) > 0);
}

TEST_CASE("sigfig agreement is exposed through the C API") {
  const double a[] = {1.234, 2.5};
  const double b[] = {1.2344, 2.6};
  double frac = -1;
  REQUIRE(cs_sigfig_agreement(a, b, 2, 3, &frac) == CS_OK);
  CHECK(frac == 0.5);
  CHECK(cs_sigfig_agreement(a, b, 0, 3, &frac) == CS_EINVAL);
  CHECK(cs_sigfig_agreement(nullptr, nullptr, 0, 3, &frac) == CS_EINVAL);
}
