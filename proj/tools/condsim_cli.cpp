/// @file condsim_cli.cpp
/// @brief Command-line front end over the public C API: embedding checks,
///        unconditional simulation, the conditional-simulation pipeline,
///        analytic standard errors, and the evaluation harness.
///
/// Every fallible path exits with the library status code and prints a
/// one-line `ERROR <code>: <message>` to stderr. Stochastic subcommands
/// require --seed; reruns with the same seed are byte-identical and
/// independent of --threads.
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "condsim.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void die(cs_status st, const std::string &msg) {
  std::fprintf(stderr, "ERROR %d: %s\n", static_cast<int>(st), msg.c_str());
  std::exit(static_cast<int>(st));
}

void ok(cs_status st) {
  if (st != CS_OK) die(st, cs_last_error());
}

using GridPtr = std::unique_ptr<cs_grid, decltype(&cs_grid_destroy)>;
using ModelPtr = std::unique_ptr<cs_model, decltype(&cs_model_destroy)>;
using ObsPtr = std::unique_ptr<cs_obs, decltype(&cs_obs_destroy)>;
using EmbedPtr = std::unique_ptr<cs_embedding, decltype(&cs_embedding_destroy)>;
using PipePtr = std::unique_ptr<cs_pipeline, decltype(&cs_pipeline_destroy)>;
using EnsPtr = std::unique_ptr<cs_ensemble, decltype(&cs_ensemble_destroy)>;

struct Options {
  std::string obs_path;
  std::string out;
  double x0 = 0, y0 = 0, dx = 1, dy = 1;
  int64_t m1 = 0, m2 = 0; // 0 = derive from the observations
  double sigma2 = 1, theta = 1, nu = 0.5, tau = 0;
  std::string method = "local", policy = "block";
  int np = 2, max_refine = 2, max_doublings = 3, threads = 1;
  int64_t draws = 1, dense_cap = 0;
  uint64_t seed = 0;
  std::vector<int> np_levels = {1, 2, 3, 4};
  int configs = 50;
  std::vector<int64_t> grids = {128, 256, 512};
  std::vector<int64_t> obs_counts = {400, 1600, 6400};
};

struct Observations {
  std::vector<double> xy, values, sd;
  bool has_sd = false;
  int64_t n = 0;
  ObsPtr handle{nullptr, &cs_obs_destroy};
};

Observations load_observations(const std::string &path, double tau) {
  Observations obs;
  double *xy = nullptr, *values = nullptr, *sd = nullptr;
  ok(cs_read_observations(path.c_str(), &xy, &values, &sd, &obs.n));
  obs.xy.assign(xy, xy + 2 * obs.n);
  obs.values.assign(values, values + obs.n);
  if (sd) {
    obs.sd.assign(sd, sd + obs.n);
    obs.has_sd = true;
  }
  cs_free(xy);
  cs_free(values);
  cs_free(sd);
  cs_obs *h = nullptr;
  ok(cs_obs_create(obs.xy.data(), obs.values.data(),
                   obs.has_sd ? obs.sd.data() : nullptr, obs.n, tau, &h));
  obs.handle = ObsPtr(h, &cs_obs_destroy);
  return obs;
}

ModelPtr make_model(const Options &o) {
  cs_model *m = nullptr;
  ok(cs_model_create(o.sigma2, o.theta, o.nu, &m));
  return ModelPtr(m, &cs_model_destroy);
}

// Explicit dims build the grid directly; otherwise the bounding grid of the
// observations is padded so every observation keeps an n_p-node margin.
GridPtr resolve_grid(const Options &o, const Observations *obs) {
  cs_grid *g = nullptr;
  if (o.m1 > 0 && o.m2 > 0) {
    ok(cs_grid_create(o.x0, o.y0, o.dx, o.dy, o.m1, o.m2, &g));
    return GridPtr(g, &cs_grid_destroy);
  }
  if (!obs || obs->n == 0)
    die(CS_EINVAL, "grid dims missing and no observations to derive them");
  double min_x = obs->xy[0], max_x = obs->xy[0];
  double min_y = obs->xy[1], max_y = obs->xy[1];
  for (int64_t i = 1; i < obs->n; ++i) {
    min_x = std::min(min_x, obs->xy[2 * i]);
    max_x = std::max(max_x, obs->xy[2 * i]);
    min_y = std::min(min_y, obs->xy[2 * i + 1]);
    max_y = std::max(max_y, obs->xy[2 * i + 1]);
  }
  const double x0 = std::floor(min_x / o.dx) * o.dx;
  const double y0 = std::floor(min_y / o.dy) * o.dy;
  const int64_t m1 = static_cast<int64_t>(std::ceil((max_x - x0) / o.dx)) + 1;
  const int64_t m2 = static_cast<int64_t>(std::ceil((max_y - y0) / o.dy)) + 1;
  cs_grid *inner = nullptr;
  ok(cs_grid_create(x0, y0, o.dx, o.dy, m1, m2, &inner));
  GridPtr keep(inner, &cs_grid_destroy);
  ok(cs_grid_pad_for_observations(inner, obs->xy.data(), obs->n,
                                  std::max(1, o.np), &g));
  return GridPtr(g, &cs_grid_destroy);
}

cs_method method_enum(const std::string &name) {
  if (name == "local") return CS_METHOD_LOCAL;
  if (name == "nn") return CS_METHOD_NN;
  if (name == "exact") return CS_METHOD_EXACT;
  die(CS_EINVAL, "unknown method '" + name + "' (local|nn|exact)");
}

cs_box_policy policy_enum(const std::string &name) {
  if (name == "block") return CS_BOX_BLOCK;
  if (name == "average") return CS_BOX_AVERAGE;
  if (name == "refine") return CS_BOX_REFINE;
  die(CS_EINVAL, "unknown box policy '" + name + "' (block|average|refine)");
}

json grid_json(const cs_grid *g) {
  double x0, y0, dx, dy;
  int64_t m1, m2;
  ok(cs_grid_origin(g, &x0, &y0));
  ok(cs_grid_spacing(g, &dx, &dy));
  ok(cs_grid_dims(g, &m1, &m2));
  return json{{"x0", x0}, {"y0", y0}, {"dx", dx},
              {"dy", dy}, {"m1", m1}, {"m2", m2}};
}

json times_json(const cs_stage_times &t) {
  return json{{"CESetup", t.ce_setup}, {"OffSetup", t.off_setup},
              {"CE", t.ce},            {"OffGrid", t.off_grid},
              {"predict", t.predict},  {"total", t.total}};
}

void write_manifest(const fs::path &dir, const json &manifest) {
  const fs::path path = dir / "manifest.json";
  std::ofstream f(path, std::ios::trunc);
  if (!f) die(CS_EIO, path.string() + ": cannot open for writing");
  f << manifest.dump(2) << "\n";
  f.flush();
  if (!f) die(CS_EIO, path.string() + ": write failed");
}

void prepare_outdir(const std::string &out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) die(CS_EIO, out + ": " + ec.message());
}

std::string draw_name(int64_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "draw_%04" PRId64 ".f32", k);
  return buf;
}

bool ends_with(const std::string &s, const std::string &suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

int run_embed_check(const Options &o) {
  if (o.m1 <= 0 || o.m2 <= 0) die(CS_EINVAL, "embed-check requires --m1/--m2");
  ModelPtr model = make_model(o);
  GridPtr grid = resolve_grid(o, nullptr);
  cs_embedding *e = nullptr;
  ok(cs_embedding_build(grid.get(), model.get(), o.max_doublings, &e));
  EmbedPtr embed(e, &cs_embedding_destroy);
  int64_t n1, n2;
  double wmin, wmax;
  ok(cs_embedding_info(e, &n1, &n2, &wmin, &wmax));
  std::printf("n1=%" PRId64 " n2=%" PRId64 " min_weight=%.6e max_weight=%.6e\n",
              n1, n2, wmin, wmax);
  return 0;
}

int run_simulate(const Options &o) {
  if (o.m1 <= 0 || o.m2 <= 0) die(CS_EINVAL, "simulate requires --m1/--m2");
  if (o.draws < 1) die(CS_EINVAL, "--draws must be >= 1");
  ModelPtr model = make_model(o);
  GridPtr grid = resolve_grid(o, nullptr);
  cs_embedding *e = nullptr;
  ok(cs_embedding_build(grid.get(), model.get(), o.max_doublings, &e));
  EmbedPtr embed(e, &cs_embedding_destroy);

  prepare_outdir(o.out);
  const int64_t nodes = o.m1 * o.m2;
  std::vector<double> a(static_cast<size_t>(nodes)),
      b(static_cast<size_t>(nodes));
  json outputs = json::array();
  for (int64_t k = 0; k < o.draws; k += 2) {
    ok(cs_simulate_pair(e, o.seed, static_cast<uint64_t>(k / 2), a.data(),
                        b.data()));
    const fs::path pa = fs::path(o.out) / draw_name(k);
    ok(cs_write_raster(pa.string().c_str(), grid.get(), a.data(), o.seed));
    outputs.push_back(pa.filename().string());
    if (k + 1 < o.draws) {
      const fs::path pb = fs::path(o.out) / draw_name(k + 1);
      ok(cs_write_raster(pb.string().c_str(), grid.get(), b.data(), o.seed));
      outputs.push_back(pb.filename().string());
    }
  }
  int64_t n1, n2;
  double wmin, wmax;
  ok(cs_embedding_info(e, &n1, &n2, &wmin, &wmax));
  json manifest{
      {"subcommand", "simulate"},
      {"config",
       {{"grid", grid_json(grid.get())},
        {"sigma2", o.sigma2},
        {"theta", o.theta},
        {"nu", o.nu},
        {"max_doublings", o.max_doublings},
        {"draws", o.draws},
        {"seed", o.seed}}},
      {"embedding",
       {{"n1", n1}, {"n2", n2}, {"min_weight", wmin}, {"max_weight", wmax}}},
      {"outputs", outputs}};
  write_manifest(o.out, manifest);
  std::printf("wrote %" PRId64 " draws to %s\n", o.draws, o.out.c_str());
  return 0;
}

int run_condsim(const Options &o) {
  if (o.obs_path.empty()) die(CS_EINVAL, "condsim requires --obs");
  if (o.draws < 1) die(CS_EINVAL, "--draws must be >= 1");
  ModelPtr model = make_model(o);
  Observations obs = load_observations(o.obs_path, o.tau);
  GridPtr grid = resolve_grid(o, &obs);

  cs_pipeline *p = nullptr;
  ok(cs_pipeline_create(grid.get(), model.get(), obs.handle.get(),
                        method_enum(o.method), o.np, policy_enum(o.policy),
                        o.max_refine, o.dense_cap, &p));
  PipePtr pipe(p, &cs_pipeline_destroy);
  cs_ensemble *ens = nullptr;
  ok(cs_pipeline_run(p, o.seed, o.draws, o.threads, &ens));
  EnsPtr ensemble(ens, &cs_ensemble_destroy);

  cs_grid *og = nullptr;
  ok(cs_pipeline_grid(p, &og));
  GridPtr outgrid(og, &cs_grid_destroy);
  int64_t m1, m2;
  ok(cs_grid_dims(og, &m1, &m2));
  const int64_t nodes = m1 * m2;

  prepare_outdir(o.out);
  std::vector<double> buf(static_cast<size_t>(nodes));
  json outputs = json::array();
  for (int64_t k = 0; k < o.draws; ++k) {
    ok(cs_ensemble_draw(ens, k, buf.data()));
    const fs::path path = fs::path(o.out) / draw_name(k);
    ok(cs_write_raster(path.string().c_str(), og, buf.data(), o.seed));
    outputs.push_back(path.filename().string());
  }
  ok(cs_ensemble_mean(ens, buf.data()));
  const fs::path mean_path = fs::path(o.out) / "mean.f32";
  ok(cs_write_raster(mean_path.string().c_str(), og, buf.data(), o.seed));
  outputs.push_back("mean.f32");
  if (o.draws >= 2) {
    ok(cs_ensemble_mc_se(ens, buf.data()));
    const fs::path se_path = fs::path(o.out) / "mc_se.f32";
    ok(cs_write_raster(se_path.string().c_str(), og, buf.data(), o.seed));
    outputs.push_back("mc_se.f32");
  }
  ok(cs_pipeline_prediction(p, buf.data()));
  const fs::path pred_path = fs::path(o.out) / "prediction.f32";
  ok(cs_write_raster(pred_path.string().c_str(), og, buf.data(), o.seed));
  outputs.push_back("prediction.f32");

  int64_t n_eff = 0;
  ok(cs_pipeline_effective_obs(p, &n_eff));
  cs_stage_times times;
  ok(cs_pipeline_times(p, &times));
  json manifest{
      {"subcommand", "condsim"},
      {"config",
       {{"grid", grid_json(grid.get())},
        {"obs", o.obs_path},
        {"sigma2", o.sigma2},
        {"theta", o.theta},
        {"nu", o.nu},
        {"tau", o.tau},
        {"method", o.method},
        {"np", o.np},
        {"policy", o.policy},
        {"max_refine", o.max_refine},
        {"dense_cap", o.dense_cap},
        {"draws", o.draws},
        {"seed", o.seed},
        {"threads", o.threads}}},
      {"output_grid", grid_json(og)},
      {"observations", obs.n},
      {"effective_observations", n_eff},
      {"outputs", outputs},
      {"times", times_json(times)}};
  write_manifest(o.out, manifest);
  std::printf("wrote %" PRId64 " draws (+mean/mc_se/prediction) to %s\n",
              o.draws, o.out.c_str());
  return 0;
}

int run_se(const Options &o) {
  if (o.obs_path.empty()) die(CS_EINVAL, "se requires --obs");
  ModelPtr model = make_model(o);
  Observations obs = load_observations(o.obs_path, o.tau);
  GridPtr grid = resolve_grid(o, &obs);
  int64_t m1, m2;
  ok(cs_grid_dims(grid.get(), &m1, &m2));
  std::vector<double> se(static_cast<size_t>(m1 * m2));

  const cs_method m = method_enum(o.method);
  if (m == CS_METHOD_LOCAL)
    ok(cs_local_se(grid.get(), obs.handle.get(), model.get(), o.np,
                   o.dense_cap, se.data()));
  else if (m == CS_METHOD_NN)
    ok(cs_nn_se(grid.get(), obs.handle.get(), model.get(), o.np, o.dense_cap,
                se.data()));
  else
    ok(cs_exact_se(grid.get(), obs.handle.get(), model.get(), o.dense_cap,
                   se.data()));

  const std::string path = o.out.empty() ? std::string("se.f32") : o.out;
  if (ends_with(path, ".csv"))
    ok(cs_write_csv(path.c_str(), grid.get(), se.data(), nullptr));
  else
    ok(cs_write_raster(path.c_str(), grid.get(), se.data(), o.seed));
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

int run_evaluate(const Options &o) {
  const std::string path = o.out.empty() ? std::string("design.csv") : o.out;
  ok(cs_run_design(o.nu, o.theta, o.tau, o.np_levels.data(),
                   static_cast<int>(o.np_levels.size()), o.configs, o.seed,
                   path.c_str()));
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

int run_misspec(const Options &) {
  double max_unit = 0, max_half = 0;
  ok(cs_misspec_study(&max_unit, &max_half));
  std::printf("max_unit=%.5f max_half=%.5f\n", max_unit, max_half);
  return 0;
}

int run_bench(const Options &o) {
  const std::string path = o.out.empty() ? std::string("bench.csv") : o.out;
  ok(cs_timing_bench(o.grids.data(), static_cast<int>(o.grids.size()),
                     o.obs_counts.data(),
                     static_cast<int>(o.obs_counts.size()), o.np, o.draws,
                     o.seed, path.c_str()));
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

void add_grid_options(CLI::App *sc, Options &o, bool derivable = false) {
  sc->add_option("--x0", o.x0, "grid origin x");
  sc->add_option("--y0", o.y0, "grid origin y");
  sc->add_option("--dx", o.dx, "grid spacing x")->check(CLI::PositiveNumber);
  sc->add_option("--dy", o.dy, "grid spacing y")->check(CLI::PositiveNumber);
  const char *hint = derivable ? " (omit to derive from --obs)" : "";
  sc->add_option("--m1", o.m1, std::string("grid nodes in x") + hint);
  sc->add_option("--m2", o.m2, std::string("grid nodes in y") + hint);
}

void add_model_options(CLI::App *sc, Options &o) {
  sc->add_option("--sigma2", o.sigma2, "sill")->check(CLI::PositiveNumber);
  sc->add_option("--theta", o.theta, "range")->check(CLI::PositiveNumber);
  sc->add_option("--nu", o.nu, "smoothness")->check(CLI::PositiveNumber);
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"conditional simulation of stationary Gaussian random fields "
               "on regular grids"};
  app.require_subcommand(1);
  Options o;
  const char *out_env = std::getenv("CONDSIM_OUT");
  o.out = out_env ? out_env : "";

  auto *embed = app.add_subcommand(
      "embed-check", "build the circulant embedding and report its spectrum");
  add_grid_options(embed, o);
  add_model_options(embed, o);
  embed->add_option("--max-doublings", o.max_doublings,
                    "domain doublings allowed before failing");
  embed->set_config("--config");

  auto *sim = app.add_subcommand("simulate",
                                 "unconditional draws on the grid (rasters)");
  add_grid_options(sim, o);
  add_model_options(sim, o);
  sim->add_option("--max-doublings", o.max_doublings);
  sim->add_option("--draws", o.draws, "number of draws");
  sim->add_option("--seed", o.seed, "RNG seed")->required();
  sim->add_option("-o,--out", o.out, "output directory");
  sim->set_config("--config");

  auto *cond = app.add_subcommand(
      "condsim", "conditional-simulation ensemble from observations");
  add_grid_options(cond, o, true);
  add_model_options(cond, o);
  cond->add_option("--obs", o.obs_path, "observation CSV (x,y,value[,sd])");
  cond->add_option("--tau", o.tau, "nugget standard deviation")
      ->check(CLI::NonNegativeNumber);
  cond->add_option("--method", o.method, "local|nn|exact");
  cond->add_option("--np", o.np, "neighborhood order (nn: 0 = full grid)")
      ->check(CLI::NonNegativeNumber);
  cond->add_option("--policy", o.policy, "block|average|refine");
  cond->add_option("--max-refine", o.max_refine,
                   "spacing halvings before averaging residual collisions");
  cond->add_option("--dense-cap", o.dense_cap,
                   "dense-solve size cap (0 = default)");
  cond->add_option("--draws", o.draws, "ensemble size");
  cond->add_option("--seed", o.seed, "RNG seed")->required();
  cond->add_option("--threads", o.threads, "worker threads")
      ->check(CLI::PositiveNumber);
  cond->add_option("-o,--out", o.out, "output directory");
  cond->set_config("--config");

  auto *se = app.add_subcommand(
      "se", "analytic conditional standard error on the grid");
  add_grid_options(se, o);
  add_model_options(se, o);
  se->add_option("--obs", o.obs_path, "observation CSV (x,y,value[,sd])");
  se->add_option("--tau", o.tau, "nugget standard deviation")
      ->check(CLI::NonNegativeNumber);
  se->add_option("--method", o.method, "local|nn|exact");
  se->add_option("--np", o.np, "neighborhood order (0 = full variant)")
      ->check(CLI::NonNegativeNumber);
  se->add_option("--dense-cap", o.dense_cap);
  se->add_option("-o,--out", o.out, "output raster (.csv writes CSV)");
  se->set_config("--config");

  auto *eval = app.add_subcommand(
      "evaluate", "accuracy design study over random configurations (CSV)");
  add_model_options(eval, o);
  eval->add_option("--tau", o.tau)->check(CLI::NonNegativeNumber);
  eval->add_option("--np-levels", o.np_levels,
                   "neighborhood orders, 0 = full (comma-separated)")
      ->delimiter(',');
  eval->add_option("--configs", o.configs, "observation configurations")
      ->check(CLI::PositiveNumber);
  eval->add_option("--seed", o.seed, "RNG seed")->required();
  eval->add_option("-o,--out", o.out, "output CSV path");
  eval->set_config("--config");

  auto *mis = app.add_subcommand(
      "misspec", "misspecification sweep: max conditional correlations");
  mis->set_config("--config");

  auto *bench = app.add_subcommand(
      "bench", "pipeline stage timings across grid sizes and obs counts");
  bench->add_option("--grids", o.grids, "grid side lengths (comma-separated)")
      ->delimiter(',');
  bench->add_option("--obs-counts", o.obs_counts,
                    "observation counts (comma-separated)")
      ->delimiter(',');
  bench->add_option("--np", o.np)->check(CLI::PositiveNumber);
  bench->add_option("--draws", o.draws, "draws per cell");
  bench->add_option("--seed", o.seed, "RNG seed")->required();
  bench->add_option("-o,--out", o.out, "output CSV path");
  bench->set_config("--config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return 2;
  }

  if (embed->parsed()) return run_embed_check(o);
  if (sim->parsed()) return run_simulate(o);
  if (cond->parsed()) return run_condsim(o);
  if (se->parsed()) return run_se(o);
  if (eval->parsed()) return run_evaluate(o);
  if (mis->parsed()) return run_misspec(o);
  if (bench->parsed()) return run_bench(o);
  return 2;
}
