/// @file io_util.cpp
#include "io_util.hpp"

#include <bit>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "raster I/O assumes a little-endian host");

namespace condsim {

namespace {

using nlohmann::json;

[[noreturn]] void fail_io(const std::string &path, const char *what) {
  fail(CS_EIO, path + ": " + what);
}

std::string sidecar_path(const std::string &path) { return path + ".json"; }

// Strips a trailing '\r' so CRLF files parse the same as LF files.
void chomp(std::string &line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

double parse_field(const std::string &field, const std::string &path,
                   int64_t line_no, const char *col) {
  errno = 0;
  char *end = nullptr;
  double v = std::strtod(field.c_str(), &end);
  if (end == field.c_str() || *end != '\0' || errno == ERANGE ||
      !std::isfinite(v))
    fail(CS_EINVAL, path + ":" + std::to_string(line_no) +
                        ": cannot parse " + col + " value '" + field + "'");
  return v;
}

std::vector<std::string> split_csv(const std::string &line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

} // namespace

void write_raster(const std::string &path, const RegularGrid &grid,
                  const double *values, uint64_t seed) {
  grid.validate();
  require(values != nullptr, CS_EINVAL, "write_raster: values is null");

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail_io(path, "cannot open for writing");
  const int64_t n = grid.nodes();
  std::vector<float> row(static_cast<size_t>(grid.m1));
  for (int64_t iy = 0; iy < grid.m2; ++iy) {
    for (int64_t ix = 0; ix < grid.m1; ++ix)
      row[static_cast<size_t>(ix)] =
          static_cast<float>(values[grid.flat(ix, iy)]);
    f.write(reinterpret_cast<const char *>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  f.flush();
  if (!f) fail_io(path, "write failed");
  (void)n;

  json meta;
  meta["x0"] = grid.x0;
  meta["y0"] = grid.y0;
  meta["dx"] = grid.dx;
  meta["dy"] = grid.dy;
  meta["m1"] = grid.m1;
  meta["m2"] = grid.m2;
  meta["seed"] = seed;
  std::ofstream side(sidecar_path(path), std::ios::trunc);
  if (!side) fail_io(sidecar_path(path), "cannot open for writing");
  side << meta.dump(2) << "\n";
  side.flush();
  if (!side) fail_io(sidecar_path(path), "write failed");
}

RasterData read_raster(const std::string &path) {
  std::ifstream side(sidecar_path(path));
  if (!side) fail_io(sidecar_path(path), "cannot open");
  json meta;
  try {
    side >> meta;
  } catch (const json::exception &e) {
    fail(CS_EINVAL, sidecar_path(path) + ": " + e.what());
  }

  RasterData out;
  try {
    out.grid.x0 = meta.at("x0").get<double>();
    out.grid.y0 = meta.at("y0").get<double>();
    out.grid.dx = meta.at("dx").get<double>();
    out.grid.dy = meta.at("dy").get<double>();
    out.grid.m1 = meta.at("m1").get<int64_t>();
    out.grid.m2 = meta.at("m2").get<int64_t>();
    out.seed = meta.value("seed", uint64_t{0});
  } catch (const json::exception &e) {
    fail(CS_EINVAL, sidecar_path(path) + ": " + e.what());
  }
  out.grid.validate();

  std::ifstream f(path, std::ios::binary);
  if (!f) fail_io(path, "cannot open");
  const int64_t n = out.grid.nodes();
  std::vector<float> raw(static_cast<size_t>(n));
  f.read(reinterpret_cast<char *>(raw.data()),
         static_cast<std::streamsize>(raw.size() * sizeof(float)));
  require(f.gcount() == static_cast<std::streamsize>(raw.size() * sizeof(float)),
          CS_EINVAL, path + ": raster shorter than sidecar dims");
  char extra;
  f.read(&extra, 1);
  require(f.eof(), CS_EINVAL, path + ": raster longer than sidecar dims");

  out.values.assign(raw.begin(), raw.end());
  return out;
}

void write_grid_csv(const std::string &path, const RegularGrid &grid,
                    const double *values, const double *sd) {
  grid.validate();
  require(values != nullptr, CS_EINVAL, "write_grid_csv: values is null");

  std::ofstream f(path, std::ios::trunc);
  if (!f) fail_io(path, "cannot open for writing");
  f << (sd ? "x,y,value,sd\n" : "x,y,value\n");
  char buf[128];
  for (int64_t iy = 0; iy < grid.m2; ++iy)
    for (int64_t ix = 0; ix < grid.m1; ++ix) {
      const Point p = grid.node(ix, iy);
      const int64_t k = grid.flat(ix, iy);
      if (sd)
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", p.x, p.y,
                      values[k], sd[k]);
      else
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.x, p.y,
                      values[k]);
      f << buf;
    }
  f.flush();
  if (!f) fail_io(path, "write failed");
}

ObservationTable read_observations(const std::string &path) {
  std::ifstream f(path);
  if (!f) fail_io(path, "cannot open");

  std::string line;
  if (!std::getline(f, line)) fail(CS_EINVAL, path + ": empty file");
  chomp(line);
  bool has_sd = false;
  if (line == "x,y,value,sd")
    has_sd = true;
  else if (line != "x,y,value")
    fail(CS_EINVAL, path + ":1: expected header x,y,value or x,y,value,sd");

  ObservationTable out;
  const size_t want = has_sd ? 4 : 3;
  int64_t line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    chomp(line);
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != want)
      fail(CS_EINVAL, path + ":" + std::to_string(line_no) + ": expected " +
                          std::to_string(want) + " fields, got " +
                          std::to_string(fields.size()));
    Point p;
    p.x = parse_field(fields[0], path, line_no, "x");
    p.y = parse_field(fields[1], path, line_no, "y");
    out.locs.push_back(p);
    out.values.push_back(parse_field(fields[2], path, line_no, "value"));
    if (has_sd) {
      const double s = parse_field(fields[3], path, line_no, "sd");
      require(s >= 0.0, CS_EINVAL,
              path + ":" + std::to_string(line_no) + ": sd must be >= 0");
      out.sd.push_back(s);
    }
  }
  require(!out.locs.empty(), CS_EINVAL, path + ": no observation rows");
  return out;
}

} // namespace condsim
