/// @file io_util.hpp
/// @brief File I/O: float32 rasters with JSON sidecars, long-format grid
///        CSVs, and observation tables.
#ifndef CONDSIM_IO_UTIL_HPP
#define CONDSIM_IO_UTIL_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "grid.hpp"

namespace condsim {

struct RasterData {
  RegularGrid grid;
  std::vector<double> values;
  uint64_t seed = 0;
};

/// Row-major little-endian float32 raster at `path` plus a `<path>.json`
/// sidecar recording origin, spacing, dims, and the generating seed.
void write_raster(const std::string &path, const RegularGrid &grid,
                  const double *values, uint64_t seed);

RasterData read_raster(const std::string &path);

/// Long-format CSV with one row per node: x,y,value and optionally sd.
void write_grid_csv(const std::string &path, const RegularGrid &grid,
                    const double *values, const double *sd);

struct ObservationTable {
  std::vector<Point> locs;
  std::vector<double> values;
  std::vector<double> sd; ///< empty when the file has no sd column
};

/// Reads a CSV with header `x,y,value` or `x,y,value,sd`.  Malformed rows
/// raise CS_EINVAL with the offending line number in the message.
ObservationTable read_observations(const std::string &path);

} // namespace condsim

#endif
