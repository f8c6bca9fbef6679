/// @file grid.hpp
/// @brief Regular grid geometry: index arithmetic, padding, neighborhoods.
///
/// Nodes are flattened row-major with y slow: flat = iy * m1 + ix, and
/// node(ix, iy) = (x0 + ix*dx, y0 + iy*dy).  Every matrix in the library
/// (sparse weights, rasters, draws) uses this ordering.
#ifndef CONDSIM_GRID_HPP
#define CONDSIM_GRID_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "covariance.hpp"
#include "errors.hpp"

namespace condsim {

struct RegularGrid {
  double x0 = 0.0, y0 = 0.0;
  double dx = 1.0, dy = 1.0;
  int64_t m1 = 1, m2 = 1;

  int64_t nodes() const { return m1 * m2; }
  int64_t flat(int64_t ix, int64_t iy) const { return iy * m1 + ix; }
  Point node(int64_t ix, int64_t iy) const {
    return {x0 + double(ix) * dx, y0 + double(iy) * dy};
  }
  Point node(int64_t k) const { return node(k % m1, k / m1); }

  void validate() const {
    require(dx > 0.0 && dy > 0.0 && std::isfinite(dx) && std::isfinite(dy),
            CS_EINVAL, "grid: spacing must be finite and > 0");
    require(m1 >= 1 && m2 >= 1, CS_EINVAL, "grid: dims must be >= 1");
    require(std::isfinite(x0) && std::isfinite(y0), CS_EINVAL,
            "grid: origin must be finite");
  }
};

/// Grid-box column/row of a point: integer floor of (coord - origin)/spacing.
/// Points on a grid line belong to the box with the lower index (documented
/// tie-break, used consistently in weight assembly and box grouping).
inline int64_t box_of(double coord, double origin, double spacing) {
  return static_cast<int64_t>(std::floor((coord - origin) / spacing));
}

/// The (2 n_p)^2 node indices of the order-n_p neighborhood of a point: the
/// n_p rings of grid boxes around the containing box.  Indices are emitted
/// row-major (y slow) for determinism.
///
/// Fails with a margin error if the point is not at least n_p nodes inside
/// the grid on every side.
inline std::vector<int64_t> locate_neighbors(const RegularGrid &g, Point p,
                                             int np) {
  require(np >= 1, CS_EINVAL, "locate_neighbors: n_p must be >= 1");
  double tx = (p.x - g.x0) / g.dx;
  double ty = (p.y - g.y0) / g.dy;
  if (!(tx >= np && tx <= double(g.m1 - 1 - np) && ty >= np &&
        ty <= double(g.m2 - 1 - np))) {
    fail(CS_EMARGIN, "observation at (" + std::to_string(p.x) + ", " +
                         std::to_string(p.y) + ") lies closer than n_p=" +
                         std::to_string(np) + " nodes to the grid boundary");
  }
  int64_t bx = box_of(p.x, g.x0, g.dx);
  int64_t by = box_of(p.y, g.y0, g.dy);
  std::vector<int64_t> idx;
  idx.reserve(size_t(2 * np) * size_t(2 * np));
  for (int64_t iy = by - np + 1; iy <= by + np; ++iy)
    for (int64_t ix = bx - np + 1; ix <= bx + np; ++ix)
      idx.push_back(g.flat(ix, iy));
  return idx;
}

/// Smallest grid with the same spacing and node alignment that contains the
/// original grid and keeps every observation at least n_p nodes inside.
inline RegularGrid pad_for_observations(const RegularGrid &g,
                                        const std::vector<Point> &obs,
                                        int np) {
  require(np >= 1, CS_EINVAL, "pad_for_observations: n_p must be >= 1");
  g.validate();
  int64_t lo_x = 0, lo_y = 0, hi_x = g.m1 - 1, hi_y = g.m2 - 1;
  for (const Point &p : obs) {
    require(std::isfinite(p.x) && std::isfinite(p.y), CS_EINVAL,
            "pad_for_observations: non-finite observation location");
    double tx = (p.x - g.x0) / g.dx;
    double ty = (p.y - g.y0) / g.dy;
    lo_x = std::min(lo_x, static_cast<int64_t>(std::floor(tx - np)));
    hi_x = std::max(hi_x, static_cast<int64_t>(std::ceil(tx + np)));
    lo_y = std::min(lo_y, static_cast<int64_t>(std::floor(ty - np)));
    hi_y = std::max(hi_y, static_cast<int64_t>(std::ceil(ty + np)));
  }
  RegularGrid out = g;
  out.x0 = g.x0 + double(lo_x) * g.dx;
  out.y0 = g.y0 + double(lo_y) * g.dy;
  out.m1 = hi_x - lo_x + 1;
  out.m2 = hi_y - lo_y + 1;
  return out;
}

} // namespace condsim

#endif
