#pragma once

// Brute-force reference for the consistency filter: every voxel is projected
// on its own, every pixel ray is tested against every true voxel box.

#include <cmath>
#include <limits>

#include "cfmar/consistency_filter.hpp"
#include "cfmar/geometry.hpp"

namespace cfmar::fixtures {

struct OracleHits {
  std::vector<int> hits, max_hits;
};

inline OracleHits oracle_hits(const MaskStack& masks, const GridSpec& grid) {
  OracleHits out{std::vector<int>(grid.voxel_count()), std::vector<int>(grid.voxel_count())};
  for (int v = 0; v < masks.views(); ++v) {
    const ViewProjector P(masks.geometry, v);
    for (int k = 0; k < grid.dims[2]; ++k)
      for (int j = 0; j < grid.dims[1]; ++j)
        for (int i = 0; i < grid.dims[0]; ++i) {
          const auto uv = P(grid.center(i, j, k));
          if (!uv) continue;
          const auto px = pixel_index(masks.geometry.detector, *uv);
          if (!px) continue;
          const std::size_t n = grid.index(i, j, k);
          ++out.max_hits[n];
          if (masks.at(v, px->row, px->col)) ++out.hits[n];
        }
  }
  return out;
}

inline Mask3D oracle_envelope(const OracleHits& h, const GridSpec& grid, double tau, int min_support) {
  Mask3D out(grid, 0, ValueUnit::mask);
  for (std::size_t n = 0; n < out.data.size(); ++n)
    out.data[n] = h.max_hits[n] >= min_support && static_cast<double>(h.hits[n]) / h.max_hits[n] >= tau;
  return out;
}

inline bool ray_hits_box(const Ray& ray, const Vec3& lo, const Vec3& hi) {
  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double o = ray.origin[a], d = ray.direction[a];
    if (d == 0.0) {
      if (o <= lo[a] || o >= hi[a]) return false;
      continue;
    }
    double ta = (lo[a] - o) / d, tb = (hi[a] - o) / d;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  return t0 < t1;
}

inline MaskStack oracle_reproject(const Mask3D& mask, const ScanGeometry& geom) {
  MaskStack out(geom);
  const GridSpec& g = mask.grid;
  const Vec3 half{0.5 * g.spacing[0], 0.5 * g.spacing[1], 0.5 * g.spacing[2]};
  std::vector<Vec3> centers;
  for (int k = 0; k < g.dims[2]; ++k)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i)
        if (mask.at(i, j, k)) centers.push_back(g.center(i, j, k));
  for (int v = 0; v < geom.num_views; ++v)
    for (int r = 0; r < geom.detector.rows; ++r)
      for (int c = 0; c < geom.detector.cols; ++c) {
        const Ray ray = geom.pixel_ray(v, r, c);
        for (const Vec3& x : centers)
          if (ray_hits_box(ray, x - half, x + half)) {
            out.at(v, r, c) = 1;
            break;
          }
      }
  return out;
}

}  // namespace cfmar::fixtures
