#include "cfmar/consistency_filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cfmar {

namespace {

// Smallest k in [lo, hi] for which pred holds, pred monotone false -> true;
// hi + 1 if none.
template <class Pred>
int first_true(int lo, int hi, Pred&& pred) {
  int a = lo, b = hi + 1;
  while (a < b) {
    const int mid = a + (b - a) / 2;
    if (pred(mid)) b = mid;
    else a = mid + 1;
  }
  return a;
}

int padded_dim(int dim, double scale) {
  int n = static_cast<int>(std::lround(dim * scale));
  if (n < dim) n = dim;
  if ((n - dim) % 2) ++n;
  return n;
}

}  // namespace

Volume HitVolumes::normalized_volume() const {
  Volume out(grid, 0.0, ValueUnit::none);
  for (std::size_t n = 0; n < out.data.size(); ++n) out.data[n] = normalized(n);
  return out;
}

GridSpec extended_grid(const GridSpec& recon, double lateral_scale, double axial_scale) {
  recon.validate();
  require(lateral_scale >= 1.0 && axial_scale >= 1.0, ErrorCode::parameter, "extension scales must be >= 1");
  GridSpec out = recon;
  for (int a = 0; a < 3; ++a) {
    out.dims[a] = padded_dim(recon.dims[a], a < 2 ? lateral_scale : axial_scale);
    const int pad = (out.dims[a] - recon.dims[a]) / 2;
    out.origin[a] = recon.origin[a] - pad * recon.spacing[a];
  }
  return out;
}

std::array<int, 3> grid_padding(const GridSpec& recon, const GridSpec& extended) {
  std::array<int, 3> pad{};
  for (int a = 0; a < 3; ++a) {
    require(recon.spacing[a] == extended.spacing[a], ErrorCode::grid_mismatch, "grid spacings differ");
    const double p = (recon.origin[a] - extended.origin[a]) / recon.spacing[a];
    pad[a] = static_cast<int>(std::lround(p));
    require(std::abs(p - pad[a]) < 1e-6 && pad[a] >= 0 && recon.dims[a] + 2 * pad[a] == extended.dims[a],
            ErrorCode::grid_mismatch, "grid is not a centered whole-voxel extension");
  }
  return pad;
}

HitVolumes accumulate_hits(const MaskStack& masks, const GridSpec& grid) {
  grid.validate();
  masks.geometry.validate();
  const int views = masks.views(), rows = masks.rows(), cols = masks.cols();
  require(views <= std::numeric_limits<std::uint16_t>::max(), ErrorCode::parameter, "too many views for hit counters");
  const int nx = grid.dims[0], ny = grid.dims[1], nz = grid.dims[2];

  HitVolumes out;
  out.grid = grid;
  out.num_views = views;
  out.hits.assign(grid.voxel_count(), 0);
  out.max_hits.assign(grid.voxel_count(), 0);

  // Rows spanned by true pixels in every detector column of every view.
  std::vector<int> first_row(static_cast<std::size_t>(views) * cols, rows), last_row(first_row.size(), -1);
  for (int v = 0; v < views; ++v) {
    const auto img = masks.view(v);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        if (!img[static_cast<std::size_t>(r) * cols + c]) continue;
        const std::size_t n = static_cast<std::size_t>(v) * cols + c;
        first_row[n] = std::min(first_row[n], r);
        last_row[n] = std::max(last_row[n], r);
      }
    }
  }
  std::vector<ViewProjector> proj;
  proj.reserve(views);
  for (int v = 0; v < views; ++v) proj.emplace_back(masks.geometry, v);

  std::vector<double> zs(nz);
  for (int k = 0; k < nz; ++k) zs[k] = grid.center(0, 0, k).z;
  const std::size_t slab = static_cast<std::size_t>(nx) * ny;

#pragma omp parallel for schedule(dynamic)
  for (int j = 0; j < ny; ++j) {
    std::vector<int> diff(nz + 1);
    std::vector<std::uint16_t> hit(nz);
    for (int i = 0; i < nx; ++i) {
      std::fill(diff.begin(), diff.end(), 0);
      std::fill(hit.begin(), hit.end(), 0);
      const Vec3 base = grid.center(i, j, 0);
      for (int v = 0; v < views; ++v) {
        const ViewProjector& P = proj[v];
        // Same arithmetic as ViewProjector::operator() with the z terms
        // vanishing, so results agree with per-voxel projection bit for bit.
        const Vec3 p{base.x, base.y, 0.0};
        const double d = P.depth(p);
        if (!(d > 0.0)) continue;
        const double m = P.scale / d;
        const double u = P.u0 + dot(p, P.u_axis) * m;
        if (!(u >= 0.0 && u < cols)) continue;
        const int c = static_cast<int>(u);
        auto vcoord = [&](int k) { return P.v0 + zs[k] * m; };
        const int k_lo = first_true(0, nz - 1, [&](int k) { return vcoord(k) >= 0.0; });
        const int k_hi = first_true(k_lo, nz - 1, [&](int k) { return !(vcoord(k) < rows); });
        if (k_lo >= k_hi) continue;
        ++diff[k_lo];
        --diff[k_hi];
        const std::size_t cn = static_cast<std::size_t>(v) * cols + c;
        const int r_first = first_row[cn], r_last = last_row[cn];
        if (r_last < 0) continue;
        const auto img = masks.view(v);
        const int ka = first_true(k_lo, k_hi - 1, [&](int k) { return vcoord(k) >= r_first; });
        for (int k = ka; k < k_hi; ++k) {
          const int r = static_cast<int>(vcoord(k));
          if (r > r_last) break;
          if (img[static_cast<std::size_t>(r) * cols + c]) ++hit[k];
        }
      }
      int run = 0;
      for (int k = 0; k < nz; ++k) {
        run += diff[k];
        const std::size_t idx = k * slab + static_cast<std::size_t>(j) * nx + i;
        out.max_hits[idx] = static_cast<std::uint16_t>(run);
        out.hits[idx] = hit[k];
      }
    }
  }
  return out;
}

Mask3D binarize_consistency(const HitVolumes& hits, double tau, int min_support) {
  require(tau > 0.0 && tau <= 1.0, ErrorCode::parameter, "tau must be in (0, 1]");
  require(min_support >= 1, ErrorCode::parameter, "min_support must be >= 1");
  Mask3D out(hits.grid, 0, ValueUnit::mask);
  for (std::size_t n = 0; n < out.data.size(); ++n) {
    const int mx = hits.max_hits[n];
    out.data[n] = mx >= min_support && static_cast<double>(hits.hits[n]) / mx >= tau ? 1 : 0;
  }
  return out;
}

MaskStack reproject_mask(const Mask3D& mask, const ScanGeometry& geom) {
  geom.validate();
  const GridSpec& g = mask.grid;
  g.validate();
  MaskStack out(geom);
  const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
  // A ray entering the true set first crosses a voxel with a false (or
  // out-of-grid) face neighbour, so only those voxels are splatted.
  std::vector<std::array<int, 3>> surface;
  auto is_true = [&](int i, int j, int k) {
    return i >= 0 && j >= 0 && k >= 0 && i < nx && j < ny && k < nz && mask.data[g.index(i, j, k)];
  };
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        if (!mask.data[g.index(i, j, k)]) continue;
        if (is_true(i - 1, j, k) && is_true(i + 1, j, k) && is_true(i, j - 1, k) && is_true(i, j + 1, k) &&
            is_true(i, j, k - 1) && is_true(i, j, k + 1))
          continue;
        surface.push_back({i, j, k});
      }
  if (surface.empty()) return out;
  const int rows = geom.detector.rows, cols = geom.detector.cols;
  const Vec3 half{0.5 * g.spacing[0], 0.5 * g.spacing[1], 0.5 * g.spacing[2]};

#pragma omp parallel for schedule(dynamic)
  for (int v = 0; v < geom.num_views; ++v) {
    const ViewProjector P(geom, v);
    const Vec3 src = geom.source_position(v);
    const Vec3 to_det = geom.detector_point(v, {geom.detector.u0, geom.detector.v0}) - src;
    const Vec3 u_step = geom.detector.pixel_pitch * geom.detector_u_axis(v);
    const double pitch = geom.detector.pixel_pitch;
    auto img = out.view(v);
    for (const auto& ijk : surface) {
      const Vec3 c = g.center(ijk[0], ijk[1], ijk[2]);
      const Vec3 lo = c - half, hi = c + half;
      int r0 = 0, r1 = rows - 1, c0 = 0, c1 = cols - 1;
      double umin = 1e300, umax = -1e300, vmin = 1e300, vmax = -1e300;
      bool behind = false;
      for (int n = 0; n < 8; ++n) {
        const auto pc = P({(n & 1) ? hi.x : lo.x, (n & 2) ? hi.y : lo.y, (n & 4) ? hi.z : lo.z});
        if (!pc) {
          behind = true;
          break;
        }
        umin = std::min(umin, pc->u);
        umax = std::max(umax, pc->u);
        vmin = std::min(vmin, pc->v);
        vmax = std::max(vmax, pc->v);
      }
      if (!behind) {
        if (umax < 0.0 || vmax < 0.0 || umin >= cols || vmin >= rows) continue;
        c0 = std::max(0, static_cast<int>(std::floor(umin)));
        c1 = std::min(cols - 1, static_cast<int>(std::floor(umax)));
        r0 = std::max(0, static_cast<int>(std::floor(vmin)));
        r1 = std::min(rows - 1, static_cast<int>(std::floor(vmax)));
      }
      for (int r = r0; r <= r1; ++r) {
        for (int col = c0; col <= c1; ++col) {
          std::uint8_t& px = img[static_cast<std::size_t>(r) * cols + col];
          if (px) continue;
          const Vec3 dir = to_det + (col + 0.5 - geom.detector.u0) * u_step +
                           Vec3{0.0, 0.0, (r + 0.5 - geom.detector.v0) * pitch};
          double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
          for (int a = 0; a < 3 && t0 < t1; ++a) {
            if (dir[a] == 0.0) {
              if (src[a] <= lo[a] || src[a] >= hi[a]) t1 = t0;
              continue;
            }
            double ta = (lo[a] - src[a]) / dir[a];
            double tb = (hi[a] - src[a]) / dir[a];
            if (ta > tb) std::swap(ta, tb);
            t0 = std::max(t0, ta);
            t1 = std::min(t1, tb);
          }
          if (t0 < t1) px = 1;
        }
      }
    }
  }
  return out;
}

ConsistencyResult consistency_filter(const MaskStack& masks, const GridSpec& extended, double tau,
                                     int min_support) {
  require(tau > 0.0 && tau <= 1.0, ErrorCode::parameter, "tau must be in (0, 1]");
  if (min_support < 0) min_support = default_min_support(masks.views());
  const HitVolumes hits = accumulate_hits(masks, extended);
  Mask3D envelope = binarize_consistency(hits, tau, min_support);
  MaskStack reprojected = reproject_mask(envelope, masks.geometry);
  return {std::move(reprojected), std::move(envelope)};
}

}  // namespace cfmar
