#include "cfmar/forward_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace cfmar {

namespace {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Minimal counter-based generator so that each pixel owns an independent,
// cheaply constructed stream.
class PixelEngine {
 public:
  using result_type = std::uint64_t;
  explicit PixelEngine(std::uint64_t seed) : state_(seed) {}
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return splitmix64(state_);
  }

 private:
  std::uint64_t state_;
};

template <class Integrand>
ProjectionStack integrate_phantom(const Phantom& phantom, const ScanGeometry& geom, Integrand&& weight) {
  geom.validate();
  ProjectionStack out(geom, ProjectionKind::line_integral);
  const int n_prims = static_cast<int>(phantom.primitives.size());
#pragma omp parallel for schedule(dynamic)
  for (int v = 0; v < geom.num_views; ++v) {
    std::vector<PixelRect> rects(n_prims);
    for (int p = 0; p < n_prims; ++p) rects[p] = shadow_rect(phantom.primitives[p], geom, v);
    std::vector<int> candidates;
    candidates.reserve(n_prims);
    auto img = out.view(v);
    for (int r = 0; r < geom.detector.rows; ++r) {
      for (int c = 0; c < geom.detector.cols; ++c) {
        candidates.clear();
        for (int p = 0; p < n_prims; ++p) {
          const auto& rc = rects[p];
          if (r >= rc.row_lo && r < rc.row_hi && c >= rc.col_lo && c < rc.col_hi) candidates.push_back(p);
        }
        if (candidates.empty()) continue;
        double sum = 0.0;
        for (const auto& [idx, len] : resolve_chords(phantom, geom.pixel_ray(v, r, c), candidates))
          sum += weight(phantom.primitives[idx].material) * len;
        img[static_cast<std::size_t>(r) * geom.detector.cols + c] = sum;
      }
    }
  }
  return out;
}

double trilinear(const Volume& vol, const Vec3& p) {
  const GridSpec& g = vol.grid;
  double f[3];
  int i0[3];
  double w[3];
  for (int a = 0; a < 3; ++a) {
    f[a] = (p[a] - g.origin[a]) / g.spacing[a];
    i0[a] = static_cast<int>(std::floor(f[a]));
    w[a] = f[a] - i0[a];
  }
  double acc = 0.0;
  for (int n = 0; n < 8; ++n) {
    const int i = i0[0] + (n & 1), j = i0[1] + ((n >> 1) & 1), k = i0[2] + ((n >> 2) & 1);
    if (i < 0 || j < 0 || k < 0 || i >= g.dims[0] || j >= g.dims[1] || k >= g.dims[2]) continue;
    const double wt = ((n & 1) ? w[0] : 1.0 - w[0]) * (((n >> 1) & 1) ? w[1] : 1.0 - w[1]) *
                      (((n >> 2) & 1) ? w[2] : 1.0 - w[2]);
    acc += wt * vol.data[g.index(i, j, k)];
  }
  return acc;
}

}  // namespace

void PhysicsParams::validate() const {
  require(i0 > 0.0 && std::isfinite(i0), ErrorCode::parameter, "I0 must be > 0");
  require(bh_alpha >= 0.0, ErrorCode::parameter, "beam-hardening alpha must be >= 0");
  require(intensity_floor >= 0.0 && intensity_floor < i0, ErrorCode::parameter,
          "intensity floor must satisfy 0 <= floor < I0");
}

std::uint64_t pixel_seed(std::uint64_t seed, std::uint64_t stream, int view, int row, int col) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ stream);
  h = splitmix64(h ^ static_cast<std::uint64_t>(view));
  h = splitmix64(h ^ static_cast<std::uint64_t>(row));
  return splitmix64(h ^ static_cast<std::uint64_t>(col));
}

ProjectionStack analytic_line_integrals(const Phantom& phantom, const ScanGeometry& geom) {
  return integrate_phantom(phantom, geom, [](const Material& m) { return m.mu; });
}

ProjectionStack metal_partial_integrals(const Phantom& phantom, const ScanGeometry& geom) {
  return integrate_phantom(phantom.metal_only(), geom,
                           [](const Material& m) { return m.mu * m.beam_hardening_coeff; });
}

ProjectionStack voxel_forward_project(const Volume& volume, const ScanGeometry& geom) {
  geom.validate();
  volume.grid.validate();
  const GridSpec& g = volume.grid;
  ProjectionStack out(geom, ProjectionKind::line_integral);
  // The interpolant is supported up to one spacing beyond the outer centers.
  Vec3 lo, hi;
  for (int a = 0; a < 3; ++a) {
    lo[a] = g.origin[a] - g.spacing[a];
    hi[a] = g.origin[a] + g.dims[a] * g.spacing[a];
  }
  const double max_step = 0.5 * g.min_spacing();
#pragma omp parallel for schedule(dynamic)
  for (int v = 0; v < geom.num_views; ++v) {
    auto img = out.view(v);
    for (int r = 0; r < geom.detector.rows; ++r) {
      for (int c = 0; c < geom.detector.cols; ++c) {
        const Ray ray = geom.pixel_ray(v, r, c);
        double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
        for (int a = 0; a < 3 && t0 < t1; ++a) {
          if (ray.direction[a] == 0.0) {
            if (ray.origin[a] < lo[a] || ray.origin[a] > hi[a]) t1 = t0;
            continue;
          }
          double ta = (lo[a] - ray.origin[a]) / ray.direction[a];
          double tb = (hi[a] - ray.origin[a]) / ray.direction[a];
          if (ta > tb) std::swap(ta, tb);
          t0 = std::max(t0, ta);
          t1 = std::min(t1, tb);
        }
        if (!(t1 > t0)) continue;
        const int n = static_cast<int>(std::ceil((t1 - t0) / max_step));
        const double dt = (t1 - t0) / n;
        double sum = 0.0;
        for (int s = 0; s < n; ++s) sum += trilinear(volume, ray.at(t0 + (s + 0.5) * dt));
        img[static_cast<std::size_t>(r) * geom.detector.cols + c] = sum * dt;
      }
    }
  }
  return out;
}

ProjectionStack apply_physics(const ProjectionStack& line_integrals, const ProjectionStack& metal_integrals,
                              const PhysicsParams& physics, std::uint64_t stream) {
  physics.validate();
  require(line_integrals.kind == ProjectionKind::line_integral, ErrorCode::contract,
          "apply_physics expects a line-integral stack");
  require(metal_integrals.kind == ProjectionKind::line_integral, ErrorCode::contract,
          "apply_physics expects a line-integral metal stack");
  require_same_layout(line_integrals, metal_integrals, "apply_physics");

  ProjectionStack out(line_integrals.geometry, ProjectionKind::raw_intensity, physics.i0);
  const int views = line_integrals.views(), rows = line_integrals.rows(), cols = line_integrals.cols();
#pragma omp parallel for schedule(static)
  for (int v = 0; v < views; ++v) {
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        const double pm = metal_integrals.at(v, r, c);
        const double p_eff = line_integrals.at(v, r, c) + physics.bh_alpha * pm * pm;
        double intensity = physics.i0 * std::exp(-p_eff);
        if (physics.poisson_noise) {
          PixelEngine engine(pixel_seed(physics.rng_seed, stream, v, r, c));
          std::poisson_distribution<std::int64_t> counts(intensity);
          intensity = intensity > 0.0 ? static_cast<double>(counts(engine)) : 0.0;
        }
        intensity = std::max(intensity, physics.intensity_floor);
        if (!(intensity > 0.0)) intensity = kMinIntensity;
        out.at(v, r, c) = intensity;
      }
    }
  }
  return out;
}

ProjectionStack to_line_integrals(const ProjectionStack& raw, double i0, double floor_eps) {
  require(raw.kind == ProjectionKind::raw_intensity, ErrorCode::contract,
          "to_line_integrals expects a raw-intensity stack");
  require(i0 > 0.0, ErrorCode::parameter, "I0 must be > 0");
  ProjectionStack out(raw.geometry, ProjectionKind::line_integral, i0);
  for (std::size_t n = 0; n < raw.data.size(); ++n) {
    const double intensity = raw.data[n];
    require(intensity > 0.0, ErrorCode::contract, "raw intensities must be positive");
    out.data[n] = std::max(0.0, -std::log(std::max(intensity, floor_eps) / i0));
  }
  return out;
}

MatchedPair make_matched_pair(const Phantom& phantom, const ScanGeometry& geom, const PhysicsParams& physics) {
  require(phantom.has_metal(), ErrorCode::contract, "matched pair needs a phantom with metal");
  phantom.validate();
  const Phantom twin = phantom.metal_free_twin();
  const ProjectionStack metal = metal_partial_integrals(phantom, geom);
  const ProjectionStack no_metal(geom, ProjectionKind::line_integral);
  return {apply_physics(analytic_line_integrals(phantom, geom), metal, physics, 0),
          apply_physics(analytic_line_integrals(twin, geom), no_metal, physics, 1)};
}

}  // namespace cfmar
