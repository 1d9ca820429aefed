#pragma once

#include <cstdint>

#include "cfmar/geometry.hpp"
#include "cfmar/grid.hpp"
#include "cfmar/phantom.hpp"
#include "cfmar/stacks.hpp"

namespace cfmar {

struct PhysicsParams {
  double i0 = 1.0e5;  // photons per pixel
  /// Two-term beam-hardening surrogate p_eff = p + alpha * p_metal^2; 0 disables it.
  double bh_alpha = 0.0;
  bool poisson_noise = false;
  std::uint64_t rng_seed = 0;
  /// Detected intensities are clipped from below at this many photons
  /// (photon starvation).
  double intensity_floor = 0.0;

  void validate() const;
};

/// Intensity recorded in place of a zero count so the log stays finite.
constexpr double kMinIntensity = 0.5;

/// Exact line integrals of the analytic phantom along every pixel's central ray.
ProjectionStack analytic_line_integrals(const Phantom& phantom, const ScanGeometry& geom);

/// Metal-only partial line integrals, each metal weighted by its beam_hardening_coeff.
ProjectionStack metal_partial_integrals(const Phantom& phantom, const ScanGeometry& geom);

/// Ray integral through the voxel grid with trilinear interpolation (zero
/// outside the grid) and midpoint sampling at <= half the smallest spacing.
ProjectionStack voxel_forward_project(const Volume& volume, const ScanGeometry& geom);

/// Lambert-Beer with the beam-hardening surrogate, Poisson noise and the
/// intensity floor. `stream` separates independent noise realizations that
/// share one seed.
ProjectionStack apply_physics(const ProjectionStack& line_integrals, const ProjectionStack& metal_integrals,
                              const PhysicsParams& physics, std::uint64_t stream = 0);

/// p = -ln(max(I, floor_eps) / I0), clipped at 0 from below.
ProjectionStack to_line_integrals(const ProjectionStack& raw, double i0, double floor_eps = kMinIntensity);
inline ProjectionStack to_line_integrals(const ProjectionStack& raw) { return to_line_integrals(raw, raw.i0); }

struct MatchedPair {
  ProjectionStack with_metal;
  ProjectionStack metal_free;
};

/// Raw acquisitions of the phantom and its metal-free twin on one geometry
/// with independent noise streams derived from physics.rng_seed.
MatchedPair make_matched_pair(const Phantom& phantom, const ScanGeometry& geom, const PhysicsParams& physics);

/// Counter-based seed for one pixel's noise sample.
std::uint64_t pixel_seed(std::uint64_t seed, std::uint64_t stream, int view, int row, int col);

}  // namespace cfmar
