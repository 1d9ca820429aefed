#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cfmar/geometry.hpp"
#include "cfmar/grid.hpp"
#include "cfmar/stacks.hpp"
#include "cfmar/vec.hpp"

namespace cfmar {

enum class Shape { ellipsoid, cylinder, box };

struct Material {
  std::string name;
  double mu = 0.0;  // 1/mm at the reference energy
  bool is_metal = false;
  /// Weight of this material in the metal partial integral that drives the
  /// beam-hardening surrogate of the forward model.
  double beam_hardening_coeff = 1.0;

  bool operator==(const Material&) const = default;
};

/// Parameter interval [enter, exit] of a ray inside a primitive.
struct Interval {
  double enter = 0.0;
  double exit = 0.0;
  double length() const { return exit - enter; }
};

/// Solid primitive in world coordinates. The columns of `orientation` are
/// the local axes; for a cylinder the third axis is the cylinder axis and
/// half_extents are (radius_u, radius_v, half_length).
struct Primitive {
  Shape shape = Shape::ellipsoid;
  Vec3 center;
  Mat3 orientation;
  Vec3 half_extents{1.0, 1.0, 1.0};
  Material material;

  bool contains(const Vec3& p) const;
  /// Chord of the ray through the primitive for t >= 0, if of positive length.
  std::optional<Interval> intersect(const Ray& ray) const;
  /// Half size of the world axis-aligned box enclosing the primitive.
  Vec3 bounding_half_size() const;
  std::array<Vec3, 8> bounding_corners() const;
};

Primitive make_cylinder(const Vec3& from, const Vec3& to, double radius, const Material& m);

struct Phantom {
  std::string name;
  /// Later primitives override earlier ones where they overlap.
  std::vector<Primitive> primitives;

  bool has_metal() const;
  /// Same phantom with every metal primitive removed.
  Phantom metal_free_twin() const;
  Phantom metal_only() const;
  /// Largest attenuation among non-metal materials.
  double max_non_metal_mu() const;
  void validate() const;
};

namespace materials {
Material soft_tissue();
Material fat();
Material bone_cancellous();
Material bone_cortical();
Material titanium();
Material steel();
}  // namespace materials

/// Attenuation of water used for Hounsfield conversion, 1/mm.
constexpr double kMuWater = 0.02;

std::vector<std::string> preset_names();

/// Accepts a preset name or "metal_free_twin(<preset>)".
Phantom build_preset(std::string_view preset_name);

/// Per-voxel attenuation of the last primitive covering the voxel center.
Volume voxelize(const Phantom& phantom, const GridSpec& grid);

/// Voxels whose centers lie inside any metal primitive.
Mask3D metal_mask_3d(const Phantom& phantom, const GridSpec& grid);

/// Detector pixels (row-major) whose central ray crosses any metal primitive.
std::vector<std::uint8_t> metal_trace_2d(const Phantom& phantom, const ScanGeometry& geom, int view);

MaskStack metal_trace_stack(const Phantom& phantom, const ScanGeometry& geom);

/// Chords of the ray through the phantom with overlaps resolved by list
/// order: each entry is (primitive index, path length owned).
std::vector<std::pair<int, double>> resolve_chords(const Phantom& phantom, const Ray& ray);
/// As above, restricted to the ascending primitive indices in `candidates`.
std::vector<std::pair<int, double>> resolve_chords(const Phantom& phantom, const Ray& ray,
                                                   std::span<const int> candidates);

/// Sum of mu times owned chord length along the ray.
double line_integral(const Phantom& phantom, const Ray& ray);

/// Detector rectangle [row_lo, row_hi) x [col_lo, col_hi) that can receive
/// the primitive's shadow in a view; the whole detector when the bound is
/// not finite.
struct PixelRect {
  int row_lo = 0, row_hi = 0, col_lo = 0, col_hi = 0;
};
PixelRect shadow_rect(const Primitive& prim, const ScanGeometry& geom, int view);

}  // namespace cfmar
