#pragma once

#include <optional>
#include <vector>

#include "cfmar/vec.hpp"

namespace cfmar {

/// Flat-panel detector. Continuous pixel coordinates are such that pixel
/// index c covers [c, c + 1); its center sits at c + 0.5.
struct DetectorSpec {
  int rows = 256;
  int cols = 256;
  double pixel_pitch = 1.2;  // mm
  double u0 = 128.0;         // principal point, pixels
  double v0 = 128.0;

  static DetectorSpec centered(int rows, int cols, double pixel_pitch);

  bool operator==(const DetectorSpec&) const = default;
};

struct PixelCoord {
  double u = 0.0;
  double v = 0.0;
};

struct PixelIndex {
  int row = 0;
  int col = 0;

  bool operator==(const PixelIndex&) const = default;
};

/// Circular cone-beam trajectory about +z. In view i the source sits at
/// sid * (cos b, sin b, 0) with b = start + i * increment, the detector
/// u-axis is (-sin b, cos b, 0) and the v-axis is +z.
struct ScanGeometry {
  int num_views = 180;
  double start_angle_deg = 0.0;
  double angular_increment_deg = 200.0 / 180.0;
  double source_to_isocenter = 622.0;  // mm
  double source_to_detector = 1164.0;  // mm
  DetectorSpec detector;

  double view_angle(int view) const;  // radians
  double angular_range_deg() const { return num_views * angular_increment_deg; }
  Vec3 source_position(int view) const;
  /// Unit vector from the isocenter towards the source.
  Vec3 source_direction(int view) const;
  Vec3 detector_u_axis(int view) const;
  /// World position of the continuous detector coordinate (u, v).
  Vec3 detector_point(int view, PixelCoord pixel) const;
  /// Ray from the source through the center of pixel (row, col).
  Ray pixel_ray(int view, int row, int col) const;
  /// Full fan angle subtended by the detector width, radians.
  double fan_angle() const;
  /// Magnified size of one detector pixel at the isocenter, mm.
  double pitch_at_isocenter() const;

  void validate() const;

  bool operator==(const ScanGeometry&) const = default;
};

ScanGeometry make_circular_trajectory(int num_views, double start_angle_deg,
                                      double angular_increment_deg, double source_to_isocenter,
                                      double source_to_detector, const DetectorSpec& detector);

/// Desk-scale default: 256x256 detector, 180 views over 200 degrees.
ScanGeometry desk_scale_geometry();

/// Perspective projection of a world point onto a view's detector. Returns
/// nullopt for points at or behind the source.
std::optional<PixelCoord> project_point(const ScanGeometry& geom, int view, const Vec3& point);

/// Pixel the coordinate falls in, or nullopt outside the detector.
std::optional<PixelIndex> pixel_index(const DetectorSpec& det, PixelCoord pixel);

bool detector_contains(const DetectorSpec& det, PixelCoord pixel);
inline bool detector_contains(const ScanGeometry& geom, PixelCoord pixel) {
  return detector_contains(geom.detector, pixel);
}

/// Per-view quantities needed to project many points quickly.
struct ViewProjector {
  Vec3 source_dir;  // isocenter -> source, unit
  Vec3 u_axis;
  double sid = 0.0;
  double scale = 0.0;  // sdd / pitch
  double u0 = 0.0;
  double v0 = 0.0;

  ViewProjector(const ScanGeometry& geom, int view);

  /// Distance from the source plane, positive in front of the source.
  double depth(const Vec3& p) const { return sid - dot(p, source_dir); }
  std::optional<PixelCoord> operator()(const Vec3& p) const {
    const double d = depth(p);
    if (!(d > 0.0)) return std::nullopt;
    const double m = scale / d;
    return PixelCoord{u0 + dot(p, u_axis) * m, v0 + p.z * m};
  }
};

}  // namespace cfmar
