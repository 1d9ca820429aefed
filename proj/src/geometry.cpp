#include "cfmar/geometry.hpp"

#include <cmath>
#include <string>

#include "cfmar/error.hpp"

namespace cfmar {

DetectorSpec DetectorSpec::centered(int rows, int cols, double pixel_pitch) {
  return DetectorSpec{rows, cols, pixel_pitch, cols / 2.0, rows / 2.0};
}

double ScanGeometry::view_angle(int view) const {
  return deg_to_rad(start_angle_deg + view * angular_increment_deg);
}

Vec3 ScanGeometry::source_direction(int view) const {
  const double b = view_angle(view);
  return {std::cos(b), std::sin(b), 0.0};
}

Vec3 ScanGeometry::source_position(int view) const {
  return source_to_isocenter * source_direction(view);
}

Vec3 ScanGeometry::detector_u_axis(int view) const {
  const double b = view_angle(view);
  return {-std::sin(b), std::cos(b), 0.0};
}

Vec3 ScanGeometry::detector_point(int view, PixelCoord pixel) const {
  const Vec3 e = source_direction(view);
  const Vec3 center = (source_to_isocenter - source_to_detector) * e;
  const double du = (pixel.u - detector.u0) * detector.pixel_pitch;
  const double dv = (pixel.v - detector.v0) * detector.pixel_pitch;
  return center + du * detector_u_axis(view) + Vec3{0.0, 0.0, dv};
}

Ray ScanGeometry::pixel_ray(int view, int row, int col) const {
  const Vec3 s = source_position(view);
  const Vec3 target = detector_point(view, {col + 0.5, row + 0.5});
  return {s, normalized(target - s)};
}

double ScanGeometry::fan_angle() const {
  const double left = detector.u0 * detector.pixel_pitch;
  const double right = (detector.cols - detector.u0) * detector.pixel_pitch;
  return std::atan(left / source_to_detector) + std::atan(right / source_to_detector);
}

double ScanGeometry::pitch_at_isocenter() const {
  return detector.pixel_pitch * source_to_isocenter / source_to_detector;
}

void ScanGeometry::validate() const {
  require(num_views >= 1, ErrorCode::parameter, "num_views must be >= 1");
  require(angular_increment_deg > 0.0, ErrorCode::parameter, "angular_increment must be > 0");
  require(source_to_isocenter > 0.0 && source_to_isocenter < source_to_detector, ErrorCode::parameter,
          "require 0 < source_to_isocenter < source_to_detector");
  require(detector.rows >= 1 && detector.cols >= 1, ErrorCode::parameter, "detector rows/cols must be >= 1");
  require(detector.pixel_pitch > 0.0, ErrorCode::parameter, "pixel_pitch must be > 0");
  require(std::isfinite(start_angle_deg) && std::isfinite(detector.u0) && std::isfinite(detector.v0),
          ErrorCode::parameter, "geometry values must be finite");
}

ScanGeometry make_circular_trajectory(int num_views, double start_angle_deg, double angular_increment_deg,
                                      double source_to_isocenter, double source_to_detector,
                                      const DetectorSpec& detector) {
  ScanGeometry g{num_views, start_angle_deg, angular_increment_deg, source_to_isocenter, source_to_detector,
                 detector};
  g.validate();
  return g;
}

ScanGeometry desk_scale_geometry() {
  return make_circular_trajectory(180, 0.0, 200.0 / 180.0, 622.0, 1164.0, DetectorSpec::centered(256, 256, 1.2));
}

std::optional<PixelCoord> project_point(const ScanGeometry& geom, int view, const Vec3& point) {
  return ViewProjector(geom, view)(point);
}

std::optional<PixelIndex> pixel_index(const DetectorSpec& det, PixelCoord pixel) {
  if (!(pixel.u >= 0.0 && pixel.u < det.cols && pixel.v >= 0.0 && pixel.v < det.rows)) return std::nullopt;
  return PixelIndex{static_cast<int>(pixel.v), static_cast<int>(pixel.u)};
}

bool detector_contains(const DetectorSpec& det, PixelCoord pixel) { return pixel_index(det, pixel).has_value(); }

ViewProjector::ViewProjector(const ScanGeometry& geom, int view)
    : source_dir(geom.source_direction(view)),
      u_axis(geom.detector_u_axis(view)),
      sid(geom.source_to_isocenter),
      scale(geom.source_to_detector / geom.detector.pixel_pitch),
      u0(geom.detector.u0),
      v0(geom.detector.v0) {}

}  // namespace cfmar
