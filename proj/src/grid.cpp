#include "cfmar/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cfmar/stacks.hpp"

namespace cfmar {

GridSpec GridSpec::centered(std::array<int, 3> dims, std::array<double, 3> spacing) {
  GridSpec g{dims, spacing, {}};
  for (int a = 0; a < 3; ++a) g.origin[a] = -0.5 * (dims[a] - 1) * spacing[a];
  return g;
}

double GridSpec::min_spacing() const { return std::min({spacing[0], spacing[1], spacing[2]}); }

Vec3 GridSpec::lower_corner() const {
  return {origin[0] - 0.5 * spacing[0], origin[1] - 0.5 * spacing[1], origin[2] - 0.5 * spacing[2]};
}

Vec3 GridSpec::upper_corner() const {
  return {origin[0] + (dims[0] - 0.5) * spacing[0], origin[1] + (dims[1] - 0.5) * spacing[1],
          origin[2] + (dims[2] - 0.5) * spacing[2]};
}

void GridSpec::validate() const {
  for (int a = 0; a < 3; ++a) {
    require(dims[a] >= 1, ErrorCode::parameter, "grid dims must be >= 1");
    require(spacing[a] > 0.0 && std::isfinite(spacing[a]), ErrorCode::parameter, "grid spacing must be > 0");
    require(std::isfinite(origin[a]), ErrorCode::parameter, "grid origin must be finite");
  }
}

std::size_t count_true(const Mask3D& mask) {
  return static_cast<std::size_t>(std::count_if(mask.data.begin(), mask.data.end(), [](auto v) { return v != 0; }));
}

std::size_t count_true(const MaskStack& masks) {
  return static_cast<std::size_t>(
      std::count_if(masks.data.begin(), masks.data.end(), [](auto v) { return v != 0; }));
}

Mask3D resample_nearest(const Mask3D& mask, const GridSpec& target) {
  Mask3D out(target, 0, ValueUnit::mask);
  const GridSpec& src = mask.grid;
  std::array<std::vector<int>, 3> lut;
  for (int a = 0; a < 3; ++a) {
    lut[a].resize(target.dims[a]);
    for (int i = 0; i < target.dims[a]; ++i) {
      const double pos = target.origin[a] + i * target.spacing[a];
      const double f = (pos - src.origin[a]) / src.spacing[a];
      const long idx = std::lround(f);
      lut[a][i] = (idx >= 0 && idx < src.dims[a]) ? static_cast<int>(idx) : -1;
    }
  }
  for (int k = 0; k < target.dims[2]; ++k) {
    if (lut[2][k] < 0) continue;
    for (int j = 0; j < target.dims[1]; ++j) {
      if (lut[1][j] < 0) continue;
      for (int i = 0; i < target.dims[0]; ++i) {
        if (lut[0][i] < 0) continue;
        out.at(i, j, k) = mask.at(lut[0][i], lut[1][j], lut[2][k]);
      }
    }
  }
  return out;
}

}  // namespace cfmar
