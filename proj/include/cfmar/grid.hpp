#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cfmar/error.hpp"
#include "cfmar/vec.hpp"

namespace cfmar {

/// Regular voxel grid. `origin` is the center of voxel (0, 0, 0); x varies
/// fastest in memory.
struct GridSpec {
  std::array<int, 3> dims{128, 128, 128};
  std::array<double, 3> spacing{1.25, 1.25, 1.25};  // mm
  std::array<double, 3> origin{0.0, 0.0, 0.0};      // mm

  /// Grid of the given size centered on the isocenter.
  static GridSpec centered(std::array<int, 3> dims, std::array<double, 3> spacing);

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(dims[2]);
  }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * dims[1] + j) * dims[0] + i;
  }
  Vec3 center(int i, int j, int k) const {
    return {origin[0] + i * spacing[0], origin[1] + j * spacing[1], origin[2] + k * spacing[2]};
  }
  double voxel_volume() const { return spacing[0] * spacing[1] * spacing[2]; }
  double min_spacing() const;
  /// Axis-aligned bounds of the voxel boxes (centers +- spacing / 2).
  Vec3 lower_corner() const;
  Vec3 upper_corner() const;

  void validate() const;

  bool operator==(const GridSpec&) const = default;
};

enum class ValueUnit { none, attenuation, hounsfield, mask, count };

template <class T>
struct VoxelGrid {
  GridSpec grid;
  std::vector<T> data;
  ValueUnit unit = ValueUnit::none;

  VoxelGrid() = default;
  explicit VoxelGrid(const GridSpec& g, T fill = T{}, ValueUnit u = ValueUnit::none)
      : grid(g), data(g.voxel_count(), fill), unit(u) {}

  T& at(int i, int j, int k) { return data[grid.index(i, j, k)]; }
  const T& at(int i, int j, int k) const { return data[grid.index(i, j, k)]; }

  std::span<T> slice(int k) {
    const std::size_t n = static_cast<std::size_t>(grid.dims[0]) * grid.dims[1];
    return {data.data() + k * n, n};
  }
  std::span<const T> slice(int k) const {
    const std::size_t n = static_cast<std::size_t>(grid.dims[0]) * grid.dims[1];
    return {data.data() + k * n, n};
  }
};

/// Scalar volume, attenuation in 1/mm or Hounsfield units.
using Volume = VoxelGrid<double>;
/// Binary volume, 0 or 1 per voxel.
using Mask3D = VoxelGrid<std::uint8_t>;

inline void require_same_grid(const GridSpec& a, const GridSpec& b, const char* what) {
  require(a == b, ErrorCode::grid_mismatch, std::string(what) + ": grids differ");
}

std::size_t count_true(const Mask3D& mask);

/// Nearest-voxel resampling of a mask onto another grid with the same
/// spacing (exact when the voxel centers coincide).
Mask3D resample_nearest(const Mask3D& mask, const GridSpec& target);

}  // namespace cfmar
