#pragma once

#include <cstdint>
#include <vector>

#include "cfmar/grid.hpp"
#include "cfmar/stacks.hpp"

namespace cfmar {

/// Per-voxel counts over all views: `hits` counts views whose 2D mask marks
/// the pixel the voxel projects to, `max_hits` counts views in which the
/// voxel projects onto the detector at all.
struct HitVolumes {
  GridSpec grid;
  int num_views = 0;
  std::vector<std::uint16_t> hits;
  std::vector<std::uint16_t> max_hits;

  /// hits / max_hits, 0 where the voxel is never seen.
  double normalized(std::size_t index) const {
    return max_hits[index] ? static_cast<double>(hits[index]) / max_hits[index] : 0.0;
  }
  Volume normalized_volume() const;
};

/// Reconstruction grid enlarged to cover metal outside the field of view:
/// the same spacing, with whole voxels of padding on every side so the
/// original grid is an exact sub-block. The default scales are
/// 1500/512 laterally and 600/512 axially.
GridSpec extended_grid(const GridSpec& recon, double lateral_scale = 1500.0 / 512.0,
                       double axial_scale = 600.0 / 512.0);

/// Padding, in voxels per side, of `extended` relative to `recon`.
std::array<int, 3> grid_padding(const GridSpec& recon, const GridSpec& extended);

HitVolumes accumulate_hits(const MaskStack& masks, const GridSpec& grid);

/// Minimum number of observing views a voxel needs to be kept: one tenth of
/// the scan.
inline int default_min_support(int num_views) { return num_views / 10 > 1 ? num_views / 10 : 1; }

/// Envelope: hits / max_hits >= tau and max_hits >= min_support.
Mask3D binarize_consistency(const HitVolumes& hits, double tau, int min_support);

/// Forward projection of a binary volume: a pixel is set when the ray
/// through its center crosses the box of any true voxel.
MaskStack reproject_mask(const Mask3D& mask, const ScanGeometry& geom);

struct ConsistencyResult {
  MaskStack masks;
  Mask3D envelope;
};

/// Back-projects the 2D masks into the extended grid, keeps voxels
/// supported by a fraction >= tau of the views that see them, and
/// reprojects that envelope into 2D. min_support < 0 selects the default.
ConsistencyResult consistency_filter(const MaskStack& masks, const GridSpec& extended, double tau,
                                     int min_support = -1);

}  // namespace cfmar
