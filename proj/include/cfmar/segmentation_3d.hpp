#pragma once

#include "cfmar/grid.hpp"
#include "cfmar/stacks.hpp"

namespace cfmar {

/// Voxels >= threshold_hu, with 26-connected components smaller than
/// min_component_size voxels removed.
Mask3D threshold_segment_3d(const Volume& hounsfield, double threshold_hu = 3000.0, int min_component_size = 10);

/// Removes 26-connected components with fewer than min_size voxels.
Mask3D remove_small_components(const Mask3D& mask, int min_size);

/// 2D masks of the rays through the 3D mask.
MaskStack forward_project_mask3d(const Mask3D& mask, const ScanGeometry& geom);

}  // namespace cfmar
