#include "cfmar/segmentation_3d.hpp"

#include <vector>

#include "cfmar/consistency_filter.hpp"

namespace cfmar {

Mask3D remove_small_components(const Mask3D& mask, int min_size) {
  require(min_size >= 1, ErrorCode::parameter, "min component size must be >= 1");
  const GridSpec& g = mask.grid;
  Mask3D out = mask;
  if (min_size == 1) return out;
  std::vector<std::uint8_t> seen(mask.data.size(), 0);
  std::vector<std::size_t> component, stack;
  const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
  for (std::size_t start = 0; start < mask.data.size(); ++start) {
    if (!mask.data[start] || seen[start]) continue;
    component.clear();
    stack.assign(1, start);
    seen[start] = 1;
    while (!stack.empty()) {
      const std::size_t n = stack.back();
      stack.pop_back();
      component.push_back(n);
      const int i = static_cast<int>(n % nx), j = static_cast<int>((n / nx) % ny), k = static_cast<int>(n / (static_cast<std::size_t>(nx) * ny));
      for (int dk = -1; dk <= 1; ++dk)
        for (int dj = -1; dj <= 1; ++dj)
          for (int di = -1; di <= 1; ++di) {
            const int a = i + di, b = j + dj, c = k + dk;
            if (a < 0 || b < 0 || c < 0 || a >= nx || b >= ny || c >= nz) continue;
            const std::size_t m = g.index(a, b, c);
            if (mask.data[m] && !seen[m]) {
              seen[m] = 1;
              stack.push_back(m);
            }
          }
    }
    if (static_cast<int>(component.size()) < min_size)
      for (std::size_t n : component) out.data[n] = 0;
  }
  return out;
}

Mask3D threshold_segment_3d(const Volume& hu, double threshold_hu, int min_component_size) {
  Mask3D mask(hu.grid, 0, ValueUnit::mask);
  for (std::size_t n = 0; n < hu.data.size(); ++n) mask.data[n] = hu.data[n] >= threshold_hu ? 1 : 0;
  return remove_small_components(mask, min_component_size);
}

MaskStack forward_project_mask3d(const Mask3D& mask, const ScanGeometry& geom) { return reproject_mask(mask, geom); }

}  // namespace cfmar
