#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cfmar/grid.hpp"

namespace cfmar {

/// Display window in HU, parsed from "wmin,wmax".
struct HuWindow {
  double lo = -1000.0;
  double hi = 3000.0;

  static HuWindow parse(std::string_view text);
  std::uint8_t gray(double value) const;
};

/// 8-bit grayscale or RGB image, rows top to bottom.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> pixels;
};

void write_png(const std::filesystem::path& path, const Image& image);

/// Axial slice k, x to the right and y downwards.
Image axial_slice_image(const Volume& volume, int k, const HuWindow& window);
void export_axial_slice_png(const std::filesystem::path& path, const Volume& volume, int k, const HuWindow& window);

struct PlotSeries {
  std::string name;
  std::vector<double> values;  // one per slice, non-finite values leave gaps
};

/// Colour used for the i-th series of a slice plot.
std::array<std::uint8_t, 3> plot_color(std::size_t i);

/// Line plot of per-slice values (slice index on x). Slices flagged in
/// `highlight` get a light background band. No text is drawn; the y range
/// is [y_lo, y_hi] with a grid line at every `y_step`.
Image slice_plot(const std::vector<PlotSeries>& series, const std::vector<bool>& highlight, double y_lo, double y_hi,
                 double y_step, int width = 800, int height = 400);

}  // namespace cfmar
