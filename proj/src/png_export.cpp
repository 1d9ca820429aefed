#include "cfmar/png_export.hpp"

#include <png.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <memory>

#include "cfmar/error.hpp"

namespace cfmar {

namespace {

double parse_number(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  require(ec == std::errc{} && ptr == s.data() + s.size(), ErrorCode::parameter,
          "bad number '" + std::string(s) + "' in window");
  return v;
}

struct Canvas {
  Image img;
  void put(int x, int y, std::array<std::uint8_t, 3> c) {
    if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
    auto* p = &img.pixels[(static_cast<std::size_t>(y) * img.width + x) * 3];
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  }
  void line(double x0, double y0, double x1, double y1, std::array<std::uint8_t, 3> c) {
    const int steps = std::max(1, static_cast<int>(std::ceil(std::max(std::abs(x1 - x0), std::abs(y1 - y0)))));
    for (int s = 0; s <= steps; ++s) {
      const double t = static_cast<double>(s) / steps;
      const int x = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
      const int y = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
      put(x, y, c);
      put(x, y + 1, c);
    }
  }
};

}  // namespace

HuWindow HuWindow::parse(std::string_view text) {
  const auto comma = text.find(',');
  require(comma != std::string_view::npos, ErrorCode::parameter, "window must be \"wmin,wmax\"");
  HuWindow w{parse_number(text.substr(0, comma)), parse_number(text.substr(comma + 1))};
  require(w.hi > w.lo, ErrorCode::parameter, "window needs wmax > wmin");
  return w;
}

std::uint8_t HuWindow::gray(double value) const {
  if (!(value > lo)) return 0;
  if (value >= hi) return 255;
  return static_cast<std::uint8_t>(std::lround(255.0 * (value - lo) / (hi - lo)));
}

void write_png(const std::filesystem::path& path, const Image& image) {
  require(image.width > 0 && image.height > 0, ErrorCode::contract, "empty image");
  require(image.channels == 1 || image.channels == 3, ErrorCode::contract, "image must be gray or RGB");
  require(image.pixels.size() == static_cast<std::size_t>(image.width) * image.height * image.channels,
          ErrorCode::contract, "image buffer size mismatch");
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "wb"), &std::fclose);
  require(fp != nullptr, ErrorCode::io, "cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  require(png != nullptr, ErrorCode::io, "libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorCode::io, "failed writing " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, image.width, image.height, 8, image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(image.width) * image.channels;
  for (int y = 0; y < image.height; ++y) png_write_row(png, image.pixels.data() + y * stride);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image axial_slice_image(const Volume& volume, int k, const HuWindow& window) {
  const auto& g = volume.grid;
  require(k >= 0 && k < g.dims[2], ErrorCode::parameter, "slice index out of range");
  Image img{g.dims[0], g.dims[1], 1, {}};
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
  for (int j = 0; j < g.dims[1]; ++j)
    for (int i = 0; i < g.dims[0]; ++i)
      img.pixels[static_cast<std::size_t>(j) * img.width + i] = window.gray(volume.data[g.index(i, j, k)]);
  return img;
}

void export_axial_slice_png(const std::filesystem::path& path, const Volume& volume, int k, const HuWindow& window) {
  write_png(path, axial_slice_image(volume, k, window));
}

std::array<std::uint8_t, 3> plot_color(std::size_t i) {
  static constexpr std::array<std::array<std::uint8_t, 3>, 6> palette{{
      {31, 119, 180}, {214, 39, 40}, {44, 160, 44}, {255, 127, 14}, {148, 103, 189}, {140, 86, 75}}};
  return palette[i % palette.size()];
}

Image slice_plot(const std::vector<PlotSeries>& series, const std::vector<bool>& highlight, double y_lo, double y_hi,
                 double y_step, int width, int height) {
  require(width >= 64 && height >= 64, ErrorCode::parameter, "plot too small");
  require(y_hi > y_lo && y_step > 0.0, ErrorCode::parameter, "bad plot range");
  std::size_t n = highlight.size();
  for (const auto& s : series) n = std::max(n, s.values.size());
  Canvas cv{{width, height, 3, std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height * 3, 255)}};
  const int margin = 16;
  const double pw = width - 2 * margin, ph = height - 2 * margin;
  auto px = [&](double k) { return margin + (n > 1 ? k / (n - 1) : 0.5) * pw; };
  auto py = [&](double v) { return margin + (1.0 - (std::clamp(v, y_lo, y_hi) - y_lo) / (y_hi - y_lo)) * ph; };

  const double band = n > 1 ? pw / (n - 1) : pw;
  for (std::size_t k = 0; k < highlight.size(); ++k) {
    if (!highlight[k]) continue;
    const int x0 = static_cast<int>(std::floor(px(static_cast<double>(k)) - band / 2));
    const int x1 = static_cast<int>(std::ceil(px(static_cast<double>(k)) + band / 2));
    for (int x = x0; x <= x1; ++x)
      for (int y = margin; y <= height - margin; ++y) cv.put(x, y, {235, 235, 235});
  }
  for (double v = std::ceil(y_lo / y_step) * y_step; v <= y_hi + 1e-12; v += y_step)
    cv.line(margin, py(v), width - margin, py(v), {200, 200, 200});
  cv.line(margin, margin, margin, height - margin, {0, 0, 0});
  cv.line(margin, height - margin, width - margin, height - margin, {0, 0, 0});

  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& v = series[s].values;
    for (std::size_t k = 0; k + 1 < v.size(); ++k) {
      if (!std::isfinite(v[k]) || !std::isfinite(v[k + 1])) continue;
      cv.line(px(static_cast<double>(k)), py(v[k]), px(static_cast<double>(k + 1)), py(v[k + 1]), plot_color(s));
    }
  }
  return cv.img;
}

}  // namespace cfmar
