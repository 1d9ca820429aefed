#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cfmar/error.hpp"
#include "cfmar/geometry.hpp"

namespace cfmar {

/// One detector image per view, stored view-major then row-major.
template <class T>
struct DetectorStack {
  ScanGeometry geometry;
  std::vector<T> data;

  DetectorStack() = default;
  explicit DetectorStack(const ScanGeometry& g, T fill = T{})
      : geometry(g), data(static_cast<std::size_t>(g.num_views) * g.detector.rows * g.detector.cols, fill) {}

  int views() const { return geometry.num_views; }
  int rows() const { return geometry.detector.rows; }
  int cols() const { return geometry.detector.cols; }
  std::size_t pixels_per_view() const { return static_cast<std::size_t>(rows()) * cols(); }

  std::span<T> view(int v) { return {data.data() + v * pixels_per_view(), pixels_per_view()}; }
  std::span<const T> view(int v) const { return {data.data() + v * pixels_per_view(), pixels_per_view()}; }

  T& at(int v, int r, int c) { return data[v * pixels_per_view() + static_cast<std::size_t>(r) * cols() + c]; }
  const T& at(int v, int r, int c) const {
    return data[v * pixels_per_view() + static_cast<std::size_t>(r) * cols() + c];
  }
};

enum class ProjectionKind { line_integral, raw_intensity };

struct ProjectionStack : DetectorStack<double> {
  ProjectionKind kind = ProjectionKind::line_integral;
  double i0 = 0.0;  // photons per pixel for raw_intensity stacks

  ProjectionStack() = default;
  ProjectionStack(const ScanGeometry& g, ProjectionKind k, double i0_ = 0.0)
      : DetectorStack<double>(g), kind(k), i0(i0_) {}
};

/// Real-valued per-pixel metal scores, higher = more metal-like.
struct ScoreStack : DetectorStack<double> {
  using DetectorStack<double>::DetectorStack;
};

/// Binary per-view masks, 0 or 1.
struct MaskStack : DetectorStack<std::uint8_t> {
  using DetectorStack<std::uint8_t>::DetectorStack;
};

template <class A, class B>
void require_same_layout(const DetectorStack<A>& a, const DetectorStack<B>& b, const char* what) {
  require(a.geometry == b.geometry, ErrorCode::contract, std::string(what) + ": stack geometries differ");
}

std::size_t count_true(const MaskStack& masks);

}  // namespace cfmar
