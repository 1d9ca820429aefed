#include "cfmar/segmentation_2d.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace cfmar {

namespace {

constexpr std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Median background of one view: block-mean decimation, windowed median on
// the coarse grid (edge replicated), bilinear upsampling to pixel centers.
void median_background(std::span<const double> img, int rows, int cols, const HeuristicParams& hp,
                       std::vector<double>& out) {
  const int f = hp.decimation;
  const int sr = (rows + f - 1) / f, sc = (cols + f - 1) / f;
  std::vector<double> small(static_cast<std::size_t>(sr) * sc);
  for (int i = 0; i < sr; ++i) {
    for (int j = 0; j < sc; ++j) {
      double acc = 0.0;
      int n = 0;
      for (int r = i * f; r < std::min(rows, (i + 1) * f); ++r)
        for (int c = j * f; c < std::min(cols, (j + 1) * f); ++c, ++n) acc += img[static_cast<std::size_t>(r) * cols + c];
      small[static_cast<std::size_t>(i) * sc + j] = acc / n;
    }
  }
  const int h = hp.median_window / 2;
  std::vector<double> med(small.size()), window;
  window.reserve(static_cast<std::size_t>(hp.median_window) * hp.median_window);
  for (int i = 0; i < sr; ++i) {
    for (int j = 0; j < sc; ++j) {
      window.clear();
      for (int di = -h; di <= h; ++di) {
        const int ii = std::clamp(i + di, 0, sr - 1);
        for (int dj = -h; dj <= h; ++dj) window.push_back(small[static_cast<std::size_t>(ii) * sc + std::clamp(j + dj, 0, sc - 1)]);
      }
      auto mid = window.begin() + window.size() / 2;
      std::nth_element(window.begin(), mid, window.end());
      med[static_cast<std::size_t>(i) * sc + j] = *mid;
    }
  }
  out.resize(img.size());
  for (int r = 0; r < rows; ++r) {
    const double y = std::clamp((r + 0.5) / f - 0.5, 0.0, sr - 1.0);
    const int y0 = std::min(static_cast<int>(y), sr - 1), y1 = std::min(y0 + 1, sr - 1);
    const double wy = y - y0;
    for (int c = 0; c < cols; ++c) {
      const double x = std::clamp((c + 0.5) / f - 0.5, 0.0, sc - 1.0);
      const int x0 = std::min(static_cast<int>(x), sc - 1), x1 = std::min(x0 + 1, sc - 1);
      const double wx = x - x0;
      const double top = med[static_cast<std::size_t>(y0) * sc + x0] * (1 - wx) + med[static_cast<std::size_t>(y0) * sc + x1] * wx;
      const double bot = med[static_cast<std::size_t>(y1) * sc + x0] * (1 - wx) + med[static_cast<std::size_t>(y1) * sc + x1] * wx;
      out[static_cast<std::size_t>(r) * cols + c] = top * (1 - wy) + bot * wy;
    }
  }
}

std::vector<int> pick_views(int views, double fraction, std::mt19937_64& rng) {
  std::vector<int> order(views);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(static_cast<std::size_t>(std::lround(fraction * views)));
  return order;
}

}  // namespace

MaskStack generate_gt_labels(const ProjectionStack& with_metal, const ProjectionStack& metal_free,
                             double ratio_threshold) {
  require(with_metal.kind == ProjectionKind::raw_intensity && metal_free.kind == ProjectionKind::raw_intensity,
          ErrorCode::contract, "ground-truth labels need raw-intensity stacks");
  require_same_layout(with_metal, metal_free, "generate_gt_labels");
  require(ratio_threshold > 0.0, ErrorCode::parameter, "ratio threshold must be > 0");
  MaskStack out(with_metal.geometry);
  for (std::size_t n = 0; n < out.data.size(); ++n) {
    require(metal_free.data[n] > 0.0, ErrorCode::contract, "metal-free intensities must be positive");
    out.data[n] = with_metal.data[n] / metal_free.data[n] < ratio_threshold ? 1 : 0;
  }
  return out;
}

ScoreStack heuristic_segment(const ProjectionStack& li, const HeuristicParams& hp) {
  require(li.kind == ProjectionKind::line_integral, ErrorCode::contract, "heuristic_segment expects line integrals");
  require(hp.median_window >= 1 && hp.median_window % 2 == 1, ErrorCode::parameter, "median window must be odd");
  require(hp.decimation >= 1, ErrorCode::parameter, "decimation must be >= 1");
  require(hp.gain > 0.0, ErrorCode::parameter, "gain must be > 0");
  require(hp.dilation >= 0, ErrorCode::parameter, "dilation must be >= 0");
  ScoreStack out(li.geometry);
  const double saturated = hp.saturation_margin >= 0.0 && !li.data.empty()
                               ? *std::max_element(li.data.begin(), li.data.end()) - hp.saturation_margin
                               : std::numeric_limits<double>::infinity();
#pragma omp parallel for schedule(dynamic)
  for (int v = 0; v < li.views(); ++v) {
    std::vector<double> bg;
    const auto img = li.view(v);
    median_background(img, li.rows(), li.cols(), hp, bg);
    auto dst = out.view(v);
    for (std::size_t n = 0; n < img.size(); ++n) {
      dst[n] = hp.gain * (img[n] - bg[n] - hp.offset);
      if (img[n] >= saturated) dst[n] = std::max(dst[n], hp.gain);
    }
    if (hp.dilation > 0) {
      const std::vector<double> raw(dst.begin(), dst.end());
      const int rows = li.rows(), cols = li.cols(), d = hp.dilation;
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
          double best = raw[static_cast<std::size_t>(r) * cols + c];
          for (int dr = -d; dr <= d; ++dr)
            for (int dc = -d; dc <= d; ++dc) {
              const int rr = r + dr, cc = c + dc;
              if (dr * dr + dc * dc > d * d || rr < 0 || cc < 0 || rr >= rows || cc >= cols) continue;
              best = std::max(best, raw[static_cast<std::size_t>(rr) * cols + cc]);
            }
          dst[static_cast<std::size_t>(r) * cols + c] = best;
        }
    }
  }
  return out;
}

MaskStack binarize(const ScoreStack& scores, double threshold) {
  MaskStack out(scores.geometry);
  for (std::size_t n = 0; n < out.data.size(); ++n) out.data[n] = scores.data[n] > threshold ? 1 : 0;
  return out;
}

void PerturbationSpec::validate() const {
  require(fp_blob_count >= 0, ErrorCode::parameter, "fp_blob_count must be >= 0");
  require(fp_blob_radius >= 0.0, ErrorCode::parameter, "fp_blob_radius must be >= 0");
  require(fn_erosion >= 0, ErrorCode::parameter, "fn_erosion must be >= 0");
  require(fp_view_fraction >= 0.0 && fp_view_fraction <= 1.0, ErrorCode::parameter, "fp_view_fraction must be in [0,1]");
  require(fn_view_fraction >= 0.0 && fn_view_fraction <= 1.0, ErrorCode::parameter, "fn_view_fraction must be in [0,1]");
  require(fp_clearance >= 0.0, ErrorCode::parameter, "fp_clearance must be >= 0");
}

PerturbedMasks perturb_masks_tracked(const MaskStack& masks, const PerturbationSpec& spec) {
  spec.validate();
  PerturbedMasks out{masks, MaskStack(masks.geometry), MaskStack(masks.geometry)};
  const int rows = masks.rows(), cols = masks.cols();
  std::mt19937_64 picker(mix(spec.rng_seed));
  const std::vector<int> fp_views = pick_views(masks.views(), spec.fp_view_fraction, picker);
  const std::vector<int> fn_views = pick_views(masks.views(), spec.fn_view_fraction, picker);

  if (spec.fn_erosion > 0) {
    const int e = spec.fn_erosion;
    for (int v : fn_views) {
      const auto src = masks.view(v);
      auto dst = out.masks.view(v);
      auto rem = out.removed.view(v);
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
          const std::size_t n = static_cast<std::size_t>(r) * cols + c;
          if (!src[n]) continue;
          bool keep = true;
          for (int dr = -e; dr <= e && keep; ++dr) {
            for (int dc = -e; dc <= e && keep; ++dc) {
              if (dr * dr + dc * dc > e * e) continue;
              const int rr = r + dr, cc = c + dc;
              if (rr < 0 || cc < 0 || rr >= rows || cc >= cols) continue;
              keep = src[static_cast<std::size_t>(rr) * cols + cc] != 0;
            }
          }
          if (!keep) {
            dst[n] = 0;
            rem[n] = 1;
          }
        }
      }
    }
  }

  if (spec.fp_blob_count > 0) {
    const double rad = spec.fp_blob_radius;
    const double reach = rad + spec.fp_clearance;
    const int ireach = static_cast<int>(std::ceil(reach));
    for (int v : fp_views) {
      std::mt19937_64 rng(mix(mix(spec.rng_seed) ^ (0x51ED270B0A1ULL + static_cast<std::uint64_t>(v))));
      std::uniform_real_distribution<double> ur(0.0, rows), uc(0.0, cols);
      const auto src = masks.view(v);
      auto dst = out.masks.view(v);
      auto inj = out.injected.view(v);
      for (int b = 0; b < spec.fp_blob_count; ++b) {
        for (int attempt = 0; attempt < 200; ++attempt) {
          const double cy = ur(rng), cx = uc(rng);
          bool clear = true;
          for (int r = static_cast<int>(cy) - ireach; r <= static_cast<int>(cy) + ireach && clear; ++r) {
            for (int c = static_cast<int>(cx) - ireach; c <= static_cast<int>(cx) + ireach && clear; ++c) {
              if (r < 0 || c < 0 || r >= rows || c >= cols) continue;
              const double dy = r + 0.5 - cy, dx = c + 0.5 - cx;
              if (dy * dy + dx * dx <= reach * reach && src[static_cast<std::size_t>(r) * cols + c]) clear = false;
            }
          }
          if (!clear) continue;
          const int irad = static_cast<int>(std::ceil(rad));
          for (int r = static_cast<int>(cy) - irad; r <= static_cast<int>(cy) + irad; ++r) {
            for (int c = static_cast<int>(cx) - irad; c <= static_cast<int>(cx) + irad; ++c) {
              if (r < 0 || c < 0 || r >= rows || c >= cols) continue;
              const double dy = r + 0.5 - cy, dx = c + 0.5 - cx;
              if (dy * dy + dx * dx > rad * rad) continue;
              const std::size_t n = static_cast<std::size_t>(r) * cols + c;
              dst[n] = 1;
              inj[n] = 1;
            }
          }
          break;
        }
      }
    }
  }
  return out;
}

}  // namespace cfmar
