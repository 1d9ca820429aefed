#include "cfmar/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace cfmar {

namespace {

template <class T>
Prf prf_counts(const std::vector<T>& pred, const std::vector<T>& truth) {
  Prf out;
  for (std::size_t n = 0; n < pred.size(); ++n) {
    const bool p = pred[n] != 0, t = truth[n] != 0;
    out.tp += p && t;
    out.fp += p && !t;
    out.fn += !p && t;
  }
  if (out.tp + out.fp) out.precision = static_cast<double>(out.tp) / static_cast<double>(out.tp + out.fp);
  if (out.tp + out.fn) out.recall = static_cast<double>(out.tp) / static_cast<double>(out.tp + out.fn);
  if (out.precision + out.recall > 0.0) out.f1 = 2.0 * out.precision * out.recall / (out.precision + out.recall);
  return out;
}

bool slice_has_metal(const Mask3D& mask, int k) {
  const auto s = mask.slice(k);
  return std::any_of(s.begin(), s.end(), [](std::uint8_t x) { return x != 0; });
}

// 1D valid-mode correlation along rows then columns.
std::vector<double> filter_valid(const std::vector<double>& img, int rows, int cols, const std::vector<double>& w) {
  const int W = static_cast<int>(w.size());
  const int oc = cols - W + 1, orow = rows - W + 1;
  std::vector<double> tmp(static_cast<std::size_t>(rows) * oc), out(static_cast<std::size_t>(orow) * oc);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < oc; ++c) {
      double acc = 0.0;
      for (int t = 0; t < W; ++t) acc += w[t] * img[static_cast<std::size_t>(r) * cols + c + t];
      tmp[static_cast<std::size_t>(r) * oc + c] = acc;
    }
  for (int r = 0; r < orow; ++r)
    for (int c = 0; c < oc; ++c) {
      double acc = 0.0;
      for (int t = 0; t < W; ++t) acc += w[t] * tmp[static_cast<std::size_t>(r + t) * oc + c];
      out[static_cast<std::size_t>(r) * oc + c] = acc;
    }
  return out;
}

}  // namespace

Mask3D joint_mask(const Mask3D& a, const Mask3D& b) {
  require_same_grid(a.grid, b.grid, "joint_mask");
  Mask3D out(a.grid, 0, ValueUnit::mask);
  for (std::size_t n = 0; n < out.data.size(); ++n) out.data[n] = (a.data[n] || b.data[n]) ? 1 : 0;
  return out;
}

void SliceReport::summarize() {
  std::vector<double> vals;
  for (const auto& s : slices)
    if (s.contains_metal && std::isfinite(s.value)) vals.push_back(s.value);
  aggregated = static_cast<int>(vals.size());
  if (vals.empty()) {
    mean = median = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  mean = std::accumulate(vals.begin(), vals.end(), 0.0) / static_cast<double>(vals.size());
  std::sort(vals.begin(), vals.end());
  const std::size_t h = vals.size() / 2;
  median = vals.size() % 2 ? vals[h] : 0.5 * (vals[h - 1] + vals[h]);
}

SliceReport masked_psnr(const Volume& test, const Volume& ref, const Mask3D& mask, double data_range) {
  require_same_grid(test.grid, ref.grid, "masked_psnr");
  require_same_grid(test.grid, mask.grid, "masked_psnr");
  require(data_range > 0.0, ErrorCode::parameter, "data range must be > 0");
  SliceReport rep;
  for (int k = 0; k < test.grid.dims[2]; ++k) {
    const auto a = test.slice(k), b = ref.slice(k);
    const auto m = mask.slice(k);
    double se = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (m[i]) continue;
      const double d = a[i] - b[i];
      se += d * d;
      ++n;
    }
    double value = std::numeric_limits<double>::quiet_NaN();
    if (n) {
      const double mse = se / static_cast<double>(n);
      value = mse > 0.0 ? 10.0 * std::log10(data_range * data_range / mse) : std::numeric_limits<double>::infinity();
    }
    rep.slices.push_back({k, value, slice_has_metal(mask, k)});
  }
  rep.summarize();
  return rep;
}

double ssim_2d(std::span<const double> a, std::span<const double> b, int rows, int cols, const SsimParams& p) {
  require(p.window >= 1 && p.window % 2 == 1, ErrorCode::parameter, "SSIM window must be odd");
  require(rows >= p.window && cols >= p.window, ErrorCode::contract, "image smaller than the SSIM window");
  require(p.data_range > 0.0 && p.sigma > 0.0, ErrorCode::parameter, "SSIM range and sigma must be > 0");
  std::vector<double> w(p.window);
  const int h = p.window / 2;
  double total = 0.0;
  for (int t = -h; t <= h; ++t) total += w[t + h] = std::exp(-0.5 * t * t / (p.sigma * p.sigma));
  for (double& x : w) x /= total;
  const std::size_t n = static_cast<std::size_t>(rows) * cols;
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end()), xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mx = filter_valid(x, rows, cols, w), my = filter_valid(y, rows, cols, w);
  const auto sxx = filter_valid(xx, rows, cols, w), syy = filter_valid(yy, rows, cols, w),
             sxy = filter_valid(xy, rows, cols, w);
  const double c1 = std::pow(p.k1 * p.data_range, 2), c2 = std::pow(p.k2 * p.data_range, 2);
  double acc = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i], vy = syy[i] - my[i] * my[i], cxy = sxy[i] - mx[i] * my[i];
    acc += (2 * mx[i] * my[i] + c1) * (2 * cxy + c2) / ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return acc / static_cast<double>(mx.size());
}

SliceReport masked_ssim(const Volume& test, const Volume& ref, const Mask3D& mask, const SsimParams& params) {
  require_same_grid(test.grid, ref.grid, "masked_ssim");
  require_same_grid(test.grid, mask.grid, "masked_ssim");
  const int nx = test.grid.dims[0], ny = test.grid.dims[1];
  SliceReport rep;
  rep.slices.resize(test.grid.dims[2]);
#pragma omp parallel for schedule(dynamic)
  for (int k = 0; k < test.grid.dims[2]; ++k) {
    const auto a = test.slice(k), b = ref.slice(k);
    const auto m = mask.slice(k);
    std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
    for (std::size_t i = 0; i < x.size(); ++i)
      if (m[i]) x[i] = y[i] = 0.0;
    rep.slices[k] = {k, ssim_2d(x, y, ny, nx, params), slice_has_metal(mask, k)};
  }
  rep.summarize();
  return rep;
}

Prf mask_prf(const MaskStack& predicted, const MaskStack& truth) {
  require_same_layout(predicted, truth, "mask_prf");
  return prf_counts(predicted.data, truth.data);
}

Prf mask_prf(const Mask3D& predicted, const Mask3D& truth) {
  require_same_grid(predicted.grid, truth.grid, "mask_prf");
  return prf_counts(predicted.data, truth.data);
}

std::optional<double> roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  require(scores.size() == labels.size(), ErrorCode::contract, "score and label counts differ");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t t = i; t < j; ++t)
      if (labels[order[t]]) {
        pos_rank_sum += midrank;
        ++n_pos;
      }
    i = j;
  }
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;
  const double np = static_cast<double>(n_pos);
  return (pos_rank_sum - np * (np + 1) / 2) / (np * static_cast<double>(n_neg));
}

std::optional<double> roc_auc(const ScoreStack& scores, const MaskStack& truth) {
  require_same_layout(scores, truth, "roc_auc");
  return roc_auc(std::span<const double>(scores.data), std::span<const std::uint8_t>(truth.data));
}

}  // namespace cfmar
