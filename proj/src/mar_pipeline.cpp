#include "cfmar/mar_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "cfmar/consistency_filter.hpp"
#include "cfmar/forward_model.hpp"
#include "cfmar/recon_fdk.hpp"
#include "cfmar/segmentation_2d.hpp"
#include "cfmar/segmentation_3d.hpp"

namespace cfmar {

namespace {

// Linear interpolation along each row. Returns false if some row has no
// unmasked pixel.
bool inpaint_rows(std::span<double> img, std::span<const std::uint8_t> mask, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    double* row = img.data() + static_cast<std::size_t>(r) * cols;
    const std::uint8_t* m = mask.data() + static_cast<std::size_t>(r) * cols;
    if (std::all_of(m, m + cols, [](std::uint8_t x) { return x != 0; })) return false;
    int c = 0;
    while (c < cols) {
      if (!m[c]) {
        ++c;
        continue;
      }
      const int a = c;
      while (c < cols && m[c]) ++c;
      const int b = c;  // first unmasked after the run, or cols
      if (a == 0) {
        std::fill(row, row + b, row[b]);
      } else if (b == cols) {
        std::fill(row + a, row + cols, row[a - 1]);
      } else {
        const double left = row[a - 1], right = row[b];
        for (int x = a; x < b; ++x) {
          const double w = static_cast<double>(x - a + 1) / (b - a + 1);
          row[x] = left + w * (right - left);
        }
      }
    }
  }
  return true;
}

void inpaint_harmonic(std::span<double> img, std::span<const std::uint8_t> mask, int rows, int cols, bool initialized) {
  std::vector<std::size_t> holes;
  double lo = 1e300, hi = -1e300, sum = 0.0;
  std::size_t known = 0;
  for (std::size_t n = 0; n < img.size(); ++n) {
    if (mask[n]) {
      holes.push_back(n);
    } else {
      lo = std::min(lo, img[n]);
      hi = std::max(hi, img[n]);
      sum += img[n];
      ++known;
    }
  }
  if (holes.empty()) return;
  if (!initialized) {
    const double mean = sum / static_cast<double>(known);
    for (std::size_t n : holes) img[n] = mean;
  }
  const double tol = std::max(1e-4 * (hi - lo), 1e-12);
  const double omega = 1.9;
  for (int iter = 0; iter < 200000; ++iter) {
    double worst = 0.0;
    for (std::size_t n : holes) {
      const int r = static_cast<int>(n / cols), c = static_cast<int>(n % cols);
      double acc = 0.0;
      int cnt = 0;
      if (r > 0) acc += img[n - cols], ++cnt;
      if (r + 1 < rows) acc += img[n + cols], ++cnt;
      if (c > 0) acc += img[n - 1], ++cnt;
      if (c + 1 < cols) acc += img[n + 1], ++cnt;
      const double delta = acc / cnt - img[n];
      worst = std::max(worst, std::abs(delta));
      img[n] += omega * delta;
    }
    if (worst < tol) return;
  }
  fail(ErrorCode::numerical, "harmonic inpainting did not converge");
}

void blur_axis(const std::vector<double>& src, std::vector<double>& dst, const std::array<int, 3>& dims, int axis,
               const std::vector<double>& kernel) {
  const int radius = static_cast<int>(kernel.size()) / 2;
  const int n_axis = dims[axis];
  const std::size_t stride = axis == 0 ? 1 : axis == 1 ? static_cast<std::size_t>(dims[0])
                                                       : static_cast<std::size_t>(dims[0]) * dims[1];
  const std::size_t total = src.size();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t n = 0; n < static_cast<std::ptrdiff_t>(total); ++n) {
    const int pos = static_cast<int>((n / stride) % n_axis);
    const std::size_t base = n - pos * stride;
    double acc = 0.0;
    for (int t = -radius; t <= radius; ++t) {
      const int q = std::clamp(pos + t, 0, n_axis - 1);
      acc += kernel[t + radius] * src[base + q * stride];
    }
    dst[n] = acc;
  }
}

Mask3D crop_to(const Mask3D& mask, const GridSpec& target) { return resample_nearest(mask, target); }

// Metal is put back into the corrected volume before the split so that the
// low-pass of the metal cancels between the two volumes.
MarResult finish(const MarContext& ctx, const MarParams& params, MaskStack masks, Mask3D insertion) {
  MarResult res;
  if (params.mask_dilation > 0) masks = dilate_masks(masks, params.mask_dilation);
  const ProjectionStack inpainted = inpaint_projections(ctx.line_integrals, masks, params.inpaint_method);
  const Volume corrected = to_hounsfield(fdk_reconstruct(inpainted, params.recon_grid), params.mu_water);
  res.pre_insertion =
      frequency_split(metal_insertion(corrected, ctx.uncorrected, insertion), ctx.uncorrected, params.freq_split_sigma);
  res.volume = metal_insertion(res.pre_insertion, ctx.uncorrected, insertion);
  res.masks2d = std::move(masks);
  res.insertion = std::move(insertion);
  return res;
}

}  // namespace

ProjectionStack inpaint_projections(const ProjectionStack& proj, const MaskStack& masks, InpaintMethod method) {
  require(proj.kind == ProjectionKind::line_integral, ErrorCode::contract, "inpainting expects line integrals");
  require_same_layout(proj, masks, "inpaint_projections");
  const int rows = proj.rows(), cols = proj.cols();
  for (int v = 0; v < proj.views(); ++v) {
    const auto m = masks.view(v);
    require(!std::all_of(m.begin(), m.end(), [](std::uint8_t x) { return x != 0; }), ErrorCode::contract,
            "view " + std::to_string(v) + " is fully masked");
  }
  ProjectionStack out = proj;
  bool failed = false;
#pragma omp parallel for schedule(dynamic)
  for (int v = 0; v < proj.views(); ++v) {
    auto img = out.view(v);
    const auto m = masks.view(v);
    try {
      if (method == InpaintMethod::row_linear) {
        if (inpaint_rows(img, m, rows, cols)) continue;
        std::copy(proj.view(v).begin(), proj.view(v).end(), img.begin());
        inpaint_harmonic(img, m, rows, cols, false);
      } else {
        const bool init = inpaint_rows(img, m, rows, cols);
        if (!init) std::copy(proj.view(v).begin(), proj.view(v).end(), img.begin());
        inpaint_harmonic(img, m, rows, cols, init);
      }
    } catch (const Error&) {
#pragma omp atomic write
      failed = true;
    }
  }
  if (failed) fail(ErrorCode::numerical, "harmonic inpainting did not converge");
  return out;
}

MaskStack dilate_masks(const MaskStack& masks, int radius) {
  require(radius >= 0, ErrorCode::parameter, "dilation radius must be >= 0");
  if (radius == 0) return masks;
  MaskStack out(masks.geometry);
  const int rows = masks.rows(), cols = masks.cols();
#pragma omp parallel for schedule(static)
  for (int v = 0; v < masks.views(); ++v) {
    const auto src = masks.view(v);
    auto dst = out.view(v);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        if (!src[static_cast<std::size_t>(r) * cols + c]) continue;
        for (int dr = -radius; dr <= radius; ++dr)
          for (int dc = -radius; dc <= radius; ++dc) {
            const int rr = r + dr, cc = c + dc;
            if (dr * dr + dc * dc > radius * radius || rr < 0 || cc < 0 || rr >= rows || cc >= cols) continue;
            dst[static_cast<std::size_t>(rr) * cols + cc] = 1;
          }
      }
  }
  return out;
}

Volume gaussian_lowpass(const Volume& volume, double sigma) {
  require(sigma >= 0.0 && std::isfinite(sigma), ErrorCode::parameter, "sigma must be >= 0");
  if (sigma == 0.0) return volume;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (int t = -radius; t <= radius; ++t) total += kernel[t + radius] = std::exp(-0.5 * t * t / (sigma * sigma));
  for (double& w : kernel) w /= total;
  Volume out = volume;
  std::vector<double> tmp(volume.data.size());
  blur_axis(out.data, tmp, volume.grid.dims, 0, kernel);
  blur_axis(tmp, out.data, volume.grid.dims, 1, kernel);
  blur_axis(out.data, tmp, volume.grid.dims, 2, kernel);
  out.data.swap(tmp);
  return out;
}

Volume frequency_split(const Volume& corrected, const Volume& original, double sigma) {
  require_same_grid(corrected.grid, original.grid, "frequency_split");
  const Volume low_c = gaussian_lowpass(corrected, sigma);
  const Volume low_o = gaussian_lowpass(original, sigma);
  Volume out = original;
  for (std::size_t n = 0; n < out.data.size(); ++n) out.data[n] = original.data[n] + (low_c.data[n] - low_o.data[n]);
  return out;
}

Volume metal_insertion(const Volume& mar, const Volume& original, const Mask3D& mask) {
  require_same_grid(mar.grid, original.grid, "metal_insertion");
  require_same_grid(mar.grid, mask.grid, "metal_insertion");
  Volume out = mar;
  for (std::size_t n = 0; n < out.data.size(); ++n)
    if (mask.data[n]) out.data[n] = original.data[n];
  return out;
}

GridSpec MarParams::effective_cf_grid() const {
  if (cf_grid.dims[0] > 0 && cf_grid.dims[1] > 0 && cf_grid.dims[2] > 0) return cf_grid;
  return extended_grid(recon_grid);
}

void MarParams::validate() const {
  recon_grid.validate();
  require(freq_split_sigma >= 0.0, ErrorCode::parameter, "freq_split_sigma must be >= 0");
  require(mask_dilation >= 0, ErrorCode::parameter, "mask_dilation must be >= 0");
  require(min_component_size >= 1, ErrorCode::parameter, "min_component_size must be >= 1");
  require(mu_water > 0.0, ErrorCode::parameter, "mu_water must be > 0");
  require(cf_tau > 0.0 && cf_tau <= 1.0, ErrorCode::parameter, "cf_tau must be in (0, 1]");
  require(cf_enabled || insertion_mask == InsertionMask::threshold_3d, ErrorCode::parameter,
          "cf_envelope insertion needs the consistency filter");
  grid_padding(recon_grid, effective_cf_grid());
}

MarContext prepare_mar(const ProjectionStack& raw, const MarParams& params) {
  params.validate();
  MarContext ctx;
  ctx.line_integrals = raw.kind == ProjectionKind::raw_intensity ? to_line_integrals(raw) : raw;
  ctx.uncorrected = to_hounsfield(fdk_reconstruct(ctx.line_integrals, params.recon_grid), params.mu_water);
  ctx.threshold_mask = threshold_segment_3d(ctx.uncorrected, params.hu_threshold, params.min_component_size);
  return ctx;
}

MarResult run_inpainting_mar(const MarContext& ctx, MaskStack masks, Mask3D insertion, const MarParams& params) {
  params.validate();
  require_same_layout(ctx.line_integrals, masks, "run_inpainting_mar");
  require_same_grid(insertion.grid, params.recon_grid, "run_inpainting_mar");
  return finish(ctx, params, std::move(masks), std::move(insertion));
}

MarResult run_standard_fsmar(const MarContext& ctx, const MarParams& params) {
  params.validate();
  return finish(ctx, params, forward_project_mask3d(ctx.threshold_mask, ctx.line_integrals.geometry),
                ctx.threshold_mask);
}

MarResult run_standard_fsmar(const ProjectionStack& raw, const MarParams& params) {
  return run_standard_fsmar(prepare_mar(raw, params), params);
}

MarResult run_modified_fsmar(const MarContext& ctx, const SegSource& seg, const MarParams& params) {
  params.validate();
  MaskStack masks = std::holds_alternative<ScoreStack>(seg) ? binarize(std::get<ScoreStack>(seg), params.seg_threshold)
                                                            : std::get<MaskStack>(seg);
  require_same_layout(ctx.line_integrals, masks, "run_modified_fsmar");
  std::optional<Mask3D> envelope;
  if (params.cf_enabled) {
    ConsistencyResult cf = consistency_filter(masks, params.effective_cf_grid(), params.cf_tau, params.cf_min_support);
    masks = std::move(cf.masks);
    envelope = crop_to(cf.envelope, params.recon_grid);
  }
  Mask3D insertion = params.insertion_mask == InsertionMask::cf_envelope ? *envelope : ctx.threshold_mask;
  MarResult res = finish(ctx, params, std::move(masks), std::move(insertion));
  res.envelope = std::move(envelope);
  return res;
}

MarResult run_modified_fsmar(const ProjectionStack& raw, const SegSource& seg, const MarParams& params) {
  return run_modified_fsmar(prepare_mar(raw, params), seg, params);
}

Mask3D segmentation_envelope(const SegSource& seg, const MarParams& params, double seg_threshold, double tau) {
  const MaskStack masks = std::holds_alternative<ScoreStack>(seg) ? binarize(std::get<ScoreStack>(seg), seg_threshold)
                                                                  : std::get<MaskStack>(seg);
  const HitVolumes hits = accumulate_hits(masks, params.effective_cf_grid());
  const int support = params.cf_min_support < 0 ? default_min_support(masks.views()) : params.cf_min_support;
  return crop_to(binarize_consistency(hits, tau, support), params.recon_grid);
}

}  // namespace cfmar
