#pragma once

#include <optional>
#include <variant>

#include "cfmar/grid.hpp"
#include "cfmar/phantom.hpp"
#include "cfmar/stacks.hpp"

namespace cfmar {

enum class InpaintMethod { row_linear, harmonic2d };
enum class InsertionMask { threshold_3d, cf_envelope };

/// Replaces masked pixels of a line-integral stack by interpolation from
/// unmasked neighbours. row_linear interpolates along detector rows; a row
/// without unmasked pixels makes that view fall back to harmonic2d, which
/// solves Laplace's equation over the masked pixels of the view.
ProjectionStack inpaint_projections(const ProjectionStack& proj, const MaskStack& masks, InpaintMethod method);

/// Grows every view's mask by a disc of the given radius in pixels.
MaskStack dilate_masks(const MaskStack& masks, int radius);

/// Gaussian kernel with the given sigma in voxels, separable along x, y, z,
/// edges replicated. sigma = 0 returns the input.
Volume gaussian_lowpass(const Volume& volume, double sigma);

/// low(corrected) + high(original) with high = original - low(original).
Volume frequency_split(const Volume& corrected, const Volume& original, double sigma);

/// Voxels under the mask take the original values.
Volume metal_insertion(const Volume& mar, const Volume& original, const Mask3D& mask);

struct MarParams {
  GridSpec recon_grid;
  /// Grid for the consistency filter; zero dims select extended_grid(recon_grid).
  GridSpec cf_grid{{0, 0, 0}, {1.25, 1.25, 1.25}, {0, 0, 0}};
  InpaintMethod inpaint_method = InpaintMethod::row_linear;
  double freq_split_sigma = 3.0;  // voxels
  /// Disc radius, in pixels, by which the 2D masks are grown before inpainting.
  int mask_dilation = 0;
  double hu_threshold = 3000.0;
  int min_component_size = 10;
  double mu_water = kMuWater;
  /// Threshold applied to score stacks fed to the modified pipeline.
  double seg_threshold = 0.0;
  double cf_tau = 0.96;
  int cf_min_support = -1;
  /// When false, the modified pipeline inpaints the given 2D masks directly.
  bool cf_enabled = true;
  InsertionMask insertion_mask = InsertionMask::threshold_3d;

  GridSpec effective_cf_grid() const;
  void validate() const;
};

/// Results shared by both pipeline variants.
struct MarContext {
  ProjectionStack line_integrals;
  Volume uncorrected;  // HU
  Mask3D threshold_mask;
};

MarContext prepare_mar(const ProjectionStack& raw, const MarParams& params);

struct MarResult {
  Volume volume;        // HU, after metal insertion
  Volume pre_insertion;  // HU, frequency split output
  MaskStack masks2d;    // masks used for inpainting
  Mask3D insertion;     // mask used for metal insertion
  std::optional<Mask3D> envelope;  // consistency envelope on the recon grid
};

/// Shared tail of both variants: inpaint inside `masks`, reconstruct, split
/// frequencies against the uncorrected volume and insert metal under
/// `insertion`.
MarResult run_inpainting_mar(const MarContext& ctx, MaskStack masks, Mask3D insertion, const MarParams& params);

MarResult run_standard_fsmar(const MarContext& ctx, const MarParams& params);
MarResult run_standard_fsmar(const ProjectionStack& raw, const MarParams& params);

using SegSource = std::variant<ScoreStack, MaskStack>;

MarResult run_modified_fsmar(const MarContext& ctx, const SegSource& seg, const MarParams& params);
MarResult run_modified_fsmar(const ProjectionStack& raw, const SegSource& seg, const MarParams& params);

/// Consistency envelope of a segmentation source on the recon grid, with its
/// own threshold and tau (used as a generous metal region for evaluation).
Mask3D segmentation_envelope(const SegSource& seg, const MarParams& params, double seg_threshold, double tau);

}  // namespace cfmar
