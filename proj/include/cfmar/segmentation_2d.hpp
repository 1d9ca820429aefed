#pragma once

#include <cstdint>

#include "cfmar/stacks.hpp"

namespace cfmar {

/// Binarized ratio of matched acquisitions: metal attenuates, so pixels
/// with with_metal / metal_free < ratio_threshold are labeled metal.
MaskStack generate_gt_labels(const ProjectionStack& with_metal, const ProjectionStack& metal_free,
                             double ratio_threshold = 0.98);

/// Parameters of the local-excess metal detector.
///
/// score = gain * (p - background(p) - offset), where the background is the
/// median over a median_window x median_window neighbourhood evaluated on a
/// grid decimated by `decimation` (block means), then bilinearly upsampled.
/// The decimation lets the window span metal shadows tens of pixels wide.
/// With dilation > 0 each score is replaced by the maximum over a disc of
/// that radius in pixels, which grows the binarized mask accordingly.
/// With saturation_margin >= 0, pixels within that margin of the stack's
/// largest line integral are treated as starved and scored as metal
/// (score at least `gain`), since a clipped plateau has no local excess.
struct HeuristicParams {
  int median_window = 15;
  int decimation = 4;
  double offset = 0.3;
  double gain = 25.0;
  int dilation = 0;
  double saturation_margin = -1.0;
};

ScoreStack heuristic_segment(const ProjectionStack& line_integrals, const HeuristicParams& params = {});

/// mask = score > threshold.
MaskStack binarize(const ScoreStack& scores, double threshold);

struct PerturbationSpec {
  int fp_blob_count = 0;          // blobs per affected view
  double fp_blob_radius = 0.0;    // px
  double fp_view_fraction = 0.0;  // share of views receiving blobs
  int fn_erosion = 0;             // px
  double fn_view_fraction = 0.0;  // share of views that get eroded
  std::uint64_t rng_seed = 0;
  /// Minimum gap, in px, between an injected blob and any true pixel.
  double fp_clearance = 3.0;

  void validate() const;
};

struct PerturbedMasks {
  MaskStack masks;
  /// Pixels turned on by injected blobs.
  MaskStack injected;
  /// Pixels removed by erosion.
  MaskStack removed;
};

/// Emulates segmentation errors: disc-shaped false positives placed at
/// random positions clear of true pixels in a random subset of views, and
/// erosion of true regions in another random subset.
PerturbedMasks perturb_masks_tracked(const MaskStack& masks, const PerturbationSpec& spec);

inline MaskStack perturb_masks(const MaskStack& masks, const PerturbationSpec& spec) {
  return perturb_masks_tracked(masks, spec).masks;
}

}  // namespace cfmar
