#pragma once

#include <optional>
#include <span>
#include <vector>

#include "cfmar/grid.hpp"
#include "cfmar/stacks.hpp"

namespace cfmar {

/// Union of two masks on the same grid.
Mask3D joint_mask(const Mask3D& a, const Mask3D& b);

struct SliceValue {
  int index = 0;
  double value = 0.0;
  bool contains_metal = false;
};

/// Per-axial-slice metric values and their summary over the slices that
/// intersect the mask (finite values only).
struct SliceReport {
  std::vector<SliceValue> slices;
  double mean = 0.0;
  double median = 0.0;
  int aggregated = 0;

  void summarize();
};

/// PSNR per axial slice with masked voxels excluded. MSE runs over the
/// unmasked voxels of the slice; PSNR = 10 log10(R^2 / MSE), +inf for
/// identical slices.
SliceReport masked_psnr(const Volume& test, const Volume& reference, const Mask3D& mask, double data_range = 4096.0);

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double data_range = 4096.0;
};

/// SSIM of one image pair with a Gaussian window, averaged over the
/// positions where the window fits entirely inside the image.
double ssim_2d(std::span<const double> a, std::span<const double> b, int rows, int cols, const SsimParams& params = {});

/// Per-axial-slice SSIM with masked voxels set to 0 in both volumes.
SliceReport masked_ssim(const Volume& test, const Volume& reference, const Mask3D& mask, const SsimParams& params = {});

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0;
};

/// Pooled pixel-wise precision, recall and F1. Empty denominators give 0.
Prf mask_prf(const MaskStack& predicted, const MaskStack& truth);
Prf mask_prf(const Mask3D& predicted, const Mask3D& truth);

/// Area under the ROC curve (Mann-Whitney with midranks for ties).
/// nullopt when either class is empty.
std::optional<double> roc_auc(const ScoreStack& scores, const MaskStack& truth);
std::optional<double> roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

}  // namespace cfmar
