#pragma once

#include <span>
#include <vector>

#include "cfmar/grid.hpp"
#include "cfmar/stacks.hpp"

namespace cfmar {

/// Discrete Shepp-Logan ramp kernel h[n] = -2 / (pi^2 tau^2 (4 n^2 - 1)) for
/// n = 0 .. half_length - 1 (the kernel is even).
std::vector<double> shepp_logan_kernel(int half_length, double tau);

/// Filters every row of a rows x cols image in place:
/// q[n] = tau * sum_k h[n - k] p[k], evaluated by zero-padded FFT of length
/// next_pow2(2 * cols).
void ramp_filter_rows(std::span<double> image, int rows, int cols, double tau);

/// Parker short-scan weight. `beta` is the view angle relative to the scan
/// start, `gamma` the fan angle with the conjugate ray at beta + pi + 2 gamma,
/// and `delta` half of the overscan, (range - pi) / 2.
double parker_weight(double beta, double gamma, double delta);

/// Short-scan FDK: cosine and Parker weighting, row-wise Shepp-Logan ramp
/// filtering and distance-weighted bilinear backprojection. Output in 1/mm.
Volume fdk_reconstruct(const ProjectionStack& proj, const GridSpec& grid);

/// Voxel-driven backprojection weighted as the transpose of
/// voxel_forward_project (ray density per unit volume), with the same
/// bilinear detector interpolation as the FDK backprojector.
Volume backproject_adjoint(const ProjectionStack& proj, const GridSpec& grid);

/// HU = 1000 (mu - mu_water) / mu_water.
Volume to_hounsfield(const Volume& volume, double mu_water);
Volume to_attenuation(const Volume& hounsfield, double mu_water);

}  // namespace cfmar
