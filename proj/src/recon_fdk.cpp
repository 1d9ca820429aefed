#include "cfmar/recon_fdk.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>

namespace cfmar {

namespace {

// FFTW planning is not thread-safe.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
template <class T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <class T>
FftwBuffer<T> fftw_buffer(std::size_t n) {
  return FftwBuffer<T>(static_cast<T*>(fftw_malloc(sizeof(T) * n)));
}

int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Per-view constants for voxel-driven backprojection.
struct BackprojectView {
  double ex, ey;  // isocenter -> source
  double ux, uy;  // detector u axis
};

// Weight that only depends on the source distance of the voxel column.
template <class F>
struct DepthWeight {
  F fn;
  static constexpr bool per_voxel = false;
};
// Weight evaluated per voxel: fn(depth, lateral, z).
template <class F>
struct VoxelWeight {
  F fn;
  static constexpr bool per_voxel = true;
};

// Accumulates sum_v weight * bilinear(stack_v, P_v(x)) with a fixed
// ascending view order per voxel. Views are transposed so that detector
// columns are contiguous.
template <class Weight>
Volume backproject(const DetectorStack<double>& stack, const GridSpec& grid, const Weight& weight) {
  grid.validate();
  const ScanGeometry& geom = stack.geometry;
  const int views = stack.views(), rows = stack.rows(), cols = stack.cols();
  const double sid = geom.source_to_isocenter;
  const double scale = geom.source_to_detector / geom.detector.pixel_pitch;
  std::vector<BackprojectView> pv(views);
  for (int v = 0; v < views; ++v) {
    const Vec3 e = geom.source_direction(v), u = geom.detector_u_axis(v);
    pv[v] = {e.x, e.y, u.x, u.y};
  }
  // Column-major copy padded with one zero row and column on each side.
  const int prow = rows + 2, pcol = cols + 2;
  std::vector<double> padded(static_cast<std::size_t>(views) * prow * pcol, 0.0);
#pragma omp parallel for schedule(static)
  for (int v = 0; v < views; ++v) {
    const auto img = stack.view(v);
    double* dst = padded.data() + static_cast<std::size_t>(v) * prow * pcol;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) dst[static_cast<std::size_t>(c + 1) * prow + (r + 1)] = img[static_cast<std::size_t>(r) * cols + c];
  }

  Volume out(grid, 0.0, ValueUnit::attenuation);
  const int nx = grid.dims[0], ny = grid.dims[1], nz = grid.dims[2];
  const std::size_t plane = static_cast<std::size_t>(nx) * ny;

#pragma omp parallel
  {
    std::vector<double> column(nz);
#pragma omp for schedule(static)
    for (int jj = 0; jj < nx * ny; ++jj) {
      const int i = jj % nx, j = jj / nx;
      const double x = grid.origin[0] + i * grid.spacing[0];
      const double y = grid.origin[1] + j * grid.spacing[1];
      std::fill(column.begin(), column.end(), 0.0);
      for (int v = 0; v < views; ++v) {
        const auto& p = pv[v];
        const double depth = sid - (x * p.ex + y * p.ey);
        if (!(depth > 0.0)) continue;
        const double lateral = x * p.ux + y * p.uy;
        const double m = scale / depth;
        // Padded coordinates: padded index = pixel index + 1.
        const double fu = geom.detector.u0 + lateral * m + 0.5;
        if (!(fu >= 0.0 && fu < cols + 1)) continue;
        const int c0 = static_cast<int>(fu);
        const double wu = fu - c0;
        const double* col0 = padded.data() + (static_cast<std::size_t>(v) * pcol + c0) * prow;
        const double* col1 = col0 + prow;
        const double fv0 = geom.detector.v0 + grid.origin[2] * m + 0.5;
        const double dfv = grid.spacing[2] * m;
        // k range with 0 <= fv < rows + 1.
        int k_lo = 0, k_hi = nz;
        if (fv0 < 0.0) k_lo = static_cast<int>(std::ceil(-fv0 / dfv));
        const double k_end = (rows + 1 - fv0) / dfv;
        if (k_end < nz) k_hi = std::max(0, static_cast<int>(std::ceil(k_end)));
        double w_col = 0.0;
        if constexpr (!Weight::per_voxel) w_col = weight.fn(depth);
        for (int k = std::max(k_lo, 0); k < k_hi; ++k) {
          const double fv = fv0 + k * dfv;
          if (!(fv >= 0.0 && fv < rows + 1)) continue;
          const int r0 = static_cast<int>(fv);
          const double wv = fv - r0;
          const double a0 = (1.0 - wu) * col0[r0] + wu * col1[r0];
          const double a1 = (1.0 - wu) * col0[r0 + 1] + wu * col1[r0 + 1];
          const double val = (1.0 - wv) * a0 + wv * a1;
          if constexpr (Weight::per_voxel) {
            column[k] += weight.fn(depth, lateral, grid.origin[2] + k * grid.spacing[2]) * val;
          } else {
            column[k] += w_col * val;
          }
        }
      }
      for (int k = 0; k < nz; ++k) out.data[k * plane + jj] = column[k];
    }
  }
  return out;
}

}  // namespace

std::vector<double> shepp_logan_kernel(int half_length, double tau) {
  std::vector<double> h(half_length);
  for (int n = 0; n < half_length; ++n)
    h[n] = -2.0 / (kPi * kPi * tau * tau * (4.0 * n * n - 1.0));
  return h;
}

void ramp_filter_rows(std::span<double> image, int rows, int cols, double tau) {
  const int len = next_pow2(2 * cols);
  const int nfreq = len / 2 + 1;
  const auto h = shepp_logan_kernel(cols, tau);

  auto kernel = fftw_buffer<double>(len);
  auto kernel_hat = fftw_buffer<fftw_complex>(nfreq);
  auto in = fftw_buffer<double>(len);
  auto spectrum = fftw_buffer<fftw_complex>(nfreq);
  fftw_plan forward, backward;
  {
    std::lock_guard lock(fftw_planner_mutex());
    forward = fftw_plan_dft_r2c_1d(len, in.get(), spectrum.get(), FFTW_ESTIMATE);
    backward = fftw_plan_dft_c2r_1d(len, spectrum.get(), in.get(), FFTW_ESTIMATE);
  }
  std::fill(kernel.get(), kernel.get() + len, 0.0);
  kernel[0] = h[0];
  for (int n = 1; n < cols; ++n) {
    kernel[n] = h[n];
    kernel[len - n] = h[n];
  }
  fftw_execute_dft_r2c(forward, kernel.get(), kernel_hat.get());
  // Symmetric kernel: the response is real up to rounding.
  std::vector<double> response(nfreq);
  for (int f = 0; f < nfreq; ++f) response[f] = kernel_hat[f][0] * tau / len;

#pragma omp parallel
  {
    auto row_buf = fftw_buffer<double>(len);
    auto row_hat = fftw_buffer<fftw_complex>(nfreq);
#pragma omp for schedule(static)
    for (int r = 0; r < rows; ++r) {
      double* row = image.data() + static_cast<std::size_t>(r) * cols;
      std::copy(row, row + cols, row_buf.get());
      std::fill(row_buf.get() + cols, row_buf.get() + len, 0.0);
      fftw_execute_dft_r2c(forward, row_buf.get(), row_hat.get());
      for (int f = 0; f < nfreq; ++f) {
        row_hat[f][0] *= response[f];
        row_hat[f][1] *= response[f];
      }
      fftw_execute_dft_c2r(backward, row_hat.get(), row_buf.get());
      std::copy(row_buf.get(), row_buf.get() + cols, row);
    }
  }
  std::lock_guard lock(fftw_planner_mutex());
  fftw_destroy_plan(forward);
  fftw_destroy_plan(backward);
}

double parker_weight(double beta, double gamma, double delta) {
  if (beta < 0.0 || beta > kPi + 2.0 * delta) return 0.0;
  auto sin2 = [](double x) {
    const double s = std::sin(x);
    return s * s;
  };
  if (beta < 2.0 * (delta - gamma)) return sin2(0.25 * kPi * beta / (delta - gamma));
  if (beta <= kPi - 2.0 * gamma) return 1.0;
  return sin2(0.25 * kPi * (kPi + 2.0 * delta - beta) / (delta + gamma));
}

Volume fdk_reconstruct(const ProjectionStack& proj, const GridSpec& grid) {
  require(proj.kind == ProjectionKind::line_integral, ErrorCode::contract, "FDK expects line integrals");
  const ScanGeometry& geom = proj.geometry;
  geom.validate();
  const double range = deg_to_rad(geom.angular_range_deg());
  const double fan = geom.fan_angle();
  require(range >= kPi + fan - 1e-12, ErrorCode::parameter,
          "short-scan FDK needs an angular range of at least 180 degrees plus the fan angle");

  const int views = proj.views(), rows = proj.rows(), cols = proj.cols();
  const double sid = geom.source_to_isocenter;
  const double tau = geom.pitch_at_isocenter();
  const double dbeta = deg_to_rad(geom.angular_increment_deg);
  const double delta = 0.5 * (range - kPi);
  const bool short_scan = range < 2.0 * kPi - 1e-9;

  std::vector<double> a_iso(cols), b_iso(rows);
  for (int c = 0; c < cols; ++c) a_iso[c] = (c + 0.5 - geom.detector.u0) * tau;
  for (int r = 0; r < rows; ++r) b_iso[r] = (r + 0.5 - geom.detector.v0) * tau;

  DetectorStack<double> filtered(geom);
#pragma omp parallel for schedule(static)
  for (int v = 0; v < views; ++v) {
    const double beta = (v + 0.5) * dbeta;
    auto src = proj.view(v);
    auto dst = filtered.view(v);
    for (int c = 0; c < cols; ++c) {
      // The conjugate of fan angle g in this geometry lies at beta + pi - 2 g.
      const double gamma = -std::atan(a_iso[c] / sid);
      const double w = short_scan ? parker_weight(beta, gamma, delta) : 0.5;
      for (int r = 0; r < rows; ++r) {
        const double cosine = sid / std::sqrt(sid * sid + a_iso[c] * a_iso[c] + b_iso[r] * b_iso[r]);
        const std::size_t idx = static_cast<std::size_t>(r) * cols + c;
        dst[idx] = src[idx] * cosine * w;
      }
    }
  }
  // Parallelism lives inside the row filter.
  for (int v = 0; v < views; ++v) ramp_filter_rows(filtered.view(v), rows, cols, tau);

  const double sid2 = sid * sid;
  auto weight = [&](double depth) { return dbeta * sid2 / (depth * depth); };
  Volume out = backproject(filtered, grid, DepthWeight<decltype(weight)>{weight});
  out.unit = ValueUnit::attenuation;
  return out;
}

Volume backproject_adjoint(const ProjectionStack& proj, const GridSpec& grid) {
  const ScanGeometry& geom = proj.geometry;
  const double sdd = geom.source_to_detector;
  const double pitch = geom.detector.pixel_pitch;
  const double c = sdd * sdd * grid.voxel_volume() / (pitch * pitch);
  auto weight = [&](double depth, double lateral, double z) {
    const double dist = std::sqrt(depth * depth + lateral * lateral + z * z);
    return c * dist / (depth * depth * depth);
  };
  return backproject(proj, grid, VoxelWeight<decltype(weight)>{weight});
}

Volume to_hounsfield(const Volume& volume, double mu_water) {
  require(mu_water > 0.0, ErrorCode::parameter, "mu_water must be > 0");
  Volume out(volume.grid, 0.0, ValueUnit::hounsfield);
  for (std::size_t n = 0; n < volume.data.size(); ++n)
    out.data[n] = 1000.0 * (volume.data[n] - mu_water) / mu_water;
  return out;
}

Volume to_attenuation(const Volume& hounsfield, double mu_water) {
  require(mu_water > 0.0, ErrorCode::parameter, "mu_water must be > 0");
  Volume out(hounsfield.grid, 0.0, ValueUnit::attenuation);
  for (std::size_t n = 0; n < hounsfield.data.size(); ++n)
    out.data[n] = mu_water * (1.0 + hounsfield.data[n] / 1000.0);
  return out;
}

}  // namespace cfmar
