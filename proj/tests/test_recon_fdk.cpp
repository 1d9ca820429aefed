#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cfmar/forward_model.hpp"
#include "cfmar/recon_fdk.hpp"
#include "test_support.hpp"

using namespace cfmar;

TEST(Fdk, SheppLoganKernelClosedForm) {
  const double tau = 0.7;
  const auto h = shepp_logan_kernel(5, tau);
  ASSERT_EQ(h.size(), 5u);
  for (int n = 0; n < 5; ++n) EXPECT_DOUBLE_EQ(h[n], -2.0 / (kPi * kPi * tau * tau * (4.0 * n * n - 1.0)));
  EXPECT_GT(h[0], 0.0);
  EXPECT_LT(h[1], 0.0);
}

TEST(Fdk, RampFilterEqualsDirectConvolution) {
  const int rows = 3, cols = 21;
  const double tau = 0.9;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> img(rows * cols);
  for (auto& x : img) x = u(rng);
  const std::vector<double> src = img;
  ramp_filter_rows(img, rows, cols, tau);
  const auto h = shepp_logan_kernel(cols, tau);
  for (int r = 0; r < rows; ++r)
    for (int n = 0; n < cols; ++n) {
      double q = 0.0;
      for (int k = 0; k < cols; ++k) q += h[std::abs(n - k)] * src[r * cols + k];
      EXPECT_NEAR(img[r * cols + n], tau * q, 1e-12);
    }
}

TEST(Fdk, ParkerWeightsOfConjugateRaysSumToOne) {
  const double delta = 0.2;
  for (double gamma : {-0.15, -0.05, 0.0, 0.1, 0.18}) {
    for (double beta = 0.0; beta <= kPi + 2.0 * delta; beta += 0.01) {
      const double bc = beta + kPi + 2.0 * gamma;
      if (bc < 0.0 || bc > kPi + 2.0 * delta) continue;
      EXPECT_NEAR(parker_weight(beta, gamma, delta) + parker_weight(bc, -gamma, delta), 1.0, 1e-12)
          << "beta " << beta << " gamma " << gamma;
    }
  }
  EXPECT_EQ(parker_weight(-0.1, 0.0, delta), 0.0);
  EXPECT_EQ(parker_weight(kPi / 2, 0.0, delta), 1.0);
}

TEST(Fdk, HounsfieldConversionRoundTrips) {
  const GridSpec g = GridSpec::centered({4, 4, 4}, {1, 1, 1});
  Volume mu(g, 0.0, ValueUnit::attenuation);
  mu.data[0] = kMuWater;
  mu.data[1] = 0.0;
  mu.data[2] = 2.0 * kMuWater;
  const Volume hu = to_hounsfield(mu, kMuWater);
  EXPECT_EQ(hu.unit, ValueUnit::hounsfield);
  EXPECT_DOUBLE_EQ(hu.data[0], 0.0);
  EXPECT_DOUBLE_EQ(hu.data[1], -1000.0);
  EXPECT_DOUBLE_EQ(hu.data[2], 1000.0);
  const Volume back = to_attenuation(hu, kMuWater);
  for (std::size_t i = 0; i < mu.data.size(); ++i) EXPECT_NEAR(back.data[i], mu.data[i], 1e-15);
}

TEST(Fdk, RejectsTooShortScans) {
  ScanGeometry g = fixtures::small_geometry(10, 16, 16, 2.0, 120.0);
  ProjectionStack p(g, ProjectionKind::line_integral);
  EXPECT_THROW(fdk_reconstruct(p, GridSpec::centered({8, 8, 8}, {1, 1, 1})), Error);
}

TEST(Fdk, SmallCylinderIsRecoveredInTheInterior) {
  const ScanGeometry g = make_circular_trajectory(120, 0.0, 200.0 / 120, 300.0, 600.0, DetectorSpec::centered(64, 64, 1.0));
  const Phantom p{"cyl", {make_cylinder({0, 0, -40}, {0, 0, 40}, 10.0, materials::soft_tissue())}};
  const GridSpec grid = GridSpec::centered({32, 32, 8}, {0.75, 0.75, 0.75});
  const Volume v = fdk_reconstruct(analytic_line_integrals(p, g), grid);
  double sum = 0.0;
  int n = 0;
  for (int k = 2; k < 6; ++k)
    for (int j = 0; j < 32; ++j)
      for (int i = 0; i < 32; ++i) {
        const Vec3 c = grid.center(i, j, k);
        if (std::hypot(c.x, c.y) < 6.0) {
          sum += v.at(i, j, k);
          ++n;
        }
      }
  ASSERT_GT(n, 0);
  EXPECT_NEAR(sum / n, materials::soft_tissue().mu, 0.05 * materials::soft_tissue().mu);
}
