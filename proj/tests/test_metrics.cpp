#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cfmar/metrics.hpp"
#include "test_support.hpp"

using namespace cfmar;

namespace {

const GridSpec kGrid = GridSpec::centered({16, 14, 5}, {1, 1, 1});

// Direct SSIM: 2D Gaussian weights per window position, no separability.
double reference_ssim(const std::vector<double>& a, const std::vector<double>& b, int rows, int cols) {
  const int W = 11, h = 5;
  const double s = 1.5, L = 4096.0, c1 = std::pow(0.01 * L, 2), c2 = std::pow(0.03 * L, 2);
  std::vector<double> w(W * W);
  double tot = 0.0;
  for (int y = 0; y < W; ++y)
    for (int x = 0; x < W; ++x) tot += w[y * W + x] = std::exp(-((y - h) * (y - h) + (x - h) * (x - h)) / (2 * s * s));
  for (double& x : w) x /= tot;
  double acc = 0.0;
  int n = 0;
  for (int r = 0; r + W <= rows; ++r)
    for (int c = 0; c + W <= cols; ++c) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (int y = 0; y < W; ++y)
        for (int x = 0; x < W; ++x) {
          const double wt = w[y * W + x], p = a[(r + y) * cols + c + x], q = b[(r + y) * cols + c + x];
          mx += wt * p;
          my += wt * q;
        }
      for (int y = 0; y < W; ++y)
        for (int x = 0; x < W; ++x) {
          const double wt = w[y * W + x], p = a[(r + y) * cols + c + x] - mx, q = b[(r + y) * cols + c + x] - my;
          sxx += wt * p * p;
          syy += wt * q * q;
          sxy += wt * p * q;
        }
      acc += (2 * mx * my + c1) * (2 * sxy + c2) / ((mx * mx + my * my + c1) * (sxx + syy + c2));
      ++n;
    }
  return acc / n;
}

}  // namespace

TEST(Metrics, JointMaskIsVoxelwiseOr) {
  const Mask3D a = fixtures::random_mask3d(kGrid, 0.2, 1), b = fixtures::random_mask3d(kGrid, 0.3, 2);
  const Mask3D j = joint_mask(a, b);
  for (std::size_t n = 0; n < j.data.size(); ++n) EXPECT_EQ(j.data[n], a.data[n] || b.data[n]);
  EXPECT_EQ(joint_mask(a, a).data, a.data);
  EXPECT_EQ(joint_mask(Mask3D(kGrid), b).data, b.data);
  EXPECT_EQ(joint_mask(b, a).data, j.data);
  try {
    joint_mask(a, Mask3D(GridSpec::centered({4, 4, 4}, {1, 1, 1})));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::grid_mismatch);
  }
}

TEST(Metrics, PsnrOfIdenticalVolumesIsInfinite) {
  const Volume v = fixtures::random_volume(kGrid, 3);
  Mask3D m(kGrid);
  m.at(3, 3, 2) = 1;
  const SliceReport r = masked_psnr(v, v, m);
  for (const auto& s : r.slices) EXPECT_TRUE(std::isinf(s.value));
  EXPECT_EQ(r.aggregated, 0);
  EXPECT_TRUE(std::isnan(r.mean));
}

TEST(Metrics, PsnrOfUniformOffsetIsClosedForm) {
  const Volume ref = fixtures::random_volume(kGrid, 4);
  const Mask3D m = fixtures::random_mask3d(kGrid, 0.3, 5);
  Volume test = ref;
  for (std::size_t n = 0; n < test.data.size(); ++n) test.data[n] += m.data[n] ? 1e4 * n : 12.5;
  const SliceReport r = masked_psnr(test, ref, m, 4096.0);
  for (const auto& s : r.slices) EXPECT_NEAR(s.value, 20.0 * std::log10(4096.0 / 12.5), 1e-9);
  EXPECT_EQ(r.aggregated, 5);
  EXPECT_NEAR(r.mean, 20.0 * std::log10(4096.0 / 12.5), 1e-9);
}

TEST(Metrics, PsnrDecreasesWithError) {
  const Volume ref = fixtures::random_volume(kGrid, 6);
  const Mask3D m(kGrid);
  double prev = std::numeric_limits<double>::infinity();
  for (double d : {1.0, 2.0, 4.0}) {
    Volume t = ref;
    for (double& x : t.data) x += d;
    const double p = masked_psnr(t, ref, m).slices[0].value;
    EXPECT_LT(p, prev);
    prev = p;
  }
}

TEST(Metrics, OnlyMetalSlicesAreAggregated) {
  Volume ref(kGrid), test(kGrid);
  Mask3D m(kGrid);
  for (int k = 0; k < 5; ++k)
    for (int j = 0; j < 14; ++j)
      for (int i = 0; i < 16; ++i) test.at(i, j, k) = 10.0 * (k + 1);
  m.at(1, 1, 1) = 1;
  m.at(1, 1, 3) = 1;
  const SliceReport r = masked_psnr(test, ref, m, 4096.0);
  EXPECT_EQ(r.aggregated, 2);
  EXPECT_NEAR(r.mean, 0.5 * (20 * std::log10(4096.0 / 20) + 20 * std::log10(4096.0 / 40)), 1e-9);
  EXPECT_NEAR(r.median, r.mean, 1e-12);
}

TEST(Metrics, SsimOfIdenticalAndNegatedSlices) {
  const GridSpec g = GridSpec::centered({24, 24, 2}, {1, 1, 1});
  Volume v(g);
  for (int k = 0; k < 2; ++k)
    for (int j = 0; j < 24; ++j)
      for (int i = 0; i < 24; ++i) v.at(i, j, k) = (i + j) % 2 ? 2000.0 : -2000.0;  // zero local mean
  Volume neg = v;
  for (double& x : neg.data) x = -x;
  const Mask3D m(g);
  for (const auto& s : masked_ssim(v, v, m).slices) EXPECT_NEAR(s.value, 1.0, 1e-12);
  for (const auto& s : masked_ssim(neg, v, m).slices) EXPECT_LT(s.value, -0.9);
}

TEST(Metrics, SsimOfCheckerboardMatchesDirectComputation) {
  const int rows = 16, cols = 18;
  std::vector<double> a(rows * cols), b(rows * cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      a[r * cols + c] = (r + c) % 2 ? 1000.0 : 0.0;
      b[r * cols + c] = 1000.0 - a[r * cols + c];
    }
  EXPECT_NEAR(ssim_2d(a, b, rows, cols), reference_ssim(a, b, rows, cols), 1e-6);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd(0.0, 300.0);
  for (double& x : b) x = a[&x - b.data()] + nd(rng);
  EXPECT_NEAR(ssim_2d(a, b, rows, cols), reference_ssim(a, b, rows, cols), 1e-6);
}

TEST(Metrics, MaskedMetricsIgnoreValuesUnderTheMask) {
  const Volume ref = fixtures::random_volume(kGrid, 9);
  Volume test = fixtures::random_volume(kGrid, 10);
  const Mask3D m = fixtures::random_mask3d(kGrid, 0.2, 11);
  SsimParams sp;
  sp.window = 5;
  const auto p0 = masked_psnr(test, ref, m), s0 = masked_ssim(test, ref, m, sp);
  for (std::size_t n = 0; n < test.data.size(); ++n)
    if (m.data[n]) test.data[n] = 1e6;
  const auto p1 = masked_psnr(test, ref, m), s1 = masked_ssim(test, ref, m, sp);
  for (int k = 0; k < 5; ++k) {
    EXPECT_EQ(p0.slices[k].value, p1.slices[k].value);
    EXPECT_EQ(s0.slices[k].value, s1.slices[k].value);
  }
}

TEST(Metrics, PrecisionRecallByHand) {
  const ScanGeometry g = fixtures::small_geometry(1, 4, 4, 1.0);
  MaskStack pred(g), truth(g);
  // truth: first two rows; pred: first and third row.
  for (int c = 0; c < 4; ++c) {
    truth.at(0, 0, c) = truth.at(0, 1, c) = 1;
    pred.at(0, 0, c) = pred.at(0, 2, c) = 1;
  }
  const Prf p = mask_prf(pred, truth);
  EXPECT_EQ(p.tp, 4u);
  EXPECT_EQ(p.fp, 4u);
  EXPECT_EQ(p.fn, 4u);
  EXPECT_DOUBLE_EQ(p.precision, 0.5);
  EXPECT_DOUBLE_EQ(p.recall, 0.5);
  EXPECT_DOUBLE_EQ(p.f1, 0.5);
  const Prf same = mask_prf(truth, truth);
  EXPECT_EQ(same.precision, 1.0);
  EXPECT_EQ(same.f1, 1.0);
  const Prf none = mask_prf(MaskStack(g), truth);
  EXPECT_EQ(none.precision, 0.0);
  EXPECT_EQ(none.recall, 0.0);
  EXPECT_EQ(none.f1, 0.0);
}

TEST(Metrics, AucWithTieUsesMidranks) {
  // Positives 0.9, 0.5, 0.3; negatives 0.5, 0.2, 0.1.
  // Pairs won: 0.9 beats 3, 0.5 beats 2 and ties 1, 0.3 beats 2 -> 7.5 / 9.
  const std::vector<double> s{0.9, 0.5, 0.3, 0.5, 0.2, 0.1};
  const std::vector<std::uint8_t> y{1, 1, 1, 0, 0, 0};
  EXPECT_NEAR(*roc_auc(s, y), 7.5 / 9.0, 1e-15);
  const std::vector<double> perfect{1, 1, 1, 0, 0, 0};
  EXPECT_EQ(*roc_auc(perfect, y), 1.0);
  EXPECT_FALSE(roc_auc(s, std::vector<std::uint8_t>(6, 1)));
}

TEST(Metrics, AucOfIndependentScoresIsHalf) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::bernoulli_distribution coin(0.3);
  std::vector<double> s(20000);
  std::vector<std::uint8_t> y(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = u(rng);
    y[i] = coin(rng);
  }
  EXPECT_NEAR(*roc_auc(s, y), 0.5, 0.02);
}
