// Acceptance battery: prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <random>
#include <sstream>
#include <set>
#include <string>

#include <unistd.h>

#include "cf_oracle.hpp"
#include "test_support.hpp"
#include "cfmar/consistency_filter.hpp"
#include "cfmar/experiment.hpp"
#include "cfmar/forward_model.hpp"
#include "cfmar/metrics.hpp"
#include "cfmar/recon_fdk.hpp"
#include "cfmar/segmentation_2d.hpp"
#include "cfmar/workflow.hpp"

using namespace cfmar;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

ExperimentConfig config(const std::string& name) { return load_config(fs::path(CFMAR_CONFIG_DIR) / (name + ".json")); }

// 1. accumulate_hits vs per-voxel projection on random small problems.
Outcome cf_exactness() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> dim(4, 16), views(2, 8), det(8, 32);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int cases = 0, mismatches = 0;
  for (; cases < 24; ++cases) {
    const int nv = views(rng);
    const double sid = 60.0 + 80.0 * unit(rng);
    const ScanGeometry g = make_circular_trajectory(nv, 360.0 * unit(rng), (180.0 + 60.0 * unit(rng)) / nv, sid,
                                                    sid * (1.5 + unit(rng)),
                                                    DetectorSpec::centered(det(rng), det(rng), 0.8 + 1.5 * unit(rng)));
    GridSpec grid = GridSpec::centered({dim(rng), dim(rng), dim(rng)},
                                       {0.7 + 2.0 * unit(rng), 0.7 + 2.0 * unit(rng), 0.7 + 2.0 * unit(rng)});
    for (double& o : grid.origin) o += 3.0 * (unit(rng) - 0.5);
    const MaskStack m = fixtures::random_masks(g, 0.2 + 0.6 * unit(rng), rng());
    const HitVolumes h = accumulate_hits(m, grid);
    const auto o = fixtures::oracle_hits(m, grid);
    for (std::size_t n = 0; n < grid.voxel_count(); ++n)
      if (h.hits[n] != o.hits[n] || h.max_hits[n] != o.max_hits[n]) ++mismatches;
  }
  const double t = seconds_since(t0);
  return {mismatches == 0 && t < 10.0, fmt("%d cases, %d voxel mismatches, %.2f s", cases, mismatches, t)};
}

// 2. Empty and full masks at desk scale.
Outcome cf_trivial_bounds() {
  const auto t0 = Clock::now();
  const ScanGeometry g = desk_scale_geometry();
  const GridSpec ext = extended_grid(desk_scale_grid());
  const ConsistencyResult empty = consistency_filter(MaskStack(g), ext, 0.96);
  const ConsistencyResult full = consistency_filter(MaskStack(g, 1), ext, 0.96);
  const Vec3 lo = ext.lower_corner(), hi = ext.upper_corner();
  std::size_t missing = 0, extra = 0;
  for (int v = 0; v < g.num_views; ++v)
    for (int r = 0; r < g.detector.rows; ++r)
      for (int c = 0; c < g.detector.cols; ++c) {
        const bool meets = fixtures::ray_hits_box(g.pixel_ray(v, r, c), lo, hi);
        const bool on = full.masks.at(v, r, c) != 0;
        missing += meets && !on;
        extra += on && !meets;
      }
  const std::size_t empty_on = count_true(empty.masks) + count_true(empty.envelope);
  const double t = seconds_since(t0);
  return {empty_on == 0 && missing == 0 && extra == 0 && t < 30.0,
          fmt("empty -> %zu set, full -> %zu missing / %zu extra pixels, %.1f s", empty_on, missing, extra, t)};
}

// Perturbed metal trace of the knee preset, shared by 3 and 4.
MaskStack knee_trace(const ScanGeometry& g) { return metal_trace_stack(build_preset("knee_screws"), g); }

// 3. Nested envelopes over the tau grid.
Outcome cf_monotonicity() {
  const ScanGeometry g = desk_scale_geometry();
  PerturbationSpec spec;
  spec.fp_blob_count = 4;
  spec.fp_blob_radius = 5.0;
  spec.fp_view_fraction = 0.4;
  spec.fn_erosion = 2;
  spec.fn_view_fraction = 0.2;
  spec.rng_seed = 3;
  const MaskStack m = perturb_masks(knee_trace(g), spec);
  const HitVolumes h = accumulate_hits(m, extended_grid(desk_scale_grid()));
  const int support = default_min_support(g.num_views);
  const double taus[] = {0.8, 0.9, 0.95, 0.96, 0.98, 0.99, 0.998};
  std::size_t violations = 0;
  Mask3D prev = binarize_consistency(h, taus[0], support);
  for (std::size_t i = 1; i < std::size(taus); ++i) {
    Mask3D cur = binarize_consistency(h, taus[i], support);
    for (std::size_t n = 0; n < cur.data.size(); ++n) violations += cur.data[n] && !prev.data[n];
    prev = std::move(cur);
  }
  return {violations == 0, fmt("%zu subset violations over 7 taus", violations)};
}

// 4. Injected blobs in <= 10% of views never survive tau = 0.96.
Outcome cf_false_positive_removal() {
  const ScanGeometry g = desk_scale_geometry();
  const MaskStack truth = knee_trace(g);
  const GridSpec ext = extended_grid(desk_scale_grid());
  std::size_t injected = 0, surviving = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    PerturbationSpec spec;
    spec.fp_blob_count = 3;
    spec.fp_blob_radius = 4.0;
    spec.fp_view_fraction = 0.1;
    spec.rng_seed = seed;
    const PerturbedMasks p = perturb_masks_tracked(truth, spec);
    const ConsistencyResult r = consistency_filter(p.masks, ext, 0.96);
    for (std::size_t n = 0; n < r.masks.data.size(); ++n) {
      injected += p.injected.data[n];
      surviving += p.injected.data[n] && r.masks.data[n];
    }
  }
  return {injected > 0 && surviving == 0, fmt("%zu injected pixels over 5 seeds, %zu survive", injected, surviving)};
}

// 5. Precision / recall / F / SSIM trends of the tau sweep.
Outcome sweep_trends() {
  const auto t0 = Clock::now();
  const ExperimentConfig cfg = config("sweep");
  MatchedPair pair = make_matched_pair(cfg.phantom, cfg.geometry, cfg.seeded_physics());
  for (auto* s : {&pair.with_metal, &pair.metal_free})
    for (double& v : s->data) v = static_cast<double>(static_cast<float>(v));
  const auto rows = sweep_tau(cfg, pair, cfg.taus);
  int p_inv = 0, r_inv = 0;
  bool small = true;
  std::size_t best_f = 0, best_s = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0) {
      const double dp = rows[i - 1].prf.precision - rows[i].prf.precision;
      const double dr = rows[i].prf.recall - rows[i - 1].prf.recall;
      if (dp > 0.0) ++p_inv, small = small && dp <= 0.005;
      if (dr > 0.0) ++r_inv, small = small && dr <= 0.005;
    }
    if (rows[i].prf.f1 > rows[best_f].prf.f1) best_f = i;
    if (rows[i].ssim_mean > rows[best_s].ssim_mean) best_s = i;
  }
  const double tf = rows[best_f].tau, ts = rows[best_s].tau;
  const double t = seconds_since(t0);
  const bool ok = p_inv <= 1 && r_inv <= 1 && small && tf >= 0.95 && tf <= 0.996 && ts >= 0.95 && ts <= 0.98 &&
                  t < 900.0;
  return {ok, fmt("precision inversions %d, recall inversions %d, F max at tau %.3f, SSIM peak at tau %.3f, %.0f s",
                  p_inv, r_inv, tf, ts, t)};
}

// 6. <A x, y> = <x, A^T y> for the voxel projector and its adjoint.
Outcome adjointness() {
  const GridSpec grid = GridSpec::centered({32, 32, 32}, {1.0, 1.0, 1.0});
  const ScanGeometry g = make_circular_trajectory(16, 0.0, 200.0 / 16, 200.0, 400.0, DetectorSpec::centered(64, 64, 1.5));
  double worst = 0.0;
  for (std::uint64_t draw = 0; draw < 10; ++draw) {
    std::mt19937_64 rng(100 + draw);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Volume x(grid, 0.0, ValueUnit::attenuation);
    for (double& v : x.data) v = u(rng);
    ProjectionStack y(g, ProjectionKind::line_integral);
    for (double& v : y.data) v = u(rng);
    const ProjectionStack ax = voxel_forward_project(x, g);
    const Volume aty = backproject_adjoint(y, grid);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t n = 0; n < ax.data.size(); ++n) lhs += ax.data[n] * y.data[n];
    for (std::size_t n = 0; n < x.data.size(); ++n) rhs += x.data[n] * aty.data[n];
    worst = std::max(worst, std::abs(lhs - rhs) / std::abs(lhs));
  }
  return {worst <= 0.005, fmt("worst relative mismatch %.4f%% over 10 draws", 100.0 * worst)};
}

// 7. Homogeneous cylinder, noise off, desk scale.
Outcome fdk_fidelity() {
  const auto t0 = Clock::now();
  const double radius = 50.0, mu = materials::soft_tissue().mu;
  const Phantom p{"cylinder", {make_cylinder({0, 0, -120}, {0, 0, 120}, radius, materials::soft_tissue())}};
  const ScanGeometry g = desk_scale_geometry();
  PhysicsParams phys;
  phys.i0 = 1e6;
  phys.poisson_noise = false;
  const ProjectionStack li = analytic_line_integrals(p, g);
  const ProjectionStack raw = apply_physics(li, ProjectionStack(g, ProjectionKind::line_integral, 0.0), phys);
  const GridSpec grid = desk_scale_grid();
  const Volume v = fdk_reconstruct(to_line_integrals(raw), grid);
  double worst = 0.0, sum = 0.0;
  std::size_t n = 0;
  for (int k = 32; k < 96; ++k)
    for (int j = 0; j < grid.dims[1]; ++j)
      for (int i = 0; i < grid.dims[0]; ++i) {
        const Vec3 c = grid.center(i, j, k);
        if (std::hypot(c.x, c.y) > 0.8 * radius) continue;
        worst = std::max(worst, std::abs(v.at(i, j, k) - mu) / mu);
        sum += v.at(i, j, k);
        ++n;
      }
  const double t = seconds_since(t0);
  return {worst <= 0.05 && t < 120.0,
          fmt("mean %.5f vs %.5f /mm, worst voxel %.2f%% off over %zu voxels, %.1f s", sum / n, mu, 100.0 * worst, n, t)};
}

// 8. Out-of-FoV K-wire: modified beats standard.
Outcome kwire_superiority() {
  const ExperimentResult r = run_experiment(config("kwire"));
  const RunComparison& c = r.comparison;
  return {c.psnr_max_diff >= 1.0 && c.psnr_mean_diff >= 0.2,
          fmt("PSNR(modified) - PSNR(standard): worst-slice %+.2f dB, mean %+.2f dB", c.psnr_max_diff, c.psnr_mean_diff)};
}

// Fraction of oracle metal voxels below bone density in a HU volume.
double vanished_fraction(const Volume& hu, const Mask3D& oracle) {
  std::size_t total = 0, low = 0;
  for (std::size_t n = 0; n < hu.data.size(); ++n) {
    if (!oracle.data[n]) continue;
    ++total;
    low += hu.data[n] < 1000.0;
  }
  return total ? static_cast<double>(low) / total : 0.0;
}

struct TowersRuns {
  Outcome c9, c10;
};

// 9 and 10. Photon starvation behind the metal towers.
TowersRuns towers() {
  TowersRuns out;
  const ExperimentConfig cfg = config("towers");
  const ExperimentResult r = run_experiment(cfg);
  const Mask3D oracle = metal_mask_3d(cfg.phantom, cfg.mar.recon_grid);
  std::size_t n_oracle = 0, thr_hit = 0, env_hit = 0;
  for (std::size_t n = 0; n < oracle.data.size(); ++n) {
    if (!oracle.data[n]) continue;
    ++n_oracle;
    thr_hit += r.context.threshold_mask.data[n];
    env_hit += r.modified.envelope && r.modified.envelope->data[n];
  }
  const double missed = 1.0 - static_cast<double>(thr_hit) / n_oracle;
  const double env_recall = static_cast<double>(env_hit) / n_oracle;
  const double ssim_min = r.comparison.ssim_min_diff;
  out.c9 = {missed >= 0.3 && env_recall >= 0.9 && ssim_min > 0.0,
            fmt("threshold mask misses %.1f%%, envelope recall %.3f, min slice SSIM gain %+.4f over %d slices",
                100.0 * missed, env_recall, ssim_min, r.metrics[1].ssim.aggregated)};

  const double hybrid = vanished_fraction(r.modified.volume, oracle);
  const ExperimentResult e = run_experiment(config("towers_envelope"));
  const double envelope = vanished_fraction(e.modified.volume, oracle);
  out.c10 = {hybrid >= 0.1 && envelope < 0.01,
             fmt("oracle metal below 1000 HU: hybrid insertion %.1f%%, envelope insertion %.2f%%", 100.0 * hybrid,
                 100.0 * envelope)};
  return out;
}

// 11. Closed-form metric cases.
Outcome metric_exactness() {
  const GridSpec grid = GridSpec::centered({24, 20, 4}, {1, 1, 1});
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1000.0, 3000.0);
  Volume ref(grid, 0.0, ValueUnit::hounsfield);
  for (double& v : ref.data) v = u(rng);
  Mask3D mask(grid, 0, ValueUnit::mask);
  for (int i = 5; i < 9; ++i) mask.at(i, 7, 1) = mask.at(i, 3, 2) = 1;
  Volume test = ref;
  const double delta = 37.0;
  for (std::size_t n = 0; n < test.data.size(); ++n) test.data[n] += mask.data[n] ? 5000.0 : delta;
  const double expect = 20.0 * std::log10(4096.0 / delta);
  double psnr_err = 0.0;
  for (const auto& s : masked_psnr(test, ref, mask, 4096.0).slices) psnr_err = std::max(psnr_err, std::abs(s.value - expect));
  bool ssim_one = true;
  for (const auto& s : masked_ssim(ref, ref, mask).slices) ssim_one = ssim_one && s.value == 1.0;
  const std::vector<double> scores{1, 0, 1, 1, 0, 0, 1};
  const std::vector<std::uint8_t> labels{1, 0, 1, 1, 0, 0, 1};
  const auto auc = roc_auc(scores, labels);
  const bool ok = psnr_err <= 1e-9 && ssim_one && auc && *auc == 1.0;
  return {ok, fmt("PSNR error %.2e dB, identical SSIM exactly 1: %s, perfect AUC %.17g", psnr_err,
                  ssim_one ? "yes" : "no", auc ? *auc : -1.0)};
}

std::map<std::string, std::string> artifacts(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string ext = e.path().extension().string();
    if (ext != ".raw" && ext != ".csv") continue;
    std::ifstream in(e.path(), std::ios::binary);
    out[fs::relative(e.path(), dir).string()] = std::string(std::istreambuf_iterator<char>(in), {});
  }
  return out;
}

// 12. Two pipeline runs give identical volumes, masks and CSVs.
Outcome determinism() {
  const ExperimentConfig cfg = config("desk");
  const fs::path base = fs::temp_directory_path() / fmt("cfmar_determinism_%d", static_cast<int>(::getpid()));
  fs::remove_all(base);
  run_pipeline(cfg, base / "a");
  run_pipeline(cfg, base / "b");
  const auto a = artifacts(base / "a"), b = artifacts(base / "b");
  std::size_t differing = 0;
  for (const auto& [name, bytes] : a) {
    const auto it = b.find(name);
    differing += it == b.end() || it->second != bytes;
  }
  fs::remove_all(base);
  return {!a.empty() && a.size() == b.size() && differing == 0,
          fmt("%zu raw/csv artifacts compared, %zu differ", a.size(), differing)};
}

}  // namespace

// Optional arguments select criterion ids; no arguments runs all twelve.
int main(int argc, char** argv) {
  std::set<int> selected;
  for (int a = 1; a < argc; ++a) selected.insert(std::atoi(argv[a]));
  auto wanted = [&](int id) { return selected.empty() || selected.count(id) > 0; };
  int failed = 0, ran = 0;
  auto report = [&](int id, const char* name, const Outcome& o) {
    std::printf("[%s] %2d %-28s %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
    ++ran;
  };
  auto run = [&](int id, const char* name, const std::function<Outcome()>& fn) {
    if (!wanted(id)) return;
    try {
      report(id, name, fn());
    } catch (const std::exception& e) {
      report(id, name, {false, std::string("exception: ") + e.what()});
    }
  };
  run(1, "cf-exactness", cf_exactness);
  run(2, "cf-trivial-bounds", cf_trivial_bounds);
  run(3, "cf-monotonicity", cf_monotonicity);
  run(4, "cf-false-positive-removal", cf_false_positive_removal);
  run(5, "tau-sweep-trends", sweep_trends);
  run(6, "projector-adjointness", adjointness);
  run(7, "fdk-fidelity", fdk_fidelity);
  run(8, "out-of-fov-superiority", kwire_superiority);
  if (wanted(9) || wanted(10)) {
    TowersRuns t;
    try {
      t = towers();
    } catch (const std::exception& e) {
      t.c9 = t.c10 = {false, std::string("exception: ") + e.what()};
    }
    if (wanted(9)) report(9, "starvation-superiority", t.c9);
    if (wanted(10)) report(10, "disappearing-metal", t.c10);
  }
  run(11, "metric-exactness", metric_exactness);
  run(12, "pipeline-determinism", determinism);
  std::printf("%d of %d criteria passed\n", ran - failed, ran);
  return failed ? 1 : 0;
}
