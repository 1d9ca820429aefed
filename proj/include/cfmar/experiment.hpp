#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cfmar/io.hpp"
#include "cfmar/mar_pipeline.hpp"
#include "cfmar/metrics.hpp"

namespace cfmar {

enum class SegSourceKind { heuristic, gt_labels, perturbed_gt, external };

struct SegmentationConfig {
  SegSourceKind source = SegSourceKind::heuristic;
  HeuristicParams heuristic;
  PerturbationSpec perturbation;
  double ratio_threshold = 0.98;
  std::string external_path;
};

struct EvaluationConfig {
  double data_range = 4096.0;
  /// Generous envelope used for the joint mask: score threshold and tau.
  double joint_seg_threshold = -5.0;
  double joint_tau = 0.95;
  SsimParams ssim;
  double window_min = -1000.0;
  double window_max = 3000.0;
};

/// One experiment: phantom, acquisition, MAR parameters and evaluation.
/// `seed` drives the noise and the mask perturbation.
struct ExperimentConfig {
  Phantom phantom;
  json phantom_doc;  // as given, for provenance
  ScanGeometry geometry = desk_scale_geometry();
  PhysicsParams physics;
  std::uint64_t seed = 0;
  MarParams mar;
  SegmentationConfig segmentation;
  EvaluationConfig evaluation;
  std::vector<double> taus{0.8, 0.85, 0.9, 0.95, 0.96, 0.97, 0.98, 0.99, 0.992, 0.994, 0.996, 0.998};

  /// physics with rng_seed replaced by `seed`.
  PhysicsParams seeded_physics() const;
  PerturbationSpec seeded_perturbation() const;
};

/// Desk-scale recon grid: 128^3 voxels of 1.25 mm.
GridSpec desk_scale_grid();

ExperimentConfig parse_config(const json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);
json config_to_json(const ExperimentConfig& cfg);

/// Segmentation source for the modified pipeline, from the matched pair.
SegSource make_segmentation(const ExperimentConfig& cfg, const MatchedPair& pair);

/// Reference volume in HU: FDK of the metal-free acquisition with the
/// uncorrected metal values inserted under the threshold mask.
Volume make_label_volume(const ProjectionStack& metal_free_raw, const MarContext& ctx, const MarParams& params);

struct RunMetrics {
  std::string name;
  SliceReport ssim;
  SliceReport psnr;
};

struct RunComparison {
  std::string baseline, candidate;
  double psnr_max_diff = 0.0;  // max over slices of candidate - baseline
  double psnr_min_diff = 0.0;
  double psnr_mean_diff = 0.0;
  double ssim_max_diff = 0.0;
  double ssim_min_diff = 0.0;
  double ssim_mean_diff = 0.0;
};

RunMetrics evaluate_run(const std::string& name, const Volume& run, const Volume& label, const Mask3D& joint,
                        const EvaluationConfig& eval);
RunComparison compare_runs(const RunMetrics& baseline, const RunMetrics& candidate);

struct ExperimentResult {
  MatchedPair pair;
  MarContext context;
  Volume label;
  MarResult standard;
  MarResult modified;
  Mask3D overestimated;
  Mask3D joint;
  std::vector<RunMetrics> metrics;  // nomar, standard, modified
  RunComparison comparison;         // modified vs standard
};

ExperimentResult run_experiment(const ExperimentConfig& cfg);

struct SweepRow {
  double tau = 0.0;
  Prf prf;
  double ssim_mean = 0.0;
  double psnr_mean = 0.0;
};

/// Consistency-filter threshold sweep: mask quality against the phantom's
/// metal trace and masked SSIM of the modified pipeline at every tau.
std::vector<SweepRow> sweep_tau(const ExperimentConfig& cfg, const MatchedPair& pair, const std::vector<double>& taus);

/// Summary JSON and per-slice CSV text of an evaluation.
json evaluation_summary(const std::vector<RunMetrics>& runs, const std::vector<RunComparison>& comparisons);
std::string slice_csv(const RunMetrics& run);
std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace cfmar
