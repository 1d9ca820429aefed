#pragma once

// File-based stages behind the command line tool. Each stage reads its
// inputs from disk and writes RAW + JSON outputs, so chaining stages by
// hand gives the same bytes as `run_pipeline`.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cfmar/experiment.hpp"
#include "cfmar/png_export.hpp"

namespace cfmar {

namespace fs = std::filesystem;

/// "desk", "NXxNYxNZ:spacing" (centered) or a path to a grid JSON file.
GridSpec parse_grid_spec(const std::string& spec);

/// Comma separated numbers, e.g. "0.8,0.9".
std::vector<double> parse_number_list(const std::string& text);

/// Writes with_metal, metal_free, phantom.json, geometry.json and physics.json.
void simulate_to_dir(const Phantom& phantom, const ScanGeometry& geom, const PhysicsParams& physics,
                     const fs::path& out);
MatchedPair load_pair(const fs::path& dir);

enum class MarVariant { standard, modified };
MarVariant parse_variant(const std::string& name);

/// Runs one MAR variant on the pair in `pair_dir` and writes the final
/// volume with all intermediates into `out`. `seg_path` overrides the
/// configured segmentation source of the modified variant.
void mar_to_dir(const ExperimentConfig& cfg, MarVariant variant, const fs::path& pair_dir, const fs::path& out,
                const std::optional<fs::path>& seg_path = std::nullopt);

/// Reference volume for evaluation, from the metal-free scan of a pair.
void label_to_file(const ExperimentConfig& cfg, const fs::path& pair_dir, const fs::path& out);

struct EvaluateOptions {
  EvaluationConfig eval;
  /// "auto" (OR of each run's joint_component mask), "none" or a Mask3D path.
  std::string joint = "auto";
};

/// Per-run CSV, summary.json and per-slice plots. Runs are run
/// directories (volume inside) or volume files; names are taken from the
/// directory or file stem. Comparisons cover every ordered pair (i < j).
json evaluate_to_dir(const fs::path& label, const std::vector<fs::path>& runs, const EvaluateOptions& opt,
                     const fs::path& out);

/// simulate -> NoMAR -> standard and modified MAR -> label -> evaluate, all
/// through files under `out`. Returns the evaluation summary.
json run_pipeline(const ExperimentConfig& cfg, const fs::path& out);

/// Sweep of the consistency threshold; writes the CSV (unless `out` is
/// empty) and returns it.
std::string sweep_to_file(const ExperimentConfig& cfg, const std::vector<double>& taus, const fs::path& out,
                          const std::optional<fs::path>& pair_dir = std::nullopt);

/// Axial PNGs of a volume; an empty list exports every slice.
void export_slices(const Volume& volume, const std::vector<int>& slices, const HuWindow& window, const fs::path& dir,
                   const std::string& stem);

}  // namespace cfmar
