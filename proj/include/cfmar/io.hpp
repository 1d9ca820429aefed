#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <variant>

#include <nlohmann/json.hpp>

#include "cfmar/consistency_filter.hpp"
#include "cfmar/forward_model.hpp"
#include "cfmar/grid.hpp"
#include "cfmar/mar_pipeline.hpp"
#include "cfmar/phantom.hpp"
#include "cfmar/segmentation_2d.hpp"
#include "cfmar/stacks.hpp"

namespace cfmar {

using json = nlohmann::json;

// JSON conversions. Parsing rejects unknown keys with a parameter error;
// missing keys keep their defaults.
void to_json(json& j, const DetectorSpec& d);
void from_json(const json& j, DetectorSpec& d);
void to_json(json& j, const ScanGeometry& g);
void from_json(const json& j, ScanGeometry& g);
void to_json(json& j, const GridSpec& g);
void from_json(const json& j, GridSpec& g);
void to_json(json& j, const PhysicsParams& p);
void from_json(const json& j, PhysicsParams& p);
void to_json(json& j, const Material& m);
void from_json(const json& j, Material& m);
void to_json(json& j, const Primitive& p);
void from_json(const json& j, Primitive& p);
void to_json(json& j, const Phantom& p);
void from_json(const json& j, Phantom& p);
void to_json(json& j, const HeuristicParams& p);
void from_json(const json& j, HeuristicParams& p);
void to_json(json& j, const PerturbationSpec& p);
void from_json(const json& j, PerturbationSpec& p);
void to_json(json& j, const MarParams& p);
void from_json(const json& j, MarParams& p);

/// A phantom document is either a full phantom or {"preset": name}.
Phantom phantom_from_json(const json& j);

json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const json& j);

/// Paths of a RAW + JSON pair. Accepts the base path with or without a
/// .json or .raw extension.
struct RawPair {
  std::filesystem::path sidecar;
  std::filesystem::path raw;
  static RawPair from(const std::filesystem::path& path);
};

enum class StoredDtype { float32, float64, uint8, uint16 };

struct StackMeta {
  std::optional<PhysicsParams> physics;
  std::optional<std::uint64_t> seed;
  StoredDtype dtype = StoredDtype::float32;
};

void save_projection_stack(const std::filesystem::path& path, const ProjectionStack& stack, const StackMeta& meta = {});
void save_score_stack(const std::filesystem::path& path, const ScoreStack& stack);
void save_mask_stack(const std::filesystem::path& path, const MaskStack& stack);

using AnyStack = std::variant<ProjectionStack, ScoreStack, MaskStack>;

/// Loads any stack, dispatching on the sidecar's kind tag. If `expected`
/// is given, the stored geometry must match it.
AnyStack load_stack(const std::filesystem::path& path, const std::optional<ScanGeometry>& expected = std::nullopt);
ProjectionStack load_projection_stack(const std::filesystem::path& path);
MaskStack load_mask_stack(const std::filesystem::path& path);

/// Masks or scores from an external segmenter. Detector size and view
/// count must match `geom`.
std::variant<MaskStack, ScoreStack> load_external_masks(const std::filesystem::path& path, const ScanGeometry& geom);

void save_volume(const std::filesystem::path& path, const Volume& volume, StoredDtype dtype = StoredDtype::float32);
void save_mask3d(const std::filesystem::path& path, const Mask3D& mask);
Volume load_volume(const std::filesystem::path& path);
Mask3D load_mask3d(const std::filesystem::path& path);
/// Writes hits and max_hits (uint16) and the normalized ratio (float32)
/// under <base>_hits, <base>_max and <base>_norm.
void save_hit_volumes(const std::filesystem::path& base, const HitVolumes& hits);

std::string to_string(ProjectionKind kind);
std::string to_string(ValueUnit unit);
std::string to_string(InpaintMethod m);
std::string to_string(InsertionMask m);

}  // namespace cfmar
