#include "cfmar/workflow.hpp"

#include <charconv>
#include <fstream>
#include <limits>
#include <regex>

#include "cfmar/recon_fdk.hpp"

namespace cfmar {

namespace {

fs::path base(const fs::path& dir, const char* name) { return dir / name; }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  require(static_cast<bool>(f), ErrorCode::io, "cannot open " + path.string() + " for writing");
  f << text;
  require(static_cast<bool>(f), ErrorCode::io, "failed writing " + path.string());
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorCode::io, "cannot create directory " + dir.string() + ": " + ec.message());
}

bool has_pair(const fs::path& p) { return fs::exists(RawPair::from(p).sidecar); }

SegSource load_segmentation(const fs::path& path, const ScanGeometry& geom) {
  auto ext = load_external_masks(path, geom);
  if (auto* m = std::get_if<MaskStack>(&ext)) return std::move(*m);
  return std::get<ScoreStack>(std::move(ext));
}

void save_segmentation(const fs::path& path, const SegSource& seg) {
  if (const auto* s = std::get_if<ScoreStack>(&seg)) save_score_stack(path, *s);
  else save_mask_stack(path, std::get<MaskStack>(seg));
}

struct RunInput {
  std::string name;
  fs::path volume;
  std::optional<fs::path> joint;
};

RunInput resolve_run(const fs::path& p) {
  if (fs::is_directory(p)) {
    RunInput r{p.filename().string(), p / "volume", std::nullopt};
    if (r.name.empty()) r.name = p.parent_path().filename().string();
    if (has_pair(p / "joint_component")) r.joint = p / "joint_component";
    return r;
  }
  const RawPair rp = RawPair::from(p);
  return {rp.sidecar.stem().string(), p, std::nullopt};
}

}  // namespace

GridSpec parse_grid_spec(const std::string& spec) {
  if (spec == "desk") return desk_scale_grid();
  static const std::regex pattern(R"(^(\d+)x(\d+)x(\d+):([0-9]*\.?[0-9]+)$)");
  std::smatch m;
  if (std::regex_match(spec, m, pattern)) {
    const double s = std::stod(m[4].str());
    GridSpec g = GridSpec::centered({std::stoi(m[1].str()), std::stoi(m[2].str()), std::stoi(m[3].str())}, {s, s, s});
    g.validate();
    return g;
  }
  require(fs::exists(spec), ErrorCode::parameter,
          "grid must be 'desk', 'NXxNYxNZ:spacing' or a grid JSON file, got '" + spec + "'");
  GridSpec g = read_json(spec).get<GridSpec>();
  g.validate();
  return g;
}

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(',', start), text.size());
    std::string item = text.substr(start, end - start);
    const auto first = item.find_first_not_of(" \t");
    item = first == std::string::npos ? "" : item.substr(first, item.find_last_not_of(" \t") - first + 1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    require(!item.empty() && ec == std::errc{} && ptr == item.data() + item.size(), ErrorCode::parameter,
            "bad number '" + item + "' in list '" + text + "'");
    out.push_back(v);
    start = end + 1;
  }
  return out;
}

void simulate_to_dir(const Phantom& phantom, const ScanGeometry& geom, const PhysicsParams& physics,
                     const fs::path& out) {
  make_dir(out);
  const MatchedPair pair = make_matched_pair(phantom, geom, physics);
  const StackMeta meta{physics, physics.rng_seed};
  save_projection_stack(base(out, "with_metal"), pair.with_metal, meta);
  save_projection_stack(base(out, "metal_free"), pair.metal_free, meta);
  write_json(out / "phantom.json", phantom);
  write_json(out / "geometry.json", geom);
  write_json(out / "physics.json", physics);
}

MatchedPair load_pair(const fs::path& dir) {
  MatchedPair pair{load_projection_stack(base(dir, "with_metal")), load_projection_stack(base(dir, "metal_free"))};
  require(pair.with_metal.geometry == pair.metal_free.geometry, ErrorCode::format,
          "with_metal and metal_free stacks in " + dir.string() + " have different geometries");
  return pair;
}

MarVariant parse_variant(const std::string& name) {
  if (name == "standard") return MarVariant::standard;
  if (name == "modified") return MarVariant::modified;
  fail(ErrorCode::parameter, "variant must be 'standard' or 'modified', got '" + name + "'");
}

void mar_to_dir(const ExperimentConfig& cfg, MarVariant variant, const fs::path& pair_dir, const fs::path& out,
                const std::optional<fs::path>& seg_path) {
  cfg.mar.validate();
  const MatchedPair pair = load_pair(pair_dir);
  make_dir(out);
  const MarContext ctx = prepare_mar(pair.with_metal, cfg.mar);
  save_volume(base(out, "nomar"), ctx.uncorrected);
  save_mask3d(base(out, "threshold_mask"), ctx.threshold_mask);

  MarResult res;
  Mask3D joint_component;
  if (variant == MarVariant::standard) {
    res = run_standard_fsmar(ctx, cfg.mar);
    joint_component = ctx.threshold_mask;
  } else {
    const SegSource seg =
        seg_path ? load_segmentation(*seg_path, pair.with_metal.geometry) : make_segmentation(cfg, pair);
    save_segmentation(base(out, "segmentation"), seg);
    res = run_modified_fsmar(ctx, seg, cfg.mar);
    joint_component =
        segmentation_envelope(seg, cfg.mar, cfg.evaluation.joint_seg_threshold, cfg.evaluation.joint_tau);
    if (res.envelope) save_mask3d(base(out, "envelope"), *res.envelope);
  }
  save_volume(base(out, "volume"), res.volume);
  save_volume(base(out, "pre_insertion"), res.pre_insertion);
  save_mask_stack(base(out, "masks2d"), res.masks2d);
  save_mask3d(base(out, "insertion"), res.insertion);
  save_mask3d(base(out, "joint_component"), joint_component);
  json run = config_to_json(cfg);
  run["variant"] = variant == MarVariant::standard ? "standard" : "modified";
  write_json(out / "run.json", run);
}

void label_to_file(const ExperimentConfig& cfg, const fs::path& pair_dir, const fs::path& out) {
  const MatchedPair pair = load_pair(pair_dir);
  const MarContext ctx = prepare_mar(pair.with_metal, cfg.mar);
  save_volume(out, make_label_volume(pair.metal_free, ctx, cfg.mar));
}

json evaluate_to_dir(const fs::path& label_path, const std::vector<fs::path>& run_paths, const EvaluateOptions& opt,
                     const fs::path& out) {
  require(!run_paths.empty(), ErrorCode::parameter, "evaluate needs at least one run");
  const Volume label = load_volume(label_path);
  std::vector<RunInput> inputs;
  std::vector<Volume> volumes;
  for (const auto& p : run_paths) {
    inputs.push_back(resolve_run(p));
    volumes.push_back(load_volume(inputs.back().volume));
    require_same_grid(volumes.back().grid, label.grid, "evaluated run and label");
  }

  Mask3D joint(label.grid, 0, ValueUnit::mask);
  if (opt.joint == "auto") {
    bool any = false;
    for (const auto& in : inputs) {
      if (!in.joint) continue;
      const Mask3D m = load_mask3d(*in.joint);
      require_same_grid(m.grid, label.grid, "joint mask component and label");
      joint = joint_mask(joint, m);
      any = true;
    }
    require(any, ErrorCode::contract, "--jointmask auto needs at least one run directory with a joint_component mask");
  } else if (opt.joint != "none") {
    joint = load_mask3d(opt.joint);
    require_same_grid(joint.grid, label.grid, "joint mask and label");
  }

  make_dir(out);
  save_mask3d(base(out, "joint_mask"), joint);
  std::vector<RunMetrics> metrics;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    metrics.push_back(evaluate_run(inputs[i].name, volumes[i], label, joint, opt.eval));
    write_text(out / (inputs[i].name + "_slices.csv"), slice_csv(metrics.back()));
  }
  std::vector<RunComparison> comparisons;
  for (std::size_t i = 0; i < metrics.size(); ++i)
    for (std::size_t j = i + 1; j < metrics.size(); ++j) comparisons.push_back(compare_runs(metrics[i], metrics[j]));

  json summary = evaluation_summary(metrics, comparisons);
  summary["joint_mask_voxels"] = count_true(joint);
  summary["data_range"] = opt.eval.data_range;

  // Per-slice plots; metal-containing slices are shaded.
  std::vector<bool> metal;
  for (const auto& s : metrics.front().ssim.slices) metal.push_back(s.contains_metal);
  std::vector<PlotSeries> ssim, psnr;
  double psnr_hi = 10.0;
  for (const auto& m : metrics) {
    PlotSeries a{m.name, {}}, b{m.name, {}};
    for (const auto& s : m.ssim.slices) a.values.push_back(s.value);
    for (const auto& s : m.psnr.slices) {
      b.values.push_back(s.value);
      if (std::isfinite(s.value)) psnr_hi = std::max(psnr_hi, s.value);
    }
    ssim.push_back(std::move(a));
    psnr.push_back(std::move(b));
  }
  psnr_hi = 10.0 * std::ceil(psnr_hi / 10.0);
  write_png(out / "ssim_per_slice.png", slice_plot(ssim, metal, 0.0, 1.0, 0.1));
  write_png(out / "psnr_per_slice.png", slice_plot(psnr, metal, 0.0, psnr_hi, 10.0));
  json colors = json::array();
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    const auto c = plot_color(i);
    colors.push_back({{"run", metrics[i].name}, {"rgb", {c[0], c[1], c[2]}}});
  }
  summary["plot_colors"] = colors;
  summary["psnr_plot_range_db"] = {0.0, psnr_hi};
  write_json(out / "summary.json", summary);
  return summary;
}

json run_pipeline(const ExperimentConfig& cfg, const fs::path& out) {
  make_dir(out);
  write_json(out / "config.json", config_to_json(cfg));
  const fs::path pair = out / "pair";
  simulate_to_dir(cfg.phantom, cfg.geometry, cfg.seeded_physics(), pair);
  mar_to_dir(cfg, MarVariant::standard, pair, out / "standard");
  mar_to_dir(cfg, MarVariant::modified, pair, out / "modified");
  label_to_file(cfg, pair, base(out, "label"));
  EvaluateOptions opt{cfg.evaluation, "auto"};
  return evaluate_to_dir(base(out, "label"),
                         {out / "standard" / "nomar", out / "standard", out / "modified"}, opt, out / "report");
}

std::string sweep_to_file(const ExperimentConfig& cfg, const std::vector<double>& taus, const fs::path& out,
                          const std::optional<fs::path>& pair_dir) {
  for (double t : taus) require(t > 0.0 && t <= 1.0, ErrorCode::parameter, "taus must lie in (0, 1]");
  MatchedPair pair;
  if (pair_dir) {
    pair = load_pair(*pair_dir);
  } else {
    // Same float32 rounding as a pair that went through simulate_to_dir.
    pair = make_matched_pair(cfg.phantom, cfg.geometry, cfg.seeded_physics());
    for (auto* s : {&pair.with_metal, &pair.metal_free})
      for (double& v : s->data) v = static_cast<double>(static_cast<float>(v));
  }
  const std::string csv = sweep_csv(sweep_tau(cfg, pair, taus));
  if (out.empty()) return csv;
  if (!out.parent_path().empty()) make_dir(out.parent_path());
  write_text(out, csv);
  return csv;
}

void export_slices(const Volume& volume, const std::vector<int>& slices, const HuWindow& window, const fs::path& dir,
                   const std::string& stem) {
  make_dir(dir);
  std::vector<int> ks = slices;
  if (ks.empty())
    for (int k = 0; k < volume.grid.dims[2]; ++k) ks.push_back(k);
  char name[32];
  for (int k : ks) {
    std::snprintf(name, sizeof name, "_z%03d.png", k);
    export_axial_slice_png(dir / (stem + name), volume, k, window);
  }
}

}  // namespace cfmar
