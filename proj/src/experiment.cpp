#include "cfmar/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "cfmar/consistency_filter.hpp"
#include "cfmar/recon_fdk.hpp"
#include "cfmar/segmentation_2d.hpp"

namespace cfmar {

namespace {

std::string num(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

json num_json(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

const char* seg_name(SegSourceKind k) {
  switch (k) {
    case SegSourceKind::heuristic: return "heuristic";
    case SegSourceKind::gt_labels: return "gt_labels";
    case SegSourceKind::perturbed_gt: return "perturbed_gt";
    case SegSourceKind::external: return "external";
  }
  return "heuristic";
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* what) {
  require(j.is_object(), ErrorCode::parameter, std::string(what) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    require(ok, ErrorCode::parameter, std::string(what) + ": unknown key '" + key + "'");
  }
}

template <class T>
void get_opt(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(out);
  } catch (const json::exception& e) {
    fail(ErrorCode::parameter, std::string("bad value for '") + key + "': " + e.what());
  }
}

}  // namespace

GridSpec desk_scale_grid() { return GridSpec::centered({128, 128, 128}, {1.25, 1.25, 1.25}); }

PhysicsParams ExperimentConfig::seeded_physics() const {
  PhysicsParams p = physics;
  p.rng_seed = seed;
  return p;
}

PerturbationSpec ExperimentConfig::seeded_perturbation() const {
  PerturbationSpec p = segmentation.perturbation;
  p.rng_seed = seed;
  return p;
}

ExperimentConfig parse_config(const json& doc) {
  check_keys(doc, {"name", "phantom", "geometry", "physics", "seed", "mar", "segmentation", "evaluation", "taus"},
             "config");
  ExperimentConfig cfg;
  cfg.mar.recon_grid = desk_scale_grid();
  require(doc.contains("phantom"), ErrorCode::parameter, "config needs a phantom");
  cfg.phantom_doc = doc.at("phantom");
  cfg.phantom = phantom_from_json(cfg.phantom_doc);
  get_opt(doc, "geometry", cfg.geometry);
  get_opt(doc, "physics", cfg.physics);
  get_opt(doc, "seed", cfg.seed);
  if (doc.contains("mar")) {
    json m = doc.at("mar");
    if (!m.contains("recon_grid")) m["recon_grid"] = cfg.mar.recon_grid;
    cfg.mar = m.get<MarParams>();
  }
  if (doc.contains("segmentation")) {
    const json& s = doc.at("segmentation");
    check_keys(s, {"source", "heuristic", "perturbation", "ratio_threshold", "external_path"}, "segmentation");
    if (s.contains("source")) {
      const auto name = s.at("source").get<std::string>();
      if (name == "heuristic") cfg.segmentation.source = SegSourceKind::heuristic;
      else if (name == "gt_labels") cfg.segmentation.source = SegSourceKind::gt_labels;
      else if (name == "perturbed_gt") cfg.segmentation.source = SegSourceKind::perturbed_gt;
      else if (name == "external") cfg.segmentation.source = SegSourceKind::external;
      else fail(ErrorCode::parameter, "unknown segmentation source '" + name + "'");
    }
    get_opt(s, "heuristic", cfg.segmentation.heuristic);
    get_opt(s, "perturbation", cfg.segmentation.perturbation);
    get_opt(s, "ratio_threshold", cfg.segmentation.ratio_threshold);
    get_opt(s, "external_path", cfg.segmentation.external_path);
    require(cfg.segmentation.source != SegSourceKind::external || !cfg.segmentation.external_path.empty(),
            ErrorCode::parameter, "external segmentation needs external_path");
    require(cfg.segmentation.ratio_threshold > 0.0, ErrorCode::parameter, "ratio_threshold must be > 0");
  }
  if (doc.contains("evaluation")) {
    const json& e = doc.at("evaluation");
    check_keys(e, {"data_range", "joint_seg_threshold", "joint_tau", "ssim_window", "ssim_sigma", "ssim_k1", "ssim_k2",
                   "window"},
               "evaluation");
    auto& ev = cfg.evaluation;
    get_opt(e, "data_range", ev.data_range);
    get_opt(e, "joint_seg_threshold", ev.joint_seg_threshold);
    get_opt(e, "joint_tau", ev.joint_tau);
    get_opt(e, "ssim_window", ev.ssim.window);
    get_opt(e, "ssim_sigma", ev.ssim.sigma);
    get_opt(e, "ssim_k1", ev.ssim.k1);
    get_opt(e, "ssim_k2", ev.ssim.k2);
    if (e.contains("window")) {
      const auto w = e.at("window").get<std::array<double, 2>>();
      ev.window_min = w[0];
      ev.window_max = w[1];
    }
    require(ev.data_range > 0.0, ErrorCode::parameter, "data_range must be > 0");
    require(ev.joint_tau > 0.0 && ev.joint_tau <= 1.0, ErrorCode::parameter, "joint_tau must be in (0, 1]");
    require(ev.ssim.window >= 3 && ev.ssim.window % 2 == 1, ErrorCode::parameter, "ssim_window must be odd and >= 3");
    require(ev.window_max > ev.window_min, ErrorCode::parameter, "display window must be increasing");
    ev.ssim.data_range = ev.data_range;
  }
  get_opt(doc, "taus", cfg.taus);
  for (double t : cfg.taus) require(t > 0.0 && t <= 1.0, ErrorCode::parameter, "taus must lie in (0, 1]");
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) { return parse_config(read_json(path)); }

json config_to_json(const ExperimentConfig& cfg) {
  const auto& ev = cfg.evaluation;
  return {{"phantom", cfg.phantom_doc.is_null() ? json(cfg.phantom) : cfg.phantom_doc},
          {"geometry", cfg.geometry},
          {"physics", cfg.physics},
          {"seed", cfg.seed},
          {"mar", cfg.mar},
          {"segmentation",
           {{"source", seg_name(cfg.segmentation.source)},
            {"heuristic", cfg.segmentation.heuristic},
            {"perturbation", cfg.segmentation.perturbation},
            {"ratio_threshold", cfg.segmentation.ratio_threshold},
            {"external_path", cfg.segmentation.external_path}}},
          {"evaluation",
           {{"data_range", ev.data_range},
            {"joint_seg_threshold", ev.joint_seg_threshold},
            {"joint_tau", ev.joint_tau},
            {"ssim_window", ev.ssim.window},
            {"ssim_sigma", ev.ssim.sigma},
            {"ssim_k1", ev.ssim.k1},
            {"ssim_k2", ev.ssim.k2},
            {"window", {ev.window_min, ev.window_max}}}},
          {"taus", cfg.taus}};
}

SegSource make_segmentation(const ExperimentConfig& cfg, const MatchedPair& pair) {
  const auto& s = cfg.segmentation;
  switch (s.source) {
    case SegSourceKind::heuristic:
      return heuristic_segment(to_line_integrals(pair.with_metal), s.heuristic);
    case SegSourceKind::gt_labels:
      return generate_gt_labels(pair.with_metal, pair.metal_free, s.ratio_threshold);
    case SegSourceKind::perturbed_gt:
      return perturb_masks(generate_gt_labels(pair.with_metal, pair.metal_free, s.ratio_threshold),
                           cfg.seeded_perturbation());
    case SegSourceKind::external: {
      auto ext = load_external_masks(s.external_path, pair.with_metal.geometry);
      if (auto* m = std::get_if<MaskStack>(&ext)) return std::move(*m);
      return std::get<ScoreStack>(std::move(ext));
    }
  }
  fail(ErrorCode::parameter, "unknown segmentation source");
}

Volume make_label_volume(const ProjectionStack& metal_free_raw, const MarContext& ctx, const MarParams& params) {
  const ProjectionStack li =
      metal_free_raw.kind == ProjectionKind::raw_intensity ? to_line_integrals(metal_free_raw) : metal_free_raw;
  const Volume clean = to_hounsfield(fdk_reconstruct(li, params.recon_grid), params.mu_water);
  return metal_insertion(clean, ctx.uncorrected, ctx.threshold_mask);
}

RunMetrics evaluate_run(const std::string& name, const Volume& run, const Volume& label, const Mask3D& joint,
                        const EvaluationConfig& eval) {
  SsimParams sp = eval.ssim;
  sp.data_range = eval.data_range;
  return {name, masked_ssim(run, label, joint, sp), masked_psnr(run, label, joint, eval.data_range)};
}

RunComparison compare_runs(const RunMetrics& a, const RunMetrics& b) {
  RunComparison c{a.name, b.name};
  auto diff = [](const SliceReport& x, const SliceReport& y, double& mx, double& mn, double& mean) {
    mx = -std::numeric_limits<double>::infinity();
    mn = std::numeric_limits<double>::infinity();
    double sum = 0.0;
    int n = 0;
    for (std::size_t k = 0; k < x.slices.size(); ++k) {
      if (!x.slices[k].contains_metal) continue;
      const double d = y.slices[k].value - x.slices[k].value;
      if (!std::isfinite(d)) continue;
      mx = std::max(mx, d);
      mn = std::min(mn, d);
      sum += d;
      ++n;
    }
    mean = n ? sum / n : std::numeric_limits<double>::quiet_NaN();
  };
  diff(a.psnr, b.psnr, c.psnr_max_diff, c.psnr_min_diff, c.psnr_mean_diff);
  diff(a.ssim, b.ssim, c.ssim_max_diff, c.ssim_min_diff, c.ssim_mean_diff);
  return c;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  ExperimentResult r;
  r.pair = make_matched_pair(cfg.phantom, cfg.geometry, cfg.seeded_physics());
  const SegSource seg = make_segmentation(cfg, r.pair);
  r.context = prepare_mar(r.pair.with_metal, cfg.mar);
  r.label = make_label_volume(r.pair.metal_free, r.context, cfg.mar);
  r.standard = run_standard_fsmar(r.context, cfg.mar);
  r.modified = run_modified_fsmar(r.context, seg, cfg.mar);
  r.overestimated =
      segmentation_envelope(seg, cfg.mar, cfg.evaluation.joint_seg_threshold, cfg.evaluation.joint_tau);
  r.joint = joint_mask(r.context.threshold_mask, r.overestimated);
  r.metrics.push_back(evaluate_run("nomar", r.context.uncorrected, r.label, r.joint, cfg.evaluation));
  r.metrics.push_back(evaluate_run("standard", r.standard.volume, r.label, r.joint, cfg.evaluation));
  r.metrics.push_back(evaluate_run("modified", r.modified.volume, r.label, r.joint, cfg.evaluation));
  r.comparison = compare_runs(r.metrics[1], r.metrics[2]);
  return r;
}

std::vector<SweepRow> sweep_tau(const ExperimentConfig& cfg, const MatchedPair& pair, const std::vector<double>& taus) {
  const SegSource seg = make_segmentation(cfg, pair);
  const MaskStack masks = std::holds_alternative<ScoreStack>(seg)
                              ? binarize(std::get<ScoreStack>(seg), cfg.mar.seg_threshold)
                              : std::get<MaskStack>(seg);
  const MaskStack reference = metal_trace_stack(cfg.phantom, pair.with_metal.geometry);
  const MarContext ctx = prepare_mar(pair.with_metal, cfg.mar);
  const Volume label = make_label_volume(pair.metal_free, ctx, cfg.mar);
  const Mask3D joint = joint_mask(
      ctx.threshold_mask, segmentation_envelope(seg, cfg.mar, cfg.evaluation.joint_seg_threshold, cfg.evaluation.joint_tau));

  const GridSpec cf_grid = cfg.mar.effective_cf_grid();
  const HitVolumes hits = accumulate_hits(masks, cf_grid);
  const int support = cfg.mar.cf_min_support < 0 ? default_min_support(masks.views()) : cfg.mar.cf_min_support;

  std::vector<SweepRow> rows;
  for (double tau : taus) {
    const Mask3D envelope = binarize_consistency(hits, tau, support);
    MaskStack filtered = reproject_mask(envelope, pair.with_metal.geometry);
    SweepRow row{tau, mask_prf(filtered, reference)};
    const MarResult res = cfg.mar.insertion_mask == InsertionMask::cf_envelope
                              ? run_inpainting_mar(ctx, std::move(filtered), resample_nearest(envelope, cfg.mar.recon_grid), cfg.mar)
                              : run_inpainting_mar(ctx, std::move(filtered), ctx.threshold_mask, cfg.mar);
    const RunMetrics m = evaluate_run("tau", res.volume, label, joint, cfg.evaluation);
    row.ssim_mean = m.ssim.mean;
    row.psnr_mean = m.psnr.mean;
    rows.push_back(row);
  }
  return rows;
}

json evaluation_summary(const std::vector<RunMetrics>& runs, const std::vector<RunComparison>& comparisons) {
  json j;
  j["runs"] = json::object();
  for (const auto& r : runs) {
    j["runs"][r.name] = {{"ssim_mean", num_json(r.ssim.mean)},
                         {"ssim_median", num_json(r.ssim.median)},
                         {"psnr_mean_db", num_json(r.psnr.mean)},
                         {"psnr_median_db", num_json(r.psnr.median)},
                         {"metal_slices", r.ssim.aggregated}};
  }
  j["comparisons"] = json::array();
  for (const auto& c : comparisons) {
    j["comparisons"].push_back({{"baseline", c.baseline},
                                {"candidate", c.candidate},
                                {"psnr_max_diff_db", num_json(c.psnr_max_diff)},
                                {"psnr_min_diff_db", num_json(c.psnr_min_diff)},
                                {"psnr_mean_diff_db", num_json(c.psnr_mean_diff)},
                                {"ssim_max_diff", num_json(c.ssim_max_diff)},
                                {"ssim_min_diff", num_json(c.ssim_min_diff)},
                                {"ssim_mean_diff", num_json(c.ssim_mean_diff)}});
  }
  return j;
}

std::string slice_csv(const RunMetrics& run) {
  std::ostringstream out;
  out << "index,ssim,psnr_db,contains_metal\n";
  for (std::size_t k = 0; k < run.ssim.slices.size(); ++k)
    out << run.ssim.slices[k].index << ',' << num(run.ssim.slices[k].value) << ',' << num(run.psnr.slices[k].value)
        << ',' << (run.ssim.slices[k].contains_metal ? 1 : 0) << '\n';
  return out.str();
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "tau,precision,recall,f_score,ssim_mean,psnr_mean_db\n";
  for (const auto& r : rows)
    out << num(r.tau) << ',' << num(r.prf.precision) << ',' << num(r.prf.recall) << ',' << num(r.prf.f1) << ','
        << num(r.ssim_mean) << ',' << num(r.psnr_mean) << '\n';
  return out.str();
}

}  // namespace cfmar
