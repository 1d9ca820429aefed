// cfmar: command line front end over the file-based stages.

#include <omp.h>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cfmar/recon_fdk.hpp"
#include "cfmar/segmentation_3d.hpp"
#include "cfmar/workflow.hpp"

using namespace cfmar;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

int report_error(std::string_view slug, const std::string& message, int code) {
  std::cerr << json{{"error", slug}, {"message", message}}.dump() << std::endl;
  return code;
}

struct Globals {
  int threads = 0;
  std::optional<std::uint64_t> seed;
};

ExperimentConfig config_with_seed(const std::string& path, const Globals& g) {
  ExperimentConfig cfg = load_config(path);
  if (g.seed) cfg.seed = *g.seed;
  return cfg;
}

std::vector<fs::path> split_paths(const std::string& list) {
  std::vector<fs::path> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const std::size_t end = std::min(list.find(',', start), list.size());
    if (end > start) out.emplace_back(list.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

std::vector<int> parse_slices(const std::string& text) {
  std::vector<int> out;
  if (text == "all") return out;
  for (double v : parse_number_list(text)) out.push_back(static_cast<int>(v));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Consistency-filtered metal artifact reduction for cone-beam CT"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--threads", g.threads, "Worker threads (default: all cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", g.seed, "Seed overriding the config / default seed");

  // phantom
  auto* phantom = app.add_subcommand("phantom", "Phantom presets");
  phantom->require_subcommand(1);
  std::string preset, phantom_out;
  auto* phantom_build = phantom->add_subcommand("build", "Write a preset phantom as JSON");
  phantom_build->add_option("--preset", preset, "Preset name or metal_free_twin(<preset>)")->required();
  phantom_build->add_option("--out", phantom_out, "Output directory")->required();
  auto* phantom_list = phantom->add_subcommand("list", "List preset names");

  // simulate
  std::string sim_phantom, sim_geom, sim_physics, sim_out;
  auto* simulate = app.add_subcommand("simulate", "Matched metal / metal-free raw acquisitions");
  simulate->add_option("--phantom", sim_phantom, "Phantom JSON (full, {\"preset\":..} or a preset name)")->required();
  simulate->add_option("--geom", sim_geom, "Geometry JSON (default: desk scale)");
  simulate->add_option("--physics", sim_physics, "Physics JSON (default: ideal)");
  simulate->add_option("--out", sim_out, "Output directory")->required();

  // reconstruct
  std::string rec_proj, rec_grid = "desk", rec_out, rec_unit = "hu", rec_png, rec_window = "-1000,3000",
                        rec_slices = "all";
  double rec_mu_water = kMuWater;
  auto* reconstruct = app.add_subcommand("reconstruct", "FDK reconstruction of a projection stack");
  reconstruct->add_option("--proj", rec_proj, "Projection stack (raw intensities or line integrals)")->required();
  reconstruct->add_option("--grid", rec_grid, "'desk', 'NXxNYxNZ:spacing' or grid JSON");
  reconstruct->add_option("--out", rec_out, "Output volume base path")->required();
  reconstruct->add_option("--unit", rec_unit, "hu or mu")->check(CLI::IsMember({"hu", "mu"}));
  reconstruct->add_option("--mu-water", rec_mu_water, "Water attenuation for HU, 1/mm");
  reconstruct->add_option("--png", rec_png, "Directory for axial PNG slices");
  reconstruct->add_option("--window", rec_window, "PNG window 'wmin,wmax' in HU");
  reconstruct->add_option("--slices", rec_slices, "PNG slice list, e.g. 10,64 or all");

  // labels
  std::string lab_pair, lab_out;
  double lab_ratio = 0.98;
  auto* labels = app.add_subcommand("labels", "Ground-truth 2D metal masks from a matched pair");
  labels->add_option("--pair", lab_pair, "Directory written by simulate")->required();
  labels->add_option("--ratio", lab_ratio, "Ratio threshold");
  labels->add_option("--out", lab_out, "Output mask stack")->required();

  // segment2d
  std::string seg_proj, seg_method = "heuristic", seg_params, seg_external, seg_out;
  auto* segment2d = app.add_subcommand("segment2d", "2D metal segmentation of projections");
  segment2d->add_option("--proj", seg_proj, "Projection stack")->required();
  segment2d->add_option("--method", seg_method, "heuristic or external")->check(CLI::IsMember({"heuristic", "external"}));
  segment2d->add_option("--params", seg_params, "Heuristic parameter JSON");
  segment2d->add_option("--external", seg_external, "External mask/score stack (method external)");
  segment2d->add_option("--out", seg_out, "Output stack")->required();

  // cf
  std::string cf_masks, cf_grid = "extended", cf_recon = "desk", cf_out;
  double cf_tau = 0.96, cf_threshold = 0.0;
  int cf_support = -1;
  auto* cf = app.add_subcommand("cf", "Consistency filter on 2D masks");
  cf->add_option("--masks", cf_masks, "Mask or score stack")->required();
  cf->add_option("--tau", cf_tau, "Consistency threshold in (0, 1]");
  cf->add_option("--threshold", cf_threshold, "Binarization threshold for score stacks");
  cf->add_option("--grid", cf_grid, "'extended' or a grid spec");
  cf->add_option("--recon-grid", cf_recon, "Recon grid the extension is built around");
  cf->add_option("--min-support", cf_support, "Minimum views on the detector (default: views/10)");
  cf->add_option("--out", cf_out, "Output directory")->required();

  // segment3d
  std::string s3_vol, s3_geom, s3_out;
  double s3_hu = 3000.0;
  int s3_min = 10;
  auto* segment3d = app.add_subcommand("segment3d", "Threshold segmentation of a HU volume");
  segment3d->add_option("--vol", s3_vol, "HU volume")->required();
  segment3d->add_option("--hu", s3_hu, "HU threshold");
  segment3d->add_option("--min-size", s3_min, "Smallest kept component, voxels");
  segment3d->add_option("--geom", s3_geom, "Geometry JSON for the projected masks (default: desk scale)");
  segment3d->add_option("--out", s3_out, "Output directory")->required();

  // mar
  std::string mar_variant, mar_config, mar_pair, mar_seg, mar_out;
  auto* mar = app.add_subcommand("mar", "Run one MAR variant");
  mar->add_option("--variant", mar_variant, "standard or modified")->required()->check(
      CLI::IsMember({"standard", "modified"}));
  mar->add_option("--config", mar_config, "Experiment config JSON")->required();
  mar->add_option("--pair", mar_pair, "Directory written by simulate (default: simulate into <out>/pair)");
  mar->add_option("--seg", mar_seg, "Segmentation stack overriding the configured source");
  mar->add_option("--out", mar_out, "Output directory")->required();

  // label-volume
  std::string lv_config, lv_pair, lv_out;
  auto* label_volume = app.add_subcommand("label-volume", "Reference volume from the metal-free scan");
  label_volume->add_option("--config", lv_config, "Experiment config JSON")->required();
  label_volume->add_option("--pair", lv_pair, "Directory written by simulate")->required();
  label_volume->add_option("--out", lv_out, "Output volume base path")->required();

  // evaluate
  std::string ev_label, ev_runs, ev_joint = "auto", ev_config, ev_out;
  auto* evaluate = app.add_subcommand("evaluate", "Masked SSIM / PSNR reports");
  evaluate->add_option("--label", ev_label, "Reference volume")->required();
  evaluate->add_option("--runs", ev_runs, "Comma separated run directories or volumes")->required();
  evaluate->add_option("--jointmask", ev_joint, "auto, none or a Mask3D path");
  evaluate->add_option("--config", ev_config, "Config whose evaluation section is used");
  evaluate->add_option("--out", ev_out, "Output directory")->required();

  // pipeline
  std::string pl_config, pl_out;
  auto* pipeline = app.add_subcommand("pipeline", "simulate, both MAR variants and evaluation");
  pipeline->add_option("--config", pl_config, "Experiment config JSON")->required();
  pipeline->add_option("--out", pl_out, "Output directory (default: run_<config stem>)");

  // sweep-tau
  std::string sw_config, sw_taus, sw_pair, sw_out;
  auto* sweep = app.add_subcommand("sweep-tau", "Precision / recall / F / SSIM versus tau");
  sweep->add_option("--config", sw_config, "Experiment config JSON")->required();
  sweep->add_option("--taus", sw_taus, "Comma separated taus (default: config list)");
  sweep->add_option("--pair", sw_pair, "Directory written by simulate (default: simulate in memory)");
  sweep->add_option("--out", sw_out, "Output CSV (default: stdout only)");

  // export-png
  std::string png_vol, png_dir, png_window = "-1000,3000", png_slices = "all";
  auto* export_png = app.add_subcommand("export-png", "Axial PNG slices of a volume");
  export_png->add_option("--vol", png_vol, "Volume")->required();
  export_png->add_option("--out", png_dir, "Output directory")->required();
  export_png->add_option("--window", png_window, "Window 'wmin,wmax'");
  export_png->add_option("--slices", png_slices, "Slice list or all");

  // config check
  auto* config = app.add_subcommand("config", "Config utilities");
  config->require_subcommand(1);
  std::string check_path;
  auto* config_check = config->add_subcommand("check", "Validate a config and print it with defaults filled in");
  config_check->add_option("file", check_path, "Config JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what(), kExitUsage);
  }

  try {
    if (g.threads > 0) omp_set_num_threads(g.threads);

    if (phantom_build->parsed()) {
      const Phantom p = build_preset(preset);
      fs::create_directories(phantom_out);
      write_json(fs::path(phantom_out) / "phantom.json", p);
    } else if (phantom_list->parsed()) {
      for (const auto& n : preset_names()) std::cout << n << "\n";
    } else if (simulate->parsed()) {
      const Phantom p = fs::exists(sim_phantom) ? phantom_from_json(read_json(sim_phantom)) : build_preset(sim_phantom);
      const ScanGeometry geom = sim_geom.empty() ? desk_scale_geometry() : read_json(sim_geom).get<ScanGeometry>();
      PhysicsParams physics = sim_physics.empty() ? PhysicsParams{} : read_json(sim_physics).get<PhysicsParams>();
      if (g.seed) physics.rng_seed = *g.seed;
      simulate_to_dir(p, geom, physics, sim_out);
    } else if (reconstruct->parsed()) {
      ProjectionStack proj = load_projection_stack(rec_proj);
      if (proj.kind == ProjectionKind::raw_intensity) proj = to_line_integrals(proj);
      Volume v = fdk_reconstruct(proj, parse_grid_spec(rec_grid));
      if (rec_unit == "hu") v = to_hounsfield(v, rec_mu_water);
      save_volume(rec_out, v);
      if (!rec_png.empty()) {
        require(rec_unit == "hu", ErrorCode::parameter, "--png needs --unit hu");
        export_slices(v, parse_slices(rec_slices), HuWindow::parse(rec_window), rec_png,
                      RawPair::from(rec_out).sidecar.stem().string());
      }
    } else if (labels->parsed()) {
      const MatchedPair pair = load_pair(lab_pair);
      save_mask_stack(lab_out, generate_gt_labels(pair.with_metal, pair.metal_free, lab_ratio));
    } else if (segment2d->parsed()) {
      ProjectionStack proj = load_projection_stack(seg_proj);
      if (seg_method == "heuristic") {
        if (proj.kind == ProjectionKind::raw_intensity) proj = to_line_integrals(proj);
        const HeuristicParams hp = seg_params.empty() ? HeuristicParams{} : read_json(seg_params).get<HeuristicParams>();
        save_score_stack(seg_out, heuristic_segment(proj, hp));
      } else {
        require(!seg_external.empty(), ErrorCode::parameter, "--method external needs --external");
        auto ext = load_external_masks(seg_external, proj.geometry);
        if (auto* m = std::get_if<MaskStack>(&ext)) save_mask_stack(seg_out, *m);
        else save_score_stack(seg_out, std::get<ScoreStack>(ext));
      }
    } else if (cf->parsed()) {
      const AnyStack any = load_stack(cf_masks);
      MaskStack masks;
      if (const auto* m = std::get_if<MaskStack>(&any)) masks = *m;
      else if (const auto* s = std::get_if<ScoreStack>(&any)) masks = binarize(*s, cf_threshold);
      else fail(ErrorCode::contract, "cf expects a mask or score stack");
      const GridSpec recon = parse_grid_spec(cf_recon);
      const GridSpec grid = cf_grid == "extended" ? extended_grid(recon) : parse_grid_spec(cf_grid);
      const int support = cf_support < 0 ? default_min_support(masks.views()) : cf_support;
      const HitVolumes hits = accumulate_hits(masks, grid);
      const Mask3D envelope = binarize_consistency(hits, cf_tau, support);
      const fs::path out = cf_out;
      fs::create_directories(out);
      save_mask_stack(out / "masks", reproject_mask(envelope, masks.geometry));
      save_mask3d(out / "envelope", envelope);
      save_hit_volumes(out / "hits", hits);
      if (cf_grid == "extended") save_mask3d(out / "envelope_recon", resample_nearest(envelope, recon));
    } else if (segment3d->parsed()) {
      const Volume v = load_volume(s3_vol);
      require(v.unit == ValueUnit::hounsfield, ErrorCode::contract, "segment3d expects a HU volume");
      const Mask3D m = threshold_segment_3d(v, s3_hu, s3_min);
      const ScanGeometry geom = s3_geom.empty() ? desk_scale_geometry() : read_json(s3_geom).get<ScanGeometry>();
      const fs::path out = s3_out;
      fs::create_directories(out);
      save_mask3d(out / "mask3d", m);
      save_mask_stack(out / "projected", forward_project_mask3d(m, geom));
    } else if (mar->parsed()) {
      const ExperimentConfig cfg = config_with_seed(mar_config, g);
      fs::path pair = mar_pair;
      if (pair.empty()) {
        pair = fs::path(mar_out) / "pair";
        simulate_to_dir(cfg.phantom, cfg.geometry, cfg.seeded_physics(), pair);
      }
      std::optional<fs::path> seg;
      if (!mar_seg.empty()) seg = mar_seg;
      mar_to_dir(cfg, parse_variant(mar_variant), pair, mar_out, seg);
    } else if (label_volume->parsed()) {
      label_to_file(config_with_seed(lv_config, g), lv_pair, lv_out);
    } else if (evaluate->parsed()) {
      EvaluateOptions opt;
      if (!ev_config.empty()) opt.eval = load_config(ev_config).evaluation;
      opt.joint = ev_joint;
      const json summary = evaluate_to_dir(ev_label, split_paths(ev_runs), opt, ev_out);
      std::cout << summary.dump(2) << std::endl;
    } else if (pipeline->parsed()) {
      const ExperimentConfig cfg = config_with_seed(pl_config, g);
      const fs::path out = pl_out.empty() ? fs::path("run_" + fs::path(pl_config).stem().string()) : fs::path(pl_out);
      std::cout << run_pipeline(cfg, out).dump(2) << std::endl;
    } else if (sweep->parsed()) {
      const ExperimentConfig cfg = config_with_seed(sw_config, g);
      const std::vector<double> taus = sw_taus.empty() ? cfg.taus : parse_number_list(sw_taus);
      std::optional<fs::path> pair;
      if (!sw_pair.empty()) pair = sw_pair;
      const std::string csv =
          sweep_to_file(cfg, taus, sw_out.empty() ? fs::path() : fs::path(sw_out), pair);
      std::cout << csv;
    } else if (export_png->parsed()) {
      const Volume v = load_volume(png_vol);
      export_slices(v, parse_slices(png_slices), HuWindow::parse(png_window), png_dir,
                    RawPair::from(png_vol).sidecar.stem().string());
    } else if (config_check->parsed()) {
      const ExperimentConfig cfg = load_config(check_path);
      cfg.mar.validate();
      std::cout << config_to_json(cfg).dump(2) << std::endl;
    }
  } catch (const Error& e) {
    return report_error(e.slug(), e.what(), e.code() == ErrorCode::numerical ? kExitNumerical : kExitUsage);
  } catch (const json::exception& e) {
    return report_error(error_slug(ErrorCode::format), e.what(), kExitUsage);
  } catch (const fs::filesystem_error& e) {
    return report_error(error_slug(ErrorCode::io), e.what(), kExitUsage);
  } catch (const std::bad_alloc&) {
    return report_error(error_slug(ErrorCode::numerical), "out of memory", kExitNumerical);
  }
  return 0;
}
