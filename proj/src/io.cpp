#include "cfmar/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <initializer_list>

namespace cfmar {

static_assert(std::endian::native == std::endian::little, "RAW files are little-endian");

namespace fs = std::filesystem;

namespace {

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

Vec3 vec_from(const json& j) {
  require(j.is_array() && j.size() == 3, ErrorCode::parameter, "expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}
json vec_to(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

std::string dtype_name(StoredDtype d) {
  switch (d) {
    case StoredDtype::float32: return "float32";
    case StoredDtype::float64: return "float64";
    case StoredDtype::uint8: return "uint8";
    case StoredDtype::uint16: return "uint16";
  }
  return "float32";
}

StoredDtype dtype_from(const std::string& s) {
  if (s == "float32") return StoredDtype::float32;
  if (s == "float64") return StoredDtype::float64;
  if (s == "uint8") return StoredDtype::uint8;
  if (s == "uint16") return StoredDtype::uint16;
  fail(ErrorCode::format, "unsupported dtype '" + s + "'");
}

std::size_t dtype_size(StoredDtype d) {
  switch (d) {
    case StoredDtype::float32: return 4;
    case StoredDtype::float64: return 8;
    case StoredDtype::uint8: return 1;
    case StoredDtype::uint16: return 2;
  }
  return 4;
}

template <class T>
void write_raw(const fs::path& path, const std::vector<T>& values, StoredDtype dtype) {
  std::vector<char> bytes(values.size() * dtype_size(dtype));
  for (std::size_t n = 0; n < values.size(); ++n) {
    char* dst = bytes.data() + n * dtype_size(dtype);
    switch (dtype) {
      case StoredDtype::float32: {
        const float f = static_cast<float>(values[n]);
        std::memcpy(dst, &f, 4);
        break;
      }
      case StoredDtype::float64: {
        const double f = static_cast<double>(values[n]);
        std::memcpy(dst, &f, 8);
        break;
      }
      case StoredDtype::uint8: {
        const auto f = static_cast<std::uint8_t>(values[n]);
        std::memcpy(dst, &f, 1);
        break;
      }
      case StoredDtype::uint16: {
        const auto f = static_cast<std::uint16_t>(values[n]);
        std::memcpy(dst, &f, 2);
        break;
      }
    }
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), ErrorCode::io, "write failed for " + path.string());
}

template <class T>
std::vector<T> read_raw(const fs::path& path, std::size_t count, StoredDtype dtype) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::io, "cannot read " + path.string());
  const std::size_t expected = count * dtype_size(dtype);
  std::error_code ec;
  const auto size = fs::file_size(path, ec);
  require(!ec && size == expected, ErrorCode::format,
          path.string() + ": expected " + std::to_string(expected) + " bytes, found " + std::to_string(ec ? 0 : size));
  std::vector<char> bytes(expected);
  in.read(bytes.data(), static_cast<std::streamsize>(expected));
  require(static_cast<std::size_t>(in.gcount()) == expected, ErrorCode::format, path.string() + " is truncated");
  std::vector<T> out(count);
  for (std::size_t n = 0; n < count; ++n) {
    const char* src = bytes.data() + n * dtype_size(dtype);
    switch (dtype) {
      case StoredDtype::float32: {
        float f;
        std::memcpy(&f, src, 4);
        out[n] = static_cast<T>(f);
        break;
      }
      case StoredDtype::float64: {
        double f;
        std::memcpy(&f, src, 8);
        out[n] = static_cast<T>(f);
        break;
      }
      case StoredDtype::uint8: {
        std::uint8_t f;
        std::memcpy(&f, src, 1);
        out[n] = static_cast<T>(f);
        break;
      }
      case StoredDtype::uint16: {
        std::uint16_t f;
        std::memcpy(&f, src, 2);
        out[n] = static_cast<T>(f);
        break;
      }
    }
  }
  return out;
}

std::string stack_kind_tag(const AnyStack& s) {
  if (const auto* p = std::get_if<ProjectionStack>(&s)) return to_string(p->kind);
  if (std::holds_alternative<ScoreStack>(s)) return "scores";
  return "mask";
}

template <class Stack>
void save_stack_impl(const fs::path& path, const Stack& stack, json meta, StoredDtype dtype) {
  const RawPair files = RawPair::from(path);
  meta["format"] = "cfmar-stack";
  meta["dtype"] = dtype_name(dtype);
  meta["dims"] = {stack.views(), stack.rows(), stack.cols()};
  meta["geometry"] = stack.geometry;
  meta["raw_file"] = files.raw.filename().string();
  write_raw(files.raw, stack.data, dtype);
  write_json(files.sidecar, meta);
}

Material material_by_name(const std::string& name) {
  if (name == "soft_tissue") return materials::soft_tissue();
  if (name == "fat") return materials::fat();
  if (name == "bone_cancellous") return materials::bone_cancellous();
  if (name == "bone_cortical") return materials::bone_cortical();
  if (name == "titanium") return materials::titanium();
  if (name == "steel") return materials::steel();
  fail(ErrorCode::parameter, "unknown material '" + name + "'");
}

}  // namespace

// ---- enums ------------------------------------------------------------

std::string to_string(ProjectionKind kind) {
  return kind == ProjectionKind::line_integral ? "line_integral" : "raw_intensity";
}

std::string to_string(ValueUnit unit) {
  switch (unit) {
    case ValueUnit::none: return "none";
    case ValueUnit::attenuation: return "attenuation_per_mm";
    case ValueUnit::hounsfield: return "hounsfield";
    case ValueUnit::mask: return "mask";
    case ValueUnit::count: return "count";
  }
  return "none";
}

static ValueUnit unit_from(const std::string& s) {
  for (ValueUnit u : {ValueUnit::none, ValueUnit::attenuation, ValueUnit::hounsfield, ValueUnit::mask, ValueUnit::count})
    if (to_string(u) == s) return u;
  fail(ErrorCode::format, "unknown value unit '" + s + "'");
}

std::string to_string(InpaintMethod m) { return m == InpaintMethod::row_linear ? "row_linear" : "harmonic2d"; }
std::string to_string(InsertionMask m) { return m == InsertionMask::threshold_3d ? "threshold_3d" : "cf_envelope"; }

// ---- geometry ---------------------------------------------------------

void to_json(json& j, const DetectorSpec& d) {
  j = {{"rows", d.rows}, {"cols", d.cols}, {"pixel_pitch", d.pixel_pitch}, {"u0", d.u0}, {"v0", d.v0}};
}

void from_json(const json& j, DetectorSpec& d) {
  check_keys(j, {"rows", "cols", "pixel_pitch", "u0", "v0"}, "detector");
  get_opt(j, "rows", d.rows);
  get_opt(j, "cols", d.cols);
  get_opt(j, "pixel_pitch", d.pixel_pitch);
  d.u0 = d.cols / 2.0;
  d.v0 = d.rows / 2.0;
  get_opt(j, "u0", d.u0);
  get_opt(j, "v0", d.v0);
}

void to_json(json& j, const ScanGeometry& g) {
  j = {{"num_views", g.num_views},
       {"start_angle_deg", g.start_angle_deg},
       {"angular_increment_deg", g.angular_increment_deg},
       {"source_to_isocenter", g.source_to_isocenter},
       {"source_to_detector", g.source_to_detector},
       {"detector", g.detector}};
}

void from_json(const json& j, ScanGeometry& g) {
  check_keys(j,
             {"num_views", "start_angle_deg", "angular_increment_deg", "angular_range_deg", "source_to_isocenter",
              "source_to_detector", "detector"},
             "geometry");
  g = desk_scale_geometry();
  get_opt(j, "num_views", g.num_views);
  get_opt(j, "start_angle_deg", g.start_angle_deg);
  if (j.contains("angular_range_deg")) {
    require(!j.contains("angular_increment_deg"), ErrorCode::parameter,
            "geometry: give angular_range_deg or angular_increment_deg, not both");
    require(g.num_views > 0, ErrorCode::parameter, "num_views must be > 0");
    g.angular_increment_deg = j.at("angular_range_deg").get<double>() / g.num_views;
  }
  get_opt(j, "angular_increment_deg", g.angular_increment_deg);
  get_opt(j, "source_to_isocenter", g.source_to_isocenter);
  get_opt(j, "source_to_detector", g.source_to_detector);
  get_opt(j, "detector", g.detector);
  g.validate();
}

void to_json(json& j, const GridSpec& g) { j = {{"dims", g.dims}, {"spacing", g.spacing}, {"origin", g.origin}}; }

void from_json(const json& j, GridSpec& g) {
  check_keys(j, {"dims", "spacing", "origin"}, "grid");
  get_opt(j, "dims", g.dims);
  get_opt(j, "spacing", g.spacing);
  if (j.contains("origin")) {
    get_opt(j, "origin", g.origin);
  } else {
    g = GridSpec::centered(g.dims, g.spacing);
  }
  g.validate();
}

void to_json(json& j, const PhysicsParams& p) {
  j = {{"i0", p.i0},
       {"bh_alpha", p.bh_alpha},
       {"poisson_noise", p.poisson_noise},
       {"rng_seed", p.rng_seed},
       {"intensity_floor", p.intensity_floor}};
}

void from_json(const json& j, PhysicsParams& p) {
  check_keys(j, {"i0", "bh_alpha", "poisson_noise", "rng_seed", "intensity_floor"}, "physics");
  get_opt(j, "i0", p.i0);
  get_opt(j, "bh_alpha", p.bh_alpha);
  get_opt(j, "poisson_noise", p.poisson_noise);
  get_opt(j, "rng_seed", p.rng_seed);
  get_opt(j, "intensity_floor", p.intensity_floor);
  p.validate();
}

// ---- phantom ----------------------------------------------------------

void to_json(json& j, const Material& m) {
  j = {{"name", m.name}, {"mu", m.mu}, {"is_metal", m.is_metal}, {"beam_hardening_coeff", m.beam_hardening_coeff}};
}

void from_json(const json& j, Material& m) {
  if (j.is_string()) {
    m = material_by_name(j.get<std::string>());
    return;
  }
  check_keys(j, {"name", "mu", "is_metal", "beam_hardening_coeff"}, "material");
  if (j.contains("name") && !j.contains("mu")) {
    m = material_by_name(j.at("name").get<std::string>());
  }
  get_opt(j, "name", m.name);
  get_opt(j, "mu", m.mu);
  get_opt(j, "is_metal", m.is_metal);
  get_opt(j, "beam_hardening_coeff", m.beam_hardening_coeff);
}

static const char* shape_name(Shape s) {
  switch (s) {
    case Shape::ellipsoid: return "ellipsoid";
    case Shape::cylinder: return "cylinder";
    case Shape::box: return "box";
  }
  return "ellipsoid";
}

void to_json(json& j, const Primitive& p) {
  j = {{"shape", shape_name(p.shape)},
       {"center", vec_to(p.center)},
       {"axes", json::array({vec_to(p.orientation.column(0)), vec_to(p.orientation.column(1)),
                             vec_to(p.orientation.column(2))})},
       {"half_extents", vec_to(p.half_extents)},
       {"material", p.material}};
}

void from_json(const json& j, Primitive& p) {
  check_keys(j, {"shape", "center", "axes", "half_extents", "material", "from", "to", "radius"}, "primitive");
  require(j.contains("shape") && j.contains("material"), ErrorCode::parameter, "primitive needs shape and material");
  const std::string shape = j.at("shape").get<std::string>();
  const Material m = j.at("material").get<Material>();
  if (j.contains("from")) {
    require(shape == "cylinder" && j.contains("to") && j.contains("radius"), ErrorCode::parameter,
            "from/to/radius describe cylinders only");
    p = make_cylinder(vec_from(j.at("from")), vec_from(j.at("to")), j.at("radius").get<double>(), m);
    return;
  }
  if (shape == "ellipsoid") p.shape = Shape::ellipsoid;
  else if (shape == "cylinder") p.shape = Shape::cylinder;
  else if (shape == "box") p.shape = Shape::box;
  else fail(ErrorCode::parameter, "unknown shape '" + shape + "'");
  p.material = m;
  if (j.contains("center")) p.center = vec_from(j.at("center"));
  if (j.contains("half_extents")) p.half_extents = vec_from(j.at("half_extents"));
  if (j.contains("axes")) {
    const json& a = j.at("axes");
    require(a.is_array() && a.size() == 3, ErrorCode::parameter, "axes must hold three vectors");
    p.orientation = Mat3::from_columns(vec_from(a[0]), vec_from(a[1]), vec_from(a[2]));
  }
}

void to_json(json& j, const Phantom& p) { j = {{"name", p.name}, {"primitives", p.primitives}}; }

void from_json(const json& j, Phantom& p) {
  check_keys(j, {"name", "primitives"}, "phantom");
  get_opt(j, "name", p.name);
  get_opt(j, "primitives", p.primitives);
  p.validate();
}

Phantom phantom_from_json(const json& j) {
  if (j.is_string()) return build_preset(j.get<std::string>());
  if (j.is_object() && j.contains("preset")) {
    check_keys(j, {"preset"}, "phantom");
    return build_preset(j.at("preset").get<std::string>());
  }
  return j.get<Phantom>();
}

// ---- algorithm parameters --------------------------------------------

void to_json(json& j, const HeuristicParams& p) {
  j = {{"median_window", p.median_window}, {"decimation", p.decimation}, {"offset", p.offset}, {"gain", p.gain},
       {"dilation", p.dilation},
       {"saturation_margin", p.saturation_margin}};
}

void from_json(const json& j, HeuristicParams& p) {
  check_keys(j, {"median_window", "decimation", "offset", "gain", "dilation", "saturation_margin"}, "heuristic");
  get_opt(j, "median_window", p.median_window);
  get_opt(j, "decimation", p.decimation);
  get_opt(j, "offset", p.offset);
  get_opt(j, "gain", p.gain);
  get_opt(j, "dilation", p.dilation);
  get_opt(j, "saturation_margin", p.saturation_margin);
}

void to_json(json& j, const PerturbationSpec& p) {
  j = {{"fp_blob_count", p.fp_blob_count},       {"fp_blob_radius", p.fp_blob_radius},
       {"fp_view_fraction", p.fp_view_fraction}, {"fn_erosion", p.fn_erosion},
       {"fn_view_fraction", p.fn_view_fraction}, {"rng_seed", p.rng_seed},
       {"fp_clearance", p.fp_clearance}};
}

void from_json(const json& j, PerturbationSpec& p) {
  check_keys(j,
             {"fp_blob_count", "fp_blob_radius", "fp_view_fraction", "fn_erosion", "fn_view_fraction", "rng_seed",
              "fp_clearance"},
             "perturbation");
  get_opt(j, "fp_blob_count", p.fp_blob_count);
  get_opt(j, "fp_blob_radius", p.fp_blob_radius);
  get_opt(j, "fp_view_fraction", p.fp_view_fraction);
  get_opt(j, "fn_erosion", p.fn_erosion);
  get_opt(j, "fn_view_fraction", p.fn_view_fraction);
  get_opt(j, "rng_seed", p.rng_seed);
  get_opt(j, "fp_clearance", p.fp_clearance);
  p.validate();
}

void to_json(json& j, const MarParams& p) {
  j = {{"recon_grid", p.recon_grid},
       {"cf_grid", p.effective_cf_grid()},
       {"inpaint_method", to_string(p.inpaint_method)},
       {"freq_split_sigma", p.freq_split_sigma},
       {"mask_dilation", p.mask_dilation},
       {"hu_threshold", p.hu_threshold},
       {"min_component_size", p.min_component_size},
       {"mu_water", p.mu_water},
       {"seg_threshold", p.seg_threshold},
       {"cf_tau", p.cf_tau},
       {"cf_min_support", p.cf_min_support},
       {"cf_enabled", p.cf_enabled},
       {"insertion_mask", to_string(p.insertion_mask)}};
}

void from_json(const json& j, MarParams& p) {
  check_keys(j,
             {"recon_grid", "cf_grid", "inpaint_method", "freq_split_sigma", "mask_dilation", "hu_threshold", "min_component_size",
              "mu_water", "seg_threshold", "cf_tau", "cf_min_support", "cf_enabled", "insertion_mask"},
             "mar");
  get_opt(j, "recon_grid", p.recon_grid);
  if (j.contains("cf_grid")) {
    const json& g = j.at("cf_grid");
    if (g.is_string()) {
      require(g.get<std::string>() == "extended", ErrorCode::parameter, "cf_grid must be \"extended\" or a grid");
      p.cf_grid.dims = {0, 0, 0};
    } else {
      p.cf_grid = g.get<GridSpec>();
    }
  }
  if (j.contains("inpaint_method")) {
    const auto s = j.at("inpaint_method").get<std::string>();
    if (s == "row_linear") p.inpaint_method = InpaintMethod::row_linear;
    else if (s == "harmonic2d") p.inpaint_method = InpaintMethod::harmonic2d;
    else fail(ErrorCode::parameter, "unknown inpaint_method '" + s + "'");
  }
  get_opt(j, "freq_split_sigma", p.freq_split_sigma);
  get_opt(j, "mask_dilation", p.mask_dilation);
  get_opt(j, "hu_threshold", p.hu_threshold);
  get_opt(j, "min_component_size", p.min_component_size);
  get_opt(j, "mu_water", p.mu_water);
  get_opt(j, "seg_threshold", p.seg_threshold);
  get_opt(j, "cf_tau", p.cf_tau);
  get_opt(j, "cf_min_support", p.cf_min_support);
  get_opt(j, "cf_enabled", p.cf_enabled);
  if (j.contains("insertion_mask")) {
    const auto s = j.at("insertion_mask").get<std::string>();
    if (s == "threshold_3d") p.insertion_mask = InsertionMask::threshold_3d;
    else if (s == "cf_envelope") p.insertion_mask = InsertionMask::cf_envelope;
    else fail(ErrorCode::parameter, "unknown insertion_mask '" + s + "'");
  }
  p.validate();
}

// ---- files ------------------------------------------------------------

json read_json(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::io, "cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::format, path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

RawPair RawPair::from(const fs::path& path) {
  fs::path base = path;
  if (base.extension() == ".json" || base.extension() == ".raw") base.replace_extension();
  fs::path sidecar = base, raw = base;
  sidecar += ".json";
  raw += ".raw";
  return {sidecar, raw};
}

void save_projection_stack(const fs::path& path, const ProjectionStack& stack, const StackMeta& meta) {
  json m{{"kind", to_string(stack.kind)}, {"i0", stack.i0}};
  if (meta.physics) m["physics"] = *meta.physics;
  if (meta.seed) m["seed"] = *meta.seed;
  save_stack_impl(path, stack, m, meta.dtype);
}

void save_score_stack(const fs::path& path, const ScoreStack& stack) {
  save_stack_impl(path, stack, json{{"kind", "scores"}}, StoredDtype::float32);
}

void save_mask_stack(const fs::path& path, const MaskStack& stack) {
  save_stack_impl(path, stack, json{{"kind", "mask"}}, StoredDtype::uint8);
}

AnyStack load_stack(const fs::path& path, const std::optional<ScanGeometry>& expected) {
  const RawPair files = RawPair::from(path);
  const json meta = read_json(files.sidecar);
  ScanGeometry geom;
  std::string kind;
  std::array<int, 3> dims{};
  StoredDtype dtype;
  try {
    require(meta.value("format", "") == "cfmar-stack", ErrorCode::format, files.sidecar.string() + " is not a stack");
    geom = meta.at("geometry").get<ScanGeometry>();
    kind = meta.at("kind").get<std::string>();
    dims = meta.at("dims").get<std::array<int, 3>>();
    dtype = dtype_from(meta.at("dtype").get<std::string>());
  } catch (const json::exception& e) {
    fail(ErrorCode::format, files.sidecar.string() + ": " + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::format) throw;
    fail(ErrorCode::format, files.sidecar.string() + ": " + e.what());
  }
  require(dims[0] == geom.num_views && dims[1] == geom.detector.rows && dims[2] == geom.detector.cols,
          ErrorCode::format, files.sidecar.string() + ": dims disagree with the geometry");
  if (expected) {
    require(geom.num_views == expected->num_views && geom.detector.rows == expected->detector.rows &&
                geom.detector.cols == expected->detector.cols,
            ErrorCode::format, files.sidecar.string() + ": view count or detector size mismatch");
  }
  const std::size_t count = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  if (kind == "mask") {
    require(dtype == StoredDtype::uint8, ErrorCode::format, "mask stacks are stored as uint8");
    MaskStack s(geom);
    s.data = read_raw<std::uint8_t>(files.raw, count, dtype);
    for (auto x : s.data) require(x <= 1, ErrorCode::format, files.raw.string() + ": mask values must be 0 or 1");
    return s;
  }
  if (kind == "scores") {
    ScoreStack s(geom);
    s.data = read_raw<double>(files.raw, count, dtype);
    return s;
  }
  ProjectionStack s;
  if (kind == "line_integral") s = ProjectionStack(geom, ProjectionKind::line_integral, meta.value("i0", 0.0));
  else if (kind == "raw_intensity") s = ProjectionStack(geom, ProjectionKind::raw_intensity, meta.value("i0", 0.0));
  else fail(ErrorCode::format, "unknown stack kind '" + kind + "'");
  s.data = read_raw<double>(files.raw, count, dtype);
  return s;
}

ProjectionStack load_projection_stack(const fs::path& path) {
  AnyStack s = load_stack(path);
  require(std::holds_alternative<ProjectionStack>(s), ErrorCode::format,
          path.string() + ": expected a projection stack, found " + stack_kind_tag(s));
  return std::get<ProjectionStack>(std::move(s));
}

MaskStack load_mask_stack(const fs::path& path) {
  AnyStack s = load_stack(path);
  require(std::holds_alternative<MaskStack>(s), ErrorCode::format,
          path.string() + ": expected a mask stack, found " + stack_kind_tag(s));
  return std::get<MaskStack>(std::move(s));
}

std::variant<MaskStack, ScoreStack> load_external_masks(const fs::path& path, const ScanGeometry& geom) {
  AnyStack s = load_stack(path, geom);
  if (auto* m = std::get_if<MaskStack>(&s)) {
    m->geometry = geom;
    return std::move(*m);
  }
  if (auto* sc = std::get_if<ScoreStack>(&s)) {
    sc->geometry = geom;
    return std::move(*sc);
  }
  fail(ErrorCode::format, path.string() + ": expected masks or scores, found " + stack_kind_tag(s));
}

namespace {

template <class T>
void save_volume_impl(const fs::path& path, const VoxelGrid<T>& v, StoredDtype dtype) {
  const RawPair files = RawPair::from(path);
  write_raw(files.raw, v.data, dtype);
  write_json(files.sidecar, json{{"format", "cfmar-volume"},
                                 {"dims", v.grid.dims},
                                 {"spacing", v.grid.spacing},
                                 {"origin", v.grid.origin},
                                 {"unit", to_string(v.unit)},
                                 {"dtype", dtype_name(dtype)},
                                 {"raw_file", files.raw.filename().string()}});
}

template <class T>
VoxelGrid<T> load_volume_impl(const fs::path& path) {
  const RawPair files = RawPair::from(path);
  const json meta = read_json(files.sidecar);
  VoxelGrid<T> v;
  StoredDtype dtype;
  try {
    require(meta.value("format", "") == "cfmar-volume", ErrorCode::format, files.sidecar.string() + " is not a volume");
    v.grid.dims = meta.at("dims").get<std::array<int, 3>>();
    v.grid.spacing = meta.at("spacing").get<std::array<double, 3>>();
    v.grid.origin = meta.at("origin").get<std::array<double, 3>>();
    v.unit = unit_from(meta.at("unit").get<std::string>());
    dtype = dtype_from(meta.at("dtype").get<std::string>());
    v.grid.validate();
  } catch (const json::exception& e) {
    fail(ErrorCode::format, files.sidecar.string() + ": " + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::format) throw;
    fail(ErrorCode::format, files.sidecar.string() + ": " + e.what());
  }
  v.data = read_raw<T>(files.raw, v.grid.voxel_count(), dtype);
  return v;
}

}  // namespace

void save_volume(const fs::path& path, const Volume& volume, StoredDtype dtype) { save_volume_impl(path, volume, dtype); }

void save_mask3d(const fs::path& path, const Mask3D& mask) {
  Mask3D m = mask;
  m.unit = ValueUnit::mask;
  save_volume_impl(path, m, StoredDtype::uint8);
}

Volume load_volume(const fs::path& path) { return load_volume_impl<double>(path); }

Mask3D load_mask3d(const fs::path& path) {
  Mask3D m = load_volume_impl<std::uint8_t>(path);
  for (auto x : m.data) require(x <= 1, ErrorCode::format, path.string() + ": mask values must be 0 or 1");
  m.unit = ValueUnit::mask;
  return m;
}

void save_hit_volumes(const fs::path& base, const HitVolumes& hits) {
  VoxelGrid<std::uint16_t> v(hits.grid, 0, ValueUnit::count);
  v.data = hits.hits;
  fs::path p = base;
  save_volume_impl(p += "_hits", v, StoredDtype::uint16);
  v.data = hits.max_hits;
  p = base;
  save_volume_impl(p += "_max", v, StoredDtype::uint16);
  p = base;
  save_volume_impl(p += "_norm", hits.normalized_volume(), StoredDtype::float32);
}

}  // namespace cfmar
