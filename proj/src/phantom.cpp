#include "cfmar/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cfmar {

namespace {

// Roots of a t^2 + b t + c = 0 as an interval, if real and distinct.
std::optional<Interval> quadratic_interval(double a, double b, double c) {
  if (a <= 0.0) return std::nullopt;
  const double disc = b * b - 4.0 * a * c;
  if (!(disc > 0.0)) return std::nullopt;
  const double sq = std::sqrt(disc);
  // Numerically stable root pair.
  const double q = -0.5 * (b + std::copysign(sq, b));
  double t0 = q / a;
  double t1 = (q != 0.0) ? c / q : -t0;
  if (t0 > t1) std::swap(t0, t1);
  return Interval{t0, t1};
}

std::optional<Interval> slab(double origin, double dir, double half, Interval range) {
  if (dir == 0.0) {
    if (std::abs(origin) > half) return std::nullopt;
    return range;
  }
  double t0 = (-half - origin) / dir;
  double t1 = (half - origin) / dir;
  if (t0 > t1) std::swap(t0, t1);
  range.enter = std::max(range.enter, t0);
  range.exit = std::min(range.exit, t1);
  if (!(range.exit > range.enter)) return std::nullopt;
  return range;
}

}  // namespace

bool Primitive::contains(const Vec3& p) const {
  const Vec3 q = transpose_mul(orientation, p - center);
  const double x = q.x / half_extents.x, y = q.y / half_extents.y, z = q.z / half_extents.z;
  switch (shape) {
    case Shape::ellipsoid:
      return x * x + y * y + z * z <= 1.0;
    case Shape::cylinder:
      return x * x + y * y <= 1.0 && std::abs(z) <= 1.0;
    case Shape::box:
      return std::abs(x) <= 1.0 && std::abs(y) <= 1.0 && std::abs(z) <= 1.0;
  }
  return false;
}

std::optional<Interval> Primitive::intersect(const Ray& ray) const {
  const Vec3 o = transpose_mul(orientation, ray.origin - center);
  const Vec3 d = transpose_mul(orientation, ray.direction);
  const Vec3 os{o.x / half_extents.x, o.y / half_extents.y, o.z / half_extents.z};
  const Vec3 ds{d.x / half_extents.x, d.y / half_extents.y, d.z / half_extents.z};
  constexpr double inf = std::numeric_limits<double>::infinity();

  std::optional<Interval> hit;
  switch (shape) {
    case Shape::ellipsoid:
      hit = quadratic_interval(dot(ds, ds), 2.0 * dot(os, ds), dot(os, os) - 1.0);
      break;
    case Shape::cylinder: {
      const double a = ds.x * ds.x + ds.y * ds.y;
      const double c = os.x * os.x + os.y * os.y - 1.0;
      if (a == 0.0) {
        hit = c < 0.0 ? std::optional<Interval>(Interval{-inf, inf}) : std::nullopt;
      } else {
        hit = quadratic_interval(a, 2.0 * (os.x * ds.x + os.y * ds.y), c);
      }
      if (hit) hit = slab(os.z, ds.z, 1.0, *hit);
      break;
    }
    case Shape::box: {
      hit = Interval{-inf, inf};
      for (int a = 0; a < 3 && hit; ++a) hit = slab(os[a], ds[a], 1.0, *hit);
      break;
    }
  }
  if (!hit) return std::nullopt;
  hit->enter = std::max(hit->enter, 0.0);
  if (!(hit->exit > hit->enter)) return std::nullopt;
  return hit;
}

Vec3 Primitive::bounding_half_size() const {
  Vec3 h;
  for (int a = 0; a < 3; ++a) {
    h[a] = std::abs(orientation(a, 0)) * half_extents.x + std::abs(orientation(a, 1)) * half_extents.y +
           std::abs(orientation(a, 2)) * half_extents.z;
  }
  return h;
}

std::array<Vec3, 8> Primitive::bounding_corners() const {
  std::array<Vec3, 8> corners;
  for (int n = 0; n < 8; ++n) {
    const Vec3 local{(n & 1 ? 1.0 : -1.0) * half_extents.x, (n & 2 ? 1.0 : -1.0) * half_extents.y,
                     (n & 4 ? 1.0 : -1.0) * half_extents.z};
    corners[n] = center + orientation * local;
  }
  return corners;
}

Primitive make_cylinder(const Vec3& from, const Vec3& to, double radius, const Material& m) {
  const Vec3 axis = to - from;
  return Primitive{Shape::cylinder, 0.5 * (from + to), frame_from_axis(axis), {radius, radius, 0.5 * norm(axis)}, m};
}

bool Phantom::has_metal() const {
  return std::any_of(primitives.begin(), primitives.end(), [](const Primitive& p) { return p.material.is_metal; });
}

Phantom Phantom::metal_free_twin() const {
  Phantom twin{name + "_metal_free", {}};
  for (const auto& p : primitives)
    if (!p.material.is_metal) twin.primitives.push_back(p);
  return twin;
}

Phantom Phantom::metal_only() const {
  Phantom out{name + "_metal_only", {}};
  for (const auto& p : primitives)
    if (p.material.is_metal) out.primitives.push_back(p);
  return out;
}

double Phantom::max_non_metal_mu() const {
  double mx = 0.0;
  for (const auto& p : primitives)
    if (!p.material.is_metal) mx = std::max(mx, p.material.mu);
  return mx;
}

void Phantom::validate() const {
  require(!primitives.empty(), ErrorCode::parameter, "phantom needs at least one primitive");
  const double tissue_max = max_non_metal_mu();
  for (const auto& p : primitives) {
    require(p.half_extents.x > 0 && p.half_extents.y > 0 && p.half_extents.z > 0, ErrorCode::parameter,
            "primitive extents must be positive");
    require(p.material.mu >= 0.0, ErrorCode::parameter, "material mu must be >= 0");
    if (p.material.is_metal)
      require(p.material.mu > tissue_max, ErrorCode::parameter,
              "metal material '" + p.material.name + "' must attenuate more than every non-metal");
    for (int a = 0; a < 3; ++a) {
      const Vec3 c = p.orientation.column(a);
      require(std::abs(norm(c) - 1.0) < 1e-9, ErrorCode::parameter, "primitive orientation must be orthonormal");
      for (int b = a + 1; b < 3; ++b)
        require(std::abs(dot(c, p.orientation.column(b))) < 1e-9, ErrorCode::parameter,
                "primitive orientation must be orthonormal");
    }
  }
}

namespace materials {
Material soft_tissue() { return {"soft_tissue", 0.0200, false, 1.0}; }
Material fat() { return {"fat", 0.0185, false, 1.0}; }
Material bone_cancellous() { return {"bone_cancellous", 0.0260, false, 1.0}; }
Material bone_cortical() { return {"bone_cortical", 0.0400, false, 1.0}; }
Material titanium() { return {"titanium", 0.30, true, 1.0}; }
Material steel() { return {"steel", 0.60, true, 1.0}; }
}  // namespace materials

namespace {

Primitive vertical_cylinder(double x, double y, double rx, double ry, double half_length, const Material& m,
                            double z = 0.0) {
  return Primitive{Shape::cylinder, {x, y, z}, Mat3{}, {rx, ry, half_length}, m};
}

std::vector<Primitive> knee_anatomy() {
  using namespace materials;
  return {
      vertical_cylinder(0, 0, 55, 48, 100, soft_tissue()),
      vertical_cylinder(0, -5, 16, 16, 100, bone_cortical()),
      vertical_cylinder(0, -5, 11, 11, 100, bone_cancellous()),
      vertical_cylinder(28, 20, 6, 6, 100, bone_cortical()),
      Primitive{Shape::ellipsoid, {0, 36, 20}, Mat3{}, {14, 6, 16}, bone_cortical()},
  };
}

Phantom knee_screws() {
  using namespace materials;
  Phantom p{"knee_screws", knee_anatomy()};
  p.primitives.push_back(Primitive{Shape::box, {-18, -5, 2}, Mat3{}, {1.2, 6, 35}, titanium()});
  p.primitives.push_back(make_cylinder({-19, -9, 22}, {19, -1, 20}, 2.5, titanium()));
  p.primitives.push_back(make_cylinder({-19, -1, -14}, {18, -12, -18}, 2.5, titanium()));
  return p;
}

Phantom spine_pedicle() {
  using namespace materials;
  Phantom p{"spine_pedicle", {}};
  p.primitives.push_back(vertical_cylinder(0, 0, 75, 55, 100, soft_tissue()));
  p.primitives.push_back(vertical_cylinder(0, 12, 22, 20, 100, bone_cortical()));
  p.primitives.push_back(vertical_cylinder(0, 12, 19, 17, 100, bone_cancellous()));
  p.primitives.push_back(Primitive{Shape::box, {0, -28, 0}, Mat3{}, {20, 6, 100}, bone_cortical()});
  p.primitives.push_back(vertical_cylinder(0, -14, 8, 7, 100, soft_tissue()));
  for (double side : {-1.0, 1.0}) {
    for (double z : {-15.0, 15.0}) {
      p.primitives.push_back(make_cylinder({side * 22, -38, z}, {side * 7, 10, z}, 3.0, steel()));
    }
    p.primitives.push_back(make_cylinder({side * 23, -41, -32}, {side * 23, -41, 32}, 2.75, titanium()));
  }
  return p;
}

Phantom kwire_outside_fov() {
  using namespace materials;
  Phantom p{"kwire_outside_fov", knee_anatomy()};
  p.primitives.push_back(make_cylinder({-14, -7, 0}, {-10, -3, 36}, 2.5, titanium()));
  // Pin entering the femur and leaving the field of view laterally.
  p.primitives.push_back(make_cylinder({5, -5, 10}, {135, 60, 35}, 1.6, steel()));
  // Pin entirely outside the reconstructed field of view.
  p.primitives.push_back(make_cylinder({-95, 70, -40}, {-120, -40, 30}, 1.6, steel()));
  return p;
}

Phantom towers_heavy_metal() {
  using namespace materials;
  Phantom p{"towers_heavy_metal", {}};
  p.primitives.push_back(vertical_cylinder(0, 0, 60, 60, 100, soft_tissue()));
  p.primitives.push_back(vertical_cylinder(0, 0, 12, 12, 100, bone_cortical()));
  p.primitives.push_back(vertical_cylinder(0, 0, 8, 8, 100, bone_cancellous()));
  for (double x : {-28.0, 28.0})
    for (double y : {-28.0, 28.0}) p.primitives.push_back(vertical_cylinder(x, y, 6, 6, 55, steel()));
  for (double x : {-40.0, 40.0}) p.primitives.push_back(vertical_cylinder(x, 0, 5, 5, 40, steel()));
  return p;
}

template <class Fn>
void for_each_voxel_in_bounds(const Primitive& prim, const GridSpec& grid, Fn&& fn) {
  const Vec3 h = prim.bounding_half_size();
  std::array<int, 3> lo{}, hi{};
  for (int a = 0; a < 3; ++a) {
    lo[a] = std::max(0, static_cast<int>(std::floor((prim.center[a] - h[a] - grid.origin[a]) / grid.spacing[a])));
    hi[a] = std::min(grid.dims[a] - 1,
                     static_cast<int>(std::ceil((prim.center[a] + h[a] - grid.origin[a]) / grid.spacing[a])));
  }
  for (int k = lo[2]; k <= hi[2]; ++k)
    for (int j = lo[1]; j <= hi[1]; ++j)
      for (int i = lo[0]; i <= hi[0]; ++i) {
        const Vec3 c = grid.center(i, j, k);
        if (prim.contains(c)) fn(grid.index(i, j, k));
      }
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"knee_screws", "spine_pedicle", "kwire_outside_fov", "towers_heavy_metal"};
}

Phantom build_preset(std::string_view name) {
  constexpr std::string_view twin_prefix = "metal_free_twin(";
  if (name.starts_with(twin_prefix) && name.ends_with(")")) {
    const auto inner = name.substr(twin_prefix.size(), name.size() - twin_prefix.size() - 1);
    return build_preset(inner).metal_free_twin();
  }
  if (name == "knee_screws") return knee_screws();
  if (name == "spine_pedicle") return spine_pedicle();
  if (name == "kwire_outside_fov") return kwire_outside_fov();
  if (name == "towers_heavy_metal") return towers_heavy_metal();
  fail(ErrorCode::unknown_preset, "unknown phantom preset '" + std::string(name) + "'");
}

Volume voxelize(const Phantom& phantom, const GridSpec& grid) {
  grid.validate();
  Volume vol(grid, 0.0, ValueUnit::attenuation);
  for (const auto& prim : phantom.primitives) {
    const double mu = prim.material.mu;
    for_each_voxel_in_bounds(prim, grid, [&](std::size_t idx) { vol.data[idx] = mu; });
  }
  return vol;
}

Mask3D metal_mask_3d(const Phantom& phantom, const GridSpec& grid) {
  grid.validate();
  Mask3D mask(grid, 0, ValueUnit::mask);
  for (const auto& prim : phantom.primitives) {
    if (!prim.material.is_metal) continue;
    for_each_voxel_in_bounds(prim, grid, [&](std::size_t idx) { mask.data[idx] = 1; });
  }
  return mask;
}

PixelRect shadow_rect(const Primitive& prim, const ScanGeometry& geom, int view) {
  const auto& det = geom.detector;
  PixelRect full{0, det.rows, 0, det.cols};
  const ViewProjector proj(geom, view);
  const Vec3 h = prim.bounding_half_size();
  double umin = std::numeric_limits<double>::infinity(), umax = -umin, vmin = umin, vmax = -umin;
  for (int n = 0; n < 8; ++n) {
    const Vec3 c = prim.center + Vec3{(n & 1 ? h.x : -h.x), (n & 2 ? h.y : -h.y), (n & 4 ? h.z : -h.z)};
    const auto px = proj(c);
    if (!px) return full;
    umin = std::min(umin, px->u);
    umax = std::max(umax, px->u);
    vmin = std::min(vmin, px->v);
    vmax = std::max(vmax, px->v);
  }
  // The projection of a box is the hull of its projected corners.
  PixelRect r;
  r.col_lo = std::clamp(static_cast<int>(std::floor(umin)) - 1, 0, det.cols);
  r.col_hi = std::clamp(static_cast<int>(std::ceil(umax)) + 1, 0, det.cols);
  r.row_lo = std::clamp(static_cast<int>(std::floor(vmin)) - 1, 0, det.rows);
  r.row_hi = std::clamp(static_cast<int>(std::ceil(vmax)) + 1, 0, det.rows);
  return r;
}

std::vector<std::uint8_t> metal_trace_2d(const Phantom& phantom, const ScanGeometry& geom, int view) {
  const auto& det = geom.detector;
  std::vector<std::uint8_t> trace(static_cast<std::size_t>(det.rows) * det.cols, 0);
  for (const auto& prim : phantom.primitives) {
    if (!prim.material.is_metal) continue;
    const PixelRect r = shadow_rect(prim, geom, view);
    for (int row = r.row_lo; row < r.row_hi; ++row)
      for (int col = r.col_lo; col < r.col_hi; ++col) {
        auto& px = trace[static_cast<std::size_t>(row) * det.cols + col];
        if (!px && prim.intersect(geom.pixel_ray(view, row, col))) px = 1;
      }
  }
  return trace;
}

MaskStack metal_trace_stack(const Phantom& phantom, const ScanGeometry& geom) {
  MaskStack out(geom);
#pragma omp parallel for schedule(dynamic)
  for (int v = 0; v < geom.num_views; ++v) {
    const auto trace = metal_trace_2d(phantom, geom, v);
    std::copy(trace.begin(), trace.end(), out.view(v).begin());
  }
  return out;
}

std::vector<std::pair<int, double>> resolve_chords(const Phantom& phantom, const Ray& ray) {
  std::vector<int> all(phantom.primitives.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  return resolve_chords(phantom, ray, all);
}

std::vector<std::pair<int, double>> resolve_chords(const Phantom& phantom, const Ray& ray,
                                                   std::span<const int> candidates) {
  struct Hit {
    int index;
    Interval span;
  };
  std::vector<Hit> hits;
  for (int i : candidates)
    if (auto iv = phantom.primitives[i].intersect(ray)) hits.push_back({i, *iv});

  std::vector<std::pair<int, double>> owned;
  if (hits.empty()) return owned;
  if (hits.size() == 1) {
    owned.emplace_back(hits[0].index, hits[0].span.length());
    return owned;
  }
  std::vector<double> breaks;
  breaks.reserve(2 * hits.size());
  for (const auto& h : hits) {
    breaks.push_back(h.span.enter);
    breaks.push_back(h.span.exit);
  }
  std::sort(breaks.begin(), breaks.end());
  for (std::size_t b = 0; b + 1 < breaks.size(); ++b) {
    const double len = breaks[b + 1] - breaks[b];
    if (!(len > 0.0)) continue;
    const double mid = 0.5 * (breaks[b] + breaks[b + 1]);
    int owner = -1;
    for (const auto& h : hits)
      if (mid > h.span.enter && mid < h.span.exit) owner = std::max(owner, h.index);
    if (owner < 0) continue;
    if (!owned.empty() && owned.back().first == owner)
      owned.back().second += len;
    else
      owned.emplace_back(owner, len);
  }
  return owned;
}

double line_integral(const Phantom& phantom, const Ray& ray) {
  double p = 0.0;
  for (const auto& [idx, len] : resolve_chords(phantom, ray)) p += phantom.primitives[idx].material.mu * len;
  return p;
}

}  // namespace cfmar
