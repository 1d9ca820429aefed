#include <gtest/gtest.h>

#include <cmath>

#include "cfmar/phantom.hpp"
#include "test_support.hpp"

using namespace cfmar;

namespace {

Primitive sphere(const Vec3& c, double r, const Material& m) { return {Shape::ellipsoid, c, Mat3{}, {r, r, r}, m}; }

Ray ray_x(double y, double z) { return {{-100.0, y, z}, {1.0, 0.0, 0.0}}; }

}  // namespace

TEST(Phantom, SphereChordMatchesClosedForm) {
  const Primitive s = sphere({0, 0, 0}, 10.0, materials::soft_tissue());
  for (double d : {0.0, 3.0, 7.5, 9.9}) {
    const auto iv = s.intersect(ray_x(d, 0.0));
    ASSERT_TRUE(iv);
    EXPECT_NEAR(iv->length(), 2.0 * std::sqrt(100.0 - d * d), 1e-9);
  }
  EXPECT_FALSE(s.intersect(ray_x(10.5, 0.0)));
}

TEST(Phantom, CylinderAndBoxChords) {
  const Primitive cyl = make_cylinder({0, 0, -20}, {0, 0, 20}, 5.0, materials::steel());
  EXPECT_NEAR(cyl.intersect(ray_x(0.0, 0.0))->length(), 10.0, 1e-9);
  EXPECT_NEAR(cyl.intersect(ray_x(3.0, 19.0))->length(), 8.0, 1e-9);
  EXPECT_FALSE(cyl.intersect(ray_x(0.0, 21.0)));
  // Along the axis the chord is the full length.
  const Ray axial{{0, 0, -100}, {0, 0, 1}};
  EXPECT_NEAR(cyl.intersect(axial)->length(), 40.0, 1e-9);

  const Primitive box{Shape::box, {1, 2, 3}, Mat3{}, {4, 5, 6}, materials::titanium()};
  EXPECT_NEAR(box.intersect(ray_x(2.0, 3.0))->length(), 8.0, 1e-9);
  const Ray diag{{-100, 2 - 100, 3}, normalized(Vec3{1, 1, 0})};
  EXPECT_NEAR(box.intersect(diag)->length(), 8.0 * std::sqrt(2.0), 1e-9);
}

TEST(Phantom, RaysStartingInsideOnlyCountForwardPart) {
  const Primitive s = sphere({0, 0, 0}, 10.0, materials::soft_tissue());
  const Ray r{{0, 0, 0}, {1, 0, 0}};
  EXPECT_NEAR(s.intersect(r)->length(), 10.0, 1e-9);
}

TEST(Phantom, LaterPrimitivesOverrideEarlierOnes) {
  Phantom p{"nested", {sphere({0, 0, 0}, 10.0, materials::soft_tissue()), sphere({0, 0, 0}, 2.0, materials::steel())}};
  const auto chords = resolve_chords(p, ray_x(0.0, 0.0));
  double water = 0.0, metal = 0.0;
  for (auto [idx, len] : chords) (idx == 0 ? water : metal) += len;
  EXPECT_NEAR(water, 16.0, 1e-9);
  EXPECT_NEAR(metal, 4.0, 1e-9);
  EXPECT_NEAR(line_integral(p, ray_x(0.0, 0.0)),
              16.0 * materials::soft_tissue().mu + 4.0 * materials::steel().mu, 1e-12);
}

TEST(Phantom, AllPresetsBuildAndValidate) {
  for (const auto& name : preset_names()) {
    const Phantom p = build_preset(name);
    EXPECT_NO_THROW(p.validate()) << name;
    EXPECT_TRUE(p.has_metal()) << name;
    const Phantom twin = build_preset("metal_free_twin(" + name + ")");
    EXPECT_FALSE(twin.has_metal()) << name;
    EXPECT_EQ(twin.primitives.size() + p.metal_only().primitives.size(), p.primitives.size());
  }
}

TEST(Phantom, TowersHaveAtLeastSixMetalPrimitivesWithVerticalCylinders) {
  const Phantom p = build_preset("towers_heavy_metal");
  int metal = 0, vertical = 0;
  for (const auto& prim : p.primitives) {
    if (!prim.material.is_metal) continue;
    ++metal;
    const Vec3 axis = prim.orientation.column(2);
    if (prim.shape == Shape::cylinder && std::abs(axis.z) > 0.999 && prim.half_extents.z >= 30.0) ++vertical;
  }
  EXPECT_GE(metal, 6);
  EXPECT_GE(vertical, 4);
}

TEST(Phantom, KwireHasMetalOutsideTheReconstructionGrid) {
  const Phantom p = build_preset("kwire_outside_fov");
  const GridSpec g = GridSpec::centered({128, 128, 128}, {1.25, 1.25, 1.25});
  const Phantom metal = p.metal_only();
  // The last pin never touches the grid, yet it is in the scanned object.
  Phantom outside{"pin", {metal.primitives.back()}};
  EXPECT_EQ(count_true(metal_mask_3d(outside, g)), 0u);
  EXPECT_GT(count_true(metal_trace_stack(outside, desk_scale_geometry())), 0u);
}

TEST(Phantom, UnknownPresetIsReported) {
  try {
    build_preset("no_such_phantom");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::unknown_preset);
    EXPECT_EQ(e.slug(), "unknown_preset");
  }
}

TEST(Phantom, VoxelizeMatchesContainment) {
  const Phantom p{"s", {sphere({1.0, -2.0, 0.5}, 4.0, materials::titanium())}};
  const GridSpec g = GridSpec::centered({16, 16, 16}, {1.0, 1.0, 1.0});
  const Volume v = voxelize(p, g);
  const Mask3D m = metal_mask_3d(p, g);
  for (int k = 0; k < 16; ++k)
    for (int j = 0; j < 16; ++j)
      for (int i = 0; i < 16; ++i) {
        const bool inside = p.primitives[0].contains(g.center(i, j, k));
        EXPECT_EQ(v.at(i, j, k), inside ? materials::titanium().mu : 0.0);
        EXPECT_EQ(m.at(i, j, k), inside ? 1 : 0);
      }
}

TEST(Phantom, MetalTraceMatchesRayIntersection) {
  const Phantom p = build_preset("knee_screws");
  const ScanGeometry g = fixtures::small_geometry(4, 20, 20, 8.0);
  const Phantom metal = p.metal_only();
  for (int v = 0; v < g.num_views; ++v) {
    const auto trace = metal_trace_2d(p, g, v);
    for (int r = 0; r < 20; ++r)
      for (int c = 0; c < 20; ++c) {
        bool hit = false;
        for (const auto& prim : metal.primitives) hit = hit || prim.intersect(g.pixel_ray(v, r, c)).has_value();
        EXPECT_EQ(trace[r * 20 + c] != 0, hit);
      }
  }
}
