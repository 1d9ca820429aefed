#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include <unistd.h>

#include "cfmar/experiment.hpp"
#include "cfmar/io.hpp"
#include "cfmar/workflow.hpp"
#include "test_support.hpp"

using namespace cfmar;
namespace fs = std::filesystem;

namespace {

class IoTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("cfmar_io_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::numerical;
}

}  // namespace

TEST_F(IoTest, StacksRoundTrip) {
  const ScanGeometry g = fixtures::small_geometry(3, 5, 7, 1.0);
  ProjectionStack p(g, ProjectionKind::raw_intensity, 1e5);
  for (std::size_t n = 0; n < p.data.size(); ++n) p.data[n] = 0.25 * n;
  StackMeta meta;
  meta.dtype = StoredDtype::float64;
  save_projection_stack(dir_ / "p", p, meta);
  const ProjectionStack q = load_projection_stack(dir_ / "p.json");
  EXPECT_EQ(q.geometry, g);
  EXPECT_EQ(q.kind, ProjectionKind::raw_intensity);
  EXPECT_EQ(q.i0, 1e5);
  EXPECT_EQ(q.data, p.data);

  const MaskStack m = fixtures::random_masks(g, 0.5, 1);
  save_mask_stack(dir_ / "m", m);
  EXPECT_EQ(load_mask_stack(dir_ / "m.raw").data, m.data);

  ScoreStack s(g);
  for (std::size_t n = 0; n < s.data.size(); ++n) s.data[n] = -1.5 + 0.5 * n;
  save_score_stack(dir_ / "s", s);
  EXPECT_EQ(std::get<ScoreStack>(load_stack(dir_ / "s")).data, s.data);
}

TEST_F(IoTest, VolumesRoundTrip) {
  const GridSpec g = GridSpec::centered({4, 5, 6}, {1.25, 1.25, 2.0});
  Volume v(g, 0.0, ValueUnit::hounsfield);
  for (std::size_t n = 0; n < v.data.size(); ++n) v.data[n] = -1000.0 + 12.5 * n;
  save_volume(dir_ / "v", v);
  const Volume w = load_volume(dir_ / "v");
  EXPECT_EQ(w.grid, g);
  EXPECT_EQ(w.unit, ValueUnit::hounsfield);
  EXPECT_EQ(w.data, v.data);
  const Mask3D m = fixtures::random_mask3d(g, 0.3, 2);
  save_mask3d(dir_ / "m", m);
  EXPECT_EQ(load_mask3d(dir_ / "m").data, m.data);
}

TEST_F(IoTest, TruncatedRawIsAFormatError) {
  const ScanGeometry g = fixtures::small_geometry(2, 4, 4, 1.0);
  save_mask_stack(dir_ / "m", MaskStack(g));
  fs::resize_file(dir_ / "m.raw", 20);
  EXPECT_EQ(code_of([&] { load_mask_stack(dir_ / "m"); }), ErrorCode::format);
  EXPECT_EQ(code_of([&] { load_mask_stack(dir_ / "missing"); }), ErrorCode::io);
  std::ofstream(dir_ / "bad.json") << "{ not json";
  EXPECT_EQ(code_of([&] { read_json(dir_ / "bad.json"); }), ErrorCode::format);
}

TEST_F(IoTest, ExternalMasksMustMatchTheScan) {
  const ScanGeometry g = fixtures::small_geometry(2, 4, 4, 1.0);
  save_mask_stack(dir_ / "m", MaskStack(g));
  EXPECT_NO_THROW(load_external_masks(dir_ / "m", g));
  EXPECT_EQ(code_of([&] { load_external_masks(dir_ / "m", fixtures::small_geometry(3, 4, 4, 1.0)); }),
            ErrorCode::format);
}

TEST(Io, UnknownKeysAreRejected) {
  json j = PhysicsParams{};
  EXPECT_NO_THROW(j.get<PhysicsParams>());
  j["i_zero"] = 5;
  EXPECT_EQ(code_of([&] { (void)j.get<PhysicsParams>(); }), ErrorCode::parameter);
  EXPECT_EQ(code_of([&] { parse_config(json{{"phantom", {{"preset", "knee_screws"}}}, {"bogus", 1}}); }),
            ErrorCode::parameter);
}

TEST(Io, ParametersRoundTripThroughJson) {
  HeuristicParams h;
  h.dilation = 2;
  h.saturation_margin = 0.05;
  const auto h2 = json(h).get<HeuristicParams>();
  EXPECT_EQ(h2.dilation, 2);
  EXPECT_EQ(h2.saturation_margin, 0.05);

  const ScanGeometry g = desk_scale_geometry();
  EXPECT_EQ(json(g).get<ScanGeometry>(), g);

  const Phantom p = build_preset("knee_screws");
  const Phantom q = json(p).get<Phantom>();
  ASSERT_EQ(q.primitives.size(), p.primitives.size());
  const Ray r{{-200, 3, 1}, normalized(Vec3{1, 0.1, 0.02})};
  EXPECT_NEAR(line_integral(q, r), line_integral(p, r), 1e-12);

  const ExperimentConfig cfg = parse_config(json{{"phantom", {{"preset", "knee_screws"}}}, {"seed", 4}});
  const ExperimentConfig again = parse_config(config_to_json(cfg));
  EXPECT_EQ(config_to_json(again), config_to_json(cfg));
}

TEST(Workflow, GridSpecsAndNumberLists) {
  EXPECT_EQ(parse_grid_spec("desk"), desk_scale_grid());
  EXPECT_EQ(parse_grid_spec("32x16x8:0.5"), GridSpec::centered({32, 16, 8}, {0.5, 0.5, 0.5}));
  EXPECT_THROW(parse_grid_spec("32x16:0.5"), Error);
  EXPECT_EQ(parse_number_list("0.8, 0.9,1"), (std::vector<double>{0.8, 0.9, 1.0}));
  EXPECT_THROW(parse_number_list("0.8,abc"), Error);
}
