#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "crowdloc/error.hpp"
#include "crowdloc/scene.hpp"

namespace crowdloc {
namespace {

TEST(LoadAnnotations, JsonMapsFieldsDirectly) {
  const auto scene = parse_annotations(
      R"({"width": 64, "height": 64, "points": [{"x": 10, "y": 20}]})",
      AnnotationFormat::kJson);
  EXPECT_EQ(scene.width(), 64);
  EXPECT_EQ(scene.height(), 64);
  ASSERT_EQ(scene.points().size(), 1u);
  EXPECT_EQ(scene.points()[0].x, 10.0);
  EXPECT_EQ(scene.points()[0].y, 20.0);
  EXPECT_FALSE(scene.points()[0].box.has_value());
}

TEST(LoadAnnotations, EmptyPointsIsValid) {
  const auto scene = parse_annotations(R"({"width": 8, "height": 4, "points": []})",
                                       AnnotationFormat::kJson);
  EXPECT_TRUE(scene.points().empty());
}

TEST(LoadAnnotations, OutOfBoundsPointListsIndex) {
  try {
    parse_annotations(
        R"({"width": 64, "height": 64, "points": [{"x": 1, "y": 1}, {"x": 70, "y": 10}]})",
        AnnotationFormat::kJson);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.offending(), std::vector<std::size_t>{1});
  }
}

TEST(LoadAnnotations, ParseErrorsNameLineAndField) {
  try {
    parse_annotations("{\"width\": 64,\n\"height\": 64,\n\"points\": [ oops ]}",
                      AnnotationFormat::kJson);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  try {
    parse_annotations(R"({"width": 64, "height": 64, "points": [{"x": "a", "y": 1}]})",
                      AnnotationFormat::kJson);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.field(), "points[0].x");
  }
  try {
    parse_annotations("x,y\n1,2\n3,abc\n", AnnotationFormat::kCsv, ImageSize{8, 8});
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_EQ(e.field(), "y");
  }
}

TEST(LoadAnnotations, BoxNeedsBothExtents) {
  EXPECT_THROW(parse_annotations(
                   R"({"width": 8, "height": 8, "points": [{"x": 1, "y": 1, "h": 2}]})",
                   AnnotationFormat::kJson),
               ParseError);
  EXPECT_THROW(parse_annotations("x,y,h,w\n1,1,2,\n", AnnotationFormat::kCsv,
                                 ImageSize{8, 8}),
               ParseError);
}

TEST(LoadAnnotations, CsvOptionalBoxColumns) {
  const auto scene = parse_annotations("x,y,h,w\n1,2,3,4\n5,6,,\n",
                                       AnnotationFormat::kCsv, ImageSize{10, 10});
  ASSERT_EQ(scene.points().size(), 2u);
  ASSERT_TRUE(scene.points()[0].box.has_value());
  EXPECT_EQ(scene.points()[0].box->h, 3.0);
  EXPECT_EQ(scene.points()[0].box->w, 4.0);
  EXPECT_FALSE(scene.points()[1].box.has_value());
  EXPECT_THROW(parse_annotations("x,y\n1,2\n", AnnotationFormat::kCsv), ValidationError);
}

TEST(LoadAnnotations, CsvSidecarSuppliesSize) {
  const auto dir = std::filesystem::temp_directory_path() / "crowdloc_scene_test";
  std::filesystem::create_directories(dir);
  const Scene scene(32, 16, {{1.5, 2.25, BoxExtent{3, 4}}, {30.0, 15.0, std::nullopt}});
  save_annotations(scene, dir / "a.csv", AnnotationFormat::kCsv);
  EXPECT_TRUE(std::filesystem::exists(dir / "a.csv.meta.json"));
  EXPECT_EQ(load_annotations(dir / "a.csv", AnnotationFormat::kCsv), scene);
  std::filesystem::remove_all(dir);
}

// Save/load is the identity for any valid scene, in both formats.
TEST(LoadAnnotations, RoundTripProperty) {
  const auto dir = std::filesystem::temp_directory_path() / "crowdloc_roundtrip";
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const int w = std::uniform_int_distribution<int>(1, 500)(rng);
    const int h = std::uniform_int_distribution<int>(1, 500)(rng);
    std::uniform_real_distribution<double> ux(0.0, w), uy(0.0, h), ub(0.1, 50.0);
    std::vector<GroundTruthPoint> pts;
    const int n = std::uniform_int_distribution<int>(0, 40)(rng);
    const bool boxes = trial % 2 == 0;
    for (int i = 0; i < n; ++i) {
      GroundTruthPoint p{ux(rng), uy(rng), std::nullopt};
      if (boxes) p.box = BoxExtent{ub(rng), ub(rng)};
      pts.push_back(p);
    }
    const Scene scene(w, h, pts);
    for (auto fmt : {AnnotationFormat::kJson, AnnotationFormat::kCsv}) {
      const auto path = dir / (fmt == AnnotationFormat::kJson ? "s.json" : "s.csv");
      save_annotations(scene, path, fmt);
      EXPECT_EQ(load_annotations(path, fmt), scene) << "trial " << trial;
    }
  }
  std::filesystem::remove_all(dir);
}

TEST(GtDensityGrid, BinsPointsIntoCells) {
  const Scene scene(32, 32, {{1, 1, {}}, {5, 10, {}}, {15.9, 15.9, {}}});
  const auto grid = gt_density_grid(scene, 16, 16);
  EXPECT_EQ(grid.rows(), 2);
  EXPECT_EQ(grid.cols(), 2);
  EXPECT_EQ(grid.matrix(), Matrix(2, 2, std::vector<double>{3, 0, 0, 0}));
}

TEST(GtDensityGrid, EmptySceneGivesZeros) {
  const auto grid = gt_density_grid(Scene(48, 32, {}), 16, 16);
  EXPECT_EQ(grid.rows(), 2);
  EXPECT_EQ(grid.cols(), 3);
  EXPECT_EQ(grid.total(), 0.0);
}

TEST(GtDensityGrid, BoundaryBelongsToHigherCell) {
  const Scene scene(32, 32, {{16.0, 3.0, {}}});
  const auto grid = gt_density_grid(scene, 16, 16);
  EXPECT_EQ(grid.at(1, 0), 1.0);
  EXPECT_EQ(grid.at(0, 0), 0.0);
}

TEST(GtDensityGrid, PartialEdgeCells) {
  const Scene scene(40, 20, {{39.5, 19.5, {}}});
  const auto grid = gt_density_grid(scene, 16, 16);
  EXPECT_EQ(grid.cols(), 3);
  EXPECT_EQ(grid.rows(), 2);
  EXPECT_EQ(grid.at(2, 1), 1.0);
}

TEST(GtDensityGrid, MassConservationProperty) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const int w = std::uniform_int_distribution<int>(1, 300)(rng);
    const int h = std::uniform_int_distribution<int>(1, 300)(rng);
    const int cell = std::uniform_int_distribution<int>(1, 40)(rng);
    std::uniform_real_distribution<double> ux(0.0, w), uy(0.0, h);
    std::vector<GroundTruthPoint> pts(std::uniform_int_distribution<std::size_t>(0, 200)(rng));
    for (auto& p : pts) p = {ux(rng), uy(rng), std::nullopt};
    const auto grid = gt_density_grid(Scene(w, h, pts), cell, cell);
    EXPECT_EQ(grid.total(), static_cast<double>(pts.size()));
    EXPECT_TRUE(grid.is_integral());
  }
}

TEST(DensityGrid, RejectsNegativeValues) {
  EXPECT_THROW(DensityGrid(16, 16, Matrix(1, 2, std::vector<double>{1.0, -0.5})),
               ValidationError);
}

}  // namespace
}  // namespace crowdloc
