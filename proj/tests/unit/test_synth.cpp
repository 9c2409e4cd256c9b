#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "crowdloc/error.hpp"
#include "crowdloc/synth.hpp"

namespace crowdloc {
namespace {

AnchorPyramid small_pyramid(std::uint64_t seed) {
  SceneConfig sc;
  sc.width = sc.height = 64;
  sc.n_clusters = 1;
  sc.seed = seed;
  return learn_pyramid(std::vector<Scene>{generate_scene(sc)}, std::vector<int>{4, 8, 16}, 16, 16, seed);
}

TEST(GenerateScene, EmptyConfigGivesEmptyScene) {
  SceneConfig sc;
  sc.n_clusters = 0;
  sc.background_points = 0;
  const auto s = generate_scene(sc);
  EXPECT_TRUE(s.points().empty());
  EXPECT_EQ(s.width(), 128);
}

TEST(GenerateScene, Deterministic) {
  SceneConfig sc;
  sc.seed = 42;
  const auto a = generate_scene(sc);
  const auto b = generate_scene(sc);
  EXPECT_EQ(a.positions(), b.positions());
  sc.seed = 43;
  EXPECT_NE(a.positions(), generate_scene(sc).positions());
}

TEST(GenerateScene, PointsStayInsideImage) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    SceneConfig sc;
    sc.seed = seed;
    sc.cluster_sigma = 40;
    for (const auto& p : generate_scene(sc).positions()) {
      EXPECT_GE(p.x, 0.0);
      EXPECT_GE(p.y, 0.0);
      EXPECT_LT(p.x, sc.width);
      EXPECT_LT(p.y, sc.height);
    }
  }
}

TEST(GenerateScene, ClustersConcentrate) {
  // With a single tight cluster, nearly all points fall near the centroid.
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    SceneConfig sc;
    sc.width = sc.height = 512;
    sc.n_clusters = 1;
    sc.min_points_per_cluster = sc.max_points_per_cluster = 20;
    sc.cluster_sigma = 2.0;
    sc.background_points = 0;
    sc.seed = seed;
    const auto pts = generate_scene(sc).positions();
    ASSERT_EQ(pts.size(), 20u);
    double cx = 0, cy = 0;
    for (const auto& p : pts) {
      cx += p.x / 20.0;
      cy += p.y / 20.0;
    }
    int near = 0;
    for (const auto& p : pts) near += std::hypot(p.x - cx, p.y - cy) <= 3 * 2.0 * std::sqrt(2.0);
    EXPECT_GE(near, 19) << "seed " << seed;
  }
}

TEST(TrainToy, ZeroLearningRateLeavesParametersUnchanged) {
  SceneConfig sc;
  sc.width = sc.height = 64;
  sc.n_clusters = 1;
  const auto scene = generate_scene(sc);
  const auto pyramid = small_pyramid(0);
  TrainConfig cfg;
  cfg.steps = 1;
  cfg.lr = 0.0;
  const auto r = train_toy(scene, pyramid, cfg);
  ASSERT_EQ(r.trace.size(), 1u);
  EXPECT_EQ(r.trace[0].step, 1);
  EXPECT_EQ(r.predictor, ToyPredictor(4, 4, pyramid));

  cfg.steps = 5;
  const auto flat = train_toy(scene, pyramid, cfg);
  for (const auto& rec : flat.trace) {
    EXPECT_EQ(rec.locate_loss, flat.trace[0].locate_loss);
    EXPECT_EQ(rec.iou, flat.trace[0].iou);
  }
}

TEST(TrainToy, SinglePointLossDecreases) {
  const Scene scene(64, 64, {{20.0, 30.0, std::nullopt}});
  const auto pyramid = learn_pyramid(std::vector<Scene>{scene}, std::vector<int>{1}, 16, 16, 0);
  TrainConfig cfg;
  cfg.steps = 200;
  cfg.lr = 0.5;
  const auto r = train_toy(scene, pyramid, cfg);
  EXPECT_LT(r.trace.back().locate_loss, r.trace.front().locate_loss);
  EXPECT_EQ(r.trace.back().f1, 1.0);
}

TEST(TrainToy, TraceIsDeterministicAndBounded) {
  SceneConfig sc;
  sc.width = sc.height = 64;
  sc.n_clusters = 1;
  sc.seed = 3;
  const auto scene = generate_scene(sc);
  const auto pyramid = small_pyramid(3);
  TrainConfig cfg;
  cfg.steps = 60;
  cfg.lr = 0.1;
  cfg.annotation_jitter = 2.0;
  cfg.seed = 3;
  const auto a = train_toy(scene, pyramid, cfg);
  const auto b = train_toy(scene, pyramid, cfg);
  EXPECT_EQ(a.trace, b.trace);
  for (const auto& rec : a.trace) {
    EXPECT_GE(rec.iou, 0.0);
    EXPECT_LE(rec.iou, 1.0);
    EXPECT_GE(rec.f1, 0.0);
    EXPECT_LE(rec.f1, 1.0);
  }
}

TEST(TrainToy, LearnedDensityRuns) {
  const Scene scene(32, 32, {{5, 5, std::nullopt}, {20, 20, std::nullopt}, {22, 21, std::nullopt}});
  const auto pyramid = learn_pyramid(std::vector<Scene>{scene}, std::vector<int>{1, 2}, 16, 16, 0);
  TrainConfig cfg;
  cfg.oracle_density = false;
  cfg.steps = 100;
  cfg.lr = 0.1;
  const auto r = train_toy(scene, pyramid, cfg);
  EXPECT_LT(r.trace.back().count_loss, r.trace.front().count_loss);
}

TEST(WriteTraceCsv, Header) {
  std::ostringstream out;
  write_trace_csv(out, {{1, 0.5, 0.25, 1.0, 0.75}});
  EXPECT_EQ(out.str(), "step,locate_loss,count_loss,iou,f1\n1,0.5,0.25,1,0.75\n");
}

}  // namespace
}  // namespace crowdloc
