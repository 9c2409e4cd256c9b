#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "crowdloc/count_loss.hpp"
#include "crowdloc/error.hpp"
#include "oracles.hpp"

namespace crowdloc {
namespace {

DensityGrid grid_of(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return DensityGrid(16, 16, Matrix(rows, cols, std::move(values)));
}

TEST(RegionCounts, BlockSums) {
  const Matrix g(2, 2, std::vector<double>{1, 2, 3, 4});
  EXPECT_EQ(region_counts(g, 1), Matrix(1, 1, std::vector<double>{10}));
  EXPECT_EQ(region_counts(g, 0), g);
  EXPECT_EQ(region_counts(Matrix(4, 4, 1.0), 1), Matrix(2, 2, 4.0));
}

TEST(RegionCounts, ZeroPadsRaggedEdges) {
  const Matrix g(3, 5, 1.0);
  const auto r = region_counts(g, 1);
  EXPECT_EQ(r.rows(), 2u);
  EXPECT_EQ(r.cols(), 3u);
  EXPECT_EQ(r(0, 0), 4.0);
  EXPECT_EQ(r(0, 2), 2.0);
  EXPECT_EQ(r(1, 2), 1.0);
}

TEST(RegionCounts, MassPreservedAtEveryLevel) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto rows = std::uniform_int_distribution<std::size_t>(1, 17)(rng);
    const auto cols = std::uniform_int_distribution<std::size_t>(1, 17)(rng);
    Matrix g(rows, cols);
    double total = 0.0;
    for (auto& v : g.values()) total += (v = std::floor(u(rng) * 4));
    for (int r = 0; r <= 5; ++r) {
      const auto counts = region_counts(g, r);
      double sum = 0.0;
      for (double v : counts.values()) sum += v;
      EXPECT_EQ(sum, total);
    }
  }
}

TEST(CascadeLoss, ZeroAtTruth) {
  const auto gt = grid_of(4, 4, {1, 0, 2, 0, 0, 3, 0, 1, 0, 0, 0, 0, 5, 0, 0, 1});
  CascadeConfig cfg;
  cfg.t = 2;
  EXPECT_EQ(cascade_loss(gt, gt, cfg).value, 0.0);
  const auto zeros = grid_of(2, 2, {0, 0, 0, 0});
  EXPECT_EQ(cascade_loss(zeros, zeros, {}).value, 0.0);
}

// Hand evaluation on a 2x2 grid with t = 1:
//   level 1: one region, pred sum 1, gt sum 1 -> loss 0, weight 1,
//            alpha_1 = 2^2 / 4 = 1;
//   level 0: weight = softmax over the single parent = 1,
//            alpha_0 = 2^1 / 4 = 0.5, terms |1-0| + |0-1| = 2 -> 1.0.
// Gradient: alpha_0 * sign at the two mismatched cells, zero elsewhere
// (level-1 residual and the regularizer sit on their kinks).
TEST(CascadeLoss, FrozenTwoByTwoExample) {
  const auto pred = grid_of(2, 2, {1, 0, 0, 0});
  const auto gt = grid_of(2, 2, {0, 1, 0, 0});
  CascadeConfig cfg;
  cfg.t = 1;
  const auto out = count_loss(pred, gt, cfg);
  EXPECT_NEAR(out.cascade, 1.0, 1e-12);
  EXPECT_NEAR(out.regularizer, 0.0, 1e-12);
  EXPECT_NEAR(out.total, 1.0, 1e-12);
  ASSERT_EQ(out.per_region_weights.size(), 2u);
  EXPECT_EQ(out.per_region_weights[1], Matrix(1, 1, 1.0));
  EXPECT_EQ(out.per_region_weights[0], Matrix(2, 2, 1.0));
  const std::vector<double> expected_grad{0.5, -0.5, 0.0, 0.0};
  for (std::size_t i = 0; i < 4; ++i)
    EXPECT_NEAR(out.grad.values()[i], expected_grad[i], 1e-12);
}

TEST(CascadeLoss, SingleLevelIsScaledL1) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 4.0);
  std::vector<double> p(12), g(12);
  double l1 = 0.0;
  for (std::size_t i = 0; i < 12; ++i) {
    p[i] = u(rng);
    g[i] = std::floor(u(rng));
    l1 += std::abs(p[i] - g[i]);
  }
  const auto out = cascade_loss(grid_of(3, 4, p), grid_of(3, 4, g), {});
  EXPECT_NEAR(out.value, (2.0 / 12.0) * l1, 1e-12);
  EXPECT_EQ(out.weights.size(), 1u);
  EXPECT_EQ(out.weights[0], Matrix(3, 4, 1.0));
}

TEST(CascadeLoss, SmallParentErrorShrinksChildWeight) {
  // Left parent has a pure shift (sum matches), right parent a real miss.
  const auto pred = grid_of(2, 4, {1, 0, 3, 0, 0, 0, 0, 0});
  const auto gt = grid_of(2, 4, {0, 1, 1, 0, 0, 0, 0, 0});
  CascadeConfig cfg;
  cfg.t = 1;
  const auto out = cascade_loss(pred, gt, cfg);
  EXPECT_LT(out.weights[0](0, 0), out.weights[0](0, 2));
  // Parent-level softmax sums to one over the parents.
  EXPECT_NEAR(out.weights[0](0, 0) + out.weights[0](0, 2), 1.0, 1e-15);
}

TEST(CascadeLoss, SiblingGroupSoftmaxNormalizesPerGrandparent) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  std::vector<double> p(64), g(64);
  for (std::size_t i = 0; i < 64; ++i) {
    p[i] = u(rng);
    g[i] = std::floor(u(rng));
  }
  CascadeConfig cfg;
  cfg.t = 2;
  cfg.softmax_scope = SoftmaxScope::kSiblingGroup;
  const auto out = cascade_loss(grid_of(8, 8, p), grid_of(8, 8, g), cfg);
  // Level-0 weights come from level-1 parents grouped under level-2 regions.
  const auto& w0 = out.weights[0];
  for (std::size_t gi = 0; gi < 2; ++gi)
    for (std::size_t gj = 0; gj < 2; ++gj) {
      double sum = 0.0;
      for (std::size_t a = 0; a < 2; ++a)
        for (std::size_t b = 0; b < 2; ++b) sum += w0((gi * 2 + a) * 2, (gj * 2 + b) * 2);
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  for (double w : w0.values()) EXPECT_GT(w, 0.0);
}

TEST(CascadeLoss, RejectsBadShapes) {
  const auto a = grid_of(2, 2, {0, 0, 0, 0});
  const auto b = grid_of(2, 3, {0, 0, 0, 0, 0, 0});
  EXPECT_THROW(cascade_loss(a, b, {}), ValidationError);
  CascadeConfig deep;
  deep.t = 2;
  EXPECT_THROW(cascade_loss(a, a, deep), ValidationError);
  EXPECT_THROW(cascade_loss(a, grid_of(2, 2, {0.5, 0, 0, 0}), {}), ValidationError);
}

TEST(RoundingReg, Examples) {
  EXPECT_EQ(rounding_reg(grid_of(1, 3, {0, 2, 7})), 0.0);
  EXPECT_NEAR(rounding_reg(grid_of(1, 1, {2.3})), 0.3, 1e-15);
  EXPECT_EQ(rounding_reg(grid_of(1, 1, {2.5})), 0.5);
  EXPECT_NEAR(rounding_reg(grid_of(1, 2, {2.3, 0.9}), 2.0), 0.2, 1e-15);
}

TEST(CountLoss, ZeroAtIntegerTruth) {
  const auto gt = grid_of(4, 4, {1, 0, 2, 0, 0, 3, 0, 1, 0, 0, 0, 0, 5, 0, 0, 1});
  CascadeConfig cfg;
  cfg.t = 2;
  const auto out = count_loss(gt, gt, cfg);
  EXPECT_EQ(out.total, 0.0);
  for (double g : out.grad.values()) EXPECT_EQ(g, 0.0);
}

TEST(CountLoss, FirstOrderPerturbation) {
  // Matched 4x4 grid, t = 2; nudge one cell by +eps. Every region level
  // sees +eps; the two coarse levels have weight 1 and the finest level
  // takes the softmax share of the perturbed parent among 4.
  const auto gt = grid_of(4, 4, {1, 0, 2, 0, 0, 3, 0, 1, 0, 0, 0, 0, 5, 0, 0, 1});
  CascadeConfig cfg;
  cfg.t = 2;
  auto values = std::vector<double>(gt.matrix().values().begin(), gt.matrix().values().end());
  values[5] += 1e-6;
  const double eps = values[5] - 3.0;  // the increment actually stored
  const auto out = count_loss(grid_of(4, 4, values), gt, cfg);
  // The perturbed parent's softmax weight moves off 1/4 at second order.
  const double w0 = std::exp(eps / cfg.batch_norm) / (std::exp(eps / cfg.batch_norm) + 3.0);
  const double expected = eps * (2.0 / 16.0 * w0 + 4.0 / 16.0 * 1.0 + 8.0 / 16.0 * 1.0) + eps;
  // Region sums such as 14 + eps round at the ulp of 16.
  EXPECT_NEAR(out.total, expected, 5e-15);
  EXPECT_NEAR(w0, 0.25, 1e-6);
}

struct GradCase {
  int t;
  SoftmaxScope scope;
  bool through_softmax;
};

class CountLossGrad : public ::testing::TestWithParam<GradCase> {};

// Cascade plus regularizer with the region weights held at `weights`.
double frozen_weight_loss(const std::vector<double>& p, const DensityGrid& gt,
                          const std::vector<Matrix>& weights, double batch_norm) {
  const std::size_t rows = gt.matrix().rows(), cols = gt.matrix().cols();
  double total = 0.0;
  for (std::size_t r = 0; r < weights.size(); ++r) {
    const auto pr = region_counts(Matrix(rows, cols, p), static_cast<int>(r));
    const auto gr = region_counts(gt.matrix(), static_cast<int>(r));
    const double alpha = std::pow(2.0, static_cast<double>(r) + 1) / static_cast<double>(rows * cols);
    for (std::size_t i = 0; i < pr.size(); ++i)
      total += alpha * weights[r].values()[i] * std::abs(pr.values()[i] - gr.values()[i]) / batch_norm;
  }
  for (double v : p) total += std::abs(v - std::nearbyint(v)) / batch_norm;
  return total;
}

TEST_P(CountLossGrad, MatchesCentralDifferences) {
  const auto param = GetParam();
  std::mt19937_64 rng(1000 + param.t);
  std::uniform_real_distribution<double> u(0.05, 4.0);
  std::uniform_int_distribution<int> counts(0, 4);
  const double h = 1e-6;
  double worst = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t min_side = std::size_t{1} << param.t;
    const auto rows = std::uniform_int_distribution<std::size_t>(min_side, 16)(rng);
    const auto cols = std::uniform_int_distribution<std::size_t>(min_side, 16)(rng);
    std::vector<double> p(rows * cols), g(rows * cols);
    for (auto& v : p) v = u(rng);
    for (auto& v : g) v = counts(rng);
    CascadeConfig cfg;
    cfg.t = param.t;
    cfg.softmax_scope = param.scope;
    cfg.differentiate_weights = param.through_softmax;
    cfg.batch_norm = 2.0;
    const auto gt = grid_of(rows, cols, g);
    const auto out = count_loss(grid_of(rows, cols, p), gt, cfg);

    for (std::size_t k = 0; k < p.size(); ++k) {
      // Skip kinks of |round(x) - x| and of every region residual.
      const double frac = p[k] - std::floor(p[k]);
      if (frac < 1e-4 || frac > 1 - 1e-4 || std::abs(frac - 0.5) < 1e-4) continue;
      bool near_kink = false;
      for (int r = 0; r <= param.t && !near_kink; ++r) {
        const auto pr = region_counts(Matrix(rows, cols, p), r);
        const auto gr = region_counts(gt.matrix(), r);
        const std::size_t i = (k / cols) >> r, j = (k % cols) >> r;
        near_kink = std::abs(pr(i, j) - gr(i, j)) < 1e-4;
      }
      if (near_kink) continue;
      const auto f = [&](double x) {
        auto q = p;
        q[k] = x;
        if (param.through_softmax) return count_loss(grid_of(rows, cols, q), gt, cfg).total;
        return frozen_weight_loss(q, gt, out.per_region_weights, cfg.batch_norm);
      };
      const double numeric = testing::central_difference(f, p[k], h);
      worst = std::max(worst, testing::relative_error(out.grad.values()[k], numeric));
    }
  }
  EXPECT_LT(worst, 1e-5);
}

INSTANTIATE_TEST_SUITE_P(
    Configurations, CountLossGrad,
    ::testing::Values(GradCase{0, SoftmaxScope::kParentLevel, false},
                      GradCase{1, SoftmaxScope::kParentLevel, false},
                      GradCase{2, SoftmaxScope::kParentLevel, false},
                      GradCase{1, SoftmaxScope::kParentLevel, true},
                      GradCase{2, SoftmaxScope::kParentLevel, true},
                      GradCase{2, SoftmaxScope::kSiblingGroup, false},
                      GradCase{2, SoftmaxScope::kSiblingGroup, true}));

TEST(CountLoss, NonNegativeProperty) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 6.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> p(64), g(64);
    for (auto& v : p) v = u(rng);
    for (auto& v : g) v = std::floor(u(rng));
    CascadeConfig cfg;
    cfg.t = trial % 4;
    const auto out = count_loss(grid_of(8, 8, p), grid_of(8, 8, g), cfg);
    EXPECT_GE(out.cascade, 0.0);
    EXPECT_GE(out.regularizer, 0.0);
    EXPECT_EQ(out.total, out.cascade + out.regularizer);
    for (const auto& w : out.per_region_weights)
      for (double x : w.values()) EXPECT_GT(x, 0.0);
  }
}

}  // namespace
}  // namespace crowdloc
