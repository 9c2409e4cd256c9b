#include <gtest/gtest.h>

#include <algorithm>

#include <cmath>
#include <random>

#include "crowdloc/error.hpp"
#include "crowdloc/hungarian.hpp"
#include "oracles.hpp"

namespace crowdloc {
namespace {

void expect_injective(const Matching& m) {
  std::vector<int> rows, cols;
  for (const auto& p : m.pairs) {
    rows.push_back(p.row);
    cols.push_back(p.col);
  }
  std::ranges::sort(rows);
  std::ranges::sort(cols);
  EXPECT_EQ(std::ranges::adjacent_find(rows), rows.end());
  EXPECT_EQ(std::ranges::adjacent_find(cols), cols.end());
}

TEST(Hungarian, DiagonalExample) {
  const auto m = hungarian(Matrix(2, 2, std::vector<double>{1, 2, 2, 1}));
  EXPECT_EQ(m.pairs, (std::vector<MatchedPair>{{0, 0}, {1, 1}}));
  EXPECT_EQ(m.cost, 2.0);
}

TEST(Hungarian, SingleRowPicksArgmin) {
  const auto m = hungarian(Matrix(1, 3, std::vector<double>{5, 1, 9}));
  EXPECT_EQ(m.pairs, (std::vector<MatchedPair>{{0, 1}}));
  EXPECT_EQ(m.cost, 1.0);
}

TEST(Hungarian, TallMatrix) {
  const auto m = hungarian(Matrix(3, 1, std::vector<double>{4, 2, 7}));
  EXPECT_EQ(m.pairs, (std::vector<MatchedPair>{{1, 0}}));
}

TEST(Hungarian, EmptyAndNonFinite) {
  EXPECT_TRUE(hungarian(Matrix(0, 4)).empty());
  EXPECT_TRUE(hungarian(Matrix(3, 0)).empty());
  EXPECT_THROW(hungarian(Matrix(1, 2, std::vector<double>{1, NAN})), NumericError);
  EXPECT_THROW(hungarian(Matrix(1, 1, std::vector<double>{INFINITY})), NumericError);
}

TEST(Hungarian, MatchesBruteForceOnSevenBySeven) {
  std::mt19937_64 rng(2024);
  for (int seed = 0; seed < 100; ++seed) {
    const auto cost = testing::random_matrix(rng, 7, 7, true);
    const auto h = hungarian(cost);
    const auto b = brute_force_match(cost);
    EXPECT_EQ(h.cost, b.cost) << "instance " << seed;
    EXPECT_EQ(h.size(), 7u);
    expect_injective(h);
  }
}

TEST(Hungarian, MatchesBruteForceOnRectangularReals) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = std::uniform_int_distribution<std::size_t>(0, 7)(rng);
    const auto m = std::uniform_int_distribution<std::size_t>(0, 7)(rng);
    const auto cost = testing::random_matrix(rng, n, m, trial % 2 == 0);
    const auto h = hungarian(cost);
    EXPECT_EQ(h.size(), std::min(n, m));
    EXPECT_NEAR(h.cost, brute_force_match(cost).cost, 1e-9) << n << "x" << m;
    expect_injective(h);
  }
}

TEST(BruteForceMatch, Examples) {
  EXPECT_EQ(brute_force_match(Matrix(2, 2, std::vector<double>{1, 2, 2, 1})).cost, 2.0);
  EXPECT_TRUE(brute_force_match(Matrix(0, 5)).empty());
  EXPECT_THROW(brute_force_match(Matrix(9, 9)), ValidationError);
}

TEST(BruteForceMatch, LexicographicTieBreak) {
  const auto m = brute_force_match(Matrix(2, 2, 1.0));
  EXPECT_EQ(m.pairs, (std::vector<MatchedPair>{{0, 0}, {1, 1}}));
}

TEST(BruteForceMatch, AgreesWithPermutationOracle) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = std::uniform_int_distribution<std::size_t>(1, 6)(rng);
    const auto m = std::uniform_int_distribution<std::size_t>(1, 6)(rng);
    const auto cost = testing::random_matrix(rng, n, m, false);
    EXPECT_EQ(brute_force_match(cost).cost, testing::permutation_min_cost(cost));
  }
}

}  // namespace
}  // namespace crowdloc
