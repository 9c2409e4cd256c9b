#include <benchmark/benchmark.h>

#include <random>

#include "crowdloc/count_loss.hpp"
#include "crowdloc/ctr.hpp"
#include "crowdloc/hungarian.hpp"
#include "crowdloc/synth.hpp"

namespace {

using namespace crowdloc;

Matrix random_cost(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  Matrix m(rows, cols);
  for (auto& v : m.values()) v = u(rng);
  return m;
}

void BM_Hungarian(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto cost = random_cost(n, 2 * n, 1);
  for (auto _ : state) benchmark::DoNotOptimize(hungarian(cost));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Hungarian)->RangeMultiplier(2)->Range(8, 256)->Complexity(benchmark::oNCubed);

void BM_CountLoss(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  Matrix p(side, side), g(side, side);
  for (auto& v : p.values()) v = u(rng);
  for (auto& v : g.values()) v = std::floor(u(rng));
  const DensityGrid pred(16, 16, p), gt(16, 16, g);
  CascadeConfig cfg;
  cfg.t = 3;
  cfg.differentiate_weights = state.range(1) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(count_loss(pred, gt, cfg));
}
BENCHMARK(BM_CountLoss)->ArgsProduct({{16, 64, 256}, {0, 1}});

void BM_CtrMatch(benchmark::State& state) {
  const auto ng = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> pos(0.0, 512.0), prob(0.0, 1.0);
  std::vector<Prediction> s(4 * ng);
  for (auto& t : s) t = {pos(rng), pos(rng), prob(rng)};
  std::vector<Point2> g(ng);
  for (auto& q : g) q = {pos(rng), pos(rng)};
  for (auto _ : state) benchmark::DoNotOptimize(ctr_match(s, g));
}
BENCHMARK(BM_CtrMatch)->RangeMultiplier(2)->Range(16, 128);

void BM_TrainToy(benchmark::State& state) {
  SceneConfig sc;
  sc.width = sc.height = 64;
  sc.n_clusters = 1;
  sc.max_points_per_cluster = 20;
  sc.background_points = 5;
  const auto scene = generate_scene(sc);
  const std::vector<Scene> scenes{scene};
  const std::vector<int> levels{4, 8, 16};
  const auto pyr = learn_pyramid(scenes, levels, 16, 16, 0);
  TrainConfig cfg;
  cfg.steps = static_cast<int>(state.range(0));
  cfg.lr = 0.1;
  cfg.annotation_jitter = 2.0;
  for (auto _ : state) benchmark::DoNotOptimize(train_toy(scene, pyr, cfg));
}
BENCHMARK(BM_TrainToy)->Arg(100)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
