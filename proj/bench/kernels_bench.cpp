// Serial reference vs OpenMP kernels. Run with OMP_NUM_THREADS set to compare.

#include "teleop/eval.hpp"
#include "teleop/parallel.hpp"

#include <benchmark/benchmark.h>

using namespace teleop;

namespace {

const DhTable& arm() {
  static const DhTable dh = load_kinematics(std::string(TELEOP_CONFIG_DIR) + "/ur10.json");
  return dh;
}

const Scene& scene() {
  static const Scene s = load_scene(std::string(TELEOP_CONFIG_DIR) + "/scene.json");
  return s;
}

void BM_ToolPositionsSerial(benchmark::State& state) {
  const auto qs = random_configurations(static_cast<std::size_t>(state.range(0)), arm(), 1);
  for (auto _ : state) benchmark::DoNotOptimize(batch_tool_positions_serial(qs, arm()));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ToolPositionsParallel(benchmark::State& state) {
  const auto qs = random_configurations(static_cast<std::size_t>(state.range(0)), arm(), 1);
  for (auto _ : state) benchmark::DoNotOptimize(batch_tool_positions(qs, arm()));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_CollisionSerial(benchmark::State& state) {
  const auto qs = random_configurations(static_cast<std::size_t>(state.range(0)), arm(), 2);
  for (auto _ : state) benchmark::DoNotOptimize(batch_collision_free_serial(qs, scene(), arm()));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_CollisionParallel(benchmark::State& state) {
  const auto qs = random_configurations(static_cast<std::size_t>(state.range(0)), arm(), 2);
  for (auto _ : state) benchmark::DoNotOptimize(batch_collision_free(qs, scene(), arm()));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

eval::DistanceConfig distance_config() {
  eval::DistanceConfig c;
  c.n_goals = 4;
  return c;
}

void BM_DistanceEvalSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(eval::run_distance_eval_serial(arm(), scene(), distance_config()));
}

void BM_DistanceEvalParallel(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(eval::run_distance_eval(arm(), scene(), distance_config()));
}

}  // namespace

BENCHMARK(BM_ToolPositionsSerial)->Arg(1 << 10)->Arg(1 << 14);
BENCHMARK(BM_ToolPositionsParallel)->Arg(1 << 10)->Arg(1 << 14);
BENCHMARK(BM_CollisionSerial)->Arg(1 << 10)->Arg(1 << 14);
BENCHMARK(BM_CollisionParallel)->Arg(1 << 10)->Arg(1 << 14);
BENCHMARK(BM_DistanceEvalSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DistanceEvalParallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
