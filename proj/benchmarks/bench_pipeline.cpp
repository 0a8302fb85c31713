#include <benchmark/benchmark.h>

#include <fstream>
#include <sstream>

#include "epitask/compiler.hpp"
#include "epitask/planner.hpp"
#include "epitask/simulator.hpp"

namespace {

using namespace epitask;

std::string slurp(const std::string& name) {
  std::ifstream in(std::string(EPITASK_FIXTURES_DIR) + "/" + name);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

Task walkthrough_task() {
  return parse_task(slurp("walkthrough_task.json"), std::nullopt, EPITASK_FIXTURES_DIR);
}

Task chain_task() {
  return parse_task(slurp("relay_chain_task.json"), std::nullopt, EPITASK_FIXTURES_DIR);
}

void BM_CompileWalkthrough(benchmark::State& state) {
  Task task = walkthrough_task();
  for (auto _ : state) {
    benchmark::DoNotOptimize(compile(task));
  }
}
BENCHMARK(BM_CompileWalkthrough);

void BM_SolveWalkthrough(benchmark::State& state) {
  CompiledProblem problem = compile(walkthrough_task());
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve(problem));
  }
}
BENCHMARK(BM_SolveWalkthrough);

void BM_SolveChain(benchmark::State& state) {
  CompiledProblem problem = compile(chain_task());
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve(problem));
  }
}
BENCHMARK(BM_SolveChain);

void BM_EpisodeInit(benchmark::State& state) {
  Task task = chain_task();
  for (auto _ : state) {
    Episode episode(task);
    benchmark::DoNotOptimize(episode.world().turn);
  }
}
BENCHMARK(BM_EpisodeInit);

void BM_EpisodeSteps(benchmark::State& state) {
  Task task = walkthrough_task();
  auto scripts = parse_scripts(slurp("walkthrough_scripts.jsonl"));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        run_episode(task, scripts, nlohmann::ordered_json::object()).turns_used);
  }
}
BENCHMARK(BM_EpisodeSteps);

}  // namespace

BENCHMARK_MAIN();
