// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <fstream>
#include <sstream>

#include <benchmark/benchmark.h>

#include <metasurf/deploy.hpp>
#include <metasurf/mibb.hpp>
#include <metasurf/p3.hpp>
#include <metasurf/radio.hpp>

namespace {

using namespace metasurf;

SceneConfig desk_scene() {
  std::ifstream in(std::filesystem::path(METASURF_SCENE_DIR) / "desk.json");
  std::stringstream ss;
  ss << in.rdbuf();
  return scene_from_json_text(ss.str());
}

const ChannelSet& desk_channels() {
  static const ChannelSet ch = synthesize_channels(desk_scene(), 1);
  return ch;
}

P3Instance desk_p3(std::size_t budget) {
  const auto& ch = desk_channels();
  P3Options opt;
  opt.budget = budget;
  opt.tau_min = 0.0625;
  return build_p3(ch, opt, init_iterate(ch, 7));
}

void BM_SynthesizeChannels(benchmark::State& state) {
  const SceneConfig scene = desk_scene();
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(synthesize_channels(scene, ++seed));
}
BENCHMARK(BM_SynthesizeChannels);

void BM_BuildP3(benchmark::State& state) {
  const auto& ch = desk_channels();
  const Iterate it = init_iterate(ch, 7);
  P3Options opt;
  opt.budget = 3;
  opt.tau_min = 0.0625;
  for (auto _ : state) benchmark::DoNotOptimize(build_p3(ch, opt, it));
}
BENCHMARK(BM_BuildP3)->Unit(benchmark::kMicrosecond);

// Continuous relaxation of the desk P3 instance, one solve per iteration.
void BM_SolveRelaxation(benchmark::State& state) {
  const P3Instance inst = desk_p3(3);
  conic::SolverSettings s;
  s.method = static_cast<conic::ConicMethod>(state.range(0));
  s.tol = s.method == conic::ConicMethod::InteriorPoint ? 1e-9 : 1e-7;
  for (auto _ : state) benchmark::DoNotOptimize(conic::solve_conic(inst.problem, s));
}
BENCHMARK(BM_SolveRelaxation)
    ->Arg(static_cast<int>(conic::ConicMethod::Splitting))
    ->Arg(static_cast<int>(conic::ConicMethod::InteriorPoint))
    ->Unit(benchmark::kMillisecond);

void BM_BranchAndBound(benchmark::State& state) {
  const auto budget = static_cast<std::size_t>(state.range(0));
  const P3Instance inst = desk_p3(budget);
  const auto bins = inst.layout.binary_indices();
  std::size_t nodes = 0;
  for (auto _ : state) {
    const auto r = mibb::solve_mi_conic(inst.problem, bins, budget);
    nodes = r.nodes;
    benchmark::DoNotOptimize(r);
  }
  state.counters["nodes"] = static_cast<double>(nodes);
}
BENCHMARK(BM_BranchAndBound)->DenseRange(0, 6, 3)->Unit(benchmark::kMillisecond);

void BM_EvaluatePlan(benchmark::State& state) {
  const auto& ch = desk_channels();
  const auto plan = SurfacePlan::all_sms(ch.num_surfaces(), ch.surface_elements());
  const Allocation alloc{std::vector<double>(ch.num_ues(), 1.0 / static_cast<double>(ch.num_ues()))};
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_plan(ch, plan, alloc));
}
BENCHMARK(BM_EvaluatePlan)->Unit(benchmark::kMicrosecond);

void BM_RunFppSca(benchmark::State& state) {
  const auto& ch = desk_channels();
  DeployConfig cfg;
  cfg.budget = static_cast<std::size_t>(state.range(0));
  cfg.seed = 7;
  cfg.starts = 1;
  cfg.tau_min = 0.0625;
  cfg.threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(run_fpp_sca(ch, cfg));
}
BENCHMARK(BM_RunFppSca)->Arg(0)->Arg(3)->Unit(benchmark::kMillisecond)->Iterations(2);

}  // namespace

BENCHMARK_MAIN();
