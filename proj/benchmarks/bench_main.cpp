#include "simucheck/detect.hpp"
#include "simucheck/pipeline.hpp"
#include "simucheck/search.hpp"

#include <benchmark/benchmark.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace simucheck;

namespace {

std::filesystem::path corpus_file(const char* name)
{
    return std::filesystem::path(SIMUCHECK_SOURCE_DIR) / "corpus" / name;
}

std::string source(const char* name)
{
    std::ifstream in(corpus_file(name));
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

const sim::LaunchConfig smo_launch{{1, 1, 1}, {64, 1, 1}, {{"C", 8}}};

void BM_Parse(benchmark::State& state)
{
    const auto text = source("nearest_neighbour_div.mir");
    for (auto _ : state) {
        benchmark::DoNotOptimize(ir::parse_kernel(text));
    }
}
BENCHMARK(BM_Parse);

void BM_Simulate(benchmark::State& state)
{
    const auto p = pipeline::load_kernel(corpus_file("smo_kernel.mir"));
    auto launch = smo_launch;
    launch.block.x = state.range(0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(sim::construct_memory_model(p, launch));
    }
}
BENCHMARK(BM_Simulate)->Arg(32)->Arg(128)->Arg(512);

void BM_DetectRaces(benchmark::State& state)
{
    const auto p = pipeline::load_kernel(corpus_file("smo_kernel_racy.mir"));
    const auto o = sim::construct_memory_model(p, smo_launch);
    for (auto _ : state) {
        benchmark::DoNotOptimize(detect::detect_data_races(o.model));
    }
}
BENCHMARK(BM_DetectRaces);

void BM_DetectRedundant(benchmark::State& state)
{
    const auto p = pipeline::load_kernel(corpus_file("smo_kernel.mir"));
    const auto o = sim::construct_memory_model(p, smo_launch);
    for (auto _ : state) {
        benchmark::DoNotOptimize(detect::detect_redundant_barriers(o.model));
    }
}
BENCHMARK(BM_DetectRedundant);

void BM_Evolve(benchmark::State& state)
{
    const auto p = pipeline::load_kernel(corpus_file("copy_from_mat.mir"));
    search::EPConfig ep;
    ep.rng_seed = 1;
    for (auto _ : state) {
        benchmark::DoNotOptimize(search::evolve(p, ep));
    }
}
BENCHMARK(BM_Evolve)->Unit(benchmark::kMillisecond);

} // namespace
BENCHMARK_MAIN();
