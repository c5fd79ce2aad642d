#include "simucheck/pipeline.hpp"
#include "simucheck/search.hpp"

#include "support/gen.hpp"
#include "support/oracle.hpp"
#include "support/paths.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

using namespace simucheck;
using search::Candidate;
using sim::Dim3;

namespace {

ir::KernelProgram corpus(const std::string& name)
{
    return pipeline::load_kernel(testing::corpus_dir() / (name + ".mir"));
}

Candidate scored(bool valid, double primary, std::int64_t secondary)
{
    Candidate c;
    c.score.valid = valid;
    c.score.primary = primary;
    c.score.secondary = secondary;
    return c;
}

search::EPConfig small_ep(std::uint64_t seed)
{
    search::EPConfig ep;
    ep.population = 6;
    ep.generations = 2;
    ep.rng_seed = seed;
    ep.grid_max = {3, 3, 3};
    ep.block_max = {8, 8, 8};
    ep.default_range = {0, 20};
    ep.limits.instruction_budget = 20'000;
    ep.limits.max_threads_per_block = 64;
    return ep;
}

} // namespace

TEST_SUITE("inputgen") {

TEST_CASE("every address touched by one thread scores 1")
{
    const auto p = corpus("race_free");
    const auto s = search::fitness(p, {{2, 1, 1}, {16, 1, 1}, {}}, {});
    REQUIRE(s.valid);
    CHECK(s.primary == doctest::Approx(1.0));
}

TEST_CASE("two threads writing one address score 1/2")
{
    const auto p = ir::parse_kernel("kernel k(array a) { global int a[1]; a[0] = threadIdx.x; }");
    const auto s = search::fitness(p, {{1, 1, 1}, {2, 1, 1}, {}}, {});
    REQUIRE(s.valid);
    CHECK(s.addresses == 1);
    CHECK(s.thread_accesses == 2);
    CHECK(s.primary == doctest::Approx(0.5));
    CHECK(s.secondary == 0);
}

TEST_CASE("copy_from_mat at block (3,2): fitness from hand enumeration")
{
    // Block (3,2), one block, strides 1, 5x5. Enumerate each thread's two
    // accesses directly.
    const std::int64_t stride = 1;
    const std::int64_t rows = 5;
    const std::int64_t cols = 5;
    std::map<std::int64_t, std::set<std::pair<int, int>>> out_threads;
    std::map<std::int64_t, std::set<std::pair<int, int>>> in_threads;
    for (int j = 0; j < 2; ++j) {
        for (int i = 0; i < 3; ++i) {
            if (i < cols && j < rows) {
                in_threads[i + j * stride].insert({i, j});
                out_threads[i + j * stride].insert({i, j});
            }
        }
    }
    std::int64_t g = 0;
    std::int64_t f = 0;
    for (const auto* m : {&out_threads, &in_threads}) {
        for (const auto& [addr, threads] : *m) {
            ++g;
            f += static_cast<std::int64_t>(threads.size());
        }
    }
    const std::int64_t out_size = rows * stride + cols;
    const std::int64_t lo = out_threads.begin()->first;
    const std::int64_t hi = out_size + in_threads.rbegin()->first;
    CHECK(g == 8);
    CHECK(f == 12);
    CHECK(hi - lo == 13);

    const auto p = corpus("copy_from_mat");
    const auto s = search::fitness(
        p, {{1, 1, 1}, {3, 2, 1}, {{"d_out_stride", 1}, {"d_in_stride", 1}, {"d_out_rows", 5}, {"d_out_cols", 5}}},
        {});
    REQUIRE(s.valid);
    CHECK(s.addresses == g);
    CHECK(s.thread_accesses == f);
    CHECK(s.primary == doctest::Approx(static_cast<double>(g) / static_cast<double>(f)));
    CHECK(s.secondary == hi - lo);
}

TEST_CASE("invalid launches")
{
    const auto p = corpus("race_free");
    CHECK_FALSE(search::fitness(p, {{1, 1, 1}, {2048, 1, 1}, {}}, {}).valid);
    const auto empty = corpus("empty");
    const auto s = search::fitness(empty, {{1, 1, 1}, {1, 1, 1}, {}}, {});
    CHECK_FALSE(s.valid);
    CHECK_FALSE(s.invalid_reason.empty());
    const auto div = ir::parse_kernel("kernel k(array a, int n) { global int a[4]; a[threadIdx.x / n] = 1; }");
    CHECK_FALSE(search::fitness(div, {{1, 1, 1}, {2, 1, 1}, {{"n", 0}}}, {}).valid);
    const auto spin = ir::parse_kernel("kernel k(array a) { global int a[1]; a[0] = 1; while (true) { x = 1; } }");
    sim::SimLimits limits;
    limits.instruction_budget = 100;
    CHECK_FALSE(search::fitness(spin, {{1, 1, 1}, {1, 1, 1}, {}}, limits).valid);
}

TEST_CASE("shared arrays get a segment per block")
{
    const auto p = ir::parse_kernel("kernel k(array g) { global int g[4]; shared int s[3]; s[threadIdx.x] = 1; }");
    const auto layout = search::make_layout(p, {4, 3});
    CHECK(layout.global_total == 4);
    CHECK(layout.shared_total == 3);
    const Dim3 grid{2, 2, 1};
    const Dim3 b0{0, 0, 0};
    const Dim3 b3{1, 1, 0};
    CHECK(layout.linear(0, 2, nullptr, grid) == 2);
    CHECK(layout.linear(1, 0, &b0, grid) == 4);
    CHECK(layout.linear(1, 2, &b3, grid) == 4 + 3 * 3 + 2);
}

TEST_CASE("dimension steps")
{
    const Dim3 max{8, 8, 8};
    CHECK(search::apply_dimension_step({3, 2, 1}, {1, -1, 0}, 2, max) == Dim3{4, 1, 1});
    CHECK(search::apply_dimension_step({1, 1, 1}, {-1, -1, 0}, 2, max) == Dim3{1, 1, 1});
    CHECK(search::apply_dimension_step({8, 8, 1}, {1, 1, 1}, 2, max) == Dim3{8, 8, 1});
    CHECK(search::apply_dimension_step({4, 4, 4}, {0, 0, 0}, 1, max) == Dim3{4, 1, 1});
}

TEST_CASE("property: mutated dimensions stay within one step of the parent")
{
    search::Rng rng(41);
    std::set<std::int64_t> seen;
    for (int i = 0; i < 1000; ++i) {
        const auto d = search::mutate_dimensions({5, 5, 1}, 2, {8, 8, 8}, rng);
        CHECK(d.x >= 4);
        CHECK(d.x <= 6);
        CHECK(d.y >= 4);
        CHECK(d.y <= 6);
        CHECK(d.z == 1);
        seen.insert(d.x);
    }
    CHECK(seen.size() == 3);
}

TEST_CASE("argument mutation")
{
    SUBCASE("no mutable args: children copy the parent")
    {
        const auto p = ir::parse_kernel("kernel k(fixed int n) { x = n; }");
        Candidate parent;
        parent.config = {{2, 1, 1}, {3, 1, 1}, {{"n", 7}}};
        search::Rng rng(1);
        const auto [a, b] = search::mutate_arguments(p, parent, rng);
        CHECK(a.config == parent.config);
        CHECK(b.config == parent.config);
    }
    SUBCASE("normal child: mean |delta| is sqrt(2/pi)")
    {
        const auto p = ir::parse_kernel("kernel k(float x) { y = x; }");
        Candidate parent;
        parent.config.args["x"] = 10.0;
        search::Rng rng(42);
        double sum = 0;
        const int n = 10'000;
        for (int i = 0; i < n; ++i) {
            sum += std::abs(search::mutate_arguments(p, parent, rng).first.config.args.at("x") - 10.0);
        }
        const double expected = std::sqrt(2.0 / std::acos(-1.0));
        CHECK(sum / n == doctest::Approx(expected).epsilon(0.05));
    }
    SUBCASE("cauchy child: median |delta| is 1")
    {
        const auto p = ir::parse_kernel("kernel k(float x) { y = x; }");
        Candidate parent;
        parent.config.args["x"] = 0.0;
        search::Rng rng(43);
        std::vector<double> d;
        for (int i = 0; i < 10'000; ++i) {
            d.push_back(std::abs(search::mutate_arguments(p, parent, rng).second.config.args.at("x")));
        }
        std::nth_element(d.begin(), d.begin() + 5000, d.end());
        CHECK(d[5000] == doctest::Approx(1.0).epsilon(0.10));
    }
}

TEST_CASE("candidate ordering")
{
    CHECK(search::compare_candidates(scored(true, 0.5, 10), scored(true, 0.6, 1)) < 0);
    CHECK(search::compare_candidates(scored(true, 0.5, 3), scored(true, 0.5, 10)) < 0);
    CHECK(search::compare_candidates(scored(true, 0.5, 3), scored(true, 0.5, 3)) == 0);
    CHECK(search::compare_candidates(scored(false, 0.0, 0), scored(true, 1.0, 100)) > 0);
    CHECK(search::compare_candidates(scored(false, 0.0, 0), scored(false, 0.9, 1)) == 0);
}

TEST_CASE("effective_config truncates int args toward zero")
{
    const auto p = ir::parse_kernel("kernel k(int n, float f) { x = n; y = f; }");
    const auto c = search::effective_config(p, {{1, 1, 1}, {1, 1, 1}, {{"n", -2.7}, {"f", -2.7}}});
    CHECK(c.args.at("n") == -2.0);
    CHECK(c.args.at("f") == -2.7);
}

TEST_CASE("evolve on small examples")
{
    SUBCASE("every thread writes a[0]: accepted in the initial population")
    {
        auto ep = small_ep(7);
        const auto r = search::evolve(corpus("all_store_zero"), ep);
        CHECK(r.accepted);
        CHECK(r.history.size() == 1);
    }
    SUBCASE("copy_from_mat: search finds colliding threads")
    {
        auto ep = small_ep(7);
        ep.population = 20;
        ep.generations = 3;
        const auto r = search::evolve(corpus("copy_from_mat"), ep);
        REQUIRE(r.best.score.valid);
        CHECK(r.best.score.primary < 1.0);
    }
    SUBCASE("population 1, zero generations returns the initial candidate")
    {
        auto ep = small_ep(9);
        ep.population = 1;
        ep.generations = 0;
        const auto p = corpus("race_free");
        const auto r = search::evolve(p, ep);
        auto rng = search::candidate_rng(9, 0, 0);
        auto initial = search::random_candidate(p, ep, rng);
        CHECK(r.best.config == initial.config);
        CHECK(r.evaluations == 1);
        CHECK(r.final_population.size() == 1);
    }
}

TEST_CASE("validate_ep and apply_setting")
{
    const auto p = ir::parse_kernel("kernel k(int n, fixed int m) { x = n + m; }");
    search::EPConfig ep;
    CHECK(search::validate_ep(p, ep).has_value()); // m has no value
    ep.fixed_args["m"] = 3;
    CHECK_FALSE(search::validate_ep(p, ep).has_value());
    ep.fixed_args["n"] = 1;
    CHECK(search::validate_ep(p, ep).value().find("only fixed parameters") != std::string::npos);
    ep.fixed_args.erase("n");
    ep.population = 0;
    CHECK(search::validate_ep(p, ep).has_value());
    ep.population = 4;
    ep.acceptance_threshold = 1.0;
    CHECK(search::validate_ep(p, ep).has_value());
    ep.acceptance_threshold = 0.3;
    ep.arg_ranges["m"] = {0, 1};
    CHECK(search::validate_ep(p, ep).has_value());
    ep.arg_ranges.clear();
    CHECK_THROWS_AS(search::evolve(p, search::EPConfig{}), std::invalid_argument);

    search::EPConfig s;
    CHECK(search::apply_setting(s, "population", "12"));
    CHECK(s.population == 12);
    CHECK(search::apply_setting(s, "grid_max", "4"));
    CHECK(s.grid_max == Dim3{4, 4, 4});
    CHECK(search::apply_setting(s, "block_max", "16,2,1"));
    CHECK(s.block_max == Dim3{16, 2, 1});
    CHECK(search::apply_setting(s, "range.n", "-3,5"));
    CHECK(s.arg_ranges.at("n") == search::ArgRange{-3, 5});
    CHECK(search::apply_setting(s, "arg.m", "2"));
    CHECK(s.fixed_args.at("m") == 2);
    CHECK(search::apply_setting(s, "warp_size", "8"));
    CHECK(s.limits.warp_size == 8);
    CHECK(search::apply_setting(s, "seed", "18446744073709551615"));
    CHECK(s.rng_seed == 18446744073709551615ULL);
    CHECK_FALSE(search::apply_setting(s, "colour", "blue"));
    CHECK_THROWS_AS(search::apply_setting(s, "population", "many"), std::invalid_argument);
    CHECK_THROWS_AS(search::apply_setting(s, "range.n", "5"), std::invalid_argument);
}

TEST_CASE("property: fitness agrees with the brute-force oracle and stays in bounds")
{
    std::mt19937_64 rng(44);
    for (int i = 0; i < 300; ++i) {
        const auto p = ir::parse_kernel(testing::random_kernel(rng, {}));
        const auto config = testing::random_launch(rng);
        sim::SimLimits limits;
        limits.instruction_budget = 20'000;
        limits.warp_size = testing::random_warp_size(rng);
        const auto o = sim::construct_memory_model(p, config, limits);
        const auto s = search::score_outcome(p, config, o);
        if (!s.valid) {
            CHECK((o.budget_exhausted || o.runtime_error || o.model.tuple_count() == 0));
            continue;
        }
        const auto want = testing::oracle_fitness(o.model);
        CHECK(s.addresses == want.addresses);
        CHECK(s.thread_accesses == want.thread_accesses);
        CHECK(s.primary > 0.0);
        CHECK(s.primary <= 1.0);
        CHECK((s.primary < 1.0) == want.any_shared_address);
        CHECK(s.secondary >= 0);
    }
}

TEST_CASE("property: evolve invariants")
{
    std::mt19937_64 rng(45);
    for (int i = 0; i < 12; ++i) {
        CAPTURE(i);
        const auto p = ir::parse_kernel(testing::random_kernel(rng, {}));
        auto ep = small_ep(1000 + static_cast<std::uint64_t>(i));
        const auto r = search::evolve(p, ep);

        // Size and sortedness of the surviving population.
        CHECK(r.final_population.size() == static_cast<std::size_t>(ep.population));
        for (std::size_t k = 1; k < r.final_population.size(); ++k) {
            CHECK(search::compare_candidates(r.final_population[k - 1], r.final_population[k]) <= 0);
        }
        CHECK(r.best == r.final_population.front());

        // Elitism: the best never gets worse between generations.
        for (std::size_t g = 1; g < r.history.size(); ++g) {
            CHECK(search::compare_candidates(r.history[g].best, r.history[g - 1].best) <= 0);
        }

        // Acceptance is exactly the threshold test on the final best.
        CHECK(r.accepted == (r.best.score.valid && r.best.score.primary < ep.acceptance_threshold));
        // Stopping early only happens on acceptance.
        if (!r.accepted) {
            CHECK(r.history.size() == static_cast<std::size_t>(ep.generations) + 1);
        }

        // Recorded scores match a fresh evaluation.
        for (const auto& c : r.final_population) {
            CHECK(search::fitness(p, search::effective_config(p, c.config), ep.limits) == c.score);
        }

        // Same seed, same answer, with or without worker threads.
        ep.jobs = 3;
        const auto again = search::evolve(p, ep);
        CHECK(again.best == r.best);
        CHECK(again.history == r.history);
        CHECK(again.final_population == r.final_population);
    }
}

} // TEST_SUITE
