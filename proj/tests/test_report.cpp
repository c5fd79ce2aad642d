#include "simucheck/pipeline.hpp"
#include "simucheck/report.hpp"

#include "support/paths.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

using namespace simucheck;
namespace fs = std::filesystem;

namespace {

ir::KernelProgram corpus(const std::string& name)
{
    return pipeline::load_kernel(testing::corpus_dir() / (name + ".mir"));
}

search::EPConfig quick_ep(std::uint64_t seed)
{
    search::EPConfig ep;
    ep.population = 10;
    ep.generations = 2;
    ep.rng_seed = seed;
    return ep;
}

// Scratch directory removed at scope exit.
struct TempDir {
    fs::path path;

    TempDir()
    {
        std::random_device rd;
        path = fs::temp_directory_path() / ("simucheck-test-" + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }

    void write(const std::string& name, const std::string& text) const { std::ofstream(path / name) << text; }
};

} // namespace

TEST_SUITE("cli-report") {

TEST_CASE("JSON round trip preserves every report")
{
    std::vector<report::DetectionReport> reports;
    pipeline::CheckOptions opts;
    reports.push_back(pipeline::run_check(corpus("copy_from_mat"),
                                          {{1, 1, 1},
                                           {3, 2, 1},
                                           {{"d_out_stride", 1}, {"d_in_stride", 1}, {"d_out_rows", 5}, {"d_out_cols", 5}}},
                                          opts));
    reports.push_back(pipeline::run_check(corpus("homography_min"), {{1, 1, 1}, {1, 1, 1}, {{"seed_median", 4.5}}}, opts));
    reports.push_back(pipeline::run_check(corpus("nearest_neighbour_div"), {{1, 1, 1}, {64, 1, 1}, {}}, opts));
    reports.push_back(pipeline::run_search(corpus("copy_from_mat"), quick_ep(3), opts));
    reports.push_back(pipeline::run_fitness(corpus("race_free"), {{2, 1, 1}, {4, 1, 1}, {}}, opts));
    reports.push_back(pipeline::run_check(
        ir::parse_kernel("kernel k(array a) { global int a[2]; a[threadIdx.x * 5] = 1; }"), {{1, 1, 1}, {2, 1, 1}, {}},
        opts));
    REQUIRE(reports.back().runtime_error.has_value());

    for (const auto& r : reports) {
        CAPTURE(r.kernel);
        const auto j = report::to_json(r);
        const auto back = report::from_json(j);
        CHECK(back == r);
        CHECK(report::to_json(back) == j);
        CHECK(report::from_json(nlohmann::json::parse(report::full_json(r))) == r);
    }
}

TEST_CASE("JSON shape")
{
    const auto r = pipeline::run_check(corpus("all_store_zero"), {{1, 1, 1}, {4, 1, 1}, {}}, {});
    const auto j = report::to_json(r);
    CHECK(j.at("tool") == "simucheck");
    CHECK(j.at("version") == report::kToolVersion);
    CHECK(j.at("mode") == "check");
    CHECK(j.at("config").at("block") == nlohmann::json::array({4, 1, 1}));
    CHECK(j.at("race_count") == r.races.size());
    CHECK(j.at("verdicts") == nlohmann::json::array({"race"}));
    CHECK(j.at("search").is_null());
    CHECK(j.at("runtime_error").is_null());
    CHECK(j.contains("timing_ms"));
    CHECK_FALSE(nlohmann::json::parse(report::canonical_json(r)).contains("timing_ms"));
    CHECK(report::race_verdict(r) == "w&w sync");
}

TEST_CASE("from_json rejects malformed documents")
{
    CHECK_THROWS(report::from_json(nlohmann::json::parse("{}")));
    auto j = report::to_json(pipeline::run_check(corpus("empty"), {{1, 1, 1}, {1, 1, 1}, {}}, {}));
    j["config"]["grid"] = nlohmann::json::array({1, 2});
    CHECK_THROWS(report::from_json(j));
}

TEST_CASE("canonical JSON is identical across repeated searches with one seed")
{
    const auto p = corpus("copy_from_mat");
    auto ep = quick_ep(11);
    const auto a = report::canonical_json(pipeline::run_search(p, ep, {}));
    ep.jobs = 4;
    const auto b = report::canonical_json(pipeline::run_search(p, ep, {}));
    CHECK(a == b);
}

TEST_CASE("race verdict strings")
{
    report::DetectionReport r;
    CHECK(report::race_verdict(r) == "no sync");
    detect::RaceReport rw;
    rw.kind = detect::RaceKind::ReadWrite;
    r.races.push_back(rw);
    CHECK(report::race_verdict(r) == "r&w sync");
    detect::RaceReport ww;
    ww.kind = detect::RaceKind::WriteWrite;
    r.races.push_back(ww);
    CHECK(report::race_verdict(r) == "w&w sync");
}

TEST_CASE("verdicts and text summary")
{
    report::DetectionReport r;
    r.kernel = "k";
    CHECK_FALSE(r.has_bugs());
    r.barriers.push_back({"b1", true, 0, 0});
    r.barriers.push_back({"b2", false, 1, 3});
    r.barrier_divergence = true;
    CHECK(r.redundant_barriers() == std::vector<std::string>{"b1"});
    CHECK(r.verdicts() == std::vector<std::string>{"barrier_divergence", "redundant_barrier"});
    const auto text = report::text_summary(r);
    CHECK(text.find("b1") != std::string::npos);
    CHECK(text.find("no sync") != std::string::npos);
}

TEST_CASE("parse_expected")
{
    SUBCASE("search entry with settings")
    {
        const auto e = pipeline::parse_expected("# comment\nverdict = race, redundant_barrier\nseed = 7\npopulation = 4\n");
        CHECK(e.verdicts == std::set<std::string>{"race", "redundant_barrier"});
        CHECK_FALSE(e.pinned.has_value());
        CHECK(e.search_settings.size() == 2);
    }
    SUBCASE("pinned entry")
    {
        const auto e = pipeline::parse_expected("verdict = clean\ngrid = 2\nblock = 8,2\narg.n = 3\n");
        CHECK(e.verdicts.empty());
        REQUIRE(e.pinned.has_value());
        CHECK(e.pinned->grid == sim::Dim3{2, 1, 1});
        CHECK(e.pinned->block == sim::Dim3{8, 2, 1});
        CHECK(e.pinned->args.at("n") == 3);
    }
    SUBCASE("errors")
    {
        CHECK_THROWS_AS(pipeline::parse_expected("grid = 1\n"), std::invalid_argument);
        CHECK_THROWS_AS(pipeline::parse_expected("verdict = racy\n"), std::invalid_argument);
        CHECK_THROWS_AS(pipeline::parse_expected("verdict = clean\ngrid = 1\npopulation = 3\n"), std::invalid_argument);
        CHECK_THROWS_AS(pipeline::parse_expected("verdict clean\n"), std::invalid_argument);
    }
}

TEST_CASE("corpus runner")
{
    SUBCASE("shipped corpus passes")
    {
        const auto entries = pipeline::run_corpus(testing::corpus_dir(), {}, {}, 2);
        CHECK(entries.size() == 10);
        for (const auto& e : entries) {
            CAPTURE(e.name);
            CAPTURE(e.message);
            CHECK(e.status == pipeline::EntryStatus::Pass);
        }
        CHECK(pipeline::format_corpus(entries).find("10/10 corpus entries pass") != std::string::npos);
    }
    SUBCASE("empty directory")
    {
        TempDir dir;
        CHECK(pipeline::run_corpus(dir.path, {}, {}).empty());
    }
    SUBCASE("wrong, missing and broken entries")
    {
        TempDir dir;
        dir.write("a.mir", "kernel a(array x) { global int x[1]; x[0] = threadIdx.x; }");
        dir.write("a.expected", "verdict = clean\ngrid = 1\nblock = 4\n");
        dir.write("b.mir", "kernel b() { }");
        dir.write("c.mir", "kernel c( {");
        dir.write("c.expected", "verdict = clean\n");
        const auto entries = pipeline::run_corpus(dir.path, {}, {});
        REQUIRE(entries.size() == 3);
        CHECK(entries[0].name == "a");
        CHECK(entries[0].status == pipeline::EntryStatus::Fail);
        CHECK(entries[0].actual == std::set<std::string>{"race"});
        CHECK(entries[1].status == pipeline::EntryStatus::Unconfigured);
        CHECK(entries[2].status == pipeline::EntryStatus::Error);
        CHECK(pipeline::format_corpus(entries).find("0/3 corpus entries pass") != std::string::npos);
    }
}

TEST_CASE("load_kernel reports the file and position")
{
    TempDir dir;
    dir.write("bad.mir", "kernel k() {\n  x = y;\n}");
    try {
        pipeline::load_kernel(dir.path / "bad.mir");
        FAIL("expected an error");
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("bad.mir:2:") != std::string::npos);
    }
    CHECK_THROWS_AS(pipeline::load_kernel(dir.path / "missing.mir"), std::runtime_error);
}

} // TEST_SUITE
