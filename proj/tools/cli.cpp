#include "cli.hpp"

#include "simucheck/pipeline.hpp"
#include "simucheck/report.hpp"
#include "simucheck/search.hpp"
#include "simucheck/text.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace simucheck::cli {

namespace {

constexpr int kClean = 0;
constexpr int kToolError = 1;
constexpr int kBugs = 2;

struct Flags {
    std::string path;
    std::string grid;
    std::string block;
    std::vector<std::string> args;
    std::vector<std::string> ranges;
    std::optional<int> warp_size;
    std::optional<std::int64_t> budget;
    std::optional<std::int64_t> max_threads;
    std::optional<std::int64_t> max_memory;
    std::optional<int> population;
    std::optional<int> generations;
    std::optional<double> threshold;
    std::optional<std::string> seed;
    std::optional<unsigned> jobs;
    std::optional<std::size_t> max_races;
    std::string grid_max;
    std::string block_max;
    std::string config;
    std::string out;
    std::string format = "text";
};

void add_common(CLI::App& cmd, Flags& f)
{
    cmd.add_option("path", f.path, "kernel file (corpus: directory)")->required();
    cmd.add_option("--warp-size", f.warp_size, "threads per warp (default 32)");
    cmd.add_option("--budget", f.budget, "statement budget per thread");
    cmd.add_option("--max-threads-per-block", f.max_threads, "largest block accepted (default 1024)");
    cmd.add_option("--max-memory", f.max_memory, "element limit over all arrays");
    cmd.add_option("--config", f.config, "key = value settings file");
    cmd.add_option("--out", f.out, "write the JSON report to this file");
    cmd.add_option("--format", f.format, "stdout format")->check(CLI::IsMember({"text", "json"}));
    cmd.add_option("--max-races", f.max_races, "race reports kept (default 1000)");
}

void add_launch(CLI::App& cmd, Flags& f)
{
    cmd.add_option("--grid", f.grid, "grid dimensions, e.g. 2,1");
    cmd.add_option("--block", f.block, "block dimensions, e.g. 3,2");
}

void add_args(CLI::App& cmd, Flags& f)
{
    cmd.add_option("--arg", f.args, "scalar argument name=value (repeatable)");
}

void add_search(CLI::App& cmd, Flags& f)
{
    cmd.add_option("--population", f.population, "population size (default 50)");
    cmd.add_option("--generations", f.generations, "generations (default 3)");
    cmd.add_option("--threshold", f.threshold, "acceptance threshold (default 0.3)");
    cmd.add_option("--seed", f.seed, "RNG seed (fallback: SIMUCHECK_SEED)");
    cmd.add_option("--jobs", f.jobs, "concurrent fitness evaluations");
    cmd.add_option("--range", f.ranges, "initial range name=lo,hi (repeatable)");
    cmd.add_option("--grid-max", f.grid_max, "upper grid bound per axis");
    cmd.add_option("--block-max", f.block_max, "upper block bound per axis");
}

std::pair<std::string, std::string> split_assignment(const std::string& s)
{
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw std::invalid_argument("expected name=value, got '" + s + "'");
    }
    return {std::string(text::trim(s.substr(0, eq))), std::string(text::trim(s.substr(eq + 1)))};
}

std::string read_text(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot read " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct Settings {
    search::EPConfig ep;
    pipeline::CheckOptions check;
    sim::LaunchConfig launch;
};

// Defaults, then the config file, then SIMUCHECK_SEED, then flags.
Settings resolve(const Flags& f)
{
    Settings s;
    s.ep.jobs = std::max(1u, std::thread::hardware_concurrency());
    std::map<std::string, double> file_args;
    bool seed_from_file = false;
    if (!f.config.empty()) {
        for (const auto& [key, value] : text::parse_key_values(read_text(f.config))) {
            if (key == "grid") {
                s.launch.grid = text::parse_dim3(value);
            } else if (key == "block") {
                s.launch.block = text::parse_dim3(value);
            } else if (key == "max_races") {
                s.check.max_races = static_cast<std::size_t>(text::parse_int(value));
            } else if (key.starts_with("arg.")) {
                file_args[key.substr(4)] = text::parse_double(value);
            } else if (!search::apply_setting(s.ep, key, value)) {
                throw std::invalid_argument(f.config + ": unknown setting '" + key + "'");
            }
            seed_from_file = seed_from_file || key == "seed";
        }
    }
    if (!seed_from_file) {
        if (const char* env = std::getenv("SIMUCHECK_SEED"); env != nullptr && *env != '\0') {
            s.ep.rng_seed = text::parse_seed(env);
        }
    }
    s.launch.args = file_args;
    for (const auto& a : f.args) {
        auto [name, value] = split_assignment(a);
        s.launch.args[name] = text::parse_double(value);
    }
    s.ep.fixed_args = s.launch.args;

    auto& limits = s.ep.limits;
    if (f.warp_size) limits.warp_size = *f.warp_size;
    if (f.budget) limits.instruction_budget = *f.budget;
    if (f.max_threads) limits.max_threads_per_block = *f.max_threads;
    if (f.max_memory) limits.max_memory_elements = *f.max_memory;
    s.check.limits = limits;
    if (f.max_races) s.check.max_races = *f.max_races;

    if (!f.grid.empty()) s.launch.grid = text::parse_dim3(f.grid);
    if (!f.block.empty()) s.launch.block = text::parse_dim3(f.block);
    if (f.population) s.ep.population = *f.population;
    if (f.generations) s.ep.generations = *f.generations;
    if (f.threshold) s.ep.acceptance_threshold = *f.threshold;
    if (f.seed) s.ep.rng_seed = text::parse_seed(*f.seed);
    if (f.jobs) s.ep.jobs = std::max(1u, *f.jobs);
    if (!f.grid_max.empty()) search::apply_setting(s.ep, "grid_max", f.grid_max);
    if (!f.block_max.empty()) search::apply_setting(s.ep, "block_max", f.block_max);
    for (const auto& r : f.ranges) {
        auto [name, value] = split_assignment(r);
        search::apply_setting(s.ep, "range." + name, value);
    }
    return s;
}

void emit(const report::DetectionReport& r, const Flags& f, std::ostream& out)
{
    if (f.format == "json") {
        out << report::full_json(r);
    } else {
        out << report::text_summary(r);
    }
    if (!f.out.empty()) {
        std::ofstream file(f.out);
        if (!file) {
            throw std::runtime_error("cannot write " + f.out);
        }
        file << report::full_json(r);
    }
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"simucheck: simulation-based synchronization bug detection for GPU kernels"};
    app.require_subcommand(1);
    Flags f;
    auto* check = app.add_subcommand("check", "simulate one launch and run all detectors");
    auto* search_cmd = app.add_subcommand("search", "search for a bug-inducing launch, then check it");
    auto* fitness = app.add_subcommand("fitness", "fitness score of one launch");
    auto* corpus = app.add_subcommand("corpus", "run a directory of kernels against .expected files");
    for (auto* cmd : {check, search_cmd, fitness, corpus}) {
        add_common(*cmd, f);
    }
    add_launch(*check, f);
    add_launch(*fitness, f);
    for (auto* cmd : {check, search_cmd, fitness, corpus}) {
        add_args(*cmd, f);
    }
    add_search(*search_cmd, f);
    add_search(*corpus, f);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kClean : kToolError;
    }

    try {
        const Settings s = resolve(f);
        if (corpus->parsed()) {
            const auto entries = pipeline::run_corpus(f.path, s.ep, s.check, s.ep.jobs);
            out << pipeline::format_corpus(entries);
            const bool all_pass = std::all_of(entries.begin(), entries.end(), [](const auto& e) {
                return e.status == pipeline::EntryStatus::Pass;
            });
            return all_pass ? kClean : kBugs;
        }
        const ir::KernelProgram program = pipeline::load_kernel(f.path);
        report::DetectionReport r;
        if (check->parsed()) {
            r = pipeline::run_check(program, s.launch, s.check);
        } else if (fitness->parsed()) {
            r = pipeline::run_fitness(program, s.launch, s.check);
        } else {
            r = pipeline::run_search(program, s.ep, s.check);
        }
        emit(r, f, out);
        if (r.mode == "fitness") {
            return kClean;
        }
        return r.has_bugs() ? kBugs : kClean;
    } catch (const std::exception& e) {
        err << "simucheck: " << e.what() << "\n";
        return kToolError;
    }
}

} // namespace simucheck::cli
