#include "simucheck/pipeline.hpp"

#include "simucheck/detect.hpp"
#include "simucheck/text.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace simucheck::pipeline {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start)
{
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot read " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace

ir::KernelProgram load_kernel(const fs::path& path)
{
    const std::string source = read_file(path);
    try {
        return ir::parse_kernel(source);
    } catch (const ir::ParseError& e) {
        throw std::runtime_error(path.string() + ":" + e.what());
    }
}

report::DetectionReport run_check(const ir::KernelProgram& program, const sim::LaunchConfig& config,
                                  const CheckOptions& options)
{
    const auto start = Clock::now();
    if (auto problem = sim::validate_config(program, config, options.limits)) {
        throw std::invalid_argument(*problem);
    }
    const sim::SimOutcome outcome = sim::construct_memory_model(program, config, options.limits);

    report::DetectionReport r;
    r.mode = "check";
    r.kernel = program.name;
    r.config = config;
    auto races = detect::detect_data_races(outcome.model, detect::RaceQuery{options.max_races});
    r.races = std::move(races.races);
    r.races_truncated = races.truncated;
    r.barriers = detect::detect_redundant_barriers(outcome.model);
    r.barrier_divergence = detect::detect_barrier_divergence(outcome);
    r.budget_exhausted = outcome.budget_exhausted;
    r.runtime_error = outcome.runtime_error;
    r.fitness = search::score_outcome(program, config, outcome);
    if (outcome.budget_exhausted) {
        r.warnings.emplace_back("instruction budget exhausted; results cover a partial execution");
    }
    if (outcome.runtime_error) {
        r.warnings.emplace_back("runtime error stopped a block; results cover a partial execution");
    }
    if (outcome.memory_accesses == 0) {
        r.warnings.emplace_back("no memory activity");
    }
    r.timing_ms = elapsed_ms(start);
    return r;
}

report::DetectionReport run_search(const ir::KernelProgram& program, const search::EPConfig& ep,
                                   const CheckOptions& options)
{
    const auto start = Clock::now();
    const search::EvolveResult evolved = search::evolve(program, ep);

    report::DetectionReport r = run_check(program, search::effective_config(program, evolved.best.config), options);
    r.mode = "search";
    report::SearchSummary summary;
    summary.seed = ep.rng_seed;
    summary.population = ep.population;
    summary.generations = ep.generations;
    summary.threshold = ep.acceptance_threshold;
    summary.accepted = evolved.accepted;
    summary.evaluations = evolved.evaluations;
    summary.history = evolved.history;
    r.search = std::move(summary);
    if (!evolved.best.score.valid) {
        r.warnings.push_back("no valid candidate: " + evolved.best.score.invalid_reason);
    }
    r.timing_ms = elapsed_ms(start);
    return r;
}

report::DetectionReport run_fitness(const ir::KernelProgram& program, const sim::LaunchConfig& config,
                                    const CheckOptions& options)
{
    const auto start = Clock::now();
    if (auto problem = sim::validate_config(program, config, options.limits)) {
        throw std::invalid_argument(*problem);
    }
    report::DetectionReport r;
    r.mode = "fitness";
    r.kernel = program.name;
    r.config = config;
    r.fitness = search::fitness(program, config, options.limits);
    r.timing_ms = elapsed_ms(start);
    return r;
}

Expected parse_expected(std::string_view text)
{
    Expected e;
    sim::LaunchConfig pin;
    bool pinned = false;
    bool have_verdict = false;
    for (const auto& [key, value] : text::parse_key_values(text)) {
        if (key == "verdict") {
            have_verdict = true;
            std::string_view rest = value;
            while (!rest.empty()) {
                const auto comma = rest.find(',');
                const auto item = std::string(text::trim(rest.substr(0, comma)));
                rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
                if (item == "clean") {
                    continue;
                }
                if (item != "race" && item != "redundant_barrier" && item != "barrier_divergence") {
                    throw std::invalid_argument("unknown verdict '" + item + "'");
                }
                e.verdicts.insert(item);
            }
        } else if (key == "grid") {
            pin.grid = text::parse_dim3(value);
            pinned = true;
        } else if (key == "block") {
            pin.block = text::parse_dim3(value);
            pinned = true;
        } else {
            e.search_settings.emplace_back(key, value);
        }
    }
    if (!have_verdict) {
        throw std::invalid_argument("missing 'verdict'");
    }
    if (pinned) {
        for (const auto& [key, value] : e.search_settings) {
            if (!key.starts_with("arg.")) {
                throw std::invalid_argument("'" + key + "' does not apply to a pinned configuration");
            }
            pin.args[key.substr(4)] = text::parse_double(value);
        }
        e.search_settings.clear();
        e.pinned = pin;
    }
    return e;
}

const char* to_string(EntryStatus status)
{
    switch (status) {
    case EntryStatus::Pass: return "pass";
    case EntryStatus::Fail: return "FAIL";
    case EntryStatus::Unconfigured: return "unconfigured";
    case EntryStatus::Error: return "ERROR";
    }
    return "?";
}

namespace {

CorpusEntry run_entry(const fs::path& mir, const search::EPConfig& base, const CheckOptions& options)
{
    CorpusEntry entry;
    entry.name = mir.stem().string();
    const auto start = Clock::now();
    fs::path expected_path = mir;
    expected_path.replace_extension(".expected");
    if (!fs::exists(expected_path)) {
        entry.status = EntryStatus::Unconfigured;
        entry.message = "no " + expected_path.filename().string();
        return entry;
    }
    try {
        const Expected expected = parse_expected(read_file(expected_path));
        entry.expected = expected.verdicts;
        const ir::KernelProgram program = load_kernel(mir);
        report::DetectionReport r;
        if (expected.pinned) {
            entry.mode = "check";
            r = run_check(program, *expected.pinned, options);
        } else {
            entry.mode = "search";
            search::EPConfig ep = base;
            for (const auto& [key, value] : expected.search_settings) {
                if (!search::apply_setting(ep, key, value)) {
                    throw std::invalid_argument("unknown setting '" + key + "'");
                }
            }
            r = run_search(program, ep, options);
        }
        const auto verdicts = r.verdicts();
        entry.actual.insert(verdicts.begin(), verdicts.end());
        entry.status = entry.actual == entry.expected ? EntryStatus::Pass : EntryStatus::Fail;
    } catch (const std::exception& e) {
        entry.status = EntryStatus::Error;
        entry.message = e.what();
    }
    entry.ms = elapsed_ms(start);
    return entry;
}

std::string join(const std::set<std::string>& items)
{
    if (items.empty()) {
        return "clean";
    }
    std::string out;
    for (const auto& item : items) {
        out += (out.empty() ? "" : ",") + item;
    }
    return out;
}

} // namespace

std::vector<CorpusEntry> run_corpus(const fs::path& dir, const search::EPConfig& ep, const CheckOptions& options,
                                    unsigned jobs)
{
    if (!fs::is_directory(dir)) {
        throw std::runtime_error(dir.string() + " is not a directory");
    }
    std::vector<fs::path> kernels;
    for (const auto& item : fs::directory_iterator(dir)) {
        if (item.is_regular_file() && item.path().extension() == ".mir") {
            kernels.push_back(item.path());
        }
    }
    std::sort(kernels.begin(), kernels.end());

    std::vector<CorpusEntry> entries(kernels.size());
    std::atomic<std::size_t> next{0};
    const auto work = [&] {
        for (std::size_t i = next++; i < kernels.size(); i = next++) {
            entries[i] = run_entry(kernels[i], ep, options);
        }
    };
    const unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(kernels.size())));
    if (n == 1) {
        work();
    } else {
        std::vector<std::thread> workers;
        for (unsigned w = 0; w < n; ++w) {
            workers.emplace_back(work);
        }
        for (auto& worker : workers) {
            worker.join();
        }
    }
    return entries;
}

std::string format_corpus(const std::vector<CorpusEntry>& entries)
{
    std::ostringstream out;
    std::size_t passed = 0;
    for (const auto& e : entries) {
        out << std::left << std::setw(14) << to_string(e.status) << std::setw(28) << e.name;
        if (e.status == EntryStatus::Pass || e.status == EntryStatus::Fail) {
            out << e.mode << "  expected " << join(e.expected) << "  got " << join(e.actual) << "  "
                << std::fixed << std::setprecision(1) << e.ms << " ms";
            out.unsetf(std::ios::floatfield);
        } else {
            out << e.message;
        }
        out << "\n";
        passed += e.status == EntryStatus::Pass ? 1 : 0;
    }
    out << passed << "/" << entries.size() << " corpus entries pass\n";
    return out.str();
}

} // namespace simucheck::pipeline
