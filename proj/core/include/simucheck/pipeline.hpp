// End-to-end runs: parse, simulate or search, detect, report. Also the
// corpus runner that checks kernels against `.expected` verdict files.

#pragma once

#include "simucheck/ir.hpp"
#include "simucheck/report.hpp"
#include "simucheck/search.hpp"
#include "simucheck/sim.hpp"

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace simucheck::pipeline {

struct CheckOptions {
    sim::SimLimits limits;
    std::size_t max_races = 1000;
};

/// Reads and parses a kernel file. Throws std::runtime_error, for parse
/// errors as "path:line:column: message".
ir::KernelProgram load_kernel(const std::filesystem::path& path);

/// One simulation plus all detectors. Throws std::invalid_argument for an
/// unusable launch configuration.
report::DetectionReport run_check(const ir::KernelProgram& program, const sim::LaunchConfig& config,
                                  const CheckOptions& options);

/// Evolutionary search, then run_check on the best candidate.
report::DetectionReport run_search(const ir::KernelProgram& program, const search::EPConfig& ep,
                                   const CheckOptions& options);

/// Fitness of one launch, without the detectors.
report::DetectionReport run_fitness(const ir::KernelProgram& program, const sim::LaunchConfig& config,
                                    const CheckOptions& options);

struct Expected {
    std::set<std::string> verdicts; // empty means clean
    std::optional<sim::LaunchConfig> pinned;
    std::vector<std::pair<std::string, std::string>> search_settings;
};

/// Parses an `.expected` document. Throws std::invalid_argument.
Expected parse_expected(std::string_view text);

enum class EntryStatus { Pass, Fail, Unconfigured, Error };

const char* to_string(EntryStatus status);

struct CorpusEntry {
    std::string name;
    EntryStatus status = EntryStatus::Error;
    std::set<std::string> expected;
    std::set<std::string> actual;
    std::string mode;
    std::string message;
    double ms = 0.0;
};

/// Runs every `*.mir` in `dir` (sorted by name), `jobs` entries at a time.
/// `ep` and `options` are the defaults each `.expected` may override.
std::vector<CorpusEntry> run_corpus(const std::filesystem::path& dir, const search::EPConfig& ep,
                                    const CheckOptions& options, unsigned jobs = 1);

std::string format_corpus(const std::vector<CorpusEntry>& entries);

} // namespace simucheck::pipeline
