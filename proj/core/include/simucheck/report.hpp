// Detection reports: the result of one check or search run, with a
// canonical JSON form and a short text summary.

#pragma once

#include "simucheck/detect.hpp"
#include "simucheck/search.hpp"
#include "simucheck/sim.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace simucheck::report {

inline constexpr const char* kToolVersion = "0.1.0";

struct SearchSummary {
    std::uint64_t seed = 0;
    int population = 0;
    int generations = 0;
    double threshold = 0.0;
    bool accepted = false;
    int evaluations = 0;
    std::vector<search::GenerationRecord> history;

    friend bool operator==(const SearchSummary&, const SearchSummary&) = default;
};

struct DetectionReport {
    std::string tool_version = kToolVersion;
    std::string mode; // check, search or fitness
    std::string kernel;
    sim::LaunchConfig config;
    std::vector<detect::RaceReport> races;
    bool races_truncated = false;
    std::vector<detect::BarrierVerdict> barriers;
    bool barrier_divergence = false;
    bool budget_exhausted = false;
    std::optional<sim::RuntimeError> runtime_error;
    search::Score fitness;
    std::optional<SearchSummary> search;
    std::vector<std::string> warnings;
    double timing_ms = 0.0;

    bool has_races() const { return !races.empty(); }
    std::vector<std::string> redundant_barriers() const;
    /// Sorted subset of {"barrier_divergence", "race", "redundant_barrier"}.
    std::vector<std::string> verdicts() const;
    bool has_bugs() const { return !verdicts().empty(); }

    friend bool operator==(const DetectionReport&, const DetectionReport&) = default;
};

nlohmann::json to_json(const DetectionReport& report);
/// Throws nlohmann::json::exception or std::invalid_argument on malformed input.
DetectionReport from_json(const nlohmann::json& j);

/// Key-sorted, indented JSON with the timing field removed.
std::string canonical_json(const DetectionReport& report);
std::string full_json(const DetectionReport& report);

/// "w&w sync" when some race is write-write, "r&w sync" when all races
/// are read-write, otherwise "no sync".
std::string race_verdict(const DetectionReport& report);

std::string text_summary(const DetectionReport& report);

} // namespace simucheck::report
