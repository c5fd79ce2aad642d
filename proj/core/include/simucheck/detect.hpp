// Data-race, redundant-barrier and barrier-divergence detection over a
// simulated MemoryModel.

#pragma once

#include "simucheck/sim.hpp"

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace simucheck::detect {

enum class RaceKind : std::uint8_t { ReadWrite, WriteWrite };
enum class RaceScope : std::uint8_t { IntraBlock, CrossBlock };

const char* to_string(RaceKind kind);
const char* to_string(RaceScope scope);

struct RaceReport {
    std::string array;
    std::int64_t index = 0;
    bool shared = false;
    /// tuple_a holds the lexicographically smaller (block, thread).
    sim::UnitTuple tuple_a;
    sim::UnitTuple tuple_b;
    RaceKind kind = RaceKind::ReadWrite;
    RaceScope scope = RaceScope::IntraBlock;

    friend bool operator==(const RaceReport&, const RaceReport&) = default;
};

struct BarrierVerdict {
    std::string barrier_id;
    bool redundant = false;
    std::int64_t credited = 0;
    std::int64_t total_increments = 0;

    friend bool operator==(const BarrierVerdict&, const BarrierVerdict&) = default;
};

/// Conflict test for two tuples of the same memory unit: same visit order
/// (tuples of different blocks always qualify, since no barrier spans
/// blocks), different threads, at least one write, and either different
/// warps, a write-write pair from one statement, or a diverged warp.
bool tuples_race(const sim::UnitTuple& a, const sim::UnitTuple& b);

/// The warp-level part of tuples_race, ignoring visit order. Used to decide
/// whether two adjacent epochs could be merged.
bool conflict_without_barrier(const sim::UnitTuple& a, const sim::UnitTuple& b);

struct RaceQuery {
    std::size_t max_reports = std::numeric_limits<std::size_t>::max();
};

struct RaceResult {
    std::vector<RaceReport> races;
    bool truncated = false;
};

/// Every racing pair, deduplicated by (address, thread pair, statement pair)
/// and sorted by array name, element index, lower statement id, then thread
/// indices. Stops collecting after `query.max_reports` distinct reports.
RaceResult detect_data_races(const sim::MemoryModel& model, const RaceQuery& query = {});

/// One verdict per barrier that was released at least once, in kernel order.
/// A barrier is redundant when none of the visit-order increments it caused
/// separates two conflicting accesses.
std::vector<BarrierVerdict> detect_redundant_barriers(const sim::MemoryModel& model);

inline bool detect_barrier_divergence(const sim::SimOutcome& outcome)
{
    return outcome.barrier_divergence;
}

} // namespace simucheck::detect
