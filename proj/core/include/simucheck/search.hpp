// Evolutionary search over launch configurations. Candidates are ranked by a
// collision-oriented fitness: lower primary score means more threads share
// addresses, and the accessed span breaks ties.

#pragma once

#include "simucheck/ir.hpp"
#include "simucheck/sim.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace simucheck::search {

using Rng = std::mt19937_64;

struct Score {
    bool valid = false;
    double primary = 0.0;        // distinct addresses / distinct (address, thread) pairs
    std::int64_t secondary = 0;  // max - min linear address
    std::int64_t addresses = 0;  // sum of g(i)
    std::int64_t thread_accesses = 0; // sum of f(i)
    std::string invalid_reason;

    friend bool operator==(const Score&, const Score&) = default;
};

struct Candidate {
    sim::LaunchConfig config; // args kept as doubles while evolving
    Score score;

    friend bool operator==(const Candidate&, const Candidate&) = default;
};

struct ArgRange {
    double lo = 0.0;
    double hi = 64.0;

    friend bool operator==(const ArgRange&, const ArgRange&) = default;
};

struct EPConfig {
    int population = 50;
    int generations = 3;
    double acceptance_threshold = 0.3;
    std::uint64_t rng_seed = 0;
    sim::Dim3 grid_max{8, 8, 8};
    sim::Dim3 block_max{64, 64, 64};
    ArgRange default_range;
    std::map<std::string, ArgRange> arg_ranges;   // overrides per param
    std::map<std::string, double> fixed_args;     // values of `fixed` params
    sim::SimLimits limits;
    unsigned jobs = 1; // concurrent fitness evaluations
};

std::optional<std::string> validate_ep(const ir::KernelProgram& program, const EPConfig& ep);

/// Scores an already simulated launch.
Score score_outcome(const ir::KernelProgram& program, const sim::LaunchConfig& config,
                    const sim::SimOutcome& outcome);

/// Simulates `config` and scores it. Never throws for bad launches; those
/// come back invalid.
Score fitness(const ir::KernelProgram& program, const sim::LaunchConfig& config, const sim::SimLimits& limits);

/// Linear address of every array element: globals first in declaration
/// order, then one shared segment per block (linear block index).
struct AddressLayout {
    std::vector<std::int64_t> offset; // per array; shared offsets are within a block segment
    std::int64_t global_total = 0;
    std::int64_t shared_total = 0;

    std::int64_t linear(int array, std::int64_t index, const sim::Dim3* block, const sim::Dim3& grid) const;
};

AddressLayout make_layout(const ir::KernelProgram& program, const std::vector<std::int64_t>& sizes);

/// parent + step on the first `axes` axes, clamped to [1, max]; other axes are 1.
sim::Dim3 apply_dimension_step(const sim::Dim3& parent, const sim::Dim3& step, int axes, const sim::Dim3& max);

/// Draws a step uniformly from {-1, 0, 1} per used axis and applies it.
sim::Dim3 mutate_dimensions(const sim::Dim3& parent, int axes, const sim::Dim3& max, Rng& rng);

/// Normal and Cauchy children of `parent`; only mutable scalar args move.
/// Dimensions are copied from the parent unchanged.
std::pair<Candidate, Candidate> mutate_arguments(const ir::KernelProgram& program, const Candidate& parent,
                                                 Rng& rng);

/// The two children of one parent: mutate_arguments, then an independent
/// mutate_dimensions of grid and block for each child.
std::pair<Candidate, Candidate> make_children(const ir::KernelProgram& program, const Candidate& parent,
                                              const EPConfig& ep, Rng& rng);

Candidate random_candidate(const ir::KernelProgram& program, const EPConfig& ep, Rng& rng);

/// Negative, zero or positive as `a` ranks before, level with or after `b`.
int compare_candidates(const Candidate& a, const Candidate& b);

/// Args converted to their declared types (ints truncated toward zero).
sim::LaunchConfig effective_config(const ir::KernelProgram& program, const sim::LaunchConfig& config);

/// RNG for candidate `index` of `generation` (generation 0 is the initial
/// population).
Rng candidate_rng(std::uint64_t seed, int generation, std::size_t index);

struct GenerationRecord {
    int generation = 0;
    Candidate best;
    int evaluated = 0;
    int valid = 0;

    friend bool operator==(const GenerationRecord&, const GenerationRecord&) = default;
};

struct EvolveResult {
    Candidate best;
    bool accepted = false;
    std::vector<GenerationRecord> history;
    std::vector<Candidate> final_population;
    int evaluations = 0;
};

/// Throws std::invalid_argument when validate_ep() rejects `ep`.
EvolveResult evolve(const ir::KernelProgram& program, const EPConfig& ep);

/// Applies one `key = value` setting (population, generations, threshold,
/// seed, grid_max, block_max, range.<param>, arg.<param>, warp_size, budget,
/// max_threads_per_block, max_memory, jobs). Returns false for unknown keys;
/// throws std::invalid_argument for malformed values.
bool apply_setting(EPConfig& ep, const std::string& key, const std::string& value);

} // namespace simucheck::search
