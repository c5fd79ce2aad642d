#include "simucheck/search.hpp"

#include "simucheck/text.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <thread>

namespace simucheck::search {

using sim::Dim3;
using sim::LaunchConfig;

namespace {

std::int64_t block_linear(const Dim3& b, const Dim3& grid)
{
    return b.x + b.y * grid.x + b.z * grid.x * grid.y;
}

Score invalid(std::string reason)
{
    Score s;
    s.invalid_reason = std::move(reason);
    return s;
}

struct Span {
    std::int64_t lo = std::numeric_limits<std::int64_t>::max();
    std::int64_t hi = std::numeric_limits<std::int64_t>::min();

    void add(std::int64_t v)
    {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
};

std::int64_t distinct_threads(const sim::MemoryUnit& unit)
{
    std::set<std::pair<Dim3, Dim3>> threads;
    for (const auto& t : unit.tuples) {
        threads.emplace(t.block, t.thread);
    }
    return static_cast<std::int64_t>(threads.size());
}

} // namespace

std::int64_t AddressLayout::linear(int array, std::int64_t index, const Dim3* block, const Dim3& grid) const
{
    const std::int64_t base = offset[static_cast<std::size_t>(array)] + index;
    if (block == nullptr) {
        return base;
    }
    return global_total + block_linear(*block, grid) * shared_total + base;
}

AddressLayout make_layout(const ir::KernelProgram& program, const std::vector<std::int64_t>& sizes)
{
    AddressLayout layout;
    layout.offset.resize(program.arrays.size());
    for (std::size_t i = 0; i < program.arrays.size(); ++i) {
        auto& total = program.arrays[i].space == ir::MemorySpace::Global ? layout.global_total : layout.shared_total;
        layout.offset[i] = total;
        total += sizes[i];
    }
    return layout;
}

Score score_outcome(const ir::KernelProgram& program, const LaunchConfig& config, const sim::SimOutcome& outcome)
{
    if (outcome.budget_exhausted) {
        return invalid("instruction budget exhausted");
    }
    if (outcome.runtime_error) {
        return invalid("runtime error: " + outcome.runtime_error->message);
    }
    const AddressLayout layout = make_layout(program, sim::array_sizes(program, config));
    Score s;
    Span span;
    for (const auto& [address, unit] : outcome.model.global_units) {
        ++s.addresses;
        s.thread_accesses += distinct_threads(unit);
        span.add(layout.linear(address.array, address.index, nullptr, config.grid));
    }
    for (const auto& [block, units] : outcome.model.shared_units) {
        for (const auto& [address, unit] : units) {
            ++s.addresses;
            s.thread_accesses += distinct_threads(unit);
            span.add(layout.linear(address.array, address.index, &block, config.grid));
        }
    }
    if (s.addresses == 0) {
        return invalid("no memory activity");
    }
    s.valid = true;
    s.primary = static_cast<double>(s.addresses) / static_cast<double>(s.thread_accesses);
    s.secondary = span.hi - span.lo;
    return s;
}

Score fitness(const ir::KernelProgram& program, const LaunchConfig& config, const sim::SimLimits& limits)
{
    if (auto problem = sim::validate_config(program, config, limits)) {
        return invalid(*problem);
    }
    try {
        const sim::SimOutcome outcome = sim::construct_memory_model(program, config, limits);
        return score_outcome(program, config, outcome);
    } catch (const std::exception& e) {
        return invalid(e.what());
    }
}

Dim3 apply_dimension_step(const Dim3& parent, const Dim3& step, int axes, const Dim3& max)
{
    Dim3 child;
    for (int axis = 0; axis < axes && axis < 3; ++axis) {
        child[axis] = std::clamp<std::int64_t>(parent[axis] + step[axis], 1, std::max<std::int64_t>(1, max[axis]));
    }
    return child;
}

Dim3 mutate_dimensions(const Dim3& parent, int axes, const Dim3& max, Rng& rng)
{
    std::uniform_int_distribution<int> pick(-1, 1);
    Dim3 step{0, 0, 0};
    for (int axis = 0; axis < axes && axis < 3; ++axis) {
        step[axis] = pick(rng);
    }
    return apply_dimension_step(parent, step, axes, max);
}

std::pair<Candidate, Candidate> mutate_arguments(const ir::KernelProgram& program, const Candidate& parent, Rng& rng)
{
    std::pair<Candidate, Candidate> children{Candidate{parent.config, {}}, Candidate{parent.config, {}}};
    std::normal_distribution<double> normal(0.0, 1.0);
    std::cauchy_distribution<double> cauchy(0.0, 1.0);
    for (const auto& param : program.params) {
        if (param.is_mutable_scalar()) {
            children.first.config.args[param.name] += normal(rng);
        }
    }
    for (const auto& param : program.params) {
        if (param.is_mutable_scalar()) {
            children.second.config.args[param.name] += cauchy(rng);
        }
    }
    return children;
}

std::pair<Candidate, Candidate> make_children(const ir::KernelProgram& program, const Candidate& parent,
                                              const EPConfig& ep, Rng& rng)
{
    auto children = mutate_arguments(program, parent, rng);
    const ir::Dimensionality dims = ir::required_dimensionality(program);
    for (Candidate* child : {&children.first, &children.second}) {
        child->config.grid = mutate_dimensions(child->config.grid, dims.grid_axes, ep.grid_max, rng);
        child->config.block = mutate_dimensions(child->config.block, dims.block_axes, ep.block_max, rng);
    }
    return children;
}

Candidate random_candidate(const ir::KernelProgram& program, const EPConfig& ep, Rng& rng)
{
    const ir::Dimensionality dims = ir::required_dimensionality(program);
    Candidate c;
    for (int axis = 0; axis < dims.grid_axes; ++axis) {
        c.config.grid[axis] = std::uniform_int_distribution<std::int64_t>(1, ep.grid_max[axis])(rng);
    }
    for (int axis = 0; axis < dims.block_axes; ++axis) {
        c.config.block[axis] = std::uniform_int_distribution<std::int64_t>(1, ep.block_max[axis])(rng);
    }
    for (const auto& param : program.params) {
        if (param.kind != ir::Param::Kind::Scalar) {
            continue;
        }
        if (!param.mutable_arg) {
            c.config.args[param.name] = ep.fixed_args.at(param.name);
            continue;
        }
        auto it = ep.arg_ranges.find(param.name);
        const ArgRange range = it == ep.arg_ranges.end() ? ep.default_range : it->second;
        c.config.args[param.name] = std::uniform_real_distribution<double>(range.lo, range.hi)(rng);
    }
    return c;
}

int compare_candidates(const Candidate& a, const Candidate& b)
{
    if (a.score.valid != b.score.valid) {
        return a.score.valid ? -1 : 1;
    }
    if (!a.score.valid) {
        return 0;
    }
    if (a.score.primary != b.score.primary) {
        return a.score.primary < b.score.primary ? -1 : 1;
    }
    if (a.score.secondary != b.score.secondary) {
        return a.score.secondary < b.score.secondary ? -1 : 1;
    }
    return 0;
}

LaunchConfig effective_config(const ir::KernelProgram& program, const LaunchConfig& config)
{
    LaunchConfig out = config;
    for (auto& [name, value] : out.args) {
        const int slot = program.find_param(name);
        if (slot >= 0 && program.params[static_cast<std::size_t>(slot)].type == ir::ValueType::Int
            && std::isfinite(value)) {
            value = std::trunc(value);
        }
    }
    return out;
}

Rng candidate_rng(std::uint64_t seed, int generation, std::size_t index)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(generation), static_cast<std::uint32_t>(index)};
    return Rng(seq);
}

std::optional<std::string> validate_ep(const ir::KernelProgram& program, const EPConfig& ep)
{
    if (ep.population < 1) {
        return "population must be at least 1";
    }
    if (ep.generations < 0) {
        return "generations must not be negative";
    }
    if (!(ep.acceptance_threshold > 0.0 && ep.acceptance_threshold < 1.0)) {
        return "acceptance threshold must lie in (0, 1)";
    }
    for (int axis = 0; axis < 3; ++axis) {
        if (ep.grid_max[axis] < 1 || ep.block_max[axis] < 1) {
            return "dimension bounds must be at least 1";
        }
    }
    const auto check_range = [](const ArgRange& r) {
        return std::isfinite(r.lo) && std::isfinite(r.hi) && r.lo <= r.hi;
    };
    if (!check_range(ep.default_range)) {
        return "invalid default argument range";
    }
    for (const auto& [name, range] : ep.arg_ranges) {
        const int slot = program.find_param(name);
        if (slot < 0 || !program.params[static_cast<std::size_t>(slot)].is_mutable_scalar()) {
            return "range given for '" + name + "', which is not a mutable scalar parameter";
        }
        if (!check_range(range)) {
            return "invalid range for '" + name + "'";
        }
    }
    for (const auto& param : program.params) {
        if (param.kind == ir::Param::Kind::Scalar && !param.mutable_arg && !ep.fixed_args.contains(param.name)) {
            return "fixed parameter '" + param.name + "' needs a value";
        }
    }
    for (const auto& [name, value] : ep.fixed_args) {
        const int slot = program.find_param(name);
        if (slot < 0 || program.params[static_cast<std::size_t>(slot)].kind != ir::Param::Kind::Scalar) {
            return "unknown scalar parameter '" + name + "'";
        }
        if (program.params[static_cast<std::size_t>(slot)].mutable_arg) {
            return "parameter '" + name + "' is searched; only fixed parameters take a value";
        }
    }
    return std::nullopt;
}

namespace {

void evaluate_all(const ir::KernelProgram& program, std::vector<Candidate>& pool, std::size_t from,
                  const EPConfig& ep)
{
    const std::size_t n = pool.size() - from;
    const unsigned jobs = std::max(1u, std::min<unsigned>(ep.jobs, static_cast<unsigned>(n)));
    if (jobs <= 1) {
        for (std::size_t i = from; i < pool.size(); ++i) {
            pool[i].score = fitness(program, pool[i].config, ep.limits);
        }
        return;
    }
    std::atomic<std::size_t> next{from};
    std::vector<std::thread> workers;
    workers.reserve(jobs);
    for (unsigned w = 0; w < jobs; ++w) {
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < pool.size(); i = next++) {
                pool[i].score = fitness(program, pool[i].config, ep.limits);
            }
        });
    }
    for (auto& worker : workers) {
        worker.join();
    }
}

void rank(std::vector<Candidate>& pool)
{
    std::stable_sort(pool.begin(), pool.end(),
                     [](const Candidate& a, const Candidate& b) { return compare_candidates(a, b) < 0; });
}

GenerationRecord record(int generation, const std::vector<Candidate>& pool, int evaluated)
{
    GenerationRecord r;
    r.generation = generation;
    r.best = pool.front();
    r.evaluated = evaluated;
    r.valid = static_cast<int>(std::count_if(pool.begin(), pool.end(), [](const Candidate& c) { return c.score.valid; }));
    return r;
}

bool acceptable(const Candidate& c, const EPConfig& ep)
{
    return c.score.valid && c.score.primary < ep.acceptance_threshold;
}

} // namespace

EvolveResult evolve(const ir::KernelProgram& program, const EPConfig& ep)
{
    if (auto problem = validate_ep(program, ep)) {
        throw std::invalid_argument(*problem);
    }
    EvolveResult result;
    std::vector<Candidate> pool;
    pool.reserve(static_cast<std::size_t>(ep.population) * 3);
    for (int i = 0; i < ep.population; ++i) {
        Rng rng = candidate_rng(ep.rng_seed, 0, static_cast<std::size_t>(i));
        pool.push_back(random_candidate(program, ep, rng));
    }
    evaluate_all(program, pool, 0, ep);
    result.evaluations += static_cast<int>(pool.size());
    rank(pool);
    result.history.push_back(record(0, pool, ep.population));

    for (int gen = 1; gen <= ep.generations && !acceptable(pool.front(), ep); ++gen) {
        const std::size_t parents = pool.size();
        for (std::size_t i = 0; i < parents; ++i) {
            Rng rng = candidate_rng(ep.rng_seed, gen, i);
            auto [normal_child, cauchy_child] = make_children(program, pool[i], ep, rng);
            pool.push_back(std::move(normal_child));
            pool.push_back(std::move(cauchy_child));
        }
        evaluate_all(program, pool, parents, ep);
        result.evaluations += static_cast<int>(pool.size() - parents);
        rank(pool);
        pool.resize(static_cast<std::size_t>(ep.population));
        result.history.push_back(record(gen, pool, static_cast<int>(2 * parents)));
    }
    result.best = pool.front();
    result.accepted = acceptable(result.best, ep);
    result.final_population = std::move(pool);
    return result;
}

bool apply_setting(EPConfig& ep, const std::string& key, const std::string& value)
{
    const auto range_of = [&](std::string_view v) {
        const auto comma = v.find(',');
        if (comma == std::string_view::npos) {
            throw std::invalid_argument("expected 'lo,hi' for " + key);
        }
        return ArgRange{text::parse_double(v.substr(0, comma)), text::parse_double(v.substr(comma + 1))};
    };
    const auto positive_int = [&](std::string_view v) {
        const auto n = text::parse_int(v);
        if (n < 0 || n > std::numeric_limits<int>::max()) {
            throw std::invalid_argument(key + " out of range");
        }
        return static_cast<int>(n);
    };
    if (key == "population") {
        ep.population = positive_int(value);
    } else if (key == "generations") {
        ep.generations = positive_int(value);
    } else if (key == "threshold") {
        ep.acceptance_threshold = text::parse_double(value);
    } else if (key == "seed") {
        ep.rng_seed = text::parse_seed(value);
    } else if (key == "grid_max") {
        ep.grid_max = text::parse_dim3(value);
        if (value.find(',') == std::string::npos) {
            ep.grid_max.y = ep.grid_max.z = ep.grid_max.x;
        }
    } else if (key == "block_max") {
        ep.block_max = text::parse_dim3(value);
        if (value.find(',') == std::string::npos) {
            ep.block_max.y = ep.block_max.z = ep.block_max.x;
        }
    } else if (key == "range") {
        ep.default_range = range_of(value);
    } else if (key.starts_with("range.")) {
        ep.arg_ranges[key.substr(6)] = range_of(value);
    } else if (key.starts_with("arg.")) {
        ep.fixed_args[key.substr(4)] = text::parse_double(value);
    } else if (key == "warp_size") {
        ep.limits.warp_size = positive_int(value);
    } else if (key == "budget") {
        ep.limits.instruction_budget = text::parse_int(value);
    } else if (key == "max_threads_per_block") {
        ep.limits.max_threads_per_block = text::parse_int(value);
    } else if (key == "max_memory") {
        ep.limits.max_memory_elements = text::parse_int(value);
    } else if (key == "jobs") {
        ep.jobs = static_cast<unsigned>(std::max(1, positive_int(value)));
    } else {
        return false;
    }
    return true;
}

} // namespace simucheck::search
