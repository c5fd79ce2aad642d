// SIMT simulator: executes a kernel under a launch configuration and records
// every memory access into a MemoryModel.

#pragma once

#include "simucheck/ir.hpp"

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace simucheck::sim {

struct Dim3 {
    std::int64_t x = 1;
    std::int64_t y = 1;
    std::int64_t z = 1;

    std::int64_t volume() const { return x * y * z; }
    std::int64_t operator[](int axis) const { return axis == 0 ? x : axis == 1 ? y : z; }
    std::int64_t& operator[](int axis) { return axis == 0 ? x : axis == 1 ? y : z; }

    friend auto operator<=>(const Dim3&, const Dim3&) = default;
};

std::string to_string(const Dim3& d);

struct LaunchConfig {
    Dim3 grid;
    Dim3 block;
    /// Scalar arguments by parameter name. Int params are truncated toward
    /// zero when the launch is bound.
    std::map<std::string, double> args;

    friend bool operator==(const LaunchConfig&, const LaunchConfig&) = default;
};

struct SimLimits {
    int warp_size = 32;
    std::int64_t instruction_budget = 1'000'000; // statements per thread
    std::int64_t max_threads_per_block = 1024;
    std::int64_t max_memory_elements = std::int64_t{1} << 20; // summed over all arrays
};

/// Empty when `config` is a legal launch of `program` under `limits`,
/// otherwise a description of the first problem.
std::optional<std::string> validate_config(const ir::KernelProgram& program, const LaunchConfig& config,
                                           const SimLimits& limits);

struct ThreadPosition {
    std::int64_t linear = 0;
    std::int64_t warp = 0;
};

/// linear = tx + ty*bx + tz*bx*by; warp = linear / warp_size.
ThreadPosition flatten_thread(const Dim3& thread, const Dim3& block_dim, int warp_size);

enum class Action : std::uint8_t { Read, Write };

const char* to_string(Action action);

struct UnitTuple {
    std::uint32_t visit_order = 0;
    Dim3 block{0, 0, 0};
    Dim3 thread{0, 0, 0};
    Action action = Action::Read;
    int stmt_id = 0;
    std::int64_t warp_id = 0;
    bool diverged = false;

    bool same_thread(const UnitTuple& other) const { return block == other.block && thread == other.thread; }

    friend bool operator==(const UnitTuple&, const UnitTuple&) = default;
};

/// Memory location: element `index` of array `array` (slot into
/// KernelProgram::arrays). Shared addresses are scoped by their block.
struct Address {
    int array = 0;
    std::int64_t index = 0;

    friend auto operator<=>(const Address&, const Address&) = default;
};

/// A barrier release that advanced this address from `to_order - 1` to
/// `to_order` inside block `block`.
struct VisitIncrement {
    Dim3 block{0, 0, 0};
    std::uint32_t to_order = 0;
    std::string barrier;

    friend bool operator==(const VisitIncrement&, const VisitIncrement&) = default;
};

struct MemoryUnit {
    Address address;
    std::vector<UnitTuple> tuples; // append order
    std::vector<VisitIncrement> increments;

    friend bool operator==(const MemoryUnit&, const MemoryUnit&) = default;
};

using UnitMap = std::map<Address, MemoryUnit>;

struct MemoryModel {
    std::vector<std::string> array_names;
    std::vector<std::string> barrier_ids; // kernel order
    UnitMap global_units;
    /// Shared-memory units of each simulated block, keyed by block index.
    std::map<Dim3, UnitMap> shared_units;
    /// Per barrier: visit-order increments it caused, summed over addresses and blocks.
    std::map<std::string, std::int64_t> barrier_increments;
    /// Per barrier: how many times every live thread of a block reached it.
    std::map<std::string, std::int64_t> barrier_releases;

    std::size_t tuple_count() const;

    friend bool operator==(const MemoryModel&, const MemoryModel&) = default;
};

struct RuntimeError {
    std::string message;
    int stmt_id = 0;
    Dim3 block{0, 0, 0};
    Dim3 thread{0, 0, 0};

    friend bool operator==(const RuntimeError&, const RuntimeError&) = default;
};

struct SimOutcome {
    MemoryModel model;
    bool barrier_divergence = false;
    bool budget_exhausted = false;
    std::optional<RuntimeError> runtime_error;
    /// Load/Store statement instances executed, over all threads.
    std::int64_t memory_accesses = 0;

    friend bool operator==(const SimOutcome&, const SimOutcome&) = default;
};

/// Simulates every block of the launch in linear order (x fastest). Within a
/// block, warps step one statement at a time round-robin and execute their
/// active lanes in lockstep. Precondition: validate_config() accepted
/// `config`; otherwise std::invalid_argument is thrown.
SimOutcome construct_memory_model(const ir::KernelProgram& program, const LaunchConfig& config,
                                  const SimLimits& limits = {});

/// Same as construct_memory_model, but simulating blocks in the given order
/// (each entry a block index inside config.grid).
SimOutcome construct_memory_model(const ir::KernelProgram& program, const LaunchConfig& config,
                                  const SimLimits& limits, const std::vector<Dim3>& block_order);

// Expression evaluation, exposed for tests and tooling.

struct Value {
    ir::ValueType type = ir::ValueType::Int;
    std::int64_t i = 0;
    double f = 0.0;
    bool b = false;

    static Value of_int(std::int64_t v) { return {ir::ValueType::Int, v, 0.0, false}; }
    static Value of_float(double v) { return {ir::ValueType::Float, 0, v, false}; }
    static Value of_bool(bool v) { return {ir::ValueType::Bool, 0, 0.0, v}; }

    friend bool operator==(const Value&, const Value&) = default;
};

std::string to_string(const Value& value);

/// Bindings visible to one thread while evaluating an expression.
struct ThreadEnv {
    const std::vector<Value>* params = nullptr;
    std::vector<Value>* locals = nullptr;
    std::vector<char>* local_set = nullptr;
    Dim3 thread_idx{0, 0, 0};
    Dim3 block_idx{0, 0, 0};
    Dim3 block_dim;
    Dim3 grid_dim;
};

/// Thrown for division or modulo by zero, integer overflow, reading an
/// unassigned local and invalid conversions.
class EvalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

Value evaluate_expr(const ir::Expr& expr, const ThreadEnv& env);

/// Converts launch arguments to typed parameter values (truncation toward
/// zero for int params). Throws EvalError for non-finite or out-of-range
/// values and std::invalid_argument when a scalar argument is missing.
std::vector<Value> bind_params(const ir::KernelProgram& program, const LaunchConfig& config);

/// Element count of every declared array under `config`, in declaration
/// order. Negative sizes clamp to 0. Throws EvalError.
std::vector<std::int64_t> array_sizes(const ir::KernelProgram& program, const LaunchConfig& config);

} // namespace simucheck::sim
