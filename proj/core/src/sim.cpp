#include "simucheck/sim.hpp"

#include <algorithm>
#include <stdexcept>

namespace simucheck::sim {

using ir::KernelProgram;
using ir::MemorySpace;
using ir::Stmt;
using ir::StmtKind;
using ir::ValueType;

std::string to_string(const Dim3& d)
{
    return "(" + std::to_string(d.x) + "," + std::to_string(d.y) + "," + std::to_string(d.z) + ")";
}

const char* to_string(Action action)
{
    return action == Action::Read ? "read" : "write";
}

ThreadPosition flatten_thread(const Dim3& thread, const Dim3& block_dim, int warp_size)
{
    ThreadPosition pos;
    pos.linear = thread.x + thread.y * block_dim.x + thread.z * block_dim.x * block_dim.y;
    pos.warp = pos.linear / warp_size;
    return pos;
}

std::size_t MemoryModel::tuple_count() const
{
    std::size_t total = 0;
    for (const auto& [address, unit] : global_units) {
        total += unit.tuples.size();
    }
    for (const auto& [block, units] : shared_units) {
        for (const auto& [address, unit] : units) {
            total += unit.tuples.size();
        }
    }
    return total;
}

std::optional<std::string> validate_config(const KernelProgram& program, const LaunchConfig& config,
                                           const SimLimits& limits)
{
    for (int axis = 0; axis < 3; ++axis) {
        if (config.grid[axis] < 1 || config.block[axis] < 1) {
            return "grid and block dimensions must be at least 1";
        }
    }
    if (limits.warp_size < 1) {
        return "warp size must be at least 1";
    }
    if (config.block.volume() > limits.max_threads_per_block) {
        return "block has " + std::to_string(config.block.volume()) + " threads, more than the limit of "
            + std::to_string(limits.max_threads_per_block);
    }
    for (const auto& param : program.params) {
        if (param.kind == ir::Param::Kind::Scalar && !config.args.contains(param.name)) {
            return "missing argument for parameter '" + param.name + "'";
        }
    }
    for (const auto& [name, value] : config.args) {
        const int slot = program.find_param(name);
        if (slot < 0 || program.params[slot].kind != ir::Param::Kind::Scalar) {
            return "unknown scalar parameter '" + name + "'";
        }
    }
    return std::nullopt;
}

namespace {

enum class ThreadStatus : std::uint8_t { Running, Halted, Finished };

struct ThreadState {
    Dim3 idx;
    std::int64_t warp = 0;
    std::vector<Value> locals;
    std::vector<char> local_set;
    std::int64_t steps = 0;
    ThreadStatus status = ThreadStatus::Running;
};

using LaneMask = std::vector<char>;

struct Frame {
    enum class Kind : std::uint8_t { Seq, If, Loop };

    Kind kind = Kind::Seq;
    const std::vector<Stmt>* body = nullptr;
    std::size_t pc = 0;
    const Stmt* stmt = nullptr;
    LaneMask mask;
    LaneMask then_mask;
    LaneMask else_mask;
    int phase = 0; // If: 0 = then pending, 1 = then running, 2 = else running
    bool split = false;
};

struct Warp {
    std::vector<std::size_t> lanes; // indices into the block's thread table
    std::vector<Frame> stack;
    bool done = false;
};

struct ArrayState {
    MemorySpace space = MemorySpace::Global;
    ValueType element = ValueType::Float;
    std::int64_t size = 0;
    std::vector<Value> data;
    std::vector<std::uint32_t> visit;
    std::vector<std::uint64_t> stamp;
    std::vector<std::int32_t> unit_slot;

    void reset(std::int64_t n)
    {
        size = n;
        const auto count = static_cast<std::size_t>(n);
        const Value zero = element == ValueType::Int ? Value::of_int(0) : Value::of_float(0.0);
        data.assign(count, zero);
        visit.assign(count, 0);
        stamp.assign(count, 0);
        unit_slot.assign(count, -1);
    }
};

struct StopBlock {};
struct StopSimulation {};

class Simulator {
public:
    Simulator(const KernelProgram& program, const LaunchConfig& config, const SimLimits& limits)
        : program_(program), config_(config), limits_(limits)
    {
        outcome_.model.array_names.reserve(program.arrays.size());
        for (const auto& array : program.arrays) {
            outcome_.model.array_names.push_back(array.name);
        }
        outcome_.model.barrier_ids = program.barrier_ids;
    }

    SimOutcome run(const std::vector<Dim3>& block_order)
    {
        try {
            params_ = bind_params(program_, config_);
        } catch (const EvalError& e) {
            outcome_.runtime_error = RuntimeError{e.what(), 0, {0, 0, 0}, {0, 0, 0}};
            return std::move(outcome_);
        }
        if (!size_arrays()) {
            return std::move(outcome_);
        }
        try {
            for (const Dim3& block : block_order) {
                run_block(block);
            }
        } catch (const StopSimulation&) {
        }
        finish_units();
        return std::move(outcome_);
    }

private:
    bool size_arrays()
    {
        ThreadEnv env;
        env.params = &params_;
        env.block_dim = config_.block;
        env.grid_dim = config_.grid;
        arrays_.resize(program_.arrays.size());
        std::int64_t total = 0;
        for (std::size_t i = 0; i < program_.arrays.size(); ++i) {
            const auto& decl = program_.arrays[i];
            std::int64_t n = 0;
            try {
                n = std::max<std::int64_t>(0, evaluate_expr(decl.size, env).i);
            } catch (const EvalError& e) {
                outcome_.runtime_error = RuntimeError{
                    "size of array '" + decl.name + "': " + e.what(), 0, {0, 0, 0}, {0, 0, 0}};
                return false;
            }
            if (n > limits_.max_memory_elements || total + n > limits_.max_memory_elements) {
                outcome_.runtime_error = RuntimeError{
                    "arrays exceed the memory limit of " + std::to_string(limits_.max_memory_elements)
                        + " elements",
                    0, {0, 0, 0}, {0, 0, 0}};
                return false;
            }
            total += n;
            arrays_[i].space = decl.space;
            arrays_[i].element = decl.element;
            arrays_[i].size = n;
            if (decl.space == MemorySpace::Global) {
                arrays_[i].reset(n);
            }
        }
        return true;
    }

    void run_block(const Dim3& block)
    {
        block_ = block;
        for (auto& array : arrays_) {
            if (array.space == MemorySpace::Shared) {
                array.reset(array.size);
            }
        }
        for (const Address& a : global_incremented_) {
            arrays_[static_cast<std::size_t>(a.array)].visit[static_cast<std::size_t>(a.index)] = 0;
        }
        global_incremented_.clear();
        touched_.clear();
        ++epoch_;
        shared_store_.clear();
        halted_count_ = 0;
        finished_count_ = 0;
        halted_barrier_.clear();

        const Dim3& bd = config_.block;
        threads_.clear();
        threads_.reserve(static_cast<std::size_t>(bd.volume()));
        for (std::int64_t z = 0; z < bd.z; ++z) {
            for (std::int64_t y = 0; y < bd.y; ++y) {
                for (std::int64_t x = 0; x < bd.x; ++x) {
                    ThreadState t;
                    t.idx = {x, y, z};
                    t.warp = flatten_thread(t.idx, bd, limits_.warp_size).warp;
                    t.locals.resize(program_.locals.size());
                    t.local_set.assign(program_.locals.size(), 0);
                    threads_.push_back(std::move(t));
                }
            }
        }
        warps_.clear();
        for (std::size_t i = 0; i < threads_.size(); ++i) {
            const auto w = static_cast<std::size_t>(threads_[i].warp);
            if (warps_.size() <= w) {
                warps_.resize(w + 1);
            }
            warps_[w].lanes.push_back(i);
        }
        for (auto& warp : warps_) {
            Frame root;
            root.kind = Frame::Kind::Seq;
            root.body = &program_.body;
            root.mask.assign(warp.lanes.size(), 1);
            warp.stack.push_back(std::move(root));
        }

        try {
            for (;;) {
                bool stepped = false;
                bool all_done = true;
                for (auto& warp : warps_) {
                    if (warp.done) {
                        continue;
                    }
                    if (!has_running_lane(warp)) {
                        if (!has_halted_lane(warp)) {
                            warp.done = true;
                            continue;
                        }
                        all_done = false;
                        continue;
                    }
                    all_done = false;
                    step_warp(warp);
                    stepped = true;
                }
                if (all_done) {
                    break;
                }
                if (!stepped) {
                    // Every unfinished thread is halted but the barrier never
                    // released: threads wait on a barrier that cannot complete.
                    outcome_.barrier_divergence = true;
                    break;
                }
            }
        } catch (const StopBlock&) {
        }

        auto& units = outcome_.model.shared_units[block];
        for (auto& unit : shared_store_) {
            const Address key = unit.address;
            units.emplace(key, std::move(unit));
        }
        if (units.empty()) {
            outcome_.model.shared_units.erase(block);
        }
    }

    bool has_running_lane(const Warp& warp) const
    {
        return std::any_of(warp.lanes.begin(), warp.lanes.end(),
                           [&](std::size_t t) { return threads_[t].status == ThreadStatus::Running; });
    }

    bool has_halted_lane(const Warp& warp) const
    {
        return std::any_of(warp.lanes.begin(), warp.lanes.end(),
                           [&](std::size_t t) { return threads_[t].status == ThreadStatus::Halted; });
    }

    bool runnable(const Warp& warp, const LaneMask& mask, std::size_t lane) const
    {
        return mask[lane] != 0 && threads_[warp.lanes[lane]].status == ThreadStatus::Running;
    }

    bool any_runnable(const Warp& warp, const LaneMask& mask) const
    {
        for (std::size_t lane = 0; lane < mask.size(); ++lane) {
            if (runnable(warp, mask, lane)) {
                return true;
            }
        }
        return false;
    }

    static bool diverged(const Warp& warp)
    {
        return std::any_of(warp.stack.begin(), warp.stack.end(), [](const Frame& f) { return f.split; });
    }

    ThreadEnv env_for(ThreadState& t)
    {
        ThreadEnv env;
        env.params = &params_;
        env.locals = &t.locals;
        env.local_set = &t.local_set;
        env.thread_idx = t.idx;
        env.block_idx = block_;
        env.block_dim = config_.block;
        env.grid_dim = config_.grid;
        return env;
    }

    void charge(ThreadState& t)
    {
        if (++t.steps > limits_.instruction_budget) {
            outcome_.budget_exhausted = true;
            throw StopSimulation{};
        }
    }

    [[noreturn]] void runtime_error(const std::string& message, const Stmt& stmt, const ThreadState& t)
    {
        if (!outcome_.runtime_error) {
            outcome_.runtime_error = RuntimeError{message, stmt.id, block_, t.idx};
        }
        throw StopBlock{};
    }

    void finish_thread(ThreadState& t)
    {
        t.status = ThreadStatus::Finished;
        ++finished_count_;
        if (halted_count_ > 0) {
            outcome_.barrier_divergence = true;
            throw StopBlock{};
        }
    }

    void step_warp(Warp& warp)
    {
        while (!warp.stack.empty()) {
            Frame& frame = warp.stack.back();
            switch (frame.kind) {
            case Frame::Kind::Seq: {
                if (frame.pc >= frame.body->size() || !any_runnable(warp, frame.mask)) {
                    warp.stack.pop_back();
                    continue;
                }
                const Stmt& stmt = (*frame.body)[frame.pc++];
                LaneMask active(frame.mask.size(), 0);
                for (std::size_t lane = 0; lane < active.size(); ++lane) {
                    active[lane] = runnable(warp, frame.mask, lane) ? 1 : 0;
                }
                execute(warp, stmt, active);
                return;
            }
            case Frame::Kind::If: {
                if (frame.phase == 0) {
                    frame.phase = 1;
                    if (any_runnable(warp, frame.then_mask)) {
                        push_seq(warp, frame.stmt->then_body, LaneMask(frame.then_mask));
                    }
                    continue;
                }
                if (frame.phase == 1) {
                    frame.phase = 2;
                    if (any_runnable(warp, frame.else_mask)) {
                        push_seq(warp, frame.stmt->else_body, LaneMask(frame.else_mask));
                    }
                    continue;
                }
                warp.stack.pop_back();
                continue;
            }
            case Frame::Kind::Loop: {
                if (!any_runnable(warp, frame.mask)) {
                    warp.stack.pop_back();
                    continue;
                }
                const Stmt& stmt = *frame.stmt;
                LaneMask stay(frame.mask.size(), 0);
                bool any_stay = false;
                bool any_leave = false;
                for (std::size_t lane = 0; lane < frame.mask.size(); ++lane) {
                    if (!runnable(warp, frame.mask, lane)) {
                        continue;
                    }
                    ThreadState& t = threads_[warp.lanes[lane]];
                    charge(t);
                    if (eval_bool(stmt, stmt.cond, t)) {
                        stay[lane] = 1;
                        any_stay = true;
                    } else {
                        frame.mask[lane] = 0;
                        any_leave = true;
                    }
                }
                if (any_leave && any_stay) {
                    frame.split = true;
                }
                if (any_stay) {
                    push_seq(warp, stmt.then_body, std::move(stay));
                }
                return;
            }
            }
        }
        // End of kernel body: every lane still running terminates here.
        warp.done = true;
        for (std::size_t t : warp.lanes) {
            if (threads_[t].status == ThreadStatus::Running) {
                finish_thread(threads_[t]);
            }
        }
    }

    static void push_seq(Warp& warp, const std::vector<Stmt>& body, LaneMask mask)
    {
        Frame seq;
        seq.kind = Frame::Kind::Seq;
        seq.body = &body;
        seq.mask = std::move(mask);
        warp.stack.push_back(std::move(seq));
    }

    bool eval_bool(const Stmt& stmt, const ir::Expr& expr, ThreadState& t)
    {
        try {
            return evaluate_expr(expr, env_for(t)).b;
        } catch (const EvalError& e) {
            runtime_error(e.what(), stmt, t);
        }
    }

    Value eval(const Stmt& stmt, const ir::Expr& expr, ThreadState& t)
    {
        try {
            return evaluate_expr(expr, env_for(t));
        } catch (const EvalError& e) {
            runtime_error(e.what(), stmt, t);
        }
    }

    void execute(Warp& warp, const Stmt& stmt, const LaneMask& active)
    {
        switch (stmt.kind) {
        case StmtKind::Assign:
            for_each_lane(warp, active, [&](ThreadState& t) {
                const auto slot = static_cast<std::size_t>(stmt.local_slot);
                t.locals[slot] = eval(stmt, stmt.value, t);
                t.local_set[slot] = 1;
            });
            return;
        case StmtKind::Load:
        case StmtKind::Store: {
            const bool is_diverged = diverged(warp);
            for_each_lane(warp, active, [&](ThreadState& t) { access(stmt, t, is_diverged); });
            return;
        }
        case StmtKind::Sync:
            arrive(warp, stmt, active);
            return;
        case StmtKind::Return:
            for_each_lane(warp, active, [&](ThreadState& t) { finish_thread(t); });
            return;
        case StmtKind::If: {
            Frame frame;
            frame.kind = Frame::Kind::If;
            frame.stmt = &stmt;
            frame.mask = active;
            frame.then_mask.assign(active.size(), 0);
            frame.else_mask.assign(active.size(), 0);
            bool any_then = false;
            bool any_else = false;
            for (std::size_t lane = 0; lane < active.size(); ++lane) {
                if (active[lane] == 0) {
                    continue;
                }
                ThreadState& t = threads_[warp.lanes[lane]];
                charge(t);
                if (eval_bool(stmt, stmt.cond, t)) {
                    frame.then_mask[lane] = 1;
                    any_then = true;
                } else {
                    frame.else_mask[lane] = 1;
                    any_else = true;
                }
            }
            frame.split = any_then && any_else;
            warp.stack.push_back(std::move(frame));
            return;
        }
        case StmtKind::While: {
            for_each_lane(warp, active, [](ThreadState&) {});
            Frame frame;
            frame.kind = Frame::Kind::Loop;
            frame.stmt = &stmt;
            frame.mask = active;
            warp.stack.push_back(std::move(frame));
            return;
        }
        }
    }

    template <typename F>
    void for_each_lane(Warp& warp, const LaneMask& active, F&& fn)
    {
        for (std::size_t lane = 0; lane < active.size(); ++lane) {
            if (active[lane] == 0) {
                continue;
            }
            ThreadState& t = threads_[warp.lanes[lane]];
            if (t.status != ThreadStatus::Running) {
                continue;
            }
            charge(t);
            fn(t);
        }
    }

    void access(const Stmt& stmt, ThreadState& t, bool is_diverged)
    {
        const auto slot = static_cast<std::size_t>(stmt.array_slot);
        ArrayState& array = arrays_[slot];
        const Value index = eval(stmt, stmt.index, t);
        if (index.i < 0 || index.i >= array.size) {
            runtime_error("index " + std::to_string(index.i) + " out of range for array '"
                              + program_.arrays[slot].name + "' of size " + std::to_string(array.size),
                          stmt, t);
        }
        const auto element = static_cast<std::size_t>(index.i);
        Action action = Action::Read;
        if (stmt.kind == StmtKind::Store) {
            array.data[element] = eval(stmt, stmt.value, t);
            action = Action::Write;
        } else {
            const auto local = static_cast<std::size_t>(stmt.local_slot);
            Value v = array.data[element];
            if (program_.locals[local].type == ValueType::Float && v.type == ValueType::Int) {
                v = Value::of_float(static_cast<double>(v.i));
            }
            t.locals[local] = v;
            t.local_set[local] = 1;
        }

        MemoryUnit& unit = unit_for(slot, index.i);
        UnitTuple tuple;
        tuple.visit_order = array.visit[element];
        tuple.block = block_;
        tuple.thread = t.idx;
        tuple.action = action;
        tuple.stmt_id = stmt.id;
        tuple.warp_id = t.warp;
        tuple.diverged = is_diverged;
        unit.tuples.push_back(tuple);
        ++outcome_.memory_accesses;

        if (array.stamp[element] != epoch_) {
            array.stamp[element] = epoch_;
            touched_.push_back({static_cast<int>(slot), index.i});
        }
    }

    MemoryUnit& unit_for(std::size_t slot, std::int64_t index)
    {
        ArrayState& array = arrays_[slot];
        auto& unit_slot = array.unit_slot[static_cast<std::size_t>(index)];
        auto& store = array.space == MemorySpace::Global ? global_store_ : shared_store_;
        if (unit_slot < 0) {
            unit_slot = static_cast<std::int32_t>(store.size());
            MemoryUnit unit;
            unit.address = {static_cast<int>(slot), index};
            store.push_back(std::move(unit));
        }
        return store[static_cast<std::size_t>(unit_slot)];
    }

    void arrive(Warp& warp, const Stmt& stmt, const LaneMask& active)
    {
        if (finished_count_ > 0) {
            // A blockmate already left the kernel without reaching this barrier.
            outcome_.barrier_divergence = true;
            throw StopBlock{};
        }
        if (!halted_barrier_.empty() && halted_barrier_ != stmt.barrier) {
            // Threads of one block wait at two different barriers.
            outcome_.barrier_divergence = true;
            throw StopBlock{};
        }
        halted_barrier_ = stmt.barrier;
        for_each_lane(warp, active, [&](ThreadState& t) {
            t.status = ThreadStatus::Halted;
            ++halted_count_;
        });
        const auto live = static_cast<std::int64_t>(threads_.size()) - finished_count_;
        if (halted_count_ == live) {
            release(stmt.barrier);
        }
    }

    void release(const std::string& barrier)
    {
        auto& increments = outcome_.model.barrier_increments[barrier];
        ++outcome_.model.barrier_releases[barrier];
        for (const Address& a : touched_) {
            ArrayState& array = arrays_[static_cast<std::size_t>(a.array)];
            const auto element = static_cast<std::size_t>(a.index);
            const std::uint32_t to_order = ++array.visit[element];
            unit_for(static_cast<std::size_t>(a.array), a.index)
                .increments.push_back({block_, to_order, barrier});
            ++increments;
            if (array.space == MemorySpace::Global) {
                global_incremented_.push_back(a);
            }
        }
        touched_.clear();
        ++epoch_;

        for (auto& warp : warps_) {
            LaneMask released(warp.lanes.size(), 0);
            bool any = false;
            for (std::size_t lane = 0; lane < warp.lanes.size(); ++lane) {
                ThreadState& t = threads_[warp.lanes[lane]];
                if (t.status == ThreadStatus::Halted) {
                    t.status = ThreadStatus::Running;
                    released[lane] = 1;
                    any = true;
                }
            }
            if (any) {
                rejoin(warp, released);
            }
        }
        halted_count_ = 0;
        halted_barrier_.clear();
    }

    // Lanes released from a barrier resume at the warp's current position,
    // which is the statement after that barrier.
    static void rejoin(Warp& warp, const LaneMask& released)
    {
        for (auto& frame : warp.stack) {
            for (std::size_t lane = 0; lane < released.size(); ++lane) {
                if (released[lane] == 0) {
                    continue;
                }
                frame.mask[lane] = 1;
                if (frame.kind == Frame::Kind::If) {
                    (frame.phase == 2 ? frame.else_mask : frame.then_mask)[lane] = 1;
                }
            }
        }
    }

    void finish_units()
    {
        for (auto& unit : global_store_) {
            const Address key = unit.address;
            outcome_.model.global_units.emplace(key, std::move(unit));
        }
        global_store_.clear();
    }

    const KernelProgram& program_;
    const LaunchConfig& config_;
    const SimLimits& limits_;
    SimOutcome outcome_;
    std::vector<Value> params_;
    std::vector<ArrayState> arrays_;
    std::vector<MemoryUnit> global_store_;
    std::vector<MemoryUnit> shared_store_;
    std::vector<Address> touched_;
    std::vector<Address> global_incremented_;
    std::uint64_t epoch_ = 0;

    Dim3 block_{0, 0, 0};
    std::vector<ThreadState> threads_;
    std::vector<Warp> warps_;
    std::int64_t halted_count_ = 0;
    std::int64_t finished_count_ = 0;
    std::string halted_barrier_;
};

} // namespace

SimOutcome construct_memory_model(const KernelProgram& program, const LaunchConfig& config,
                                  const SimLimits& limits, const std::vector<Dim3>& block_order)
{
    if (auto problem = validate_config(program, config, limits)) {
        throw std::invalid_argument(*problem);
    }
    Simulator simulator(program, config, limits);
    return simulator.run(block_order);
}

SimOutcome construct_memory_model(const KernelProgram& program, const LaunchConfig& config,
                                  const SimLimits& limits)
{
    std::vector<Dim3> order;
    order.reserve(static_cast<std::size_t>(config.grid.volume()));
    for (std::int64_t z = 0; z < config.grid.z; ++z) {
        for (std::int64_t y = 0; y < config.grid.y; ++y) {
            for (std::int64_t x = 0; x < config.grid.x; ++x) {
                order.push_back({x, y, z});
            }
        }
    }
    return construct_memory_model(program, config, limits, order);
}

} // namespace simucheck::sim
