#include "simucheck/detect.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>

namespace simucheck::detect {

using sim::Action;
using sim::Dim3;
using sim::MemoryUnit;
using sim::UnitTuple;

const char* to_string(RaceKind kind)
{
    return kind == RaceKind::WriteWrite ? "write-write" : "read-write";
}

const char* to_string(RaceScope scope)
{
    return scope == RaceScope::CrossBlock ? "cross-block" : "intra-block";
}

bool conflict_without_barrier(const UnitTuple& a, const UnitTuple& b)
{
    if (a.same_thread(b)) {
        return false;
    }
    const bool a_writes = a.action == Action::Write;
    const bool b_writes = b.action == Action::Write;
    if (!a_writes && !b_writes) {
        return false;
    }
    if (a.block != b.block || a.warp_id != b.warp_id) {
        return true;
    }
    if (a_writes && b_writes && a.stmt_id == b.stmt_id) {
        return true;
    }
    return a.diverged || b.diverged;
}

bool tuples_race(const UnitTuple& a, const UnitTuple& b)
{
    if (a.block == b.block && a.visit_order != b.visit_order) {
        return false;
    }
    return conflict_without_barrier(a, b);
}

namespace {

bool thread_less(const UnitTuple& a, const UnitTuple& b)
{
    return std::tie(a.block, a.thread) < std::tie(b.block, b.thread);
}

using PairKey = std::tuple<Dim3, Dim3, Dim3, Dim3, int, int>;

class RaceCollector {
public:
    RaceCollector(const sim::MemoryModel& model, const RaceQuery& query) : model_(model), query_(query) {}

    // Returns false once the report limit is reached.
    bool scan(const MemoryUnit& unit, bool shared)
    {
        std::set<PairKey> seen;
        const auto& tuples = unit.tuples;
        for (std::size_t w = 0; w < tuples.size(); ++w) {
            if (tuples[w].action != Action::Write) {
                continue;
            }
            for (std::size_t j = 0; j < tuples.size(); ++j) {
                if (j == w || (j < w && tuples[j].action == Action::Write)) {
                    continue;
                }
                if (!tuples_race(tuples[w], tuples[j])) {
                    continue;
                }
                const UnitTuple* a = &tuples[w];
                const UnitTuple* b = &tuples[j];
                if (thread_less(*b, *a)) {
                    std::swap(a, b);
                }
                if (!seen.emplace(a->block, a->thread, b->block, b->thread, a->stmt_id, b->stmt_id).second) {
                    continue;
                }
                if (result_.races.size() >= query_.max_reports) {
                    result_.truncated = true;
                    return false;
                }
                RaceReport report;
                report.array = model_.array_names[static_cast<std::size_t>(unit.address.array)];
                report.index = unit.address.index;
                report.shared = shared;
                report.tuple_a = *a;
                report.tuple_b = *b;
                report.kind = (a->action == Action::Write && b->action == Action::Write) ? RaceKind::WriteWrite
                                                                                        : RaceKind::ReadWrite;
                report.scope = a->block == b->block ? RaceScope::IntraBlock : RaceScope::CrossBlock;
                result_.races.push_back(std::move(report));
            }
        }
        return true;
    }

    RaceResult take() { return std::move(result_); }

private:
    const sim::MemoryModel& model_;
    const RaceQuery& query_;
    RaceResult result_;
};

auto report_key(const RaceReport& r)
{
    return std::make_tuple(r.index, r.shared, r.tuple_a.block,
                           std::min(r.tuple_a.stmt_id, r.tuple_b.stmt_id), r.tuple_a.thread, r.tuple_b.block,
                           r.tuple_b.thread, r.tuple_a.stmt_id, r.tuple_b.stmt_id, r.tuple_a.visit_order,
                           r.tuple_b.visit_order);
}

bool epochs_conflict(const std::vector<const UnitTuple*>& current, const std::vector<const UnitTuple*>& target)
{
    for (const UnitTuple* a : current) {
        for (const UnitTuple* b : target) {
            if (a->action == Action::Read && b->action == Action::Read) {
                continue;
            }
            if (conflict_without_barrier(*a, *b)) {
                return true;
            }
        }
    }
    return false;
}

void credit_unit(const MemoryUnit& unit, std::map<std::string, std::int64_t>& credited)
{
    if (unit.increments.empty()) {
        return;
    }
    std::map<std::pair<Dim3, std::uint32_t>, std::vector<const UnitTuple*>> epochs;
    for (const auto& tuple : unit.tuples) {
        epochs[{tuple.block, tuple.visit_order}].push_back(&tuple);
    }
    static const std::vector<const UnitTuple*> kEmpty;
    const auto group = [&](const Dim3& block, std::uint32_t order) -> const std::vector<const UnitTuple*>& {
        auto it = epochs.find({block, order});
        return it == epochs.end() ? kEmpty : it->second;
    };
    for (const auto& inc : unit.increments) {
        const auto& current = group(inc.block, inc.to_order - 1);
        const auto& target = group(inc.block, inc.to_order);
        if (!epochs_conflict(current, target)) {
            ++credited[inc.barrier];
        }
    }
}

} // namespace

RaceResult detect_data_races(const sim::MemoryModel& model, const RaceQuery& query)
{
    RaceCollector collector(model, query);
    bool more = true;
    for (const auto& [address, unit] : model.global_units) {
        if (!(more = collector.scan(unit, false))) {
            break;
        }
    }
    for (const auto& [block, units] : model.shared_units) {
        if (!more) {
            break;
        }
        for (const auto& [address, unit] : units) {
            if (!(more = collector.scan(unit, true))) {
                break;
            }
        }
    }
    RaceResult result = collector.take();
    std::sort(result.races.begin(), result.races.end(),
              [](const RaceReport& x, const RaceReport& y) {
                  if (x.array != y.array) {
                      return x.array < y.array;
                  }
                  return report_key(x) < report_key(y);
              });
    return result;
}

std::vector<BarrierVerdict> detect_redundant_barriers(const sim::MemoryModel& model)
{
    std::map<std::string, std::int64_t> credited;
    for (const auto& [address, unit] : model.global_units) {
        credit_unit(unit, credited);
    }
    for (const auto& [block, units] : model.shared_units) {
        for (const auto& [address, unit] : units) {
            credit_unit(unit, credited);
        }
    }

    std::vector<BarrierVerdict> verdicts;
    for (const auto& id : model.barrier_ids) {
        auto released = model.barrier_releases.find(id);
        if (released == model.barrier_releases.end() || released->second == 0) {
            continue;
        }
        BarrierVerdict verdict;
        verdict.barrier_id = id;
        if (auto it = model.barrier_increments.find(id); it != model.barrier_increments.end()) {
            verdict.total_increments = it->second;
        }
        if (auto it = credited.find(id); it != credited.end()) {
            verdict.credited = it->second;
        }
        verdict.redundant = verdict.credited == verdict.total_increments;
        verdicts.push_back(std::move(verdict));
    }
    return verdicts;
}

} // namespace simucheck::detect
