#include "simucheck/report.hpp"

#include "simucheck/text.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace simucheck::report {

using nlohmann::json;

std::vector<std::string> DetectionReport::redundant_barriers() const
{
    std::vector<std::string> ids;
    for (const auto& b : barriers) {
        if (b.redundant) {
            ids.push_back(b.barrier_id);
        }
    }
    return ids;
}

std::vector<std::string> DetectionReport::verdicts() const
{
    std::vector<std::string> v;
    if (barrier_divergence) {
        v.emplace_back("barrier_divergence");
    }
    if (!races.empty()) {
        v.emplace_back("race");
    }
    if (!redundant_barriers().empty()) {
        v.emplace_back("redundant_barrier");
    }
    return v;
}

namespace {

json dim_json(const sim::Dim3& d)
{
    return json::array({d.x, d.y, d.z});
}

sim::Dim3 dim_from(const json& j)
{
    if (!j.is_array() || j.size() != 3) {
        throw std::invalid_argument("dimension must be a 3-element array");
    }
    return {j[0].get<std::int64_t>(), j[1].get<std::int64_t>(), j[2].get<std::int64_t>()};
}

json config_json(const sim::LaunchConfig& c)
{
    json args = json::object();
    for (const auto& [name, value] : c.args) {
        args[name] = value;
    }
    return {{"grid", dim_json(c.grid)}, {"block", dim_json(c.block)}, {"args", args}};
}

sim::LaunchConfig config_from(const json& j)
{
    sim::LaunchConfig c;
    c.grid = dim_from(j.at("grid"));
    c.block = dim_from(j.at("block"));
    for (const auto& [name, value] : j.at("args").items()) {
        c.args[name] = value.get<double>();
    }
    return c;
}

json tuple_json(const sim::UnitTuple& t)
{
    return {{"visit_order", t.visit_order}, {"block", dim_json(t.block)},   {"thread", dim_json(t.thread)},
            {"action", sim::to_string(t.action)}, {"stmt", t.stmt_id}, {"warp", t.warp_id},
            {"diverged", t.diverged}};
}

sim::UnitTuple tuple_from(const json& j)
{
    sim::UnitTuple t;
    t.visit_order = j.at("visit_order").get<std::uint32_t>();
    t.block = dim_from(j.at("block"));
    t.thread = dim_from(j.at("thread"));
    const auto action = j.at("action").get<std::string>();
    if (action != "read" && action != "write") {
        throw std::invalid_argument("unknown action '" + action + "'");
    }
    t.action = action == "write" ? sim::Action::Write : sim::Action::Read;
    t.stmt_id = j.at("stmt").get<int>();
    t.warp_id = j.at("warp").get<std::int64_t>();
    t.diverged = j.at("diverged").get<bool>();
    return t;
}

json score_json(const search::Score& s)
{
    return {{"valid", s.valid},
            {"primary", s.primary},
            {"secondary", s.secondary},
            {"addresses", s.addresses},
            {"thread_accesses", s.thread_accesses},
            {"invalid_reason", s.invalid_reason}};
}

search::Score score_from(const json& j)
{
    search::Score s;
    s.valid = j.at("valid").get<bool>();
    s.primary = j.at("primary").get<double>();
    s.secondary = j.at("secondary").get<std::int64_t>();
    s.addresses = j.at("addresses").get<std::int64_t>();
    s.thread_accesses = j.at("thread_accesses").get<std::int64_t>();
    s.invalid_reason = j.at("invalid_reason").get<std::string>();
    return s;
}

json search_json(const SearchSummary& s)
{
    json history = json::array();
    for (const auto& g : s.history) {
        history.push_back({{"generation", g.generation},
                           {"evaluated", g.evaluated},
                           {"valid", g.valid},
                           {"best", {{"config", config_json(g.best.config)}, {"fitness", score_json(g.best.score)}}}});
    }
    return {{"seed", s.seed},
            {"population", s.population},
            {"generations", s.generations},
            {"threshold", s.threshold},
            {"accepted", s.accepted},
            {"evaluations", s.evaluations},
            {"history", history}};
}

SearchSummary search_from(const json& j)
{
    SearchSummary s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.population = j.at("population").get<int>();
    s.generations = j.at("generations").get<int>();
    s.threshold = j.at("threshold").get<double>();
    s.accepted = j.at("accepted").get<bool>();
    s.evaluations = j.at("evaluations").get<int>();
    for (const auto& g : j.at("history")) {
        search::GenerationRecord r;
        r.generation = g.at("generation").get<int>();
        r.evaluated = g.at("evaluated").get<int>();
        r.valid = g.at("valid").get<int>();
        r.best.config = config_from(g.at("best").at("config"));
        r.best.score = score_from(g.at("best").at("fitness"));
        s.history.push_back(std::move(r));
    }
    return s;
}

detect::RaceKind kind_from(const std::string& s)
{
    if (s == "write-write") return detect::RaceKind::WriteWrite;
    if (s == "read-write") return detect::RaceKind::ReadWrite;
    throw std::invalid_argument("unknown race kind '" + s + "'");
}

detect::RaceScope scope_from(const std::string& s)
{
    if (s == "cross-block") return detect::RaceScope::CrossBlock;
    if (s == "intra-block") return detect::RaceScope::IntraBlock;
    throw std::invalid_argument("unknown race scope '" + s + "'");
}

} // namespace

json to_json(const DetectionReport& r)
{
    json races = json::array();
    for (const auto& race : r.races) {
        races.push_back({{"array", race.array},
                         {"index", race.index},
                         {"shared", race.shared},
                         {"kind", detect::to_string(race.kind)},
                         {"scope", detect::to_string(race.scope)},
                         {"a", tuple_json(race.tuple_a)},
                         {"b", tuple_json(race.tuple_b)}});
    }
    json barriers = json::array();
    for (const auto& b : r.barriers) {
        barriers.push_back({{"id", b.barrier_id},
                            {"redundant", b.redundant},
                            {"credited", b.credited},
                            {"increments", b.total_increments}});
    }
    json error = nullptr;
    if (r.runtime_error) {
        error = {{"message", r.runtime_error->message},
                 {"stmt", r.runtime_error->stmt_id},
                 {"block", dim_json(r.runtime_error->block)},
                 {"thread", dim_json(r.runtime_error->thread)}};
    }
    return {{"tool", "simucheck"},
            {"version", r.tool_version},
            {"mode", r.mode},
            {"kernel", r.kernel},
            {"config", config_json(r.config)},
            {"races", races},
            {"race_count", r.races.size()},
            {"races_truncated", r.races_truncated},
            {"barriers", barriers},
            {"redundant_barriers", r.redundant_barriers()},
            {"barrier_divergence", r.barrier_divergence},
            {"budget_exhausted", r.budget_exhausted},
            {"runtime_error", error},
            {"fitness", score_json(r.fitness)},
            {"search", r.search ? search_json(*r.search) : json(nullptr)},
            {"verdicts", r.verdicts()},
            {"summary", race_verdict(r)},
            {"warnings", r.warnings},
            {"timing_ms", r.timing_ms}};
}

DetectionReport from_json(const json& j)
{
    if (j.at("tool").get<std::string>() != "simucheck") {
        throw std::invalid_argument("not a simucheck report");
    }
    DetectionReport r;
    r.tool_version = j.at("version").get<std::string>();
    r.mode = j.at("mode").get<std::string>();
    r.kernel = j.at("kernel").get<std::string>();
    r.config = config_from(j.at("config"));
    for (const auto& race : j.at("races")) {
        detect::RaceReport rr;
        rr.array = race.at("array").get<std::string>();
        rr.index = race.at("index").get<std::int64_t>();
        rr.shared = race.at("shared").get<bool>();
        rr.kind = kind_from(race.at("kind").get<std::string>());
        rr.scope = scope_from(race.at("scope").get<std::string>());
        rr.tuple_a = tuple_from(race.at("a"));
        rr.tuple_b = tuple_from(race.at("b"));
        r.races.push_back(std::move(rr));
    }
    r.races_truncated = j.at("races_truncated").get<bool>();
    for (const auto& b : j.at("barriers")) {
        detect::BarrierVerdict v;
        v.barrier_id = b.at("id").get<std::string>();
        v.redundant = b.at("redundant").get<bool>();
        v.credited = b.at("credited").get<std::int64_t>();
        v.total_increments = b.at("increments").get<std::int64_t>();
        r.barriers.push_back(std::move(v));
    }
    r.barrier_divergence = j.at("barrier_divergence").get<bool>();
    r.budget_exhausted = j.at("budget_exhausted").get<bool>();
    if (const auto& e = j.at("runtime_error"); !e.is_null()) {
        r.runtime_error = sim::RuntimeError{e.at("message").get<std::string>(), e.at("stmt").get<int>(),
                                            dim_from(e.at("block")), dim_from(e.at("thread"))};
    }
    r.fitness = score_from(j.at("fitness"));
    if (const auto& s = j.at("search"); !s.is_null()) {
        r.search = search_from(s);
    }
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    r.timing_ms = j.at("timing_ms").get<double>();
    return r;
}

std::string canonical_json(const DetectionReport& report)
{
    json j = to_json(report);
    j.erase("timing_ms");
    return j.dump(2) + "\n";
}

std::string full_json(const DetectionReport& report)
{
    return to_json(report).dump(2) + "\n";
}

std::string race_verdict(const DetectionReport& report)
{
    if (report.races.empty()) {
        return "no sync";
    }
    const bool ww = std::any_of(report.races.begin(), report.races.end(),
                                [](const detect::RaceReport& r) { return r.kind == detect::RaceKind::WriteWrite; });
    return ww ? "w&w sync" : "r&w sync";
}

std::string text_summary(const DetectionReport& r)
{
    std::ostringstream out;
    out << "kernel " << r.kernel << "  grid " << sim::to_string(r.config.grid) << "  block "
        << sim::to_string(r.config.block);
    for (const auto& [name, value] : r.config.args) {
        out << "  " << name << "=" << text::format_double(value);
    }
    out << "\n";
    out << "races: " << race_verdict(r) << " (" << r.races.size() << (r.races_truncated ? "+" : "") << ")\n";
    const std::size_t shown = std::min<std::size_t>(r.races.size(), 10);
    for (std::size_t i = 0; i < shown; ++i) {
        const auto& race = r.races[i];
        out << "  " << (race.kind == detect::RaceKind::WriteWrite ? "w&w" : "r&w") << " " << race.array << "["
            << race.index << "]" << (race.shared ? " shared" : "") << "  block " << sim::to_string(race.tuple_a.block)
            << " thread " << sim::to_string(race.tuple_a.thread) << " s" << race.tuple_a.stmt_id << " "
            << sim::to_string(race.tuple_a.action) << "  vs  block " << sim::to_string(race.tuple_b.block)
            << " thread " << sim::to_string(race.tuple_b.thread) << " s" << race.tuple_b.stmt_id << " "
            << sim::to_string(race.tuple_b.action) << "\n";
    }
    if (r.races.size() > shown) {
        out << "  ... " << (r.races.size() - shown) << " more\n";
    }
    for (const auto& b : r.barriers) {
        out << "barrier " << b.barrier_id << ": " << (b.redundant ? "redundant" : "needed") << " (" << b.credited
            << "/" << b.total_increments << " increments separate nothing)\n";
    }
    out << "barrier divergence: " << (r.barrier_divergence ? "yes" : "no") << "\n";
    if (r.budget_exhausted) {
        out << "instruction budget exhausted\n";
    }
    if (r.runtime_error) {
        out << "runtime error at s" << r.runtime_error->stmt_id << " block " << sim::to_string(r.runtime_error->block)
            << " thread " << sim::to_string(r.runtime_error->thread) << ": " << r.runtime_error->message << "\n";
    }
    if (r.fitness.valid) {
        out << "fitness: primary " << text::format_double(r.fitness.primary) << " secondary " << r.fitness.secondary
            << "\n";
    } else {
        out << "fitness: invalid (" << r.fitness.invalid_reason << ")\n";
    }
    if (r.search) {
        out << "search: seed " << r.search->seed << ", " << r.search->evaluations << " evaluations, "
            << r.search->history.size() << " generation records, "
            << (r.search->accepted ? "acceptable candidate found" : "no acceptable candidate") << "\n";
    }
    for (const auto& w : r.warnings) {
        out << "warning: " << w << "\n";
    }
    return out.str();
}

} // namespace simucheck::report
