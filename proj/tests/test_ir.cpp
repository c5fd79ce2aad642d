#include "simucheck/ir.hpp"

#include "support/gen.hpp"
#include "support/paths.hpp"

#include <doctest.h>

#include <fstream>
#include <random>
#include <regex>
#include <sstream>

using namespace simucheck;
using ir::parse_kernel;

namespace {

std::string read_corpus(const std::string& name)
{
    std::ifstream in(testing::corpus_dir() / name);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

int count_kind(const std::vector<ir::Stmt>& body, ir::StmtKind kind)
{
    int n = 0;
    for (const auto& s : body) {
        n += s.kind == kind ? 1 : 0;
        n += count_kind(s.then_body, kind) + count_kind(s.else_body, kind);
    }
    return n;
}

void collect_ids(const std::vector<ir::Stmt>& body, std::vector<int>& ids)
{
    for (const auto& s : body) {
        ids.push_back(s.id);
        collect_ids(s.then_body, ids);
        collect_ids(s.else_body, ids);
    }
}

ir::ParseError parse_error(const std::string& text)
{
    try {
        parse_kernel(text);
    } catch (const ir::ParseError& e) {
        return e;
    }
    FAIL("expected a parse error for: " << text);
    return ir::ParseError("", 0, 0);
}

} // namespace

TEST_SUITE("kernel-ir") {

TEST_CASE("copy_from_mat corpus kernel parses with four scalar params and one load, store and if")
{
    const auto p = parse_kernel(read_corpus("copy_from_mat.mir"));
    CHECK(p.name == "copy_from_mat");
    std::vector<std::string> scalars;
    for (const auto& param : p.params) {
        if (param.kind == ir::Param::Kind::Scalar) {
            scalars.push_back(param.name);
            CHECK(param.mutable_arg);
        }
    }
    CHECK(scalars == std::vector<std::string>{"d_out_stride", "d_in_stride", "d_out_rows", "d_out_cols"});
    CHECK(count_kind(p.body, ir::StmtKind::Store) == 1);
    CHECK(count_kind(p.body, ir::StmtKind::Load) == 1);
    CHECK(count_kind(p.body, ir::StmtKind::If) == 1);
    CHECK(p.arrays.size() == 2);
}

TEST_CASE("empty body with a bare return")
{
    const auto p = parse_kernel("kernel k() { return }");
    REQUIRE(p.body.size() == 1);
    CHECK(p.body[0].kind == ir::StmtKind::Return);
    CHECK(p.body[0].id == 1);
    CHECK(p.stmt_count == 1);
}

TEST_CASE("store to an undeclared array names the array")
{
    const auto e = parse_error("kernel k() {\n  a[0] = 1;\n}");
    CHECK(std::string(e.what()).find("'a'") != std::string::npos);
    CHECK(e.line() == 2);
    CHECK(e.column() == 3);
}

TEST_CASE("validation errors")
{
    SUBCASE("undeclared identifier")
    {
        const auto e = parse_error("kernel k() { x = y + 1; }");
        CHECK(e.detail().find("'y'") != std::string::npos);
    }
    SUBCASE("duplicate barrier id")
    {
        const auto e = parse_error("kernel k() { sync b; sync b; }");
        CHECK(e.detail().find("duplicate barrier") != std::string::npos);
        CHECK(e.column() == 27); // points at the repeated id
    }
    SUBCASE("type error: bool assigned to arithmetic")
    {
        parse_error("kernel k() { x = 1; x = 1 < 2; }");
    }
    SUBCASE("non-bool condition")
    {
        parse_error("kernel k() { if (1) { return; } }");
    }
    SUBCASE("mod on floats")
    {
        parse_error("kernel k(float f) { x = f % 2; }");
    }
    SUBCASE("array size uses a local")
    {
        parse_error("kernel k() { global a[n]; }");
    }
    SUBCASE("array size uses threadIdx")
    {
        parse_error("kernel k() { global a[threadIdx.x]; }");
    }
    SUBCASE("array param without a declaration")
    {
        parse_error("kernel k(array a) { return; }");
    }
    SUBCASE("syntax: missing paren")
    {
        const auto e = parse_error("kernel k( { }");
        CHECK(e.line() == 1);
    }
    SUBCASE("reserved word as local")
    {
        parse_error("kernel k() { while = 1; }");
    }
    SUBCASE("builtin axis")
    {
        parse_error("kernel k() { x = threadIdx.w; }");
    }
    SUBCASE("trailing garbage")
    {
        parse_error("kernel k() { } extra");
    }
    SUBCASE("float index")
    {
        parse_error("kernel k() { global a[4]; a[1.5] = 0; }");
    }
}

TEST_CASE("int to float promotion inserts casts; int literals fold")
{
    const auto p = parse_kernel("kernel k(int n) { global float a[n]; a[0] = n; a[1] = 2; }");
    REQUIRE(p.body.size() == 2);
    CHECK(p.body[0].value.kind == ir::ExprKind::Cast);
    CHECK(p.body[0].value.type == ir::ValueType::Float);
    CHECK(p.body[1].value.kind == ir::ExprKind::FloatLit);
    CHECK(p.body[1].value.float_value == 2.0);
}

TEST_CASE("a local keeps the type of its first assignment")
{
    const auto p = parse_kernel("kernel k(float f) { x = f; x = 1; }");
    REQUIRE(p.locals.size() == 1);
    CHECK(p.locals[0].type == ir::ValueType::Float);
    const auto e = parse_error("kernel k(float f) { x = 1; x = f; }");
    CHECK(e.detail().find("'x'") != std::string::npos);
}

TEST_CASE("statement ids are preorder and unique")
{
    const auto p = parse_kernel(read_corpus("nearest_neighbour_div.mir"));
    std::vector<int> ids;
    collect_ids(p.body, ids);
    REQUIRE(!ids.empty());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        CHECK(ids[i] == static_cast<int>(i) + 1);
    }
    CHECK(p.stmt_count == static_cast<int>(ids.size()));
    CHECK(p.barrier_ids == std::vector<std::string>{"b_load", "b_step"});
}

TEST_CASE("required dimensionality")
{
    CHECK(ir::required_dimensionality(parse_kernel(read_corpus("copy_from_mat.mir")))
          == ir::Dimensionality{2, 2});
    CHECK(ir::required_dimensionality(parse_kernel("kernel k() { x = threadIdx.x; }")) == ir::Dimensionality{1, 1});
    CHECK(ir::required_dimensionality(parse_kernel("kernel k() { x = threadIdx.x + threadIdx.z; }"))
          == ir::Dimensionality{1, 3});
    CHECK(ir::required_dimensionality(parse_kernel("kernel k() { global a[gridDim.y]; }"))
          == ir::Dimensionality{2, 1});
    CHECK(ir::required_dimensionality(parse_kernel("kernel k() { return; }")) == ir::Dimensionality{1, 1});
}

TEST_CASE("remove_barrier keeps statement ids")
{
    const auto p = parse_kernel(read_corpus("smo_kernel.mir"));
    const auto q = ir::remove_barrier(p, "b_fix");
    CHECK(q.barrier_ids == std::vector<std::string>{"b_loop"});
    CHECK(count_kind(q.body, ir::StmtKind::Sync) == 1);
    std::vector<int> before;
    std::vector<int> after;
    collect_ids(p.body, before);
    collect_ids(q.body, after);
    CHECK(after.size() + 1 == before.size());
}

TEST_CASE("corpus kernels round-trip through the printer")
{
    for (const char* name : {"copy_from_mat.mir", "homography_min.mir", "nearest_neighbour_div.mir",
                             "nearest_neighbour_fixed.mir", "smo_kernel.mir", "smo_kernel_racy.mir",
                             "race_free.mir", "all_store_zero.mir", "cross_block_sum.mir", "empty.mir"}) {
        CAPTURE(name);
        const auto p = parse_kernel(read_corpus(name));
        const auto text = ir::print_kernel(p);
        const auto q = parse_kernel(text);
        CHECK(p == q);
        CHECK(ir::print_kernel(q) == text);
    }
}

TEST_CASE("printer keeps precedence and float literals")
{
    const auto p = parse_kernel(
        "kernel k(float f, fixed int n) { x = (1 - 2) - (3 - 4) * 5; y = f * 1.5e300 / 3.0; z = !(x < 2 || x > 3) && true; w = -x; }");
    const auto q = parse_kernel(ir::print_kernel(p));
    CHECK(p == q);
    CHECK(ir::print_kernel(p).find("fixed int n") != std::string::npos);
}

TEST_CASE("property: parse, print, parse is a fixpoint on random kernels")
{
    std::mt19937_64 rng(11);
    for (int i = 0; i < 300; ++i) {
        const auto src = testing::random_kernel(rng, {});
        const auto p = parse_kernel(src);
        const auto q = parse_kernel(ir::print_kernel(p));
        REQUIRE(p == q);
    }
}

TEST_CASE("property: required dimensionality is monotone under added statements")
{
    std::mt19937_64 rng(12);
    const char* extra[] = {"e = threadIdx.y;", "e = blockIdx.z;", "e = gridDim.y;", "e = blockDim.z;", "e = 1;"};
    for (int i = 0; i < 200; ++i) {
        testing::GenOptions opt;
        opt.two_d = (i % 2) == 0;
        auto src = testing::random_kernel(rng, opt);
        const auto base = ir::required_dimensionality(parse_kernel(src));
        const auto pos = src.rfind('}');
        src.insert(pos, std::string("  ") + extra[i % 5] + "\n");
        const auto grown = ir::required_dimensionality(parse_kernel(src));
        CHECK(grown.grid_axes >= base.grid_axes);
        CHECK(grown.block_axes >= base.block_axes);
    }
}

TEST_CASE("property: deleting a declaration or assignment leaves undeclared uses rejected")
{
    std::mt19937_64 rng(13);
    int rejected = 0;
    for (int i = 0; i < 200; ++i) {
        const auto src = testing::random_kernel(rng, {});
        // The first assignment to `tid` is the only definition; dropping it
        // leaves every later use undeclared.
        const auto line_start = src.find("  tid = ");
        REQUIRE(line_start != std::string::npos);
        const auto line_end = src.find('\n', line_start);
        const auto mutated = src.substr(0, line_start) + src.substr(line_end + 1);
        CHECK_THROWS_AS(parse_kernel(mutated), ir::ParseError);
        ++rejected;
    }
    CHECK(rejected == 200);
}

TEST_CASE("property: renaming a used identifier to an unknown one is rejected")
{
    std::mt19937_64 rng(14);
    const std::regex ident(R"(\b(acc|gid|tid|p)\b)");
    int checked = 0;
    for (int i = 0; i < 200; ++i) {
        const auto src = testing::random_kernel(rng, {});
        std::vector<std::pair<std::size_t, std::size_t>> uses;
        for (auto it = std::sregex_iterator(src.begin(), src.end(), ident); it != std::sregex_iterator(); ++it) {
            const auto pos = static_cast<std::size_t>(it->position());
            const auto sol = src.rfind('\n', pos) + 1;
            // Skip assignment targets; renaming those declares a new local.
            if (src.find_first_not_of(' ', sol) == pos) {
                continue;
            }
            uses.emplace_back(pos, static_cast<std::size_t>(it->length()));
        }
        REQUIRE(!uses.empty());
        const auto [pos, len] = uses[static_cast<std::size_t>(i) % uses.size()];
        auto mutated = src;
        mutated.replace(pos, len, "zz_undeclared");
        CHECK_THROWS_AS(parse_kernel(mutated), ir::ParseError);
        ++checked;
    }
    CHECK(checked == 200);
}

} // TEST_SUITE
