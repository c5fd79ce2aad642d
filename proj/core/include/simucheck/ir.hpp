// Kernel mini-IR: the structured, typed program representation consumed by
// the simulator. Programs are produced by parse_kernel() and are immutable
// afterwards.

#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace simucheck::ir {

enum class ValueType : std::uint8_t { Int, Float, Bool };

const char* to_string(ValueType type);

enum class Builtin : std::uint8_t { ThreadIdx, BlockIdx, BlockDim, GridDim };

const char* to_string(Builtin builtin);

enum class Op : std::uint8_t {
    Add, Sub, Mul, Div, Mod,
    Lt, Le, Gt, Ge, Eq, Ne,
    And, Or,
    Not, Neg,
};

const char* to_string(Op op);

enum class ExprKind : std::uint8_t {
    IntLit, FloatLit, BoolLit,
    Local,     // slot indexes the program's local table
    Param,     // slot indexes KernelProgram::params
    BuiltinRef,
    Unary,
    Binary,
    Cast,      // conversion to `type`
};

struct Expr {
    ExprKind kind = ExprKind::IntLit;
    ValueType type = ValueType::Int;
    Op op = Op::Add;
    std::int64_t int_value = 0;
    double float_value = 0.0;
    bool bool_value = false;
    std::string name;
    int slot = -1;
    Builtin builtin = Builtin::ThreadIdx;
    int axis = 0;
    std::vector<Expr> operands;

    friend bool operator==(const Expr&, const Expr&) = default;
};

enum class StmtKind : std::uint8_t { Assign, Load, Store, Sync, If, While, Return };

const char* to_string(StmtKind kind);

/// One statement of the structured body. Fields not used by a given kind stay
/// default-initialised. `id` is the preorder statement number (1-based);
/// `line` is diagnostic only and is ignored by equality.
struct Stmt {
    StmtKind kind = StmtKind::Return;
    int id = 0;
    int line = 0;

    std::string local;   // Assign/Load target
    int local_slot = -1;
    std::string array;   // Load/Store
    int array_slot = -1;
    std::string barrier; // Sync

    Expr index;          // Load/Store
    Expr value;          // Assign/Store
    Expr cond;           // If/While

    std::vector<Stmt> then_body; // If then-branch, While body
    std::vector<Stmt> else_body;

    friend bool operator==(const Stmt& a, const Stmt& b);
};

struct Param {
    enum class Kind : std::uint8_t { Scalar, ArrayHandle };

    std::string name;
    Kind kind = Kind::Scalar;
    ValueType type = ValueType::Int;
    bool mutable_arg = true;

    bool is_mutable_scalar() const { return kind == Kind::Scalar && mutable_arg; }

    friend bool operator==(const Param&, const Param&) = default;
};

enum class MemorySpace : std::uint8_t { Global, Shared };

const char* to_string(MemorySpace space);

struct ArrayDecl {
    std::string name;
    MemorySpace space = MemorySpace::Global;
    ValueType element = ValueType::Float;
    Expr size; // elements; params and blockDim/gridDim only

    friend bool operator==(const ArrayDecl&, const ArrayDecl&) = default;
};

struct LocalDecl {
    std::string name;
    ValueType type = ValueType::Int;

    friend bool operator==(const LocalDecl&, const LocalDecl&) = default;
};

struct KernelProgram {
    std::string name;
    std::vector<Param> params;
    std::vector<ArrayDecl> arrays;
    std::vector<LocalDecl> locals;
    std::vector<Stmt> body;
    std::vector<std::string> barrier_ids; // in statement order
    int stmt_count = 0;

    int find_param(std::string_view name) const;
    int find_array(std::string_view name) const;

    friend bool operator==(const KernelProgram&, const KernelProgram&) = default;
};

/// Parse or validation failure, positioned at a 1-based line and column.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& message, int line, int column);

    int line() const { return line_; }
    int column() const { return column_; }
    const std::string& detail() const { return detail_; }

private:
    std::string detail_;
    int line_;
    int column_;
};

/// Parses and validates mini-IR source text. Throws ParseError.
KernelProgram parse_kernel(std::string_view text);

/// Canonical source rendering; parse_kernel(print_kernel(p)) == p.
std::string print_kernel(const KernelProgram& program);
std::string print_expr(const Expr& expr);

struct Dimensionality {
    int grid_axes = 1;
    int block_axes = 1;

    friend bool operator==(const Dimensionality&, const Dimensionality&) = default;
};

/// Axis counts a launch needs: the highest axis index used by
/// blockIdx/gridDim (grid) and threadIdx/blockDim (block), minimum 1 each.
Dimensionality required_dimensionality(const KernelProgram& program);

/// Copy of `program` without the `sync` statement carrying `barrier_id`.
/// Statement ids are left untouched so provenance stays comparable.
KernelProgram remove_barrier(const KernelProgram& program, std::string_view barrier_id);

/// Number of Load and Store statements reachable in the body (static count).
int count_memory_statements(const KernelProgram& program);

} // namespace simucheck::ir
