#include "simucheck/ir.hpp"

#include <algorithm>

namespace simucheck::ir {

const char* to_string(ValueType type)
{
    switch (type) {
    case ValueType::Int: return "int";
    case ValueType::Float: return "float";
    case ValueType::Bool: return "bool";
    }
    return "?";
}

const char* to_string(Builtin builtin)
{
    switch (builtin) {
    case Builtin::ThreadIdx: return "threadIdx";
    case Builtin::BlockIdx: return "blockIdx";
    case Builtin::BlockDim: return "blockDim";
    case Builtin::GridDim: return "gridDim";
    }
    return "?";
}

const char* to_string(Op op)
{
    switch (op) {
    case Op::Add: return "+";
    case Op::Sub: return "-";
    case Op::Mul: return "*";
    case Op::Div: return "/";
    case Op::Mod: return "%";
    case Op::Lt: return "<";
    case Op::Le: return "<=";
    case Op::Gt: return ">";
    case Op::Ge: return ">=";
    case Op::Eq: return "==";
    case Op::Ne: return "!=";
    case Op::And: return "&&";
    case Op::Or: return "||";
    case Op::Not: return "!";
    case Op::Neg: return "-";
    }
    return "?";
}

const char* to_string(StmtKind kind)
{
    switch (kind) {
    case StmtKind::Assign: return "assign";
    case StmtKind::Load: return "load";
    case StmtKind::Store: return "store";
    case StmtKind::Sync: return "sync";
    case StmtKind::If: return "if";
    case StmtKind::While: return "while";
    case StmtKind::Return: return "return";
    }
    return "?";
}

const char* to_string(MemorySpace space)
{
    return space == MemorySpace::Global ? "global" : "shared";
}

bool operator==(const Stmt& a, const Stmt& b)
{
    return a.kind == b.kind && a.id == b.id && a.local == b.local && a.local_slot == b.local_slot
        && a.array == b.array && a.array_slot == b.array_slot && a.barrier == b.barrier
        && a.index == b.index && a.value == b.value && a.cond == b.cond
        && a.then_body == b.then_body && a.else_body == b.else_body;
}

int KernelProgram::find_param(std::string_view name) const
{
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].name == name) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

int KernelProgram::find_array(std::string_view name) const
{
    for (std::size_t i = 0; i < arrays.size(); ++i) {
        if (arrays[i].name == name) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

ParseError::ParseError(const std::string& message, int line, int column)
    : std::runtime_error(std::to_string(line) + ":" + std::to_string(column) + ": " + message),
      detail_(message), line_(line), column_(column)
{
}

namespace {

void scan_expr(const Expr& expr, Dimensionality& dims)
{
    if (expr.kind == ExprKind::BuiltinRef) {
        const int used = expr.axis + 1;
        if (expr.builtin == Builtin::ThreadIdx || expr.builtin == Builtin::BlockDim) {
            dims.block_axes = std::max(dims.block_axes, used);
        } else {
            dims.grid_axes = std::max(dims.grid_axes, used);
        }
    }
    for (const auto& operand : expr.operands) {
        scan_expr(operand, dims);
    }
}

void scan_body(const std::vector<Stmt>& body, Dimensionality& dims)
{
    for (const auto& stmt : body) {
        scan_expr(stmt.index, dims);
        scan_expr(stmt.value, dims);
        scan_expr(stmt.cond, dims);
        scan_body(stmt.then_body, dims);
        scan_body(stmt.else_body, dims);
    }
}

void strip_barrier(std::vector<Stmt>& body, std::string_view barrier_id)
{
    std::erase_if(body, [&](const Stmt& s) {
        return s.kind == StmtKind::Sync && s.barrier == barrier_id;
    });
    for (auto& stmt : body) {
        strip_barrier(stmt.then_body, barrier_id);
        strip_barrier(stmt.else_body, barrier_id);
    }
}

int count_memory(const std::vector<Stmt>& body)
{
    int total = 0;
    for (const auto& stmt : body) {
        if (stmt.kind == StmtKind::Load || stmt.kind == StmtKind::Store) {
            ++total;
        }
        total += count_memory(stmt.then_body) + count_memory(stmt.else_body);
    }
    return total;
}

} // namespace

Dimensionality required_dimensionality(const KernelProgram& program)
{
    Dimensionality dims;
    for (const auto& array : program.arrays) {
        scan_expr(array.size, dims);
    }
    scan_body(program.body, dims);
    return dims;
}

KernelProgram remove_barrier(const KernelProgram& program, std::string_view barrier_id)
{
    KernelProgram copy = program;
    strip_barrier(copy.body, barrier_id);
    std::erase(copy.barrier_ids, std::string(barrier_id));
    return copy;
}

int count_memory_statements(const KernelProgram& program)
{
    return count_memory(program.body);
}

} // namespace simucheck::ir
