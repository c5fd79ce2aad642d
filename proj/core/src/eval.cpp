#include "simucheck/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace simucheck::sim {

using ir::Expr;
using ir::ExprKind;
using ir::Op;
using ir::ValueType;

std::string to_string(const Value& value)
{
    switch (value.type) {
    case ValueType::Int: return std::to_string(value.i);
    case ValueType::Bool: return value.b ? "true" : "false";
    case ValueType::Float: {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", value.f);
        return buf;
    }
    }
    return "?";
}

namespace {

// 2^63 as a double; valid int64 range is [-2^63, 2^63).
constexpr double kInt64Bound = 9223372036854775808.0;

std::int64_t to_int(double v)
{
    const double t = std::trunc(v);
    if (!std::isfinite(t) || t >= kInt64Bound || t < -kInt64Bound) {
        throw EvalError("float value out of int range");
    }
    return static_cast<std::int64_t>(t);
}

std::int64_t checked_int(Op op, std::int64_t a, std::int64_t b)
{
    std::int64_t r = 0;
    switch (op) {
    case Op::Add:
        if (__builtin_add_overflow(a, b, &r)) throw EvalError("integer overflow");
        return r;
    case Op::Sub:
        if (__builtin_sub_overflow(a, b, &r)) throw EvalError("integer overflow");
        return r;
    case Op::Mul:
        if (__builtin_mul_overflow(a, b, &r)) throw EvalError("integer overflow");
        return r;
    case Op::Div:
        if (b == 0) throw EvalError("division by zero");
        if (a == std::numeric_limits<std::int64_t>::min() && b == -1) throw EvalError("integer overflow");
        return a / b;
    case Op::Mod:
        if (b == 0) throw EvalError("modulo by zero");
        if (b == -1) return 0;
        return a % b;
    default:
        break;
    }
    throw std::logic_error("not an arithmetic operator");
}

double float_arith(Op op, double a, double b)
{
    switch (op) {
    case Op::Add: return a + b;
    case Op::Sub: return a - b;
    case Op::Mul: return a * b;
    case Op::Div:
        if (b == 0.0) throw EvalError("division by zero");
        return a / b;
    default:
        break;
    }
    throw std::logic_error("not a float arithmetic operator");
}

template <typename T>
bool compare(Op op, T a, T b)
{
    switch (op) {
    case Op::Lt: return a < b;
    case Op::Le: return a <= b;
    case Op::Gt: return a > b;
    case Op::Ge: return a >= b;
    case Op::Eq: return a == b;
    case Op::Ne: return a != b;
    default: break;
    }
    throw std::logic_error("not a comparison");
}

bool is_comparison(Op op)
{
    return op == Op::Lt || op == Op::Le || op == Op::Gt || op == Op::Ge || op == Op::Eq || op == Op::Ne;
}

std::int64_t builtin_value(const Expr& expr, const ThreadEnv& env)
{
    switch (expr.builtin) {
    case ir::Builtin::ThreadIdx: return env.thread_idx[expr.axis];
    case ir::Builtin::BlockIdx: return env.block_idx[expr.axis];
    case ir::Builtin::BlockDim: return env.block_dim[expr.axis];
    case ir::Builtin::GridDim: return env.grid_dim[expr.axis];
    }
    return 0;
}

} // namespace

Value evaluate_expr(const Expr& expr, const ThreadEnv& env)
{
    switch (expr.kind) {
    case ExprKind::IntLit: return Value::of_int(expr.int_value);
    case ExprKind::FloatLit: return Value::of_float(expr.float_value);
    case ExprKind::BoolLit: return Value::of_bool(expr.bool_value);
    case ExprKind::Param: return (*env.params)[static_cast<std::size_t>(expr.slot)];
    case ExprKind::BuiltinRef: return Value::of_int(builtin_value(expr, env));
    case ExprKind::Local: {
        const auto slot = static_cast<std::size_t>(expr.slot);
        if (env.local_set == nullptr || !(*env.local_set)[slot]) {
            throw EvalError("local '" + expr.name + "' read before assignment");
        }
        return (*env.locals)[slot];
    }
    case ExprKind::Cast: {
        const Value v = evaluate_expr(expr.operands[0], env);
        if (expr.type == ValueType::Int) {
            if (v.type == ValueType::Int) return v;
            if (v.type == ValueType::Bool) return Value::of_int(v.b ? 1 : 0);
            return Value::of_int(to_int(v.f));
        }
        if (v.type == ValueType::Float) return v;
        if (v.type == ValueType::Bool) return Value::of_float(v.b ? 1.0 : 0.0);
        return Value::of_float(static_cast<double>(v.i));
    }
    case ExprKind::Unary: {
        const Value v = evaluate_expr(expr.operands[0], env);
        if (expr.op == Op::Not) return Value::of_bool(!v.b);
        if (v.type == ValueType::Float) return Value::of_float(-v.f);
        return Value::of_int(checked_int(Op::Sub, 0, v.i));
    }
    case ExprKind::Binary: {
        if (expr.op == Op::And || expr.op == Op::Or) {
            const bool lhs = evaluate_expr(expr.operands[0], env).b;
            if (expr.op == Op::And && !lhs) return Value::of_bool(false);
            if (expr.op == Op::Or && lhs) return Value::of_bool(true);
            return Value::of_bool(evaluate_expr(expr.operands[1], env).b);
        }
        const Value a = evaluate_expr(expr.operands[0], env);
        const Value b = evaluate_expr(expr.operands[1], env);
        if (is_comparison(expr.op)) {
            switch (a.type) {
            case ValueType::Int: return Value::of_bool(compare(expr.op, a.i, b.i));
            case ValueType::Float: return Value::of_bool(compare(expr.op, a.f, b.f));
            case ValueType::Bool: return Value::of_bool(compare(expr.op, a.b, b.b));
            }
        }
        if (a.type == ValueType::Float) {
            return Value::of_float(float_arith(expr.op, a.f, b.f));
        }
        return Value::of_int(checked_int(expr.op, a.i, b.i));
    }
    }
    throw std::logic_error("unknown expression kind");
}

std::vector<Value> bind_params(const ir::KernelProgram& program, const LaunchConfig& config)
{
    std::vector<Value> values;
    values.reserve(program.params.size());
    for (const auto& param : program.params) {
        if (param.kind == ir::Param::Kind::ArrayHandle) {
            values.push_back(Value::of_int(0));
            continue;
        }
        auto it = config.args.find(param.name);
        if (it == config.args.end()) {
            throw std::invalid_argument("missing argument for parameter '" + param.name + "'");
        }
        if (!std::isfinite(it->second)) {
            throw EvalError("argument '" + param.name + "' is not finite");
        }
        if (param.type == ValueType::Int) {
            values.push_back(Value::of_int(to_int(it->second)));
        } else {
            values.push_back(Value::of_float(it->second));
        }
    }
    return values;
}

std::vector<std::int64_t> array_sizes(const ir::KernelProgram& program, const LaunchConfig& config)
{
    const std::vector<Value> params = bind_params(program, config);
    ThreadEnv env;
    env.params = &params;
    env.block_dim = config.block;
    env.grid_dim = config.grid;
    std::vector<std::int64_t> sizes;
    sizes.reserve(program.arrays.size());
    for (const auto& decl : program.arrays) {
        sizes.push_back(std::max<std::int64_t>(0, evaluate_expr(decl.size, env).i));
    }
    return sizes;
}

} // namespace simucheck::sim
