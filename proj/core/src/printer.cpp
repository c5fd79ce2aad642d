#include "simucheck/ir.hpp"

#include <cstdio>
#include <sstream>

namespace simucheck::ir {
namespace {

int precedence(const Expr& expr)
{
    if (expr.kind == ExprKind::Unary) {
        return 7;
    }
    if (expr.kind != ExprKind::Binary) {
        return 8;
    }
    switch (expr.op) {
    case Op::Or: return 1;
    case Op::And: return 2;
    case Op::Eq:
    case Op::Ne: return 3;
    case Op::Lt:
    case Op::Le:
    case Op::Gt:
    case Op::Ge: return 4;
    case Op::Add:
    case Op::Sub: return 5;
    default: return 6;
    }
}

std::string format_float(double value)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    std::string text = buf;
    if (text.find_first_of(".e") == std::string::npos) {
        text += ".0";
    }
    return text;
}

void print(std::ostream& out, const Expr& expr);

void print_operand(std::ostream& out, const Expr& operand, bool parens)
{
    if (parens) {
        out << '(';
    }
    print(out, operand);
    if (parens) {
        out << ')';
    }
}

void print(std::ostream& out, const Expr& expr)
{
    switch (expr.kind) {
    case ExprKind::IntLit:
        out << expr.int_value;
        break;
    case ExprKind::FloatLit:
        out << format_float(expr.float_value);
        break;
    case ExprKind::BoolLit:
        out << (expr.bool_value ? "true" : "false");
        break;
    case ExprKind::Local:
    case ExprKind::Param:
        out << expr.name;
        break;
    case ExprKind::BuiltinRef:
        out << to_string(expr.builtin) << '.' << static_cast<char>('x' + expr.axis);
        break;
    case ExprKind::Unary:
        out << to_string(expr.op);
        print_operand(out, expr.operands[0], precedence(expr.operands[0]) < 7);
        break;
    case ExprKind::Binary: {
        const int prec = precedence(expr);
        print_operand(out, expr.operands[0], precedence(expr.operands[0]) < prec);
        out << ' ' << to_string(expr.op) << ' ';
        print_operand(out, expr.operands[1], precedence(expr.operands[1]) <= prec);
        break;
    }
    case ExprKind::Cast:
        out << to_string(expr.type) << '(';
        print(out, expr.operands[0]);
        out << ')';
        break;
    }
}

void print_body(std::ostream& out, const std::vector<Stmt>& body, int depth);

void print_stmt(std::ostream& out, const Stmt& stmt, int depth)
{
    const std::string indent(static_cast<std::size_t>(depth) * 2, ' ');
    out << indent;
    switch (stmt.kind) {
    case StmtKind::Assign:
        out << stmt.local << " = " << print_expr(stmt.value) << ";\n";
        break;
    case StmtKind::Load:
        out << stmt.local << " = " << stmt.array << '[' << print_expr(stmt.index) << "];\n";
        break;
    case StmtKind::Store:
        out << stmt.array << '[' << print_expr(stmt.index) << "] = " << print_expr(stmt.value) << ";\n";
        break;
    case StmtKind::Sync:
        out << "sync " << stmt.barrier << ";\n";
        break;
    case StmtKind::Return:
        out << "return;\n";
        break;
    case StmtKind::If:
        out << "if (" << print_expr(stmt.cond) << ") {\n";
        print_body(out, stmt.then_body, depth + 1);
        out << indent << '}';
        if (!stmt.else_body.empty()) {
            out << " else {\n";
            print_body(out, stmt.else_body, depth + 1);
            out << indent << '}';
        }
        out << '\n';
        break;
    case StmtKind::While:
        out << "while (" << print_expr(stmt.cond) << ") {\n";
        print_body(out, stmt.then_body, depth + 1);
        out << indent << "}\n";
        break;
    }
}

void print_body(std::ostream& out, const std::vector<Stmt>& body, int depth)
{
    for (const auto& stmt : body) {
        print_stmt(out, stmt, depth);
    }
}

} // namespace

std::string print_expr(const Expr& expr)
{
    std::ostringstream out;
    print(out, expr);
    return out.str();
}

std::string print_kernel(const KernelProgram& program)
{
    std::ostringstream out;
    out << "kernel " << program.name << '(';
    for (std::size_t i = 0; i < program.params.size(); ++i) {
        const auto& param = program.params[i];
        if (i > 0) {
            out << ", ";
        }
        if (param.kind == Param::Kind::ArrayHandle) {
            out << "array ";
        } else {
            out << (param.mutable_arg ? "" : "fixed ") << to_string(param.type) << ' ';
        }
        out << param.name;
    }
    out << ") {\n";
    for (const auto& array : program.arrays) {
        out << "  " << to_string(array.space) << ' ' << to_string(array.element) << ' ' << array.name
            << '[' << print_expr(array.size) << "];\n";
    }
    print_body(out, program.body, 1);
    out << "}\n";
    return out.str();
}

} // namespace simucheck::ir
