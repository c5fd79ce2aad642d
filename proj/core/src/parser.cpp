#include "simucheck/ir.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <map>
#include <optional>
#include <set>
#include <string>

namespace simucheck::ir {
namespace {

enum class TokenKind { Ident, Int, Float, Punct, End };

struct Token {
    TokenKind kind = TokenKind::End;
    std::string text;
    int line = 1;
    int column = 1;
    std::int64_t int_value = 0;
    double float_value = 0.0;
};

class Lexer {
public:
    explicit Lexer(std::string_view text) : text_(text) {}

    std::vector<Token> tokenize()
    {
        std::vector<Token> tokens;
        for (;;) {
            skip_space();
            Token token;
            token.line = line_;
            token.column = column_;
            if (pos_ >= text_.size()) {
                tokens.push_back(token);
                return tokens;
            }
            const char c = text_[pos_];
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                token.kind = TokenKind::Ident;
                while (pos_ < text_.size()
                       && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
                    token.text += advance();
                }
            } else if (std::isdigit(static_cast<unsigned char>(c))) {
                lex_number(token);
            } else {
                lex_punct(token);
            }
            tokens.push_back(std::move(token));
        }
    }

private:
    char advance()
    {
        const char c = text_[pos_++];
        if (c == '\n') {
            ++line_;
            column_ = 1;
        } else {
            ++column_;
        }
        return c;
    }

    void skip_space()
    {
        while (pos_ < text_.size()) {
            const char c = text_[pos_];
            if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else if (c == '/' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '/') {
                while (pos_ < text_.size() && text_[pos_] != '\n') {
                    advance();
                }
            } else {
                return;
            }
        }
    }

    void lex_number(Token& token)
    {
        bool is_float = false;
        auto digits = [&] {
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                token.text += advance();
            }
        };
        digits();
        if (pos_ < text_.size() && text_[pos_] == '.') {
            is_float = true;
            token.text += advance();
            digits();
        }
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            is_float = true;
            token.text += advance();
            if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) {
                token.text += advance();
            }
            if (pos_ >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                throw ParseError("malformed float literal '" + token.text + "'", token.line, token.column);
            }
            digits();
        }
        if (is_float) {
            token.kind = TokenKind::Float;
            token.float_value = std::strtod(token.text.c_str(), nullptr);
            if (!std::isfinite(token.float_value)) {
                throw ParseError("float literal out of range '" + token.text + "'", token.line, token.column);
            }
        } else {
            token.kind = TokenKind::Int;
            const auto* begin = token.text.data();
            const auto* end = begin + token.text.size();
            auto [ptr, ec] = std::from_chars(begin, end, token.int_value);
            if (ec != std::errc() || ptr != end) {
                throw ParseError("integer literal out of range '" + token.text + "'", token.line, token.column);
            }
        }
    }

    void lex_punct(Token& token)
    {
        static const char* const two_char[] = {"<=", ">=", "==", "!=", "&&", "||"};
        token.kind = TokenKind::Punct;
        if (pos_ + 1 < text_.size()) {
            const std::string_view pair = text_.substr(pos_, 2);
            for (const char* op : two_char) {
                if (pair == op) {
                    token.text += advance();
                    token.text += advance();
                    return;
                }
            }
        }
        const char c = text_[pos_];
        if (std::string_view("(){}[];,.=<>+-*/%!").find(c) == std::string_view::npos) {
            throw ParseError(std::string("unexpected character '") + c + "'", token.line, token.column);
        }
        token.text += advance();
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int column_ = 1;
};

const std::set<std::string, std::less<>> kKeywords = {
    "kernel", "shared", "global", "int", "float", "fixed", "array", "sync",
    "if", "else", "while", "return", "true", "false",
    "threadIdx", "blockIdx", "blockDim", "gridDim",
};

std::optional<Builtin> builtin_named(std::string_view name)
{
    if (name == "threadIdx") return Builtin::ThreadIdx;
    if (name == "blockIdx") return Builtin::BlockIdx;
    if (name == "blockDim") return Builtin::BlockDim;
    if (name == "gridDim") return Builtin::GridDim;
    return std::nullopt;
}

bool is_numeric(ValueType t) { return t == ValueType::Int || t == ValueType::Float; }

Expr make_cast(Expr inner, ValueType to)
{
    if (inner.type == to) {
        return inner;
    }
    if (inner.kind == ExprKind::IntLit && to == ValueType::Float) {
        Expr lit;
        lit.kind = ExprKind::FloatLit;
        lit.type = ValueType::Float;
        lit.float_value = static_cast<double>(inner.int_value);
        return lit;
    }
    Expr cast;
    cast.kind = ExprKind::Cast;
    cast.type = to;
    cast.operands.push_back(std::move(inner));
    return cast;
}

class Parser {
public:
    explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

    KernelProgram parse()
    {
        expect_word("kernel");
        program_.name = expect_ident("kernel name").text;
        expect("(");
        if (!peek_is(")")) {
            do {
                parse_param();
            } while (accept(","));
        }
        expect(")");
        expect("{");
        while (peek_word("shared") || peek_word("global")) {
            parse_array_decl();
        }
        for (std::size_t i = 0; i < program_.params.size(); ++i) {
            const auto& param = program_.params[i];
            if (param.kind == Param::Kind::ArrayHandle) {
                const int slot = program_.find_array(param.name);
                if (slot < 0 || program_.arrays[slot].space != MemorySpace::Global) {
                    const Token& at = param_tokens_[i];
                    throw ParseError("array parameter '" + param.name + "' has no global declaration",
                                     at.line, at.column);
                }
            }
        }
        program_.body = parse_statements();
        expect("}");
        if (peek().kind != TokenKind::End) {
            fail(peek(), "unexpected '" + peek().text + "' after kernel body");
        }
        program_.stmt_count = next_stmt_id_ - 1;
        return std::move(program_);
    }

private:
    [[noreturn]] static void fail(const Token& at, const std::string& message)
    {
        throw ParseError(message, at.line, at.column);
    }

    const Token& peek(std::size_t ahead = 0) const
    {
        const std::size_t i = std::min(pos_ + ahead, tokens_.size() - 1);
        return tokens_[i];
    }

    const Token& next() { return tokens_[std::min(pos_++, tokens_.size() - 1)]; }

    bool peek_is(std::string_view punct, std::size_t ahead = 0) const
    {
        const Token& t = peek(ahead);
        return t.kind == TokenKind::Punct && t.text == punct;
    }

    bool peek_word(std::string_view word) const
    {
        const Token& t = peek();
        return t.kind == TokenKind::Ident && t.text == word;
    }

    bool accept(std::string_view punct)
    {
        if (peek_is(punct)) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(std::string_view punct)
    {
        if (!accept(punct)) {
            const Token& t = peek();
            fail(t, "expected '" + std::string(punct) + "' but found "
                        + (t.kind == TokenKind::End ? std::string("end of input") : "'" + t.text + "'"));
        }
    }

    void expect_word(std::string_view word)
    {
        if (!peek_word(word)) {
            fail(peek(), "expected '" + std::string(word) + "'");
        }
        ++pos_;
    }

    const Token& expect_ident(const char* what)
    {
        const Token& t = peek();
        if (t.kind != TokenKind::Ident) {
            fail(t, std::string("expected ") + what);
        }
        return next();
    }

    const Token& expect_fresh_name(const char* what)
    {
        const Token& t = expect_ident(what);
        if (kKeywords.contains(t.text)) {
            fail(t, "'" + t.text + "' is reserved");
        }
        return t;
    }

    // Simple statements end with ';', which may be omitted right before '}'.
    void expect_terminator()
    {
        if (accept(";") || peek_is("}")) {
            return;
        }
        fail(peek(), "expected ';'");
    }

    void parse_param()
    {
        Param param;
        const Token& start = peek();
        if (peek_word("array")) {
            ++pos_;
            param.kind = Param::Kind::ArrayHandle;
            param.type = ValueType::Int;
        } else {
            if (peek_word("fixed")) {
                ++pos_;
                param.mutable_arg = false;
            }
            if (peek_word("int")) {
                param.type = ValueType::Int;
            } else if (peek_word("float")) {
                param.type = ValueType::Float;
            } else {
                fail(peek(), "expected parameter type 'int', 'float' or 'array'");
            }
            ++pos_;
        }
        const Token& name = expect_fresh_name("parameter name");
        if (program_.find_param(name.text) >= 0) {
            fail(name, "duplicate parameter '" + name.text + "'");
        }
        param.name = name.text;
        program_.params.push_back(std::move(param));
        param_tokens_.push_back(start);
    }

    void parse_array_decl()
    {
        ArrayDecl decl;
        decl.space = next().text == "shared" ? MemorySpace::Shared : MemorySpace::Global;
        if (peek_word("int")) {
            decl.element = ValueType::Int;
            ++pos_;
        } else if (peek_word("float")) {
            decl.element = ValueType::Float;
            ++pos_;
        }
        const Token& name = expect_fresh_name("array name");
        if (program_.find_array(name.text) >= 0) {
            fail(name, "duplicate array '" + name.text + "'");
        }
        const int param = program_.find_param(name.text);
        if (param >= 0 && (program_.params[param].kind != Param::Kind::ArrayHandle
                           || decl.space != MemorySpace::Global)) {
            fail(name, "array '" + name.text + "' clashes with a parameter");
        }
        decl.name = name.text;
        expect("[");
        in_size_expr_ = true;
        const Token& size_at = peek();
        decl.size = parse_expr();
        in_size_expr_ = false;
        if (decl.size.type != ValueType::Int) {
            fail(size_at, "array size must be an int expression");
        }
        expect("]");
        expect(";");
        program_.arrays.push_back(std::move(decl));
    }

    std::vector<Stmt> parse_block()
    {
        expect("{");
        auto body = parse_statements();
        expect("}");
        return body;
    }

    std::vector<Stmt> parse_statements()
    {
        std::vector<Stmt> body;
        while (!peek_is("}") && peek().kind != TokenKind::End) {
            body.push_back(parse_statement());
        }
        return body;
    }

    Stmt parse_statement()
    {
        const Token& start = peek();
        Stmt stmt;
        stmt.line = start.line;
        stmt.id = next_stmt_id_++;

        if (start.kind != TokenKind::Ident) {
            fail(start, "expected a statement");
        }
        if (start.text == "sync") {
            ++pos_;
            const Token& id = expect_fresh_name("barrier id");
            if (barriers_.contains(id.text)) {
                fail(id, "duplicate barrier id '" + id.text + "'");
            }
            barriers_.insert(id.text);
            program_.barrier_ids.push_back(id.text);
            stmt.kind = StmtKind::Sync;
            stmt.barrier = id.text;
            expect_terminator();
            return stmt;
        }
        if (start.text == "return") {
            ++pos_;
            stmt.kind = StmtKind::Return;
            expect_terminator();
            return stmt;
        }
        if (start.text == "if") {
            ++pos_;
            stmt.kind = StmtKind::If;
            stmt.cond = parse_condition();
            stmt.then_body = parse_block();
            if (peek_word("else")) {
                ++pos_;
                if (peek_word("if")) {
                    stmt.else_body.push_back(parse_statement());
                } else {
                    stmt.else_body = parse_block();
                }
            }
            return stmt;
        }
        if (start.text == "while") {
            ++pos_;
            stmt.kind = StmtKind::While;
            stmt.cond = parse_condition();
            stmt.then_body = parse_block();
            return stmt;
        }
        if (kKeywords.contains(start.text)) {
            fail(start, "unexpected '" + start.text + "'");
        }

        ++pos_;
        if (peek_is("[")) {
            const int slot = program_.find_array(start.text);
            if (slot < 0) {
                fail(start, "undeclared array '" + start.text + "'");
            }
            const auto& decl = program_.arrays[slot];
            stmt.kind = StmtKind::Store;
            stmt.array = start.text;
            stmt.array_slot = slot;
            stmt.index = parse_index();
            expect("=");
            const Token& value_at = peek();
            Expr value = parse_expr();
            if (!is_numeric(value.type)
                || (decl.element == ValueType::Int && value.type != ValueType::Int)) {
                fail(value_at, std::string("cannot store ") + to_string(value.type) + " into "
                                   + to_string(decl.element) + " array '" + decl.name + "'");
            }
            stmt.value = make_cast(std::move(value), decl.element);
            expect_terminator();
            return stmt;
        }

        expect("=");
        stmt.local = start.text;
        if (peek().kind == TokenKind::Ident && peek_is("[", 1) && !kKeywords.contains(peek().text)) {
            const Token& array_tok = next();
            const int slot = program_.find_array(array_tok.text);
            if (slot < 0) {
                fail(array_tok, "undeclared array '" + array_tok.text + "'");
            }
            stmt.kind = StmtKind::Load;
            stmt.array = array_tok.text;
            stmt.array_slot = slot;
            stmt.index = parse_index();
            stmt.local_slot = bind_local(start, program_.arrays[slot].element, false);
        } else {
            stmt.kind = StmtKind::Assign;
            const Token& value_at = peek();
            Expr value = parse_expr();
            if (value.type == ValueType::Bool) {
                stmt.local_slot = bind_local(start, ValueType::Bool, false);
                stmt.value = std::move(value);
            } else {
                stmt.local_slot = bind_local(value_at, value.type, true, &start);
                stmt.value = make_cast(std::move(value), program_.locals[stmt.local_slot].type);
            }
        }
        expect_terminator();
        return stmt;
    }

    // Declares or re-binds a local. Numeric values may widen int -> float.
    int bind_local(const Token& at, ValueType type, bool from_expr, const Token* name_tok = nullptr)
    {
        const Token& name = name_tok != nullptr ? *name_tok : at;
        if (program_.find_param(name.text) >= 0 || program_.find_array(name.text) >= 0) {
            fail(name, "cannot assign to '" + name.text + "'");
        }
        auto it = local_slots_.find(name.text);
        if (it == local_slots_.end()) {
            const int slot = static_cast<int>(program_.locals.size());
            program_.locals.push_back({name.text, type});
            local_slots_.emplace(name.text, slot);
            return slot;
        }
        const ValueType existing = program_.locals[it->second].type;
        const bool ok = existing == type || (existing == ValueType::Float && type == ValueType::Int);
        if (!ok) {
            fail(from_expr ? at : name, std::string("cannot assign ") + to_string(type) + " to "
                                            + to_string(existing) + " local '" + name.text + "'");
        }
        return it->second;
    }

    Expr parse_index()
    {
        expect("[");
        const Token& at = peek();
        Expr index = parse_expr();
        if (index.type != ValueType::Int) {
            fail(at, "array index must be an int expression");
        }
        expect("]");
        return index;
    }

    Expr parse_condition()
    {
        expect("(");
        const Token& at = peek();
        Expr cond = parse_expr();
        if (cond.type != ValueType::Bool) {
            fail(at, "condition must be a bool expression");
        }
        expect(")");
        return cond;
    }

    static int precedence(std::string_view op)
    {
        if (op == "||") return 1;
        if (op == "&&") return 2;
        if (op == "==" || op == "!=") return 3;
        if (op == "<" || op == "<=" || op == ">" || op == ">=") return 4;
        if (op == "+" || op == "-") return 5;
        if (op == "*" || op == "/" || op == "%") return 6;
        return 0;
    }

    static Op binary_op(std::string_view op)
    {
        if (op == "+") return Op::Add;
        if (op == "-") return Op::Sub;
        if (op == "*") return Op::Mul;
        if (op == "/") return Op::Div;
        if (op == "%") return Op::Mod;
        if (op == "<") return Op::Lt;
        if (op == "<=") return Op::Le;
        if (op == ">") return Op::Gt;
        if (op == ">=") return Op::Ge;
        if (op == "==") return Op::Eq;
        if (op == "!=") return Op::Ne;
        if (op == "&&") return Op::And;
        return Op::Or;
    }

    Expr parse_expr(int min_prec = 1)
    {
        Expr lhs = parse_unary();
        for (;;) {
            const Token& op_tok = peek();
            if (op_tok.kind != TokenKind::Punct) {
                return lhs;
            }
            const int prec = precedence(op_tok.text);
            if (prec < min_prec || prec == 0) {
                return lhs;
            }
            ++pos_;
            Expr rhs = parse_expr(prec + 1);
            lhs = make_binary(op_tok, binary_op(op_tok.text), std::move(lhs), std::move(rhs));
        }
    }

    Expr make_binary(const Token& at, Op op, Expr lhs, Expr rhs)
    {
        Expr node;
        node.kind = ExprKind::Binary;
        node.op = op;
        const auto mismatch = [&] {
            fail(at, std::string("operator '") + to_string(op) + "' cannot combine "
                         + to_string(lhs.type) + " and " + to_string(rhs.type));
        };
        switch (op) {
        case Op::And:
        case Op::Or:
            if (lhs.type != ValueType::Bool || rhs.type != ValueType::Bool) {
                mismatch();
            }
            node.type = ValueType::Bool;
            break;
        case Op::Mod:
            if (lhs.type != ValueType::Int || rhs.type != ValueType::Int) {
                mismatch();
            }
            node.type = ValueType::Int;
            break;
        case Op::Eq:
        case Op::Ne:
            if (lhs.type == ValueType::Bool && rhs.type == ValueType::Bool) {
                node.type = ValueType::Bool;
                break;
            }
            [[fallthrough]];
        default: {
            if (!is_numeric(lhs.type) || !is_numeric(rhs.type)) {
                mismatch();
            }
            const ValueType common = (lhs.type == ValueType::Float || rhs.type == ValueType::Float)
                ? ValueType::Float
                : ValueType::Int;
            lhs = make_cast(std::move(lhs), common);
            rhs = make_cast(std::move(rhs), common);
            const bool comparison = op != Op::Add && op != Op::Sub && op != Op::Mul && op != Op::Div;
            node.type = comparison ? ValueType::Bool : common;
            break;
        }
        }
        node.operands.push_back(std::move(lhs));
        node.operands.push_back(std::move(rhs));
        return node;
    }

    Expr parse_unary()
    {
        const Token& t = peek();
        if (peek_is("!") || peek_is("-")) {
            ++pos_;
            Expr operand = parse_unary();
            Expr node;
            node.kind = ExprKind::Unary;
            node.op = t.text == "!" ? Op::Not : Op::Neg;
            if (node.op == Op::Not && operand.type != ValueType::Bool) {
                fail(t, "operator '!' needs a bool operand");
            }
            if (node.op == Op::Neg && !is_numeric(operand.type)) {
                fail(t, "operator '-' needs a numeric operand");
            }
            node.type = operand.type;
            node.operands.push_back(std::move(operand));
            return node;
        }
        return parse_primary();
    }

    Expr parse_primary()
    {
        const Token& t = next();
        Expr node;
        switch (t.kind) {
        case TokenKind::Int:
            node.kind = ExprKind::IntLit;
            node.type = ValueType::Int;
            node.int_value = t.int_value;
            return node;
        case TokenKind::Float:
            node.kind = ExprKind::FloatLit;
            node.type = ValueType::Float;
            node.float_value = t.float_value;
            return node;
        case TokenKind::End:
            fail(t, "unexpected end of input in expression");
        case TokenKind::Punct:
            if (t.text == "(") {
                Expr inner = parse_expr();
                expect(")");
                return inner;
            }
            fail(t, "unexpected '" + t.text + "' in expression");
        case TokenKind::Ident:
            break;
        }

        if (t.text == "true" || t.text == "false") {
            node.kind = ExprKind::BoolLit;
            node.type = ValueType::Bool;
            node.bool_value = t.text == "true";
            return node;
        }
        if ((t.text == "int" || t.text == "float") && peek_is("(")) {
            ++pos_;
            const Token& at = peek();
            Expr inner = parse_expr();
            expect(")");
            const ValueType to = t.text == "int" ? ValueType::Int : ValueType::Float;
            if (inner.type == to) {
                // explicit identity casts are kept so printing stays faithful
                Expr cast;
                cast.kind = ExprKind::Cast;
                cast.type = to;
                cast.operands.push_back(std::move(inner));
                return cast;
            }
            if (inner.type == ValueType::Bool) {
                fail(at, std::string("cannot convert bool to ") + to_string(to));
            }
            Expr cast;
            cast.kind = ExprKind::Cast;
            cast.type = to;
            cast.operands.push_back(std::move(inner));
            return cast;
        }
        if (auto builtin = builtin_named(t.text)) {
            expect(".");
            const Token& axis = expect_ident("axis x, y or z");
            if (axis.text != "x" && axis.text != "y" && axis.text != "z") {
                fail(axis, "expected axis x, y or z");
            }
            if (in_size_expr_ && (*builtin == Builtin::ThreadIdx || *builtin == Builtin::BlockIdx)) {
                fail(t, "array size may only use params, blockDim and gridDim");
            }
            node.kind = ExprKind::BuiltinRef;
            node.type = ValueType::Int;
            node.builtin = *builtin;
            node.axis = axis.text[0] - 'x';
            return node;
        }
        if (kKeywords.contains(t.text)) {
            fail(t, "unexpected '" + t.text + "' in expression");
        }
        if (const int p = program_.find_param(t.text); p >= 0) {
            const auto& param = program_.params[p];
            if (param.kind == Param::Kind::ArrayHandle) {
                fail(t, "array parameter '" + t.text + "' cannot be used as a value");
            }
            node.kind = ExprKind::Param;
            node.type = param.type;
            node.name = t.text;
            node.slot = p;
            return node;
        }
        if (program_.find_array(t.text) >= 0) {
            fail(t, "array '" + t.text + "' can only be accessed by a load or store statement");
        }
        if (auto it = local_slots_.find(t.text); it != local_slots_.end() && !in_size_expr_) {
            node.kind = ExprKind::Local;
            node.type = program_.locals[it->second].type;
            node.name = t.text;
            node.slot = it->second;
            return node;
        }
        fail(t, "undeclared identifier '" + t.text + "'");
    }

    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
    KernelProgram program_;
    std::vector<Token> param_tokens_;
    std::map<std::string, int, std::less<>> local_slots_;
    std::set<std::string, std::less<>> barriers_;
    int next_stmt_id_ = 1;
    bool in_size_expr_ = false;
};

} // namespace

KernelProgram parse_kernel(std::string_view text)
{
    Lexer lexer(text);
    Parser parser(lexer.tokenize());
    return parser.parse();
}

} // namespace simucheck::ir
