#include "fellerdyn/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <utility>

#include "fellerdyn/errors.hpp"

namespace fellerdyn {

namespace {

std::shared_ptr<const Expr::Node> make_node(Expr::Node n) {
    return std::make_shared<const Expr::Node>(std::move(n));
}

}  // namespace

Expr Expr::constant(double v) {
    Node n;
    n.kind = Kind::Const;
    n.value = v;
    return Expr(make_node(std::move(n)));
}

Expr Expr::var(int index) {
    Node n;
    n.kind = Kind::Var;
    n.var = index;
    return Expr(make_node(std::move(n)));
}

Expr Expr::env_var() {
    Node n;
    n.kind = Kind::EnvVar;
    return Expr(make_node(std::move(n)));
}

Expr Expr::add(Expr a, Expr b) {
    Node n;
    n.kind = Kind::Add;
    n.kids = {std::move(a), std::move(b)};
    return Expr(make_node(std::move(n)));
}

Expr Expr::sub(Expr a, Expr b) {
    Node n;
    n.kind = Kind::Sub;
    n.kids = {std::move(a), std::move(b)};
    return Expr(make_node(std::move(n)));
}

Expr Expr::mul(Expr a, Expr b) {
    Node n;
    n.kind = Kind::Mul;
    n.kids = {std::move(a), std::move(b)};
    return Expr(make_node(std::move(n)));
}

Expr Expr::div(Expr a, Expr b) {
    Node n;
    n.kind = Kind::Div;
    n.kids = {std::move(a), std::move(b)};
    return Expr(make_node(std::move(n)));
}

Expr Expr::pow(Expr base, double exponent) {
    Node n;
    n.kind = Kind::Pow;
    n.value = exponent;
    n.kids = {std::move(base)};
    return Expr(make_node(std::move(n)));
}

Expr Expr::neg(Expr a) {
    Node n;
    n.kind = Kind::Neg;
    n.kids = {std::move(a)};
    return Expr(make_node(std::move(n)));
}

Expr Expr::call(Func f, std::vector<Expr> args) {
    Node n;
    n.kind = Kind::Call;
    n.func = f;
    n.kids = std::move(args);
    return Expr(make_node(std::move(n)));
}

bool Expr::is_const(double v) const {
    return n_ && n_->kind == Kind::Const && n_->value == v;
}

double Expr::eval(std::span<const double> x, double env) const {
    const Node& n = *n_;
    switch (n.kind) {
        case Kind::Const:
            return n.value;
        case Kind::Var:
            return x[static_cast<std::size_t>(n.var - 1)];
        case Kind::EnvVar:
            return env;
        case Kind::Add:
            return n.kids[0].eval(x, env) + n.kids[1].eval(x, env);
        case Kind::Sub:
            return n.kids[0].eval(x, env) - n.kids[1].eval(x, env);
        case Kind::Mul:
            return n.kids[0].eval(x, env) * n.kids[1].eval(x, env);
        case Kind::Div:
            return n.kids[0].eval(x, env) / n.kids[1].eval(x, env);
        case Kind::Pow:
            return std::pow(n.kids[0].eval(x, env), n.value);
        case Kind::Neg:
            return -n.kids[0].eval(x, env);
        case Kind::Call: {
            const double a = n.kids[0].eval(x, env);
            switch (n.func) {
                case Func::Sin: return std::sin(a);
                case Func::Cos: return std::cos(a);
                case Func::Exp: return std::exp(a);
                case Func::Log: return std::log(a);
                case Func::Sqrt: return std::sqrt(a);
                case Func::Abs: return std::abs(a);
                case Func::Tanh: return std::tanh(a);
                case Func::Min: return std::fmin(a, n.kids[1].eval(x, env));
                case Func::Max: return std::fmax(a, n.kids[1].eval(x, env));
            }
            break;
        }
    }
    return std::numeric_limits<double>::quiet_NaN();
}

double Expr::eval1(double x, double env) const {
    return eval(std::span<const double>(&x, 1), env);
}

bool Expr::equals(const Expr& other) const {
    if (n_ == other.n_) return true;
    if (!n_ || !other.n_) return false;
    const Node& a = *n_;
    const Node& b = *other.n_;
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case Kind::Const:
            return a.value == b.value;
        case Kind::Var:
            return a.var == b.var;
        case Kind::EnvVar:
            return true;
        case Kind::Pow:
            if (a.value != b.value) return false;
            break;
        case Kind::Call:
            if (a.func != b.func) return false;
            break;
        default:
            break;
    }
    if (a.kids.size() != b.kids.size()) return false;
    for (std::size_t i = 0; i < a.kids.size(); ++i)
        if (!a.kids[i].equals(b.kids[i])) return false;
    return true;
}

int Expr::max_var() const {
    const Node& n = *n_;
    int m = n.kind == Kind::Var ? n.var : 0;
    for (const Expr& k : n.kids) m = std::max(m, k.max_var());
    return m;
}

bool Expr::uses_env_var() const {
    const Node& n = *n_;
    if (n.kind == Kind::EnvVar) return true;
    for (const Expr& k : n.kids)
        if (k.uses_env_var()) return true;
    return false;
}

const char* func_name(Expr::Func f) {
    switch (f) {
        case Expr::Func::Sin: return "sin";
        case Expr::Func::Cos: return "cos";
        case Expr::Func::Exp: return "exp";
        case Expr::Func::Log: return "log";
        case Expr::Func::Sqrt: return "sqrt";
        case Expr::Func::Abs: return "abs";
        case Expr::Func::Tanh: return "tanh";
        case Expr::Func::Min: return "min";
        case Expr::Func::Max: return "max";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Printing. Precedence levels: Add/Sub 1, Mul/Div 2, Neg 3, Pow 4, atoms 5.
// A child below the required level gets parenthesized; right operands of
// binary nodes require one level more than the node itself so that
// left-associative re-parsing reproduces the original tree exactly.

namespace {

std::string format_double(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

int precedence(const Expr& e) {
    using K = Expr::Kind;
    switch (e.node().kind) {
        case K::Add:
        case K::Sub:
            return 1;
        case K::Mul:
        case K::Div:
            return 2;
        case K::Neg:
            return 3;
        case K::Pow:
            return 4;
        case K::Const:
            // signed literals print with a leading '-', so they bind like a
            // unary minus (signbit catches -0.0 as well)
            return std::signbit(e.node().value) ? 3 : 5;
        default:
            return 5;
    }
}

void print_rec(const Expr& e, int min_prec, std::string& out) {
    const auto& n = e.node();
    const int prec = precedence(e);
    const bool parens = prec < min_prec;
    if (parens) out += '(';
    using K = Expr::Kind;
    switch (n.kind) {
        case K::Const:
            out += format_double(n.value);
            break;
        case K::Var:
            out += 'x';
            out += std::to_string(n.var);
            break;
        case K::EnvVar:
            out += 'i';
            break;
        case K::Add:
            print_rec(n.kids[0], 1, out);
            out += '+';
            print_rec(n.kids[1], 2, out);
            break;
        case K::Sub:
            print_rec(n.kids[0], 1, out);
            out += '-';
            print_rec(n.kids[1], 2, out);
            break;
        case K::Mul:
            print_rec(n.kids[0], 2, out);
            out += '*';
            print_rec(n.kids[1], 3, out);
            break;
        case K::Div:
            print_rec(n.kids[0], 2, out);
            out += '/';
            print_rec(n.kids[1], 3, out);
            break;
        case K::Neg: {
            out += '-';
            // a non-negative constant right after '-' would read back as one
            // signed literal instead of an explicit negation
            const auto& kid = n.kids[0].node();
            const bool shield = kid.kind == K::Const && !std::signbit(kid.value);
            if (shield) out += '(';
            print_rec(n.kids[0], 3, out);
            if (shield) out += ')';
            break;
        }
        case K::Pow:
            print_rec(n.kids[0], 5, out);
            out += '^';
            out += format_double(n.value);
            break;
        case K::Call:
            out += func_name(n.func);
            out += '(';
            for (std::size_t i = 0; i < n.kids.size(); ++i) {
                if (i) out += ',';
                print_rec(n.kids[i], 1, out);
            }
            out += ')';
            break;
    }
    if (parens) out += ')';
}

}  // namespace

std::string Expr::print() const {
    std::string out;
    print_rec(*this, 1, out);
    return out;
}

// ---------------------------------------------------------------------------
// Parser: recursive descent, 1-based character positions for diagnostics.

namespace {

struct Parser {
    const std::string& text;
    int d;
    std::size_t pos = 0;  // 0-based cursor

    explicit Parser(const std::string& t, int dim) : text(t), d(dim) {}

    void skip_ws() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }

    [[nodiscard]] std::size_t here() const { return pos + 1; }  // 1-based

    bool peek(char c) {
        skip_ws();
        return pos < text.size() && text[pos] == c;
    }

    bool accept(char c) {
        if (peek(c)) {
            ++pos;
            return true;
        }
        return false;
    }

    void expect(char c, const char* what) {
        if (!accept(c)) throw SyntaxError(here(), what);
    }

    double parse_number() {
        skip_ws();
        const std::size_t start = pos;
        if (pos >= text.size() || !std::isdigit(static_cast<unsigned char>(text[pos])))
            throw SyntaxError(here(), "number");
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
        if (pos < text.size() && text[pos] == '.') {
            ++pos;
            if (pos >= text.size() || !std::isdigit(static_cast<unsigned char>(text[pos])))
                throw SyntaxError(here(), "digit after decimal point");
            while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
        }
        if (pos < text.size() && (text[pos] == 'e' || text[pos] == 'E')) {
            std::size_t save = pos;
            ++pos;
            if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) ++pos;
            if (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
                while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
            } else {
                pos = save;  // 'e' belongs to a following identifier, not this number
            }
        }
        double v = 0.0;
        auto res = std::from_chars(text.data() + start, text.data() + pos, v);
        if (res.ec != std::errc{}) throw SyntaxError(start + 1, "number");
        return v;
    }

    std::string parse_ident() {
        skip_ws();
        const std::size_t start = pos;
        if (pos >= text.size() || !std::isalpha(static_cast<unsigned char>(text[pos])))
            throw SyntaxError(here(), "identifier");
        while (pos < text.size() &&
               (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_'))
            ++pos;
        return text.substr(start, pos - start);
    }

    Expr parse_expr() {
        Expr e = parse_term();
        for (;;) {
            if (accept('+'))
                e = Expr::add(std::move(e), parse_term());
            else if (accept('-'))
                e = Expr::sub(std::move(e), parse_term());
            else
                return e;
        }
    }

    Expr parse_term() {
        Expr e = parse_factor();
        for (;;) {
            if (accept('*'))
                e = Expr::mul(std::move(e), parse_factor());
            else if (accept('/'))
                e = Expr::div(std::move(e), parse_factor());
            else
                return e;
        }
    }

    Expr parse_factor() {
        if (accept('-')) {
            skip_ws();
            // '-' glued to a bare numeric literal is the literal's sign, so
            // printed negative constants parse back to the same node. An
            // exponent suffix binds tighter and keeps the unary minus.
            if (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
                const double v = parse_number();
                if (peek('^')) return Expr::neg(parse_power_suffix(Expr::constant(v)));
                return Expr::constant(-v);
            }
            return Expr::neg(parse_factor());
        }
        return parse_power();
    }

    Expr parse_power_suffix(Expr base) {
        if (accept('^')) {
            const bool negated = accept('-');
            double expo = parse_number();
            return Expr::pow(std::move(base), negated ? -expo : expo);
        }
        return base;
    }

    Expr parse_power() { return parse_power_suffix(parse_atom()); }

    Expr parse_atom() {
        skip_ws();
        if (pos >= text.size()) throw SyntaxError(here(), "number, identifier or '('");
        const char c = text[pos];
        if (std::isdigit(static_cast<unsigned char>(c))) return Expr::constant(parse_number());
        if (c == '(') {
            ++pos;
            Expr e = parse_expr();
            expect(')', "')'");
            return e;
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            const std::size_t ident_pos = here();
            std::string name = parse_ident();
            if (peek('(')) return parse_call(name, ident_pos);
            if (name == "i") return Expr::env_var();
            if (name.size() >= 2 && name[0] == 'x') {
                bool digits = true;
                for (std::size_t k = 1; k < name.size(); ++k)
                    if (!std::isdigit(static_cast<unsigned char>(name[k]))) digits = false;
                if (digits) {
                    const int idx = std::atoi(name.c_str() + 1);
                    if (idx >= 1 && idx <= d) return Expr::var(idx);
                }
            }
            throw UnknownVariable(ident_pos, name);
        }
        throw SyntaxError(here(), "number, identifier or '('");
    }

    Expr parse_call(const std::string& name, std::size_t ident_pos) {
        static const std::pair<const char*, Expr::Func> table[] = {
            {"sin", Expr::Func::Sin},  {"cos", Expr::Func::Cos},
            {"exp", Expr::Func::Exp},  {"log", Expr::Func::Log},
            {"sqrt", Expr::Func::Sqrt}, {"abs", Expr::Func::Abs},
            {"tanh", Expr::Func::Tanh}, {"min", Expr::Func::Min},
            {"max", Expr::Func::Max},
        };
        const Expr::Func* found = nullptr;
        for (const auto& [n, f] : table)
            if (name == n) found = &f;
        if (!found) throw UnknownVariable(ident_pos, name);
        expect('(', "'('");
        std::vector<Expr> args;
        args.push_back(parse_expr());
        while (accept(',')) args.push_back(parse_expr());
        expect(')', "')' or ','");
        const std::size_t want = (*found == Expr::Func::Min || *found == Expr::Func::Max) ? 2 : 1;
        if (args.size() != want) throw ArityMismatch(ident_pos, name, args.size(), want);
        return Expr::call(*found, std::move(args));
    }
};

}  // namespace

Expr parse_expression(const std::string& text, int d) {
    Parser p(text, d);
    p.skip_ws();
    if (p.pos >= text.size()) throw SyntaxError(1, "non-empty expression");
    Expr e = p.parse_expr();
    p.skip_ws();
    if (p.pos < text.size()) throw SyntaxError(p.here(), "end of input or operator");
    return e;
}

// ---------------------------------------------------------------------------
// Folding and differentiation.

namespace {

bool is_one(const Expr& e) { return e.is_const(1.0); }

Expr fadd(Expr a, Expr b) {
    if (a.is_zero()) return b;
    if (b.is_zero()) return a;
    if (a.node().kind == Expr::Kind::Const && b.node().kind == Expr::Kind::Const) {
        const double v = a.node().value + b.node().value;
        if (std::isfinite(v)) return Expr::constant(v);
    }
    return Expr::add(std::move(a), std::move(b));
}

Expr fneg(Expr a) {
    if (a.node().kind == Expr::Kind::Const) {
        const double v = -a.node().value;
        return Expr::constant(v == 0.0 ? 0.0 : v);
    }
    if (a.node().kind == Expr::Kind::Neg) return a.node().kids[0];
    return Expr::neg(std::move(a));
}

Expr fsub(Expr a, Expr b) {
    if (b.is_zero()) return a;
    if (a.is_zero()) return fneg(std::move(b));
    if (a.node().kind == Expr::Kind::Const && b.node().kind == Expr::Kind::Const) {
        const double v = a.node().value - b.node().value;
        if (std::isfinite(v)) return Expr::constant(v);
    }
    return Expr::sub(std::move(a), std::move(b));
}

Expr fmul(Expr a, Expr b) {
    if (a.is_zero() || b.is_zero()) return Expr::constant(0.0);
    if (is_one(a)) return b;
    if (is_one(b)) return a;
    if (a.node().kind == Expr::Kind::Const && b.node().kind == Expr::Kind::Const) {
        const double v = a.node().value * b.node().value;
        if (std::isfinite(v)) return Expr::constant(v);
    }
    return Expr::mul(std::move(a), std::move(b));
}

Expr fdiv(Expr a, Expr b) {
    if (a.is_zero() && !b.is_zero()) return Expr::constant(0.0);
    if (is_one(b)) return a;
    if (a.node().kind == Expr::Kind::Const && b.node().kind == Expr::Kind::Const &&
        b.node().value != 0.0) {
        const double v = a.node().value / b.node().value;
        if (std::isfinite(v)) return Expr::constant(v);
    }
    return Expr::div(std::move(a), std::move(b));
}

Expr fpow(Expr base, double expo) {
    if (expo == 0.0) return Expr::constant(1.0);
    if (expo == 1.0) return base;
    if (base.node().kind == Expr::Kind::Const) {
        const double v = std::pow(base.node().value, expo);
        if (std::isfinite(v)) return Expr::constant(v);
    }
    return Expr::pow(std::move(base), expo);
}

Expr fcall(Expr::Func f, std::vector<Expr> args) {
    bool all_const = true;
    for (const Expr& a : args)
        if (a.node().kind != Expr::Kind::Const) all_const = false;
    if (all_const) {
        const double a = args[0].node().value;
        double v;
        switch (f) {
            case Expr::Func::Sin: v = std::sin(a); break;
            case Expr::Func::Cos: v = std::cos(a); break;
            case Expr::Func::Exp: v = std::exp(a); break;
            case Expr::Func::Log: v = std::log(a); break;
            case Expr::Func::Sqrt: v = std::sqrt(a); break;
            case Expr::Func::Abs: v = std::abs(a); break;
            case Expr::Func::Tanh: v = std::tanh(a); break;
            case Expr::Func::Min: v = std::fmin(a, args[1].node().value); break;
            case Expr::Func::Max: v = std::fmax(a, args[1].node().value); break;
            default: v = std::numeric_limits<double>::quiet_NaN();
        }
        if (std::isfinite(v)) return Expr::constant(v);
    }
    return Expr::call(f, std::move(args));
}

Expr diff_rec(const Expr& e, int var);

Expr diff_call(const Expr& e, int var) {
    using F = Expr::Func;
    const auto& n = e.node();
    const Expr& u = n.kids[0];
    Expr du = diff_rec(u, var);
    switch (n.func) {
        case F::Sin:
            return fmul(std::move(du), Expr::call(F::Cos, {u}));
        case F::Cos:
            return fneg(fmul(std::move(du), Expr::call(F::Sin, {u})));
        case F::Exp:
            return fmul(std::move(du), e);
        case F::Log:
            return fdiv(std::move(du), u);
        case F::Sqrt:
            return fdiv(std::move(du), fmul(Expr::constant(2.0), e));
        case F::Abs:
            // u'/|u| * u; singular at u = 0 like the function itself
            return fmul(std::move(du), fdiv(u, e));
        case F::Tanh:
            return fmul(std::move(du), fsub(Expr::constant(1.0), fpow(e, 2.0)));
        case F::Min:
        case F::Max: {
            // min(u,v) = (u+v-|u-v|)/2, max flips the sign of the |.| term
            const Expr& v = n.kids[1];
            Expr dv = diff_rec(v, var);
            Expr uv = fsub(u, v);
            Expr sign = fdiv(uv, Expr::call(F::Abs, {uv}));
            Expr asym = fmul(std::move(sign), fsub(du, dv));
            Expr sum = fadd(std::move(du), std::move(dv));
            Expr comb = n.func == F::Min ? fsub(std::move(sum), std::move(asym))
                                         : fadd(std::move(sum), std::move(asym));
            return fmul(Expr::constant(0.5), std::move(comb));
        }
    }
    return Expr::constant(0.0);
}

Expr diff_rec(const Expr& e, int var) {
    using K = Expr::Kind;
    const auto& n = e.node();
    switch (n.kind) {
        case K::Const:
        case K::EnvVar:
            return Expr::constant(0.0);
        case K::Var:
            return Expr::constant(n.var == var ? 1.0 : 0.0);
        case K::Add:
            return fadd(diff_rec(n.kids[0], var), diff_rec(n.kids[1], var));
        case K::Sub:
            return fsub(diff_rec(n.kids[0], var), diff_rec(n.kids[1], var));
        case K::Mul:
            return fadd(fmul(diff_rec(n.kids[0], var), n.kids[1]),
                        fmul(n.kids[0], diff_rec(n.kids[1], var)));
        case K::Div: {
            Expr num = fsub(fmul(diff_rec(n.kids[0], var), n.kids[1]),
                            fmul(n.kids[0], diff_rec(n.kids[1], var)));
            return fdiv(std::move(num), fpow(n.kids[1], 2.0));
        }
        case K::Pow: {
            Expr du = diff_rec(n.kids[0], var);
            Expr factor = fmul(Expr::constant(n.value), fpow(n.kids[0], n.value - 1.0));
            return fmul(std::move(factor), std::move(du));
        }
        case K::Neg:
            return fneg(diff_rec(n.kids[0], var));
        case K::Call:
            return diff_call(e, var);
    }
    return Expr::constant(0.0);
}

}  // namespace

Expr differentiate(const Expr& e, int var) { return diff_rec(e, var); }

Expr fold_constants(const Expr& e) {
    using K = Expr::Kind;
    const auto& n = e.node();
    switch (n.kind) {
        case K::Const:
        case K::Var:
        case K::EnvVar:
            return e;
        case K::Add:
            return fadd(fold_constants(n.kids[0]), fold_constants(n.kids[1]));
        case K::Sub:
            return fsub(fold_constants(n.kids[0]), fold_constants(n.kids[1]));
        case K::Mul:
            return fmul(fold_constants(n.kids[0]), fold_constants(n.kids[1]));
        case K::Div:
            return fdiv(fold_constants(n.kids[0]), fold_constants(n.kids[1]));
        case K::Pow:
            return fpow(fold_constants(n.kids[0]), n.value);
        case K::Neg:
            return fneg(fold_constants(n.kids[0]));
        case K::Call: {
            std::vector<Expr> kids;
            kids.reserve(n.kids.size());
            for (const Expr& k : n.kids) kids.push_back(fold_constants(k));
            return fcall(n.func, std::move(kids));
        }
    }
    return e;
}

}  // namespace fellerdyn
