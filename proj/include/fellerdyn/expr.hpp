#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace fellerdyn {

/// Arithmetic expressions over state variables x1..xd and the environment
/// index i. Trees are immutable and shared; copying an Expr is cheap.
///
/// Grammar:
///   expr   := term (('+'|'-') term)*
///   term   := factor (('*'|'/') factor)*
///   factor := '-' factor | power
///   power  := atom ('^' ['-'] number)?
///   atom   := number | ident | func '(' expr (',' expr)* ')' | '(' expr ')'
///
/// '^' exponents are constant numbers so that symbolic differentiation stays
/// closed under the grammar.
class Expr {
public:
    enum class Kind { Const, Var, EnvVar, Add, Sub, Mul, Div, Pow, Neg, Call };
    enum class Func { Sin, Cos, Exp, Log, Sqrt, Abs, Tanh, Min, Max };

    struct Node {
        Kind kind;
        double value = 0.0;   // Const payload, or Pow exponent
        int var = 0;          // Var index, 1-based
        Func func = Func::Sin;
        std::vector<Expr> kids;
    };

    Expr() = default;

    static Expr constant(double v);
    static Expr var(int index);     // x<index>, 1-based
    static Expr env_var();          // the identifier i
    static Expr add(Expr a, Expr b);
    static Expr sub(Expr a, Expr b);
    static Expr mul(Expr a, Expr b);
    static Expr div(Expr a, Expr b);
    static Expr pow(Expr base, double exponent);
    static Expr neg(Expr a);
    static Expr call(Func f, std::vector<Expr> args);

    [[nodiscard]] const Node& node() const { return *n_; }
    [[nodiscard]] bool valid() const { return n_ != nullptr; }
    [[nodiscard]] bool is_const(double v) const;
    [[nodiscard]] bool is_zero() const { return is_const(0.0); }

    /// Evaluate at state x (span of length >= d of the owning model) and
    /// environment index env. Non-finite results propagate.
    [[nodiscard]] double eval(std::span<const double> x, double env) const;
    [[nodiscard]] double eval1(double x, double env = 1.0) const;

    [[nodiscard]] std::string print() const;

    [[nodiscard]] bool equals(const Expr& other) const;

    /// Largest variable index referenced (0 if none).
    [[nodiscard]] int max_var() const;
    [[nodiscard]] bool uses_env_var() const;

private:
    explicit Expr(std::shared_ptr<const Node> n) : n_(std::move(n)) {}
    std::shared_ptr<const Node> n_;
};

/// Parse `text` against dimension d. Errors: SyntaxError, UnknownVariable,
/// ArityMismatch. The parse preserves structure (no folding), so
/// parse(print(e)) is structurally identical to e.
Expr parse_expression(const std::string& text, int d);

/// Exact symbolic d/dx_var. Output is constant-folded (0*u -> 0, u+0 -> u, ...).
Expr differentiate(const Expr& e, int var);

/// Bottom-up constant folding; used e.g. to detect symbolically-zero drift.
Expr fold_constants(const Expr& e);

const char* func_name(Expr::Func f);

}  // namespace fellerdyn
