#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "fellerdyn/errors.hpp"
#include "fellerdyn/expr.hpp"

using namespace fellerdyn;

namespace {
double ev(const Expr& e, double x1, double x2 = 0.0, double env = 1.0) {
    std::vector<double> x = {x1, x2};
    return e.eval(x, env);
}
}  // namespace

TEST_CASE("evaluation follows the usual precedence rules") {
    CHECK(parse_expression("1+2*3^2", 1).eval1(0.0) == doctest::Approx(19.0));
    CHECK(parse_expression("-2^2", 1).eval1(0.0) == doctest::Approx(-4.0));
    CHECK(parse_expression("(-2)^2", 1).eval1(0.0) == doctest::Approx(4.0));
    CHECK(parse_expression("2^-2", 1).eval1(0.0) == doctest::Approx(0.25));
    CHECK(parse_expression("2*x1 + sin(x2)^2", 2).eval(std::vector<double>{1.5, 0.7}, 1.0) ==
          doctest::Approx(3.0 + std::sin(0.7) * std::sin(0.7)));
    CHECK(parse_expression("6/3/2", 1).eval1(0.0) == doctest::Approx(1.0));
    CHECK(parse_expression("2-3-4", 1).eval1(0.0) == doctest::Approx(-5.0));
    CHECK(parse_expression("min(x1, 2) + max(x1, 2)", 1).eval1(5.0) == doctest::Approx(7.0));
    CHECK(parse_expression("abs(-x1)", 1).eval1(-3.0) == doctest::Approx(3.0));
    CHECK(parse_expression("1e-2 + 1.5E2", 1).eval1(0.0) == doctest::Approx(150.01));
}

TEST_CASE("the environment variable participates like a state variable") {
    Expr e = parse_expression("i * x1", 1);
    CHECK(e.uses_env_var());
    CHECK(ev(e, 2.0, 0.0, 3.0) == doctest::Approx(6.0));
    CHECK_FALSE(parse_expression("x1 + 1", 1).uses_env_var());
}

TEST_CASE("max_var reports the highest referenced coordinate") {
    CHECK(parse_expression("x1 * x2", 2).max_var() == 2);
    CHECK(parse_expression("3 + i", 1).max_var() == 0);
}

TEST_CASE("symbolic derivatives match closed forms") {
    struct Row {
        const char* f;
        double x;
        double want;
    };
    const Row rows[] = {
        {"x1^3", 1.7, 3.0 * 1.7 * 1.7},
        {"sin(x1)*x1", 0.9, std::sin(0.9) + 0.9 * std::cos(0.9)},
        {"exp(-x1^2)", 0.4, -0.8 * std::exp(-0.16)},
        {"1/x1", 2.0, -0.25},
        {"sqrt(x1)", 4.0, 0.25},
        {"log(x1)", 3.0, 1.0 / 3.0},
        {"tanh(x1)", 0.5, 1.0 - std::tanh(0.5) * std::tanh(0.5)},
        {"x1^-2", 2.0, -2.0 / 8.0},
    };
    for (const Row& r : rows) {
        Expr d = differentiate(parse_expression(r.f, 1), 1);
        CHECK(d.eval1(r.x) == doctest::Approx(r.want).epsilon(1e-12));
    }
    // derivative in a variable the expression ignores
    CHECK(differentiate(parse_expression("x1^2", 2), 2).is_zero());
}

TEST_CASE("constant folding detects symbolically zero coefficients") {
    CHECK(fold_constants(parse_expression("(2-2) * exp(x1)", 1)).is_zero());
    CHECK(fold_constants(parse_expression("0 * x1 + 0", 1)).is_zero());
    CHECK(fold_constants(parse_expression("2*3", 1)).is_const(6.0));
    CHECK_FALSE(fold_constants(parse_expression("x1 - x1", 1)).is_zero());
}

TEST_CASE("printing emits minimal parentheses and reparses identically") {
    CHECK(parse_expression("x1+2*x2", 2).print() == "x1+2*x2");
    CHECK(parse_expression("(x1+2)*x2", 2).print() == "(x1+2)*x2");

    const char* samples[] = {
        "x1 - (x2 - 1)", "-(x1+1)^2", "min(x1, max(x2, i))", "2^-3 * x1",
        "1/(1+x1^2)",    "--x1",      "-(3)",                "exp(-(x1-1)^2/2)",
    };
    for (const char* s : samples) {
        Expr e = parse_expression(s, 2);
        CHECK(parse_expression(e.print(), 2).equals(e));
    }
}

TEST_CASE("negative constants survive a print/parse cycle") {
    Expr c = Expr::constant(-3.0);
    CHECK(parse_expression(c.print(), 1).equals(c));

    Expr nc = Expr::neg(Expr::constant(3.0));
    CHECK(parse_expression(nc.print(), 1).equals(nc));
    CHECK_FALSE(nc.equals(c));

    Expr nn = Expr::neg(Expr::constant(-3.0));
    CHECK(parse_expression(nn.print(), 1).equals(nn));

    Expr p = Expr::pow(Expr::constant(-2.0), 3.0);
    CHECK(parse_expression(p.print(), 1).equals(p));
    CHECK(parse_expression(p.print(), 1).eval1(0.0) == doctest::Approx(-8.0));
}

TEST_CASE("structural equality distinguishes operand order") {
    CHECK(parse_expression("x1+1", 1).equals(parse_expression("x1 + 1", 1)));
    CHECK_FALSE(parse_expression("x1+1", 1).equals(parse_expression("1+x1", 1)));
}

TEST_CASE("parse errors carry 1-based positions") {
    CHECK_THROWS_AS(parse_expression("x3 + 1", 2), UnknownVariable);
    try {
        parse_expression("x3 + 1", 2);
    } catch (const UnknownVariable& e) {
        CHECK(e.position == 1);
        CHECK(e.name == "x3");
    }

    CHECK_THROWS_AS(parse_expression("2 *", 1), SyntaxError);
    CHECK_THROWS_AS(parse_expression(")", 1), SyntaxError);
    CHECK_THROWS_AS(parse_expression("", 1), SyntaxError);
    CHECK_THROWS_AS(parse_expression("x1 +", 1), SyntaxError);
    CHECK_THROWS_AS(parse_expression("sin(x1", 1), SyntaxError);
    CHECK_THROWS_AS(parse_expression("x1 ^ x1", 1), SyntaxError);  // exponents are numbers
    CHECK_THROWS_AS(parse_expression("min(x1)", 1), ArityMismatch);
    CHECK_THROWS_AS(parse_expression("sqrt(x1, x1)", 1), ArityMismatch);
    CHECK_THROWS_AS(parse_expression("foo(x1)", 1), UnknownVariable);
}

TEST_CASE("non-finite evaluation propagates instead of throwing") {
    CHECK(std::isnan(parse_expression("sqrt(-1)", 1).eval1(0.0)));
    CHECK(std::isinf(parse_expression("1/x1", 1).eval1(0.0)));
    CHECK(std::isnan(parse_expression("log(-x1)", 1).eval1(2.0)));
}
