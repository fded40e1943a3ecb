#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "fellerdyn/errors.hpp"
#include "fellerdyn/quadrature.hpp"

using namespace fellerdyn;

TEST_CASE("adaptive quadrature hits closed forms") {
    auto sq = [](double x) { return x * x; };
    IntegralEstimate r = integrate_adaptive(sq, 0.0, 1.0, 1e-12);
    CHECK(r.value == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    r = integrate_adaptive([](double x) { return std::sin(x); }, 0.0, M_PI, 1e-12);
    CHECK(r.value == doctest::Approx(2.0).epsilon(1e-12));

    r = integrate_adaptive([](double x) { return std::exp(-x); }, 0.0, 10.0, 1e-12);
    CHECK(r.value == doctest::Approx(1.0 - std::exp(-10.0)).epsilon(1e-12));

    // edge-concentrated mass: the initial panel packing has to find it
    r = integrate_adaptive([](double x) { return 1.0 / std::sqrt(x + 1e-12); }, 0.0, 1.0, 1e-9);
    CHECK(r.value == doctest::Approx(2.0).epsilon(1e-5));

    CHECK(r.abs_error >= 0.0);
    CHECK(r.subdivisions > 0);
}

TEST_CASE("constant integrands are exact") {
    auto one = [](double) { return 1.0; };
    CHECK(integrate_adaptive(one, 0.0, 2.0, 1e-12).value == doctest::Approx(2.0));
}

TEST_CASE("non-finite integrands throw") {
    auto bad = [](double x) { return x < 0.5 ? 1.0 : std::numeric_limits<double>::quiet_NaN(); };
    CHECK_THROWS_AS(integrate_adaptive(bad, 0.0, 1.0, 1e-10), NonFinite);
}

TEST_CASE("divergence probe: convergent tails plateau and are extrapolated") {
    auto f = [](double u) { return 1.0 / ((1.0 + u) * (1.0 + u)); };
    DivergenceVerdict v = probe_divergence(f, 0.0);
    CHECK(v.converges());
    REQUIRE(v.estimate.has_value());
    CHECK(v.estimate->value == doctest::Approx(1.0).epsilon(1e-3));
    CHECK_FALSE(v.ladder.empty());
    CHECK_FALSE(v.rationale.empty());

    DivergenceVerdict g = probe_divergence([](double u) { return std::exp(-u); }, 0.0);
    CHECK(g.converges());
    CHECK(g.estimate->value == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("divergence probe: slow and fast divergence are both caught") {
    CHECK(probe_divergence([](double u) { return 1.0 / (1.0 + u); }, 0.0).diverges());
    CHECK(probe_divergence([](double u) { return u; }, 0.0).diverges());
    CHECK(probe_divergence([](double u) { return 1.0 / std::sqrt(1.0 + u); }, 0.0).diverges());
}

TEST_CASE("divergence probe is not fooled by tiny overall scale") {
    // scaled harmonic tail: partials stay minuscule but never settle
    DivergenceVerdict v = probe_divergence([](double u) { return 1e-9 / (1.0 + u); }, 0.0);
    CHECK(v.diverges());
    // and a scaled convergent integrand still converges
    DivergenceVerdict w =
        probe_divergence([](double u) { return 1e9 / ((1.0 + u) * (1.0 + u)); }, 0.0);
    CHECK(w.converges());
    CHECK(w.estimate->value == doctest::Approx(1e9).epsilon(1e-3));
}

TEST_CASE("series probe mirrors the integral rules") {
    DivergenceVerdict basel = probe_series([](long long n) {
        return 1.0 / (static_cast<double>(n) * static_cast<double>(n));
    });
    CHECK(basel.converges());
    CHECK(basel.estimate->value == doctest::Approx(M_PI * M_PI / 6.0).epsilon(1e-3));

    CHECK(probe_series([](long long n) { return 1.0 / static_cast<double>(n); }).diverges());
    CHECK(probe_series([](long long n) { return static_cast<double>(n); }).diverges());
    CHECK(probe_series([](long long n) { return std::pow(0.5, static_cast<double>(n)); })
              .converges());
}

TEST_CASE("series probe survives huge terms without overflowing") {
    DivergenceVerdict v = probe_series([](long long n) { return std::exp(static_cast<double>(n)); });
    CHECK(v.diverges());
}

TEST_CASE("nested tail probe handles both verdicts") {
    // B = 0, w summable twice: double integral of (1+u)^-3 tails is finite
    DivergenceVerdict conv = probe_double_tail(
        [](double) { return 0.0; },
        [](double u) { return std::pow(1.0 + u, -3.0); }, 0.0);
    CHECK(conv.converges());

    // e^{B(u)} = e^u beats any fixed w: the inner tail already diverges
    DivergenceVerdict div = probe_double_tail(
        [](double y) { return y; }, [](double) { return 1.0; }, 0.0);
    CHECK(div.diverges());
}

TEST_CASE("forward fold probe handles both verdicts") {
    // outer e^{-y} * int_0^y e^{u} e^{-2u} du -> integral of e^{-y}(1-e^{-y}), value 1/2
    DivergenceVerdict conv = probe_double_head(
        [](double y) { return y; }, [](double u) { return std::exp(-2.0 * u); }, 0.0);
    CHECK(conv.converges());
    CHECK(conv.estimate->value == doctest::Approx(0.5).epsilon(1e-2));

    // B = 0, w = 1: outer integrand grows linearly
    DivergenceVerdict div = probe_double_head(
        [](double) { return 0.0; }, [](double) { return 1.0; }, 0.0);
    CHECK(div.diverges());

    // steep growth of e^{B} must not overflow the log-space accumulator;
    // the outer integrand behaves like 1/(3y^2) here, so this converges
    DivergenceVerdict steep = probe_double_head(
        [](double y) { return y * y * y; }, [](double) { return 1.0; }, 0.0);
    CHECK(steep.converges());
}

TEST_CASE("memoized antiderivative tracks its integrand on both sides") {
    CumulativeIntegral F([](double u) { return std::cos(u); }, 0.0, 1e-12);
    CHECK(F(1.0) == doctest::Approx(std::sin(1.0)).epsilon(1e-9));
    CHECK(F(3.0) == doctest::Approx(std::sin(3.0)).epsilon(1e-9));
    CHECK(F(-2.0) == doctest::Approx(std::sin(-2.0)).epsilon(1e-9));
    CHECK(F(0.0) == doctest::Approx(0.0));
    // difference identity after the table has grown
    CHECK(F(3.0) - F(1.0) == doctest::Approx(std::sin(3.0) - std::sin(1.0)).epsilon(1e-9));
    // re-query is stable
    CHECK(F(1.0) == doctest::Approx(std::sin(1.0)).epsilon(1e-9));

    CumulativeIntegral G([](double u) { return std::exp(-u * u); }, 0.0, 1e-12);
    CHECK(G(1e3) == doctest::Approx(std::sqrt(M_PI) / 2.0).epsilon(1e-9));
}

TEST_CASE("default ladder spans ten to a million") {
    const std::vector<double> lad = default_ladder();
    REQUIRE(lad.size() == 6);
    CHECK(lad.front() == doctest::Approx(1e1));
    CHECK(lad.back() == doctest::Approx(1e6));
}

TEST_CASE("outcome names are stable identifiers") {
    CHECK(std::string(outcome_name(DivergenceVerdict::Outcome::Converges)) == "converges");
    CHECK(std::string(outcome_name(DivergenceVerdict::Outcome::Diverges)) == "diverges");
    CHECK(std::string(outcome_name(DivergenceVerdict::Outcome::Inconclusive)) == "inconclusive");
}
