#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "fellerdyn/errors.hpp"
#include "fellerdyn/model.hpp"

#include "test_models.hpp"

using namespace fellerdyn;
using nlohmann::json;

TEST_CASE("a two-environment model loads with the expected shape") {
    Model m = load_model(testmodels::quartic());
    CHECK(m.d == 1);
    CHECK(m.n_envs == 2);
    CHECK_FALSE(m.countable_envs);
    CHECK(m.state_independent_q());
    CHECK(m.envs_for_analysis(200) == 2);

    std::vector<double> x = {1.5};
    CHECK(m.q_diag(x, 1) == doctest::Approx(-1.0));
    auto row = m.q_row(x, 1);
    REQUIRE(row.size() == 1);
    CHECK(row[0].first == 2);
    CHECK(row[0].second == doctest::Approx(1.0));

    std::vector<double> b(1), a(1);
    m.eval_drift(x, 1, b);
    m.eval_diffusion(x, 1, a);
    CHECK(b[0] == doctest::Approx(0.0));
    CHECK(a[0] == doctest::Approx(1.0 + std::pow(1.5, 4)));
    m.eval_diffusion(x, 2, a);
    CHECK(a[0] == doctest::Approx(1.0));
}

TEST_CASE("drift and diffusion evaluate per environment") {
    Model m = load_model(testmodels::switching_ou());
    std::vector<double> x = {1.5};
    std::vector<double> b(1), a(1);
    for (int env = 1; env <= 2; ++env) {
        m.eval_drift(x, env, b);
        m.eval_diffusion(x, env, a);
        CHECK(b[0] == doctest::Approx(-1.5));
        CHECK(a[0] == doctest::Approx(1.0));
    }
}

TEST_CASE("birth-death environment spaces are countable with power-law rates") {
    json doc = testmodels::brownian_nd(1);
    doc["environments"] = {{"birth_death", {{"alpha", 1.0}, {"lambda", 2.0}, {"mu", 3.0}}}};
    doc.erase("qmatrix");  // optional for birth-death environment spaces
    Model m = load_model(doc, 50);
    CHECK(m.countable_envs);
    CHECK(m.envs_for_analysis(50) == 50);

    std::vector<double> x = {0.0};
    // bottom rung reflects: mu_1 = 0
    auto row1 = m.q_row(x, 1);
    REQUIRE(row1.size() == 1);
    CHECK(row1[0].first == 2);
    CHECK(row1[0].second == doctest::Approx(2.0));
    CHECK(m.q_diag(x, 1) == doctest::Approx(-2.0));

    // rung 4: up 2*4, down 3*4
    auto row4 = m.q_row(x, 4);
    REQUIRE(row4.size() == 2);
    double up = 0.0, down = 0.0;
    for (auto& [j, rate] : row4) {
        if (j == 5) up = rate;
        if (j == 3) down = rate;
    }
    CHECK(up == doctest::Approx(8.0));
    CHECK(down == doctest::Approx(12.0));
    CHECK(m.q_diag(x, 4) == doctest::Approx(-20.0));
}

TEST_CASE("state-dependent rate matrices evaluate at the queried point") {
    Model m = load_model(testmodels::switching_ou_statedep());
    CHECK_FALSE(m.state_independent_q());
    std::vector<double> x = {0.7};
    CHECK(m.q_diag(x, 1) == doctest::Approx(-1.0));
    auto row = m.q_row(x, 2);
    REQUIRE(row.size() == 1);
    CHECK(row[0].first == 1);
    CHECK(row[0].second == doctest::Approx(1.0));
}

TEST_CASE("validation rejects malformed rate matrices with a witness") {
    json doc = testmodels::brownian2();

    doc["qmatrix"]["rates"] = json::array({json::array({-1, 2}), json::array({1, -1})});
    CHECK_THROWS_AS(load_model(doc), ValidationError);
    try {
        load_model(doc);
    } catch (const ValidationError& e) {
        CHECK(e.kind == ValidationError::Kind::RowSumNonzero);
        CHECK_FALSE(e.witness.empty());
    }

    doc["qmatrix"]["rates"] = json::array({json::array({1, -1}), json::array({1, -1})});
    try {
        load_model(doc);
        FAIL("negative off-diagonal rate accepted");
    } catch (const ValidationError& e) {
        CHECK(e.kind == ValidationError::Kind::NegativeRate);
    }
}

TEST_CASE("validation rejects non-positive-semidefinite diffusion") {
    json doc = testmodels::brownian_nd(2);
    // constant symmetric matrix with eigenvalues 3 and -1
    doc["diffusion"] = json::array({json::array({json::array({"1", "2"}), json::array({"2", "1"})})});
    try {
        load_model(doc);
        FAIL("indefinite diffusion accepted");
    } catch (const ValidationError& e) {
        CHECK(e.kind == ValidationError::Kind::NotPSD);
        CHECK_FALSE(e.witness.empty());
    }
}

TEST_CASE("matrix roots reproduce the input") {
    const std::vector<double> a = {4.0, 2.0, 2.0, 2.0};
    MatrixRoot r = matrix_root(a, 2);
    CHECK(r.jitter == doctest::Approx(0.0));
    CHECK(r.L[0] == doctest::Approx(2.0));
    CHECK(r.L[1] == doctest::Approx(0.0));
    CHECK(r.L[2] == doctest::Approx(1.0));
    CHECK(r.L[3] == doctest::Approx(1.0));

    // semidefinite input gets a recorded jitter, not an exception
    const std::vector<double> s = {1.0, 1.0, 1.0, 1.0};
    MatrixRoot rs = matrix_root(s, 2);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            double recon = 0.0;
            for (int k = 0; k < 2; ++k) recon += rs.L[i * 2 + k] * rs.L[j * 2 + k];
            CHECK(recon == doctest::Approx(s[static_cast<std::size_t>(i * 2 + j)]).epsilon(1e-6));
        }

    const std::vector<double> bad = {1.0, 2.0, 2.0, 1.0};
    CHECK_THROWS_AS(matrix_root(bad, 2), NotPSD);
}

TEST_CASE("low-discrepancy samples are deterministic and well spread") {
    auto pts = halton_points(200, 2);
    REQUIRE(pts.size() == 200);
    double mx = 0.0, my = 0.0;
    for (const auto& p : pts) {
        REQUIRE(p.size() == 2);
        CHECK(p[0] >= 0.0);
        CHECK(p[0] < 1.0);
        CHECK(p[1] >= 0.0);
        CHECK(p[1] < 1.0);
        mx += p[0];
        my += p[1];
    }
    CHECK(mx / 200.0 == doctest::Approx(0.5).epsilon(0.05));
    CHECK(my / 200.0 == doctest::Approx(0.5).epsilon(0.05));
    CHECK(halton_points(200, 2) == pts);
}

TEST_CASE("sphere directions are unit vectors with the axes first") {
    auto d1 = sphere_directions(1, 7);
    REQUIRE(d1.size() == 2);
    CHECK(d1[0][0] == doctest::Approx(1.0));
    CHECK(d1[1][0] == doctest::Approx(-1.0));

    auto d3 = sphere_directions(3, 12);
    REQUIRE(d3.size() == 12);
    for (const auto& v : d3) {
        double n2 = 0.0;
        for (double c : v) n2 += c * c;
        CHECK(n2 == doctest::Approx(1.0).epsilon(1e-12));
    }
    // deterministic padding
    CHECK(sphere_directions(3, 12) == d3);
}

TEST_CASE("unknown qmatrix types and inconsistent shapes are config errors") {
    json doc = testmodels::brownian2();
    doc["qmatrix"]["type"] = "sparse";
    CHECK_THROWS_AS(load_model(doc), ConfigFailure);

    // a single shared row is legal; three rows for two environments is not
    json doc2 = testmodels::brownian2();
    doc2["drift"] = json::array({json::array({"0"})});
    CHECK_NOTHROW(load_model(doc2));
    doc2["drift"] =
        json::array({json::array({"0"}), json::array({"0"}), json::array({"0"})});
    CHECK_THROWS_AS(load_model(doc2), ConfigFailure);
}
