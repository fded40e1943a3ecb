#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "property_suites.hpp"

namespace {

void check_suite(const SuiteResult& r, int min_cases) {
    CAPTURE(r.detail);
    CHECK(r.cases >= min_cases);
    CHECK(r.failures == 0);
}

}  // namespace

TEST_CASE("printed expressions parse back to the same tree") {
    check_suite(prop_parser_roundtrip(400), 400);
}

TEST_CASE("symbolic derivatives match finite differences") {
    check_suite(prop_derivative_matches_fd(200), 200);
}

TEST_CASE("the generator acts linearly") {
    check_suite(prop_generator_linearity(200), 200);
}

TEST_CASE("classification is invariant under joint coefficient scaling") {
    check_suite(prop_classify_scaling(200), 200);
}

TEST_CASE("certificate verdicts are invariant under positive scaling of V") {
    check_suite(prop_certificate_scaling(200), 200);
}
