#pragma once

#include <string>

// Randomized property suites shared by the doctest property binary and the
// acceptance runner. Each suite runs at least `min_cases` accepted cases with
// a fixed seed and reports how many failed; `detail` carries the first
// failure's description.
struct SuiteResult {
    int cases = 0;
    int failures = 0;
    std::string detail;
};

SuiteResult prop_parser_roundtrip(int min_cases = 200);
SuiteResult prop_derivative_matches_fd(int min_cases = 200);
SuiteResult prop_generator_linearity(int min_cases = 200);
SuiteResult prop_classify_scaling(int min_cases = 200);
SuiteResult prop_certificate_scaling(int min_cases = 200);
