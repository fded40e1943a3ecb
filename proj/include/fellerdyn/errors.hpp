#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fellerdyn {

/// Base for errors caused by bad input: malformed expressions, invalid
/// configuration, models that violate a method's hypotheses.
struct ConfigFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Base for errors raised while number-crunching on valid input.
struct NumericFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SyntaxError : ConfigFailure {
    std::size_t position;  // 1-based character index; one past the end at EOF
    std::string expected;
    SyntaxError(std::size_t pos, std::string exp)
        : ConfigFailure("syntax error at position " + std::to_string(pos) +
                        ": expected " + exp),
          position(pos),
          expected(std::move(exp)) {}
};

struct UnknownVariable : ConfigFailure {
    std::size_t position;
    std::string name;
    UnknownVariable(std::size_t pos, std::string n)
        : ConfigFailure("unknown variable '" + n + "' at position " +
                        std::to_string(pos)),
          position(pos),
          name(std::move(n)) {}
};

struct ArityMismatch : ConfigFailure {
    std::size_t position;
    std::string func;
    ArityMismatch(std::size_t pos, std::string f, std::size_t got,
                  std::size_t want)
        : ConfigFailure("function '" + f + "' at position " +
                        std::to_string(pos) + " takes " +
                        std::to_string(want) + " argument(s), got " +
                        std::to_string(got)),
          position(pos),
          func(std::move(f)) {}
};

struct ValidationError : ConfigFailure {
    enum class Kind { NotPSD, RowSumNonzero, NegativeRate, BadExpression };
    Kind kind;
    std::string witness;
    ValidationError(Kind k, std::string msg, std::string w)
        : ConfigFailure(msg + " (witness: " + w + ")"),
          kind(k),
          witness(std::move(w)) {}
};

struct ConfigError : ConfigFailure {
    using ConfigFailure::ConfigFailure;
};

struct DimensionError : ConfigFailure {
    using ConfigFailure::ConfigFailure;
};

struct AbsorbingState : ConfigFailure {
    using ConfigFailure::ConfigFailure;
};

struct StepTooLarge : ConfigFailure {
    using ConfigFailure::ConfigFailure;
};

struct NotPSD : NumericFailure {
    using NumericFailure::NumericFailure;
};

struct NonFinite : NumericFailure {
    double point;
    explicit NonFinite(double at)
        : NumericFailure("non-finite function value at " + std::to_string(at)),
          point(at) {}
};

struct MaxSubdivisions : NumericFailure {
    using NumericFailure::NumericFailure;
};

struct NonPositiveDiffusion : NumericFailure {
    double witness;
    explicit NonPositiveDiffusion(double at)
        : NumericFailure("diffusion coefficient not positive at x = " +
                         std::to_string(at)),
          witness(at) {}
    explicit NonPositiveDiffusion(const std::string& msg, double at = 0.0)
        : NumericFailure(msg), witness(at) {}
};

struct DegenerateDiffusion : NumericFailure {
    using NumericFailure::NumericFailure;
};

struct ShootingFailed : NumericFailure {
    using NumericFailure::NumericFailure;
};

struct TruncationError : NumericFailure {
    using NumericFailure::NumericFailure;
};

struct NonPositiveV : NumericFailure {
    using NumericFailure::NumericFailure;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace fellerdyn
