#pragma once

#include <cstdint>
#include <vector>

#include "fellerdyn/classify1d.hpp"
#include "fellerdyn/model.hpp"
#include "fellerdyn/quadrature.hpp"

namespace fellerdyn {

/// Piecewise-constant environment trajectory. states[k] is held on
/// [times[k], times[k+1]), the last state until t_end.
struct ChainPath {
    std::vector<double> times;  // times[0] = 0, then jump instants
    std::vector<int> states;
    double t_end = 0.0;

    [[nodiscard]] int state_at(double t) const;
};

/// Exact simulation of the state-independent switching chain (exponential
/// holding times, embedded jump probabilities). Requires state-independent
/// rates; absorbing states simply hold forever.
ChainPath simulate_chain(const Model& model, int start_env, double t_end,
                         std::uint64_t seed);

/// Series test for power-law birth-death switching (rates lambda_n =
/// lambda n^alpha up, mu_n = mu n^alpha down, reflecting bottom rung):
///   r_n = sum_{k=0..n-1} (1/lambda) (mu/lambda)^k (n-k)^-alpha
///   s_n = (1/mu_{n+1}) sum_{k=0..n} (lambda/mu)^k
/// The chain is Feller-Dynkin iff both series diverge.
struct BirthDeathReport {
    DivergenceVerdict r_series;
    DivergenceVerdict s_series;
    Verdict::Outcome outcome = Verdict::Outcome::Inconclusive;
};

BirthDeathReport birthdeath_rs_test(double alpha, double lambda, double mu,
                                    ProbeOptions opts = {});

/// Closed-form classification for the same family:
/// Feller-Dynkin iff alpha <= 1, or alpha <= 2 with lambda == mu.
bool powerlaw_verdict(double alpha, double lambda, double mu);

}  // namespace fellerdyn
