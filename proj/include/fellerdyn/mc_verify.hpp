#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fellerdyn/lyapunov.hpp"
#include "fellerdyn/model.hpp"
#include "fellerdyn/sde_sim.hpp"

namespace fellerdyn {

struct MCOptions {
    long long n_paths = 10000;
    double dt = 1e-3;
    std::uint64_t master_seed = 42;
    int threads = 1;
};

/// Binomial estimate of P( (Y_t, Z_t) in K ) (or of a hitting probability)
/// with a Wilson 95% score interval. Exploded paths never count as hits and
/// are tallied separately.
struct OccupationEstimate {
    std::vector<double> x0;
    int env0 = 1;
    double t = 0.0;
    long long n = 0;
    long long hits = 0;
    long long exploded = 0;
    double p_hat = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 1.0;
};

/// Wilson score interval at 95% for hits out of n; fills only the
/// statistical fields.
OccupationEstimate wilson_interval(long long hits, long long n);

/// P( Y_t in K.box, Z_t in K.envs ) from n_paths terminal states.
OccupationEstimate estimate_occupation(const Model& model, std::span<const double> x0,
                                       int env0, const CompactSet& K, double t,
                                       const MCOptions& opts = {});

/// P( the path enters K before t_max ), monitored on the step grid; crossings
/// between grid points are missed, so the estimate is biased low.
OccupationEstimate hitting_time_probability(const Model& model,
                                            std::span<const double> x0, int env0,
                                            const CompactSet& K, double t_max,
                                            const MCOptions& opts = {});

/// Sample mean and variance of one coordinate at time t.
struct MomentEstimate {
    double mean = 0.0;
    double mean_se = 0.0;
    double variance = 0.0;
    double variance_se = 0.0;
    long long n = 0;
    long long exploded = 0;
};

MomentEstimate estimate_moments(const Model& model, std::span<const double> x0,
                                int env0, int coordinate, double t,
                                const MCOptions& opts = {});

/// Empirical Feller-Dynkin probe: for a C0-preserving semigroup,
/// P_x( (Y_t, Z_t) in K ) must vanish as |x| grows. Starting points walk the
/// radius ladder along +e1. ConsistentWithFD needs the final rung's upper
/// confidence bound below eps; InconsistentWithFD needs the last two rungs'
/// lower bounds above eps. Evidence, not proof: analytic verdicts win.
struct EmpiricalVerdict {
    enum class Outcome { ConsistentWithFD, InconsistentWithFD, Inconclusive };
    Outcome outcome = Outcome::Inconclusive;
    double eps = 0.01;
    std::vector<double> radii;
    std::vector<OccupationEstimate> occupation;
    std::string detail;
};

const char* empirical_outcome_name(EmpiricalVerdict::Outcome o);

EmpiricalVerdict fd_empirical_verdict(const Model& model, const CompactSet& K,
                                      const std::vector<double>& radii, double eps,
                                      double t, int env0, const MCOptions& opts = {});

}  // namespace fellerdyn
