#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fellerdyn/model.hpp"
#include "fellerdyn/quadrature.hpp"

namespace fellerdyn {

/// Radial comparison coefficients at r = |x|^2 / 2, taken over the unit
/// sphere and all environments:
///   A(x,i) = <x, a(x,i) x>,  G(x,i) = (trace a(x,i) + 2 <x, b(x,i)>) / A(x,i)
/// Upper direction (used to certify the Feller-Dynkin property):
///   a_d(r) = sup A, b_d(r) = inf G.  Lower direction swaps sup and inf and
/// feeds the rejection test. Values come from a lazily grown geometric table
/// (64 nodes per octave, a_d interpolated in log, b_d linearly), which keeps
/// repeated integral probes cheap.
enum class EnvelopeDirection { Upper, Lower };

class RadialTable;  // internal

struct RadialEnvelope {
    int d = 1;
    EnvelopeDirection direction = EnvelopeDirection::Upper;
    int sphere_samples = 0;
    std::function<double(double)> a_d;
    std::function<double(double)> b_d;
    std::shared_ptr<CumulativeIntegral> B;  // int_1^r b_d
    std::shared_ptr<RadialTable> table;
};

struct RadialOptions {
    std::vector<double> ladder;  // default {1e1..1e6}
    int sphere_samples = 0;      // 0 = auto (2 for d=1, else 2d axes + 128 QR)
    int n_max = 200;             // truncation for countable environments
};

RadialEnvelope make_radial_envelope(const Model& model, EnvelopeDirection dir,
                                    const RadialOptions& opts = {});

/// p(r) = int_1^r exp(-int_1^y b_d) dy. With upper envelopes:
///   p bounded                         -> Feller-Dynkin (fc1)
///   p unbounded and the nested        -> Feller-Dynkin (fc2)
///     integral int_1^inf p' int_y^inf dz/(a_d p') dy diverges
/// With lower envelopes: p unbounded and the nested integral finite rejects
/// the Feller-Dynkin property.
struct RadialReport {
    enum class Conclusion { FellerFC1, FellerFC2, NotFeller, Inconclusive };
    Conclusion conclusion = Conclusion::Inconclusive;
    EnvelopeDirection direction = EnvelopeDirection::Upper;
    DivergenceVerdict p_probe;
    std::optional<DivergenceVerdict> nested_probe;
    std::optional<double> p_limit;  // set when p_probe converges
    std::string detail;
};

const char* radial_conclusion_name(RadialReport::Conclusion c);

RadialReport khasminskii_p_tests(const RadialEnvelope& env,
                                 const RadialOptions& opts = {});

/// Decreasing positive solution of (a_d/2)(u'' + b_d u') = u on [1/2, r_max],
/// u(1/2) = 1, found by bisecting the initial slope. The grid is the realized
/// adaptive step sequence; max_residual is an independent finite-difference
/// check of the ODE on that grid. Integration stops early (truncated = true)
/// once u underflows toward zero or the slope bracket collapses.
struct Ode2Solution {
    std::vector<double> r, u, du;
    double sigma = 0.0;  // u'(1/2)
    double r_end = 0.0;
    double tail_limit_estimate = 0.0;
    bool limit_positive = false;  // tail estimate safely above zero
    bool truncated = false;
    double max_residual = 0.0;  // relative, interior nodes
};

Ode2Solution solve_ode2(const RadialEnvelope& env, double r_max = 1e4,
                        double rtol = 1e-10);

/// Coefficient growth scan over radius decades: sup over sphere directions
/// and environments of |b| and trace a, log-log slopes, and the linear-growth
/// flag (|b| <~ r, trace a <~ r^2) used by the existence check.
struct GrowthReport {
    std::vector<double> radii;
    std::vector<double> sup_drift;            // sup of |b| / (1 + |x|) per rung
    std::vector<double> sup_diffusion_trace;  // sup of tr a / (1 + |x|^2) per rung
    std::vector<double> sup_dissipativity;    // sup of (2<x,b> + tr a) / (1 + |x|^2)
    double beta_drift = 0.0;
    double beta_diffusion = 0.0;
    bool linear_growth = false;     // both normalized sups bounded across rungs
    bool existence_bound = false;   // 2<x,b> + tr a <= c (1 + |x|^2) sampled
    double existence_constant = 0.0;  // smallest sampled c for the bound above
};

GrowthReport growth_check(const Model& model, const RadialOptions& opts = {});

}  // namespace fellerdyn
