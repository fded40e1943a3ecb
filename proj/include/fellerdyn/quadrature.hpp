#pragma once

#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fellerdyn {

struct IntegralEstimate {
    double value = 0.0;
    double abs_error = 0.0;
    int subdivisions = 0;
};

/// Three-valued outcome of probing an improper integral over [lo, inf) with a
/// truncation ladder. `ladder` records (R, partial integral up to R) for every
/// rung actually evaluated; `rationale` names the rule that fired.
struct DivergenceVerdict {
    enum class Outcome { Converges, Diverges, Inconclusive };
    Outcome outcome = Outcome::Inconclusive;
    std::optional<IntegralEstimate> estimate;
    std::vector<std::pair<double, double>> ladder;
    std::string rationale;

    [[nodiscard]] bool converges() const { return outcome == Outcome::Converges; }
    [[nodiscard]] bool diverges() const { return outcome == Outcome::Diverges; }
    [[nodiscard]] bool inconclusive() const { return outcome == Outcome::Inconclusive; }
};

const char* outcome_name(DivergenceVerdict::Outcome o);

/// Adaptive Gauss-Kronrod 7/15 bisection. |result - true value| aims for
/// max(tol, 1e-12*|value|) on smooth integrands. Initial panels are packed
/// geometrically toward both endpoints so edge-concentrated integrands are
/// not missed. Throws NonFinite / MaxSubdivisions.
IntegralEstimate integrate_adaptive(const std::function<double(double)>& f,
                                    double lo, double hi, double tol);

struct ProbeOptions {
    std::vector<double> ladder;      // default {1e1,...,1e6}
    double rel_tol = 1e-6;           // plateau rule threshold
    double rung_tol = 1e-9;          // per-rung quadrature tolerance (relative)
    double divergence_cap = 1e12;    // partial beyond this is divergence
    bool early_stop = true;          // stop laddering once the plateau rule fires
};

/// Decide whether int_lo^inf f converges, for f >= 0 (sign spot-checked by
/// sampling). Converges fires on the plateau rule (two consecutive relative
/// increments below rel_tol) or on stable geometric increment decay, in which
/// case the value includes the extrapolated tail. Diverges fires when a
/// partial exceeds divergence_cap, when the integrand overflows, or when the
/// trailing increments are non-decreasing within 10% across three rungs.
DivergenceVerdict probe_divergence(const std::function<double(double)>& f,
                                   double lo, ProbeOptions opts = {});

/// The ladder rules of probe_divergence applied to partial sums of a
/// nonnegative series: term(n) for n = 1, 2, ... is accumulated to each rung
/// of opts.ladder (default {1e2, 1e3, 1e4, 1e5}). Accumulation stops early
/// once a partial sum crosses the divergence cap, so huge terms cannot
/// overflow the running sum.
DivergenceVerdict probe_series(const std::function<double(long long)>& term,
                               ProbeOptions opts = {});

/// Probe the nested integral int_lo^inf e^{-B(y)} [ int_y^inf e^{B(u)} w(u) du ] dy
/// by folding the outer weight into the inner integrand (avoids overflow of
/// e^{B} factors). Each inner tail is probed under the substitution
/// u = y + s0 (e^t - 1) with s0 matched to the local decay length of e^{B},
/// and the outer integral is accumulated by trapezoid on a geometric grid
/// snapped to the ladder rungs. If the inner tail diverges at the base point
/// it diverges at every outer point, so the whole probe reports Diverges.
DivergenceVerdict probe_double_tail(const std::function<double(double)>& B,
                                    const std::function<double(double)>& w,
                                    double lo, ProbeOptions opts = {});

/// Probe the forward fold int_lo^inf e^{-B(y)} [ int_lo^y e^{B(u)} w(u) du ] dy.
/// The inner integral is a cumulative quantity, accumulated once in log form
/// (logsumexp over shifted grid segments) while the outer trapezoid walks the
/// same geometric grid as probe_double_tail, so arbitrarily steep growth of
/// e^{B} cannot overflow the accumulator; only the outer integrand e^{log I - B}
/// itself may overflow, which is reported as divergence.
DivergenceVerdict probe_double_head(const std::function<double(double)>& B,
                                    const std::function<double(double)>& w,
                                    double lo, ProbeOptions opts = {});

/// Memoized antiderivative F(y) = int_origin^y f. Internally a lazily grown
/// piecewise cubic Hermite table (node values from chained Gauss-Kronrod
/// panels, node derivatives are f itself); segments split until the midpoint
/// interpolation error is below tol. Queries after table growth are O(log n).
class CumulativeIntegral {
public:
    CumulativeIntegral(std::function<double(double)> f, double origin,
                       double tol = 1e-10);

    double operator()(double y) const;

private:
    struct Node {
        double y;
        double F;  // int_origin^y f
        double d;  // f(y)
    };

    void extend_to(double y) const;
    std::size_t refine(std::size_t seg, int depth) const;  // returns nodes inserted

    std::function<double(double)> f_;
    double origin_;
    double tol_;
    mutable std::vector<Node> nodes_;
    mutable std::mutex mu_;
};

std::vector<double> default_ladder();

}  // namespace fellerdyn
