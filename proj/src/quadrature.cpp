#include "fellerdyn/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "fellerdyn/errors.hpp"

namespace fellerdyn {

namespace {

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
constexpr double kXgk[8] = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
};
constexpr double kWgk[8] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
};
constexpr double kWg[4] = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
};

struct Panel {
    double lo, hi, value, error;
    bool operator<(const Panel& o) const { return error < o.error; }
};

Panel evaluate_panel(const std::function<double(double)>& f, double lo, double hi) {
    const double mid = 0.5 * (lo + hi);
    const double half = 0.5 * (hi - lo);
    double kronrod = 0.0;
    double gauss = 0.0;
    for (int j = 0; j < 8; ++j) {
        double fsum;
        if (j == 7) {
            fsum = f(mid);
            if (!std::isfinite(fsum)) throw NonFinite(mid);
        } else {
            const double x1 = mid - half * kXgk[j];
            const double x2 = mid + half * kXgk[j];
            const double f1 = f(x1);
            if (!std::isfinite(f1)) throw NonFinite(x1);
            const double f2 = f(x2);
            if (!std::isfinite(f2)) throw NonFinite(x2);
            fsum = f1 + f2;
        }
        kronrod += kWgk[j] * fsum;
        if (j % 2 == 1) gauss += kWg[j / 2] * fsum;  // embedded G7 shares odd nodes
    }
    Panel p;
    p.lo = lo;
    p.hi = hi;
    p.value = kronrod * half;
    p.error = std::abs(kronrod - gauss) * half;
    return p;
}

}  // namespace

IntegralEstimate integrate_adaptive(const std::function<double(double)>& f,
                                    double lo, double hi, double tol) {
    if (!(lo < hi)) {
        if (lo == hi) return {0.0, 0.0, 0};
        throw ConfigError("integrate_adaptive: lo must be < hi");
    }
    // Geometric packing toward both endpoints protects against integrands
    // concentrated at an edge of a wide interval.
    std::vector<double> cuts{lo};
    const double width = hi - lo;
    for (int k = 20; k >= 2; --k) {
        const double off = width * std::ldexp(1.0, -k);
        if (off > 0 && lo + off < hi) cuts.push_back(lo + off);
    }
    cuts.push_back(lo + 0.5 * width);
    for (int k = 2; k <= 20; ++k) {
        const double off = width * std::ldexp(1.0, -k);
        if (off > 0 && hi - off > lo) cuts.push_back(hi - off);
    }
    cuts.push_back(hi);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    std::priority_queue<Panel> heap;
    double value = 0.0;
    double error = 0.0;
    int panels = 0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        Panel p = evaluate_panel(f, cuts[i], cuts[i + 1]);
        value += p.value;
        error += p.error;
        heap.push(p);
        ++panels;
    }
    constexpr int kMaxPanels = 1000000;
    while (error > std::max(tol, 1e-12 * std::abs(value)) && !heap.empty()) {
        if (panels >= kMaxPanels)
            throw MaxSubdivisions("integrate_adaptive: exceeded 1e6 panels");
        Panel worst = heap.top();
        // once the worst panel is at the roundoff floor of the running sum,
        // further splits shuffle noise instead of reducing the error
        if (worst.error <= 4.0 * std::numeric_limits<double>::epsilon() *
                               (std::abs(value) + std::abs(worst.value)))
            break;
        heap.pop();
        const double mid = 0.5 * (worst.lo + worst.hi);
        if (mid <= worst.lo || mid >= worst.hi) continue;  // width at spacing limit
        Panel a = evaluate_panel(f, worst.lo, mid);
        Panel b = evaluate_panel(f, mid, worst.hi);
        value += a.value + b.value - worst.value;
        error += a.error + b.error - worst.error;
        heap.push(a);
        heap.push(b);
        ++panels;
    }
    return {value, error, panels};
}

std::vector<double> default_ladder() {
    return {1e1, 1e2, 1e3, 1e4, 1e5, 1e6};
}

const char* outcome_name(DivergenceVerdict::Outcome o) {
    switch (o) {
        case DivergenceVerdict::Outcome::Converges: return "converges";
        case DivergenceVerdict::Outcome::Diverges: return "diverges";
        case DivergenceVerdict::Outcome::Inconclusive: return "inconclusive";
    }
    return "?";
}

namespace {

// Plateau test for one pair of consecutive ladder increments. The tolerance
// has an absolute floor (1 + |partial|) so sums well below 1 can still
// plateau; the decay guard keeps a slow divergence scaled down by a tiny
// constant factor from slipping under that floor. Increments at or below
// 1e-3 x tolerance count as numerical noise and skip the guard.
bool plateau_pair(double d0, double d1, double p0, double p1,
                  const ProbeOptions& opts) {
    const double tol0 = opts.rel_tol * (1.0 + std::abs(p0));
    const double tol1 = opts.rel_tol * (1.0 + std::abs(p1));
    if (std::abs(d0) > tol0 || std::abs(d1) > tol1) return false;
    return std::abs(d1) <= 0.5 * std::abs(d0) || std::abs(d1) <= 1e-3 * tol1;
}

void check_sign(const std::function<double(double)>& f, double lo, double hi) {
    // A clearly negative sample means the caller forgot to split a signed
    // integrand. 24 uniform + 24 left-edge-geometric points.
    for (int k = 0; k < 48; ++k) {
        double x;
        if (k < 24)
            x = lo + (hi - lo) * (k + 0.5) / 24.0;
        else
            x = lo + (hi - lo) * std::ldexp(1.0, -(k - 23));
        const double v = f(x);
        if (std::isfinite(v) && v < -1e-9 * (1.0 + std::abs(v)))
            throw NumericFailure("probe_divergence: integrand is negative at x = " +
                                 std::to_string(x));
    }
}

DivergenceVerdict classify_ladder(std::vector<std::pair<double, double>> ladder,
                                  std::vector<double> increments,
                                  double quad_error, const ProbeOptions& opts,
                                  bool overflowed, double overflow_at) {
    DivergenceVerdict v;
    v.ladder = std::move(ladder);
    const auto& P = v.ladder;
    const auto& D = increments;

    if (overflowed) {
        v.outcome = DivergenceVerdict::Outcome::Diverges;
        v.rationale = "nonnegative integrand overflows near y = " +
                      std::to_string(overflow_at) + "; treated as divergent";
        return v;
    }
    if (!P.empty() && P.back().second > opts.divergence_cap) {
        v.outcome = DivergenceVerdict::Outcome::Diverges;
        v.rationale = "partial integral exceeds divergence cap";
        return v;
    }

    // Plateau: two consecutive increments below rel_tol of the running value.
    for (std::size_t k = 1; k + 1 < D.size(); ++k) {
        if (plateau_pair(D[k], D[k + 1], P[k].second, P[k + 1].second, opts)) {
            v.outcome = DivergenceVerdict::Outcome::Converges;
            v.estimate = IntegralEstimate{
                P.back().second,
                std::max(quad_error, std::abs(D.back()) + std::abs(D[D.size() - 2])),
                0};
            v.rationale = "plateau: consecutive increments below rel_tol";
            return v;
        }
    }

    // Stable geometric decay of increments: extrapolate the tail. D[0] is the
    // whole head integral, not a rung-to-rung increment, so ratios never use
    // it as a denominator; short ladders get two ratios instead of three.
    if (D.size() >= 4) {
        const std::size_t n = D.size() - 1;
        std::vector<double> q;
        bool ok = true;
        for (std::size_t i = std::max<std::size_t>(2, n - 2); i <= n; ++i) {
            if (!(D[i - 1] > 0.0) || !(D[i] > 0.0)) ok = false;
            q.push_back(ok ? D[i] / D[i - 1] : 0.0);
        }
        if (ok) {
            const double qmin = *std::min_element(q.begin(), q.end());
            const double qmax = *std::max_element(q.begin(), q.end());
            if (qmax <= 0.82 && qmax <= 1.15 * qmin) {
                const double qn = q.back();
                const double tail = D[n] * qn / (1.0 - qn);
                const double spread = tail * (qmax - qmin) / std::max(1e-300, 1.0 - qmax);
                DivergenceVerdict r;
                r.ladder = P;
                r.outcome = DivergenceVerdict::Outcome::Converges;
                r.estimate = IntegralEstimate{P.back().second + tail,
                                              std::max(quad_error, std::abs(spread)), 0};
                r.rationale = "geometric tail extrapolation (increment ratio " +
                              std::to_string(qn) + ")";
                return r;
            }
        }
    }

    // Trailing increments non-decreasing within 10% across three rungs.
    if (D.size() >= 3) {
        const std::size_t n = D.size() - 1;
        if (D[n] >= 0.9 * D[n - 1] && D[n - 1] >= 0.9 * D[n - 2] && D[n] > 0.0) {
            v.outcome = DivergenceVerdict::Outcome::Diverges;
            v.rationale = "trailing increments non-decreasing within 10%";
            return v;
        }
    }

    v.outcome = DivergenceVerdict::Outcome::Inconclusive;
    v.rationale = "ladder exhausted without a plateau, geometric tail, or growth";
    return v;
}

}  // namespace

DivergenceVerdict probe_divergence(const std::function<double(double)>& f,
                                   double lo, ProbeOptions opts) {
    if (opts.ladder.empty()) opts.ladder = default_ladder();
    std::vector<double> rungs;
    for (double r : opts.ladder)
        if (r > lo) rungs.push_back(r);
    std::sort(rungs.begin(), rungs.end());
    if (rungs.empty())
        throw ConfigError("probe_divergence: ladder has no rung beyond lo");

    check_sign(f, lo, rungs.front());

    std::vector<std::pair<double, double>> ladder;
    std::vector<double> increments;
    double partial = 0.0;
    double quad_error = 0.0;
    bool overflowed = false;
    double overflow_at = 0.0;
    double prev = lo;
    for (double R : rungs) {
        const double rtol = std::max(1e-14, opts.rung_tol * (1.0 + std::abs(partial)));
        try {
            IntegralEstimate est = integrate_adaptive(f, prev, R, rtol);
            partial += est.value;
            quad_error += est.abs_error;
        } catch (const NonFinite& nf) {
            overflowed = true;
            overflow_at = nf.point;
        }
        if (overflowed) break;
        increments.push_back(ladder.empty() ? partial : partial - ladder.back().second);
        ladder.emplace_back(R, partial);
        prev = R;
        if (partial > opts.divergence_cap) break;
        if (opts.early_stop && increments.size() >= 3) {
            const std::size_t k = increments.size() - 1;
            if (plateau_pair(increments[k - 1], increments[k],
                                 ladder[k - 1].second, partial, opts))
                break;  // plateau already certain; classify_ladder will agree
        }
    }
    return classify_ladder(std::move(ladder), std::move(increments), quad_error,
                           opts, overflowed, overflow_at);
}

DivergenceVerdict probe_series(const std::function<double(long long)>& term,
                               ProbeOptions opts) {
    if (opts.ladder.empty()) opts.ladder = {1e2, 1e3, 1e4, 1e5};
    std::sort(opts.ladder.begin(), opts.ladder.end());

    std::vector<std::pair<double, double>> ladder;
    std::vector<double> increments;
    double partial = 0.0;
    bool overflowed = false;
    double overflow_at = 0.0;
    bool capped = false;
    long long n = 1;
    for (double rung : opts.ladder) {
        const long long N = static_cast<long long>(rung);
        for (; n <= N; ++n) {
            const double t = term(n);
            if (!std::isfinite(t)) {
                overflowed = true;
                overflow_at = static_cast<double>(n);
                break;
            }
            if (t < 0.0)
                throw NumericFailure("probe_series: negative term at n = " +
                                     std::to_string(n));
            partial += t;
            if (partial > opts.divergence_cap) {
                capped = true;
                ++n;
                break;
            }
        }
        if (overflowed) break;
        increments.push_back(ladder.empty() ? partial : partial - ladder.back().second);
        ladder.emplace_back(static_cast<double>(N), partial);
        if (capped) break;
        if (opts.early_stop && increments.size() >= 3) {
            const std::size_t k = increments.size() - 1;
            if (plateau_pair(increments[k - 1], increments[k],
                                 ladder[k - 1].second, partial, opts))
                break;
        }
    }
    return classify_ladder(std::move(ladder), std::move(increments), 0.0, opts,
                           overflowed, overflow_at);
}

namespace {

// Plain adaptive integration without the edge packing of integrate_adaptive;
// used for short segments that carry no boundary singularity.
IntegralEstimate integrate_plain(const std::function<double(double)>& f,
                                 double lo, double hi, double tol) {
    if (lo == hi) return {0.0, 0.0, 0};
    std::priority_queue<Panel> heap;
    Panel p0 = evaluate_panel(f, lo, hi);
    double value = p0.value;
    double error = p0.error;
    heap.push(p0);
    int panels = 1;
    while (error > std::max(tol, 1e-13 * std::abs(value)) && !heap.empty()) {
        if (panels >= 100000)
            throw MaxSubdivisions("segment integral: exceeded 1e5 panels");
        Panel worst = heap.top();
        // same roundoff-floor bailout as integrate_adaptive
        if (worst.error <= 4.0 * std::numeric_limits<double>::epsilon() *
                               (std::abs(value) + std::abs(worst.value)))
            break;
        heap.pop();
        const double mid = 0.5 * (worst.lo + worst.hi);
        if (mid <= worst.lo || mid >= worst.hi) break;
        Panel a = evaluate_panel(f, worst.lo, mid);
        Panel b = evaluate_panel(f, mid, worst.hi);
        value += a.value + b.value - worst.value;
        error += a.error + b.error - worst.error;
        heap.push(a);
        heap.push(b);
        ++panels;
    }
    return {value, error, panels};
}

double hermite(double y0, double F0, double d0, double y1, double F1, double d1,
               double y) {
    const double h = y1 - y0;
    const double t = (y - y0) / h;
    const double omt = 1.0 - t;
    const double h00 = (1.0 + 2.0 * t) * omt * omt;
    const double h10 = t * omt * omt;
    const double h01 = t * t * (3.0 - 2.0 * t);
    const double h11 = t * t * (t - 1.0);
    return h00 * F0 + h * h10 * d0 + h01 * F1 + h * h11 * d1;
}

// Raised by the outer walk when an inner probe stops returning Converges.
struct InnerFailure {
    DivergenceVerdict::Outcome outcome;
    double at;
    std::string why;
};

// Probe of the inner tail integral int_y^inf e^{B(u)-B(y)} w(u) du through
// the substitution u = y + s0 (e^t - 1). Exponential decay at local rate
// |B'(y)| becomes O(1) variation in t, so a fixed t-ladder resolves both the
// narrow boundary layer at steep B and slow power-law tails: t = 14 already
// reaches u - y ~ 1.2e6 s0.
DivergenceVerdict inner_tail_probe(const std::function<double(double)>& B,
                                   const std::function<double(double)>& w,
                                   double y, const ProbeOptions& opts) {
    const double By = B(y);
    const double s = std::max(1.0, std::abs(y));
    const double h = 1e-4 * s;
    const double slope = (B(y + h) - By) / h;
    const double decay = std::max(0.0, -slope);
    const double s0 = std::min(s, 1.0 / (1e-12 + decay));
    ProbeOptions in;
    in.ladder = {2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0};
    in.rel_tol = opts.rel_tol;
    in.rung_tol = opts.rung_tol;
    in.divergence_cap = opts.divergence_cap;
    in.early_stop = true;
    auto g = [&](double t) {
        const double et = std::exp(t);
        const double u = y + s0 * (et - 1.0);
        return std::exp(B(u) - By) * w(u) * s0 * et;
    };
    return probe_divergence(g, 0.0, in);
}

// Trapezoid accumulation of a nonnegative outer integrand along a geometric
// grid snapped to the probe ladder. The integrand may throw NonFinite; that,
// a non-finite value, or a partial beyond the cap ends the walk as overflow.
DivergenceVerdict walk_outer(const std::function<double(double)>& f, double lo,
                             const ProbeOptions& opts) {
    std::vector<double> rungs;
    for (double r : opts.ladder)
        if (r > lo) rungs.push_back(r);
    std::sort(rungs.begin(), rungs.end());
    if (rungs.empty())
        throw ConfigError("double integral probe: ladder has no rung beyond lo");

    std::vector<std::pair<double, double>> ladder;
    std::vector<double> increments;
    double partial = 0.0;
    bool overflowed = false;
    double overflow_at = 0.0;
    double y = lo;
    double fy = f(lo);
    std::size_t next = 0;
    while (next < rungs.size()) {
        double yn = y + 0.125 * std::max(1.0, std::abs(y));
        if (yn >= rungs[next]) yn = rungs[next];
        double fn = 0.0;
        try {
            fn = f(yn);
        } catch (const NonFinite& nf) {
            overflowed = true;
            overflow_at = nf.point;
        }
        if (!overflowed && !std::isfinite(fn)) {
            overflowed = true;
            overflow_at = yn;
        }
        if (overflowed) break;
        partial += 0.5 * (fy + fn) * (yn - y);
        y = yn;
        fy = fn;
        if (!std::isfinite(partial)) {
            overflowed = true;
            overflow_at = yn;
            break;
        }
        if (y == rungs[next]) {
            increments.push_back(ladder.empty() ? partial : partial - ladder.back().second);
            ladder.emplace_back(y, partial);
            ++next;
            if (opts.early_stop && increments.size() >= 3) {
                const std::size_t k = increments.size() - 1;
                if (plateau_pair(increments[k - 1], increments[k],
                                 ladder[k - 1].second, partial, opts))
                    break;
            }
        }
        if (partial > opts.divergence_cap) {
            if (ladder.empty() || ladder.back().first < y) {
                increments.push_back(ladder.empty() ? partial
                                                    : partial - ladder.back().second);
                ladder.emplace_back(y, partial);
            }
            break;
        }
    }
    return classify_ladder(std::move(ladder), std::move(increments), 0.0, opts,
                           overflowed, overflow_at);
}

}  // namespace

DivergenceVerdict probe_double_tail(const std::function<double(double)>& B,
                                    const std::function<double(double)>& w,
                                    double lo, ProbeOptions opts) {
    if (opts.ladder.empty()) opts.ladder = default_ladder();

    // If the inner tail already fails at the base point it fails everywhere:
    // the inner integrals differ only by the positive factor e^{B(y)-B(lo)}.
    DivergenceVerdict head = inner_tail_probe(B, w, lo, opts);
    if (head.diverges()) {
        DivergenceVerdict v;
        v.outcome = DivergenceVerdict::Outcome::Diverges;
        v.ladder = head.ladder;
        v.rationale = "inner tail integral diverges (" + head.rationale + ")";
        return v;
    }
    if (head.inconclusive()) {
        DivergenceVerdict v;
        v.outcome = DivergenceVerdict::Outcome::Inconclusive;
        v.ladder = head.ladder;
        v.rationale = "inner tail integral inconclusive (" + head.rationale + ")";
        return v;
    }

    const double head_value = head.estimate ? head.estimate->value : 0.0;
    auto outer = [&](double y) {
        if (y == lo) return head_value;
        DivergenceVerdict in = inner_tail_probe(B, w, y, opts);
        if (in.converges()) return in.estimate->value;
        throw InnerFailure{in.outcome, y, in.rationale};
    };
    try {
        DivergenceVerdict v = walk_outer(outer, lo, opts);
        v.rationale = "outer: " + v.rationale;
        return v;
    } catch (const InnerFailure& fail) {
        DivergenceVerdict v;
        if (fail.outcome == DivergenceVerdict::Outcome::Diverges) {
            v.outcome = DivergenceVerdict::Outcome::Diverges;
            v.rationale = "inner tail integral diverges at y = " +
                          std::to_string(fail.at) + " (" + fail.why + ")";
        } else {
            v.outcome = DivergenceVerdict::Outcome::Inconclusive;
            v.rationale = "inner tail integral lost convergence at an outer point";
        }
        return v;
    }
}

DivergenceVerdict probe_double_head(const std::function<double(double)>& B,
                                    const std::function<double(double)>& w,
                                    double lo, ProbeOptions opts) {
    if (opts.ladder.empty()) opts.ladder = default_ladder();
    {
        double first = std::numeric_limits<double>::infinity();
        for (double r : opts.ladder)
            if (r > lo) first = std::min(first, r);
        if (!std::isfinite(first))
            throw ConfigError("double integral probe: ladder has no rung beyond lo");
        check_sign(w, lo, first);
    }

    // Streaming accumulator for I(y) = int_lo^y e^{B(u)} w(u) du, kept in log
    // form so growing B cannot overflow the sum. Each grid segment is shifted
    // by the largest sampled B before integration and merged via logsumexp.
    const double ninf = -std::numeric_limits<double>::infinity();
    double logI = ninf;
    double yprev = lo;
    double Bprev = B(lo);
    auto f = [&](double y) {
        if (y == lo) return 0.0;
        const double Bn = B(y);
        const double shift = std::max({Bprev, Bn, B(0.5 * (yprev + y))});
        IntegralEstimate seg = integrate_plain(
            [&](double u) { return std::exp(B(u) - shift) * w(u); }, yprev, y, 0.0);
        if (seg.value > 0.0) {
            const double ls = shift + std::log(seg.value);
            if (logI == ninf) {
                logI = ls;
            } else {
                const double big = std::max(logI, ls);
                const double small = std::min(logI, ls);
                logI = big + std::log1p(std::exp(small - big));
            }
        }
        yprev = y;
        Bprev = Bn;
        if (logI == ninf) return 0.0;
        return std::exp(logI - Bn);
    };
    DivergenceVerdict v = walk_outer(f, lo, opts);
    v.rationale = "outer: " + v.rationale;
    return v;
}

CumulativeIntegral::CumulativeIntegral(std::function<double(double)> f,
                                       double origin, double tol)
    : f_(std::move(f)), origin_(origin), tol_(tol) {
    const double d0 = f_(origin_);
    if (!std::isfinite(d0)) throw NonFinite(origin_);
    nodes_.push_back({origin_, 0.0, d0});
}

std::size_t CumulativeIntegral::refine(std::size_t seg, int depth) const {
    const Node a = nodes_[seg];
    const Node b = nodes_[seg + 1];
    const double ym = 0.5 * (a.y + b.y);
    if (depth > 48 || ym <= a.y || ym >= b.y) return 0;
    const double Fm = a.F + integrate_plain(f_, a.y, ym, 0.0).value;
    const double Hm = hermite(a.y, a.F, a.d, b.y, b.F, b.d, ym);
    const double scale = 1.0 + std::abs(a.F) + std::abs(b.F);
    if (std::abs(Fm - Hm) <= tol_ * scale) return 0;
    const double dm = f_(ym);
    if (!std::isfinite(dm)) throw NonFinite(ym);
    nodes_.insert(nodes_.begin() + static_cast<std::ptrdiff_t>(seg) + 1, {ym, Fm, dm});
    const std::size_t left = refine(seg, depth + 1);
    const std::size_t right = refine(seg + 1 + left, depth + 1);
    return 1 + left + right;
}

void CumulativeIntegral::extend_to(double y) const {
    // Grow geometrically away from the table edge, then split each fresh
    // segment until cubic Hermite interpolation matches re-integration.
    while (y > nodes_.back().y) {
        const Node& edge = nodes_.back();
        double next = edge.y + 0.5 * (1.0 + std::abs(edge.y));
        if (next < y && y < next + 0.25 * (1.0 + std::abs(next))) next = y;
        const double Fn = edge.F + integrate_plain(f_, edge.y, next, 0.0).value;
        const double dn = f_(next);
        if (!std::isfinite(dn)) throw NonFinite(next);
        nodes_.push_back({next, Fn, dn});
        refine(nodes_.size() - 2, 0);
    }
    while (y < nodes_.front().y) {
        const Node& edge = nodes_.front();
        double next = edge.y - 0.5 * (1.0 + std::abs(edge.y));
        if (next > y && y > next - 0.25 * (1.0 + std::abs(next))) next = y;
        const double Fn = edge.F - integrate_plain(f_, next, edge.y, 0.0).value;
        const double dn = f_(next);
        if (!std::isfinite(dn)) throw NonFinite(next);
        nodes_.insert(nodes_.begin(), {next, Fn, dn});
        refine(0, 0);
    }
}

double CumulativeIntegral::operator()(double y) const {
    std::lock_guard<std::mutex> lock(mu_);
    extend_to(y);
    auto it = std::lower_bound(nodes_.begin(), nodes_.end(), y,
                               [](const Node& n, double v) { return n.y < v; });
    if (it != nodes_.end() && it->y == y) return it->F;
    const std::size_t hi = static_cast<std::size_t>(it - nodes_.begin());
    const Node& a = nodes_[hi - 1];
    const Node& b = nodes_[hi];
    return hermite(a.y, a.F, a.d, b.y, b.F, b.d, y);
}

}  // namespace fellerdyn
