#include "fellerdyn/mc_verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>

#include "fellerdyn/errors.hpp"
#include "fellerdyn/parallel.hpp"

namespace fellerdyn {

namespace {

constexpr double kZ = 1.959963984540054;  // two-sided 95%

SimOptions sim_options(const MCOptions& opts, bool store_path) {
    SimOptions s;
    s.dt = opts.dt;
    s.master_seed = opts.master_seed;
    s.store_path = store_path;
    return s;
}

std::string format_bound(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

/// Runs one path per index, records hit/exploded flags, reduces in order.
OccupationEstimate tally(const Model& model, std::span<const double> x0, int env0,
                         double t, const MCOptions& opts, bool store_path,
                         const std::function<bool(const Path&)>& is_hit) {
    if (opts.n_paths <= 0) throw ConfigError("n_paths must be positive");
    if (!(t > 0.0)) throw ConfigError("horizon t must be positive");
    const auto n = static_cast<std::size_t>(opts.n_paths);
    std::vector<std::uint8_t> hit(n, 0);
    std::vector<std::uint8_t> bad(n, 0);
    const SimOptions sopts = sim_options(opts, store_path);
    parallel_for(static_cast<int>(n), opts.threads, [&](int i) {
        Path p = simulate_path(model, x0, env0, t, static_cast<std::uint64_t>(i), sopts);
        if (p.exploded) bad[static_cast<std::size_t>(i)] = 1;
        hit[static_cast<std::size_t>(i)] = !p.exploded && is_hit(p) ? 1 : 0;
    });
    long long hits = 0;
    long long exploded = 0;
    for (std::size_t i = 0; i < n; ++i) {
        hits += hit[i];
        exploded += bad[i];
    }
    OccupationEstimate e = wilson_interval(hits, opts.n_paths);
    e.x0.assign(x0.begin(), x0.end());
    e.env0 = env0;
    e.t = t;
    e.exploded = exploded;
    return e;
}

}  // namespace

OccupationEstimate wilson_interval(long long hits, long long n) {
    OccupationEstimate e;
    e.hits = hits;
    e.n = n;
    if (n <= 0) return e;
    const double nn = static_cast<double>(n);
    const double p = static_cast<double>(hits) / nn;
    const double z2 = kZ * kZ;
    const double denom = 1.0 + z2 / nn;
    const double center = (p + z2 / (2.0 * nn)) / denom;
    const double half =
        kZ * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
    e.p_hat = p;
    e.ci_lo = std::max(0.0, center - half);
    e.ci_hi = std::min(1.0, center + half);
    return e;
}

OccupationEstimate estimate_occupation(const Model& model, std::span<const double> x0,
                                       int env0, const CompactSet& K, double t,
                                       const MCOptions& opts) {
    return tally(model, x0, env0, t, opts, false, [&](const Path& p) {
        const std::size_t last = p.times.size() - 1;
        return K.contains(p.state(last, model.d), p.env[last]);
    });
}

OccupationEstimate hitting_time_probability(const Model& model,
                                            std::span<const double> x0, int env0,
                                            const CompactSet& K, double t_max,
                                            const MCOptions& opts) {
    return tally(model, x0, env0, t_max, opts, true, [&](const Path& p) {
        for (std::size_t k = 0; k < p.times.size(); ++k)
            if (K.contains(p.state(k, model.d), p.env[k])) return true;
        return false;
    });
}

MomentEstimate estimate_moments(const Model& model, std::span<const double> x0,
                                int env0, int coordinate, double t,
                                const MCOptions& opts) {
    if (opts.n_paths <= 0) throw ConfigError("estimate_moments: n_paths must be positive");
    if (coordinate < 0 || coordinate >= model.d)
        throw DimensionError("estimate_moments: coordinate out of range");
    const auto n = static_cast<std::size_t>(opts.n_paths);
    std::vector<double> value(n, 0.0);
    std::vector<std::uint8_t> bad(n, 0);
    const SimOptions sopts = sim_options(opts, false);
    parallel_for(static_cast<int>(n), opts.threads, [&](int i) {
        Path p = simulate_path(model, x0, env0, t, static_cast<std::uint64_t>(i), sopts);
        if (p.exploded) {
            bad[static_cast<std::size_t>(i)] = 1;
        } else {
            value[static_cast<std::size_t>(i)] =
                p.state(p.times.size() - 1, model.d)[static_cast<std::size_t>(coordinate)];
        }
    });

    MomentEstimate m;
    for (std::uint8_t b : bad) m.exploded += b;
    m.n = opts.n_paths - m.exploded;
    if (m.n < 2) throw NumericFailure("estimate_moments: fewer than two surviving paths");

    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        if (!bad[i]) sum += value[i];
    const double nn = static_cast<double>(m.n);
    m.mean = sum / nn;

    double m2 = 0.0, m4 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (bad[i]) continue;
        const double c = value[i] - m.mean;
        m2 += c * c;
        m4 += c * c * c * c;
    }
    m.variance = m2 / (nn - 1.0);
    m2 /= nn;
    m4 /= nn;
    m.mean_se = std::sqrt(m.variance / nn);
    // Var(s^2) = (m4 - (n-3)/(n-1) m2^2) / n for iid samples.
    const double vs2 = (m4 - (nn - 3.0) / (nn - 1.0) * m2 * m2) / nn;
    m.variance_se = std::sqrt(std::max(vs2, 0.0));
    return m;
}

const char* empirical_outcome_name(EmpiricalVerdict::Outcome o) {
    switch (o) {
        case EmpiricalVerdict::Outcome::ConsistentWithFD: return "consistent_with_fd";
        case EmpiricalVerdict::Outcome::InconsistentWithFD: return "inconsistent_with_fd";
        case EmpiricalVerdict::Outcome::Inconclusive: return "inconclusive";
    }
    return "inconclusive";
}

EmpiricalVerdict fd_empirical_verdict(const Model& model, const CompactSet& K,
                                      const std::vector<double>& radii, double eps,
                                      double t, int env0, const MCOptions& opts) {
    if (radii.size() < 4)
        throw ConfigError("fd_empirical_verdict: the radius ladder needs at least 4 rungs");
    for (std::size_t k = 1; k < radii.size(); ++k)
        if (!(radii[k - 1] < radii[k]))
            throw ConfigError("fd_empirical_verdict: radii must be strictly increasing");
    if (!(eps > 0.0)) throw ConfigError("fd_empirical_verdict: eps must be positive");
    EmpiricalVerdict rep;
    rep.eps = eps;
    rep.radii = radii;
    std::vector<double> x0(static_cast<std::size_t>(model.d), 0.0);
    for (double r : rep.radii) {
        x0[0] = r;
        rep.occupation.push_back(estimate_occupation(model, x0, env0, K, t, opts));
    }
    const std::size_t m = rep.occupation.size();
    const OccupationEstimate& last = rep.occupation[m - 1];
    const OccupationEstimate& prev = rep.occupation[m - 2];
    if (last.ci_hi < eps) {
        rep.outcome = EmpiricalVerdict::Outcome::ConsistentWithFD;
        rep.detail = "P(Y_t in K) <= " + format_bound(last.ci_hi) +
                     " (95% upper bound) at |x0| = " + format_bound(rep.radii.back()) +
                     ", below eps = " + format_bound(eps);
    } else if (last.ci_lo > eps && prev.ci_lo > eps) {
        rep.outcome = EmpiricalVerdict::Outcome::InconsistentWithFD;
        rep.detail = "P(Y_t in K) stays above eps = " + format_bound(eps) +
                     " (95% lower bounds " + format_bound(prev.ci_lo) + ", " +
                     format_bound(last.ci_lo) + " on the last two rungs)";
    } else {
        rep.outcome = EmpiricalVerdict::Outcome::Inconclusive;
        rep.detail = "final rung estimate " + format_bound(last.p_hat) +
                     " (95% interval [" + format_bound(last.ci_lo) + ", " +
                     format_bound(last.ci_hi) + "]) does not separate from eps = " +
                     format_bound(eps);
    }
    return rep;
}

}  // namespace fellerdyn
