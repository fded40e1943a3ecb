#include "fellerdyn/radial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>

#include "fellerdyn/errors.hpp"

namespace fellerdyn {

namespace {

int auto_samples(int d, int requested) {
    if (requested > 0) return requested;
    return d == 1 ? 2 : 2 * d + 128;
}

}  // namespace

/// Lazily grown table of (ln r, ln a_d, b_d) on a geometric grid (64 nodes
/// per octave), queried with 4-point Lagrange interpolation.
class RadialTable {
public:
    RadialTable(const Model& model, EnvelopeDirection dir, int samples, int n_max)
        : model_(&model), dir_(dir), n_max_(n_max),
          dirs_(sphere_directions(model.d, auto_samples(model.d, samples))) {
        nodes_.push_back(make_node(0.0));  // r = 1
    }

    double a_of(double r) { return std::exp(interp(std::log(r), true)); }
    double b_of(double r) { return interp(std::log(r), false); }

    void raw(double r, double& a_out, double& b_out) const {
        const bool upper = dir_ == EnvelopeDirection::Upper;
        double a_env = upper ? -std::numeric_limits<double>::infinity()
                             : std::numeric_limits<double>::infinity();
        double b_env = upper ? std::numeric_limits<double>::infinity()
                             : -std::numeric_limits<double>::infinity();
        const int d = model_->d;
        const double rad = std::sqrt(2.0 * r);
        std::vector<double> x(d), b(d), a(static_cast<std::size_t>(d) * d);
        const int envs = model_->envs_for_analysis(n_max_);
        for (int env = 1; env <= envs; ++env) {
            for (const auto& th : dirs_) {
                for (int k = 0; k < d; ++k) x[k] = rad * th[k];
                model_->eval_drift(x, env, b);
                model_->eval_diffusion(x, env, a);
                double A = 0.0, trace = 0.0, xb = 0.0;
                for (int k = 0; k < d; ++k) {
                    trace += a[static_cast<std::size_t>(k) * d + k];
                    xb += x[k] * b[k];
                    for (int l = 0; l < d; ++l)
                        A += x[k] * a[static_cast<std::size_t>(k) * d + l] * x[l];
                }
                if (!(A > 0.0)) {
                    std::ostringstream os;
                    os << "<x, a x> = " << A << " at |x|^2/2 = " << r << ", i = " << env;
                    throw DegenerateDiffusion(os.str());
                }
                const double G = (trace + 2.0 * xb) / A;
                if (upper) {
                    a_env = std::max(a_env, A);
                    b_env = std::min(b_env, G);
                } else {
                    a_env = std::min(a_env, A);
                    b_env = std::max(b_env, G);
                }
            }
        }
        a_out = a_env;
        b_out = b_env;
    }

private:
    struct Node {
        double lr, la, b;
    };

    Node make_node(double lr) const {
        double a, b;
        raw(std::exp(lr), a, b);
        if (!(a > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
            std::ostringstream os;
            os << "radial envelope not finite/positive at r = " << std::exp(lr);
            throw NumericFailure(os.str());
        }
        return {lr, std::log(a), b};
    }

    double interp(double lr, bool want_a) {
        std::lock_guard<std::mutex> lock(mu_);
        while (lr > nodes_.back().lr - 1.5 * kStep)
            nodes_.push_back(make_node(nodes_.back().lr + kStep));
        while (lr < nodes_.front().lr + 1.5 * kStep)
            nodes_.insert(nodes_.begin(), make_node(nodes_.front().lr - kStep));
        auto it = std::lower_bound(nodes_.begin(), nodes_.end(), lr,
                                   [](const Node& n, double v) { return n.lr < v; });
        std::size_t j = static_cast<std::size_t>(it - nodes_.begin());
        if (j == 0) j = 1;
        // 4-point Lagrange around the bracketing pair.
        std::size_t lo = (j >= 2) ? j - 2 : 0;
        lo = std::min(lo, nodes_.size() - 4);
        double acc = 0.0;
        for (std::size_t p = lo; p < lo + 4; ++p) {
            double w = 1.0;
            for (std::size_t q = lo; q < lo + 4; ++q) {
                if (q == p) continue;
                w *= (lr - nodes_[q].lr) / (nodes_[p].lr - nodes_[q].lr);
            }
            acc += w * (want_a ? nodes_[p].la : nodes_[p].b);
        }
        return acc;
    }

    static constexpr double kStep = 0.01083042469624914;  // ln(2)/64

    const Model* model_;
    EnvelopeDirection dir_;
    int n_max_;
    std::vector<std::vector<double>> dirs_;
    std::vector<Node> nodes_;
    std::mutex mu_;
};

RadialEnvelope make_radial_envelope(const Model& model, EnvelopeDirection dir,
                                    const RadialOptions& opts) {
    RadialEnvelope env;
    env.d = model.d;
    env.direction = dir;
    env.sphere_samples = auto_samples(model.d, opts.sphere_samples);
    env.table = std::make_shared<RadialTable>(model, dir, opts.sphere_samples, opts.n_max);
    auto tab = env.table;
    env.a_d = [tab](double r) { return tab->a_of(r); };
    env.b_d = [tab](double r) { return tab->b_of(r); };
    env.B = std::make_shared<CumulativeIntegral>(env.b_d, 1.0);
    return env;
}

const char* radial_conclusion_name(RadialReport::Conclusion c) {
    switch (c) {
        case RadialReport::Conclusion::FellerFC1: return "fc1";
        case RadialReport::Conclusion::FellerFC2: return "fc2";
        case RadialReport::Conclusion::NotFeller: return "reject";
        default: return "inconclusive";
    }
}

RadialReport khasminskii_p_tests(const RadialEnvelope& env, const RadialOptions& opts) {
    ProbeOptions po;
    if (!opts.ladder.empty()) po.ladder = opts.ladder;
    RadialReport rep;
    rep.direction = env.direction;
    auto B = env.B;
    auto p_prime = [B](double y) { return std::exp(-(*B)(y)); };
    rep.p_probe = probe_divergence(p_prime, 1.0, po);

    const bool upper = env.direction == EnvelopeDirection::Upper;
    if (rep.p_probe.converges()) {
        rep.p_limit = rep.p_probe.estimate->value;
        if (upper) {
            rep.conclusion = RadialReport::Conclusion::FellerFC1;
            rep.detail = "p(inf) finite under upper envelopes";
        } else {
            rep.conclusion = RadialReport::Conclusion::Inconclusive;
            rep.detail = "p bounded under lower envelopes carries no rejection";
        }
        return rep;
    }
    if (rep.p_probe.inconclusive()) {
        rep.conclusion = RadialReport::Conclusion::Inconclusive;
        rep.detail = "p probe inconclusive";
        return rep;
    }

    // p unbounded: decide via the nested integral
    // int_1^inf p'(y) int_y^inf dz / (a_d(z) p'(z)) dy.
    auto a_d = env.a_d;
    auto Bfun = [B](double u) { return (*B)(u); };
    auto w = [a_d](double z) { return 1.0 / a_d(z); };
    rep.nested_probe = probe_double_tail(Bfun, w, 1.0, po);
    const auto& nested = *rep.nested_probe;
    if (upper) {
        if (nested.diverges()) {
            rep.conclusion = RadialReport::Conclusion::FellerFC2;
            rep.detail = "p unbounded and nested integral diverges";
        } else {
            rep.conclusion = RadialReport::Conclusion::Inconclusive;
            rep.detail = nested.converges()
                             ? "nested integral finite under upper envelopes is uninformative"
                             : "nested integral inconclusive";
        }
    } else {
        if (nested.converges()) {
            rep.conclusion = RadialReport::Conclusion::NotFeller;
            rep.detail = "p unbounded and nested integral finite under lower envelopes";
        } else {
            rep.conclusion = RadialReport::Conclusion::Inconclusive;
            rep.detail = nested.diverges()
                             ? "nested integral diverges under lower envelopes is uninformative"
                             : "nested integral inconclusive";
        }
    }
    return rep;
}

namespace {

// Fornberg finite-difference weights for derivative order m at x0 on
// arbitrary nodes x (returns weights for orders 0..m; row m used).
std::vector<double> fd_weights(const std::vector<double>& x, double x0, int m) {
    const int n = static_cast<int>(x.size());
    std::vector<std::vector<double>> c(static_cast<std::size_t>(n),
                                       std::vector<double>(m + 1, 0.0));
    double c1 = 1.0;
    double c4 = x[0] - x0;
    c[0][0] = 1.0;
    for (int i = 1; i < n; ++i) {
        const int mn = std::min(i, m);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = x[i] - x0;
        for (int j = 0; j < i; ++j) {
            const double c3 = x[i] - x[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k)
                    c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for (int k = mn; k >= 1; --k)
                c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out[i] = c[i][m];
    return out;
}

struct Shot {
    enum class End { HitZero, Turned, Reached, Underflow, Stalled };
    End end = End::Stalled;
    double r_end = 0.0;
};

// Cash-Karp RK45 on u' = v, v' = 2u/a_d - b_d v.
template <typename Record>
Shot shoot(const RadialEnvelope& env, double sigma, double r_max, double rtol,
           Record&& record) {
    double r = 0.5, u = 1.0, v = sigma;
    record(r, u, v);
    auto rhs = [&](double rr, double uu, double vv, double& du, double& dv) {
        du = vv;
        dv = 2.0 * uu / env.a_d(rr) - env.b_d(rr) * vv;
    };
    double h = 1e-3;
    constexpr double kA[5] = {0.2, 0.3, 0.6, 1.0, 0.875};
    constexpr double kB[5][5] = {
        {0.2, 0, 0, 0, 0},
        {3.0 / 40, 9.0 / 40, 0, 0, 0},
        {0.3, -0.9, 1.2, 0, 0},
        {-11.0 / 54, 2.5, -70.0 / 27, 35.0 / 27, 0},
        {1631.0 / 55296, 175.0 / 512, 575.0 / 13824, 44275.0 / 110592, 253.0 / 4096}};
    constexpr double kC[6] = {37.0 / 378, 0, 250.0 / 621, 125.0 / 594, 0, 512.0 / 1771};
    constexpr double kD[6] = {2825.0 / 27648, 0,         18575.0 / 48384,
                              13525.0 / 55296, 277.0 / 14336, 0.25};
    Shot shot;
    int steps = 0;
    while (r < r_max) {
        if (++steps > 2000000) throw ShootingFailed("step budget exhausted");
        const double cap = 0.02 * std::max(r, 1.0);
        h = std::min({h, cap, r_max - r});
        double ku[6], kv[6];
        rhs(r, u, v, ku[0], kv[0]);
        bool bad = false;
        for (int s = 1; s < 6 && !bad; ++s) {
            double uu = u, vv = v;
            for (int j = 0; j < s; ++j) {
                uu += h * kB[s - 1][j] * ku[j];
                vv += h * kB[s - 1][j] * kv[j];
            }
            rhs(r + kA[s - 1] * h, uu, vv, ku[s], kv[s]);
            if (!std::isfinite(ku[s]) || !std::isfinite(kv[s])) bad = true;
        }
        double u5 = u, v5 = v, u4 = u, v4 = v;
        if (!bad) {
            for (int s = 0; s < 6; ++s) {
                u5 += h * kC[s] * ku[s];
                v5 += h * kC[s] * kv[s];
                u4 += h * kD[s] * ku[s];
                v4 += h * kD[s] * kv[s];
            }
        }
        const double scale = std::max({std::abs(u), std::abs(v), 1e-290});
        const double err =
            bad ? 1e300 : std::max(std::abs(u5 - u4), std::abs(v5 - v4)) / scale;
        if (err > rtol) {
            h *= std::max(0.2, 0.9 * std::pow(rtol / err, 0.25));
            if (h < 1e-13 * std::max(r, 1.0)) {
                shot.end = Shot::End::Stalled;
                shot.r_end = r;
                return shot;
            }
            continue;
        }
        r += h;
        u = u5;
        v = v5;
        record(r, u, v);
        if (u <= 0.0) {
            shot.end = Shot::End::HitZero;
            shot.r_end = r;
            return shot;
        }
        if (v > 0.0) {
            shot.end = Shot::End::Turned;
            shot.r_end = r;
            return shot;
        }
        if (u < 1e-250) {
            shot.end = Shot::End::Underflow;
            shot.r_end = r;
            return shot;
        }
        h *= std::min(5.0, std::max(0.2, 0.9 * std::pow(rtol / std::max(err, 1e-30), 0.2)));
    }
    shot.end = Shot::End::Reached;
    shot.r_end = r;
    return shot;
}

}  // namespace

Ode2Solution solve_ode2(const RadialEnvelope& env, double r_max, double rtol) {
    auto classify = [&](double sigma) {
        return shoot(env, sigma, r_max, rtol, [](double, double, double) {});
    };

    // Bracket the separatrix slope: sigma_hi turns upward, sigma_lo hits zero.
    double sigma_hi = 0.0;
    double sigma_lo = -1.0;
    bool have_lo = false;
    double accepted = std::numeric_limits<double>::quiet_NaN();
    for (int k = 0; k < 80; ++k) {
        Shot s = classify(sigma_lo);
        if (s.end == Shot::End::HitZero) {
            have_lo = true;
            break;
        }
        if (s.end == Shot::End::Reached || s.end == Shot::End::Underflow) {
            have_lo = true;
            accepted = sigma_lo;
            break;
        }
        sigma_hi = sigma_lo;
        sigma_lo *= 2.0;
    }
    if (!have_lo) throw ShootingFailed("no zero-hitting initial slope found");

    double best_sigma = sigma_lo;
    double best_rend = -1.0;
    for (int it = 0; it < 200 && std::isnan(accepted); ++it) {
        const double mid = 0.5 * (sigma_lo + sigma_hi);
        if (!(sigma_lo < mid && mid < sigma_hi)) break;
        Shot s = classify(mid);
        if (s.end == Shot::End::Reached || s.end == Shot::End::Underflow) {
            accepted = mid;
            break;
        }
        if (s.r_end > best_rend) {
            best_rend = s.r_end;
            best_sigma = mid;
        }
        if (s.end == Shot::End::HitZero)
            sigma_lo = mid;
        else
            sigma_hi = mid;
        if (sigma_hi - sigma_lo <= 4e-16 * std::max(1.0, std::abs(sigma_lo))) break;
    }
    const double sigma = std::isnan(accepted) ? best_sigma : accepted;

    Ode2Solution sol;
    sol.sigma = sigma;
    Shot fin = shoot(env, sigma, r_max, rtol, [&](double r, double u, double v) {
        sol.r.push_back(r);
        sol.u.push_back(u);
        sol.du.push_back(v);
    });
    // Keep only the decreasing positive prefix.
    std::size_t keep = sol.r.size();
    for (std::size_t k = 0; k < sol.r.size(); ++k) {
        if (sol.u[k] <= 0.0 || (k > 0 && sol.du[k] > 0.0)) {
            keep = k;
            break;
        }
    }
    sol.r.resize(keep);
    sol.u.resize(keep);
    sol.du.resize(keep);
    if (sol.r.empty()) throw ShootingFailed("empty trajectory");
    sol.r_end = sol.r.back();
    sol.truncated = fin.end != Shot::End::Reached || sol.r_end < r_max * (1.0 - 1e-9);

    double tail_sum = 0.0;
    int tail_n = 0;
    for (std::size_t k = 0; k < sol.r.size(); ++k) {
        if (sol.r[k] >= 0.1 * sol.r_end) {
            tail_sum += sol.u[k];
            ++tail_n;
        }
    }
    sol.tail_limit_estimate = tail_n ? tail_sum / tail_n : sol.u.back();
    sol.limit_positive = !sol.truncated && sol.u.back() > 1e-6 &&
                         std::abs(sol.du.back()) * sol.r_end < 0.1 * sol.u.back();

    // Independent residual check: Fornberg 7-point differentiation of the
    // stored u-values against the ODE, away from the peel-off tail.
    const double r_cut = sol.truncated ? 0.8 * sol.r_end : sol.r_end;
    double max_res = 0.0;
    const std::size_t n = sol.r.size();
    for (std::size_t k = 3; k + 3 < n; ++k) {
        if (sol.r[k] > r_cut) break;
        if (sol.u[k] < 1e-240) break;
        std::vector<double> xs(sol.r.begin() + static_cast<std::ptrdiff_t>(k) - 3,
                               sol.r.begin() + static_cast<std::ptrdiff_t>(k) + 4);
        std::vector<double> w1 = fd_weights(xs, sol.r[k], 1);
        std::vector<double> w2 = fd_weights(xs, sol.r[k], 2);
        double du = 0.0, d2u = 0.0;
        for (int j = 0; j < 7; ++j) {
            du += w1[static_cast<std::size_t>(j)] * sol.u[k - 3 + static_cast<std::size_t>(j)];
            d2u += w2[static_cast<std::size_t>(j)] * sol.u[k - 3 + static_cast<std::size_t>(j)];
        }
        const double lhs = 0.5 * env.a_d(sol.r[k]) * (d2u + env.b_d(sol.r[k]) * du);
        const double res = std::abs(lhs - sol.u[k]) / std::max(sol.u[k], 1e-240);
        max_res = std::max(max_res, res);
    }
    sol.max_residual = max_res;
    return sol;
}

GrowthReport growth_check(const Model& model, const RadialOptions& opts) {
    GrowthReport rep;
    auto dirs = sphere_directions(model.d, auto_samples(model.d, opts.sphere_samples));
    const int envs = model.envs_for_analysis(opts.n_max);
    const int d = model.d;
    std::vector<double> x(d), b(d), a(static_cast<std::size_t>(d) * d);
    std::vector<double> radii = opts.ladder.empty() ? default_ladder() : opts.ladder;
    radii.insert(radii.begin(), 1.0);
    for (double R : radii) {
        double sb = 0.0, sa = 0.0;
        double sd = -std::numeric_limits<double>::infinity();
        for (int env = 1; env <= envs; ++env) {
            for (const auto& th : dirs) {
                for (int k = 0; k < d; ++k) x[k] = R * th[k];
                model.eval_drift(x, env, b);
                model.eval_diffusion(x, env, a);
                double nb = 0.0, tr = 0.0, xb = 0.0;
                for (int k = 0; k < d; ++k) {
                    nb += b[k] * b[k];
                    tr += a[static_cast<std::size_t>(k) * d + k];
                    xb += x[k] * b[k];
                }
                sb = std::max(sb, std::sqrt(nb) / (1.0 + R));
                sa = std::max(sa, tr / (1.0 + R * R));
                sd = std::max(sd, (2.0 * xb + tr) / (1.0 + R * R));
            }
        }
        rep.radii.push_back(R);
        rep.sup_drift.push_back(sb);
        rep.sup_diffusion_trace.push_back(sa);
        rep.sup_dissipativity.push_back(sd);
    }
    const std::size_t n = rep.radii.size();
    // Growth of the normalized sups over the last two rungs; 0 when the sup
    // has hit zero or gone negative (trivially bounded).
    auto slope = [&](const std::vector<double>& v) {
        if (n < 2 || v[n - 1] <= 0.0 || v[n - 2] <= 0.0) return 0.0;
        return std::log(v[n - 1] / v[n - 2]) / std::log(rep.radii[n - 1] / rep.radii[n - 2]);
    };
    rep.beta_drift = slope(rep.sup_drift) + 1.0;
    rep.beta_diffusion = slope(rep.sup_diffusion_trace) + 2.0;
    rep.linear_growth =
        slope(rep.sup_drift) <= 0.05 && slope(rep.sup_diffusion_trace) <= 0.05;
    rep.existence_bound = slope(rep.sup_dissipativity) <= 0.05;
    rep.existence_constant =
        *std::max_element(rep.sup_dissipativity.begin(), rep.sup_dissipativity.end());
    return rep;
}

}  // namespace fellerdyn
