#include "fellerdyn/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "fellerdyn/errors.hpp"
#include "fellerdyn/quadrature.hpp"

namespace fellerdyn {

namespace {

Expr subst_env(const Expr& e, const Expr& repl) {
    const auto& n = e.node();
    using K = Expr::Kind;
    auto sub = [&](std::size_t k) { return subst_env(n.kids[k], repl); };
    switch (n.kind) {
        case K::Const:
        case K::Var: return e;
        case K::EnvVar: return repl;
        case K::Add: return Expr::add(sub(0), sub(1));
        case K::Sub: return Expr::sub(sub(0), sub(1));
        case K::Mul: return Expr::mul(sub(0), sub(1));
        case K::Div: return Expr::div(sub(0), sub(1));
        case K::Pow: return Expr::pow(sub(0), n.value);
        case K::Neg: return Expr::neg(sub(0));
        case K::Call: {
            std::vector<Expr> kids;
            kids.reserve(n.kids.size());
            for (std::size_t k = 0; k < n.kids.size(); ++k) kids.push_back(sub(k));
            return Expr::call(n.func, std::move(kids));
        }
    }
    return e;
}

// Drift + diffusion part of the generator applied to fe, with coefficient
// expressions already specialized to the target environment slot.
Expr diffusion_drift_part(const Model& model, const Expr& fe,
                          const std::function<Expr(int, int)>& drift,
                          const std::function<Expr(int, int, int)>& diff) {
    Expr acc = Expr::constant(0.0);
    std::vector<Expr> grad(static_cast<std::size_t>(model.d));
    for (int k = 0; k < model.d; ++k) {
        grad[static_cast<std::size_t>(k)] = differentiate(fe, k + 1);
        acc = Expr::add(acc, Expr::mul(drift(k, 0), grad[static_cast<std::size_t>(k)]));
    }
    for (int k = 0; k < model.d; ++k) {
        for (int l = 0; l < model.d; ++l) {
            Expr second = differentiate(grad[static_cast<std::size_t>(k)], l + 1);
            acc = Expr::add(acc,
                            Expr::mul(Expr::constant(0.5), Expr::mul(diff(k, l, 0), second)));
        }
    }
    return acc;
}

}  // namespace

EnvExpr apply_generator(const Model& model, const EnvExpr& f) {
    if (f.per_env.empty()) throw ConfigError("empty certificate expression");
    if (model.countable_envs && !f.shared())
        throw ConfigError("countable environment spaces need a single shared expression");
    if (!f.shared() && static_cast<int>(f.per_env.size()) != model.n_envs)
        throw ConfigError("certificate must supply 1 or n_envs expressions");

    EnvExpr out;
    if (model.countable_envs) {
        const auto& bd = std::get<BirthDeathQ>(model.q);
        const Expr& fe = f.per_env[0];
        Expr L = diffusion_drift_part(
            model, fe, [&](int k, int) { return model.drift_expr(1, k); },
            [&](int k, int l, int) { return model.diffusion_expr(1, k, l); });
        Expr i = Expr::env_var();
        Expr up = subst_env(fe, Expr::add(i, Expr::constant(1.0)));
        Expr down = subst_env(fe, Expr::sub(i, Expr::constant(1.0)));
        Expr birth = Expr::mul(Expr::constant(bd.lambda), Expr::pow(i, bd.alpha));
        // min(i-1, 1) gates the death rate so the bottom rung reflects.
        Expr gate = Expr::call(Expr::Func::Min,
                               {Expr::sub(i, Expr::constant(1.0)), Expr::constant(1.0)});
        Expr death = Expr::mul(Expr::constant(bd.mu), Expr::mul(Expr::pow(i, bd.alpha), gate));
        L = Expr::add(L, Expr::mul(birth, Expr::sub(up, fe)));
        L = Expr::add(L, Expr::mul(death, Expr::sub(down, fe)));
        out.per_env.push_back(fold_constants(L));
        return out;
    }

    const int N = model.n_envs;
    std::vector<Expr> f_at(static_cast<std::size_t>(N));
    for (int j = 1; j <= N; ++j) {
        Expr fe = f.for_env(j);
        f_at[static_cast<std::size_t>(j) - 1] =
            fe.uses_env_var() ? subst_env(fe, Expr::constant(j)) : fe;
    }
    for (int env = 1; env <= N; ++env) {
        const Expr& fe = f_at[static_cast<std::size_t>(env) - 1];
        auto spec = [&](Expr e) {
            return e.uses_env_var() ? subst_env(e, Expr::constant(env)) : e;
        };
        Expr L = diffusion_drift_part(
            model, fe, [&](int k, int) { return spec(model.drift_expr(env, k)); },
            [&](int k, int l, int) { return spec(model.diffusion_expr(env, k, l)); });
        if (const auto* dense = std::get_if<DenseQ>(&model.q)) {
            for (int j = 1; j <= N; ++j) {
                if (j == env) continue;
                const double rate =
                    dense->rates[static_cast<std::size_t>(env) - 1][static_cast<std::size_t>(j) - 1];
                if (rate == 0.0) continue;
                L = Expr::add(L, Expr::mul(Expr::constant(rate),
                                           Expr::sub(f_at[static_cast<std::size_t>(j) - 1], fe)));
            }
        } else if (const auto* sdep = std::get_if<StateDependentQ>(&model.q)) {
            for (int j = 1; j <= N; ++j) {
                if (j == env) continue;
                const Expr& rate =
                    sdep->rates[static_cast<std::size_t>(env) - 1][static_cast<std::size_t>(j) - 1];
                L = Expr::add(L, Expr::mul(rate,
                                           Expr::sub(f_at[static_cast<std::size_t>(j) - 1], fe)));
            }
        }
        out.per_env.push_back(fold_constants(L));
    }
    return out;
}

namespace {

std::vector<std::vector<double>> box_samples(const std::vector<std::array<double, 2>>& box,
                                             int grid_density) {
    const int d = static_cast<int>(box.size());
    std::vector<std::vector<double>> pts;
    if (d == 1) {
        const int n = std::max(grid_density, 2);
        for (int k = 0; k < n; ++k) {
            const double t = static_cast<double>(k) / (n - 1);
            pts.push_back({box[0][0] + t * (box[0][1] - box[0][0])});
        }
        return pts;
    }
    const int n = std::min(4096, std::max(grid_density, 64) * 16);
    auto unit = halton_points(n, d);
    for (auto& u : unit) {
        std::vector<double> x(static_cast<std::size_t>(d));
        for (int k = 0; k < d; ++k)
            x[static_cast<std::size_t>(k)] =
                box[static_cast<std::size_t>(k)][0] +
                u[static_cast<std::size_t>(k)] *
                    (box[static_cast<std::size_t>(k)][1] - box[static_cast<std::size_t>(k)][0]);
        pts.push_back(std::move(x));
    }
    // Corners and center sharpen the sup when d is small.
    if (d <= 8) {
        for (int mask = 0; mask < (1 << d); ++mask) {
            std::vector<double> x(static_cast<std::size_t>(d));
            for (int k = 0; k < d; ++k)
                x[static_cast<std::size_t>(k)] = box[static_cast<std::size_t>(k)][(mask >> k) & 1];
            pts.push_back(std::move(x));
        }
    }
    std::vector<double> c(static_cast<std::size_t>(d));
    for (int k = 0; k < d; ++k)
        c[static_cast<std::size_t>(k)] =
            0.5 * (box[static_cast<std::size_t>(k)][0] + box[static_cast<std::size_t>(k)][1]);
    pts.push_back(std::move(c));
    return pts;
}

std::string point_string(std::span<const double> x, int env) {
    std::ostringstream os;
    os << "x=(";
    for (std::size_t k = 0; k < x.size(); ++k) os << (k ? "," : "") << x[k];
    os << "), i=" << env;
    return os.str();
}

struct SampleSweep {
    std::vector<std::vector<double>> box_pts;
    std::vector<std::pair<double, std::vector<double>>> ladder_pts;  // (R, x)
    int envs = 1;
};

SampleSweep make_sweep(const Model& model, const LyapunovOptions& opts) {
    SampleSweep sw;
    std::vector<std::array<double, 2>> box;
    for (const auto& ax : model.sampling_box) box.push_back({ax.first, ax.second});
    sw.box_pts = box_samples(box, opts.grid_density);
    auto dirs = sphere_directions(model.d, model.d == 1 ? 2 : 2 * model.d + 16);
    std::vector<double> ladder = opts.ladder.empty() ? default_ladder() : opts.ladder;
    for (double R : ladder)
        for (const auto& th : dirs) {
            std::vector<double> x(static_cast<std::size_t>(model.d));
            for (int k = 0; k < model.d; ++k) x[static_cast<std::size_t>(k)] = R * th[static_cast<std::size_t>(k)];
            sw.ladder_pts.emplace_back(R, std::move(x));
        }
    sw.envs = model.envs_for_analysis(opts.n_max);
    return sw;
}

}  // namespace

CertificateReport check_forward_certificate(const Model& model, const EnvExpr& V,
                                            const CompactSet& K, double c,
                                            const LyapunovOptions& opts) {
    CertificateReport rep;
    EnvExpr LV = apply_generator(model, V);
    SampleSweep sw = make_sweep(model, opts);

    auto note = [&](const std::string& s) {
        if (rep.violations.size() < 10) rep.violations.push_back(s);
    };

    bool nonneg = true;
    double worst = -std::numeric_limits<double>::infinity();
    CertificateWitness gap_w, neg_w;
    auto check_point = [&](std::span<const double> x, int env) {
        const double v = V.eval(x, env);
        const double lv = LV.eval(x, env);
        if (!std::isfinite(v) || !std::isfinite(lv))
            throw NumericFailure("certificate not finite at " + point_string(x, env));
        ++rep.grid_size;
        rep.bound_sup = std::max(rep.bound_sup, v);
        if (v < -opts.slack) {
            if (nonneg) neg_w = {{x.begin(), x.end()}, env, v, 0.0};
            nonneg = false;
            note("V < 0 at " + point_string(x, env));
        }
        const double gap = lv - c * v;
        if (gap > worst) {
            worst = gap;
            gap_w = {{x.begin(), x.end()}, env, lv, c * v};
        }
        const double rel = gap / std::max({1.0, std::abs(lv), std::abs(c * v)});
        if (rel > opts.slack) note("LV > c V at " + point_string(x, env));
        return rel <= opts.slack;
    };

    bool generator_ok = true;
    for (int env = 1; env <= sw.envs; ++env) {
        for (const auto& x : sw.box_pts) generator_ok &= check_point(x, env);
        for (const auto& [R, x] : sw.ladder_pts) generator_ok &= check_point(x, env);
    }
    rep.margin = worst;

    // Positivity on K (only over K's own environments).
    std::vector<std::array<double, 2>> kbox = K.box;
    double minK = std::numeric_limits<double>::infinity();
    CertificateWitness minK_w;
    for (const auto& x : box_samples(kbox, std::max(64, opts.grid_density / 2)))
        for (int env = 1; env <= sw.envs; ++env)
            if (K.contains(x, env)) {
                const double v = V.eval(x, env);
                if (v < minK) {
                    minK = v;
                    minK_w = {{x.begin(), x.end()}, env, v, 0.0};
                }
            }
    rep.min_on_K = minK;
    if (!(minK > 0.0)) note("min of V on K is not positive");

    // Vanishing at infinity along the radius ladder.
    std::vector<double> rungs;
    std::vector<double> sups;
    CertificateWitness decay_w;
    for (const auto& [R, x] : sw.ladder_pts) {
        double s = 0.0;
        int argenv = 1;
        for (int env = 1; env <= sw.envs; ++env) {
            const double v = V.eval(x, env);
            if (env == 1 || v > s) {
                s = std::max(s, v);
                argenv = env;
            }
        }
        if (!rungs.empty() && rungs.back() == R) {
            if (s > sups.back()) {
                sups.back() = s;
                decay_w = {{x.begin(), x.end()}, argenv, s, 0.0};
            }
        } else {
            rungs.push_back(R);
            sups.push_back(s);
            decay_w = {{x.begin(), x.end()}, argenv, s, 0.0};
        }
    }
    bool decays = true;
    for (std::size_t k = 1; k < sups.size(); ++k)
        if (sups[k] > 1.2 * sups[k - 1] + 1e-300) decays = false;
    rep.decay_ratio = sups.empty() || sups.front() <= 0.0
                          ? 0.0
                          : sups.back() / sups.front();
    if (!decays || rep.decay_ratio > 1e-3) {
        decays = false;
        note("V does not decay along the radius ladder");
    }

    rep.holds = generator_ok && nonneg && minK > 0.0 && decays;
    if (!rep.holds) {
        if (!nonneg) {
            rep.violated_condition = "nonnegativity";
            rep.witness = neg_w;
        } else if (!decays) {
            rep.violated_condition = "vanishing_at_infinity";
            decay_w.rhs = sups.empty() ? 0.0 : 1e-3 * sups.front();
            rep.witness = decay_w;
        } else if (!(minK > 0.0)) {
            rep.violated_condition = "positive_on_K";
            rep.witness = minK_w;
        } else {
            rep.violated_condition = "generator_bound";
            rep.witness = gap_w;
        }
    }
    return rep;
}

CertificateReport check_reject_certificate(const Model& model, const EnvExpr& U,
                                           const CompactSet& K, const CompactSet& C,
                                           double alpha, const LyapunovOptions& opts) {
    if (!(alpha > 0.0)) throw ConfigError("rejection certificate needs alpha > 0");
    CertificateReport rep;
    EnvExpr LU = apply_generator(model, U);
    SampleSweep sw = make_sweep(model, opts);

    auto note = [&](const std::string& s) {
        if (rep.violations.size() < 10) rep.violations.push_back(s);
    };

    bool nonneg = true;
    bool generator_ok = true;
    double worst = std::numeric_limits<double>::infinity();
    rep.inf_outside = std::numeric_limits<double>::infinity();
    CertificateWitness gap_w, neg_w, inf_w;
    auto visit = [&](std::span<const double> x, int env) {
        const double u = U.eval(x, env);
        const double lu = LU.eval(x, env);
        if (!std::isfinite(u) || !std::isfinite(lu))
            throw NumericFailure("certificate not finite at " + point_string(x, env));
        ++rep.grid_size;
        rep.bound_sup = std::max(rep.bound_sup, std::abs(u));
        if (u < -opts.slack) {
            if (nonneg) neg_w = {{x.begin(), x.end()}, env, u, 0.0};
            nonneg = false;
            note("U < 0 at " + point_string(x, env));
        }
        if (!C.contains(x, env) && u < rep.inf_outside) {
            rep.inf_outside = u;
            inf_w = {{x.begin(), x.end()}, env, u, 0.0};
        }
        if (!K.contains(x, env)) {
            const double gap = alpha * u - lu;  // want LU >= alpha U
            if (-gap < worst) {
                worst = -gap;
                gap_w = {{x.begin(), x.end()}, env, lu, alpha * u};
            }
            const double rel = gap / std::max({1.0, std::abs(lu), std::abs(alpha * u)});
            if (rel > opts.slack) {
                generator_ok = false;
                note("LU < alpha U at " + point_string(x, env));
            }
        }
    };
    for (int env = 1; env <= sw.envs; ++env) {
        for (const auto& x : sw.box_pts) visit(x, env);
        for (const auto& [R, x] : sw.ladder_pts) visit(x, env);
    }
    rep.margin = worst;

    double maxK = -std::numeric_limits<double>::infinity();
    CertificateWitness maxK_w;
    for (const auto& x : box_samples(K.box, std::max(64, opts.grid_density / 2)))
        for (int env = 1; env <= sw.envs; ++env)
            if (K.contains(x, env)) {
                const double u = U.eval(x, env);
                if (u > maxK) {
                    maxK = u;
                    maxK_w = {{x.begin(), x.end()}, env, u, 0.0};
                }
            }
    rep.max_on_K = maxK;
    if (!(maxK > 0.0)) note("U is not positive anywhere on K");

    if (!(rep.inf_outside > 0.0)) note("inf of U outside C is not positive");

    rep.holds = generator_ok && nonneg && maxK > 0.0 && rep.inf_outside > 0.0;
    if (!rep.holds) {
        if (!nonneg) {
            rep.violated_condition = "nonnegativity";
            rep.witness = neg_w;
        } else if (!(maxK > 0.0)) {
            rep.violated_condition = "positive_on_K";
            rep.witness = maxK_w;
        } else if (!(rep.inf_outside > 0.0)) {
            rep.violated_condition = "positive_inf_outside_C";
            rep.witness = inf_w;
        } else {
            rep.violated_condition = "generator_bound";
            rep.witness = gap_w;
        }
    }
    return rep;
}

double fit_c(const Model& model, const EnvExpr& V, const LyapunovOptions& opts) {
    EnvExpr LV = apply_generator(model, V);
    SampleSweep sw = make_sweep(model, opts);

    auto ratio = [&](std::span<const double> x, int env) {
        const double v = V.eval(x, env);
        const double lv = LV.eval(x, env);
        if (!(v > 0.0))
            throw NonPositiveV("V must be positive for fit_c; " + point_string(x, env));
        return lv / v;
    };

    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> best_x;
    int best_env = 1;
    for (int env = 1; env <= sw.envs; ++env) {
        for (const auto& x : sw.box_pts) {
            const double g = ratio(x, env);
            if (g > best) {
                best = g;
                best_x = x;
                best_env = env;
            }
        }
    }

    // Coordinate-wise golden-section ascent around the grid argmax.
    const double phi = 0.6180339887498949;
    for (int round = 0; round < 3; ++round) {
        for (int k = 0; k < model.d; ++k) {
            const auto& ax = model.sampling_box[static_cast<std::size_t>(k)];
            const double span = (ax.second - ax.first) /
                                std::max(1, opts.grid_density - 1);
            double lo = std::max(ax.first, best_x[static_cast<std::size_t>(k)] - 2.0 * span);
            double hi = std::min(ax.second, best_x[static_cast<std::size_t>(k)] + 2.0 * span);
            auto at = [&](double t) {
                std::vector<double> x = best_x;
                x[static_cast<std::size_t>(k)] = t;
                return ratio(x, best_env);
            };
            double a = hi - phi * (hi - lo), b = lo + phi * (hi - lo);
            double fa = at(a), fb = at(b);
            for (int it = 0; it < 60 && hi - lo > 1e-12 * (1.0 + std::abs(lo)); ++it) {
                if (fa < fb) {
                    lo = a;
                    a = b;
                    fa = fb;
                    b = lo + phi * (hi - lo);
                    fb = at(b);
                } else {
                    hi = b;
                    b = a;
                    fb = fa;
                    a = hi - phi * (hi - lo);
                    fa = at(a);
                }
            }
            const double mid = 0.5 * (lo + hi);
            const double fm = at(mid);
            if (fm > best) {
                best = fm;
                best_x[static_cast<std::size_t>(k)] = mid;
            }
        }
    }

    // Radius ladder: growing sup means no finite c works.
    std::vector<double> rungs, sups;
    for (const auto& [R, x] : sw.ladder_pts) {
        double s = -std::numeric_limits<double>::infinity();
        for (int env = 1; env <= sw.envs; ++env) s = std::max(s, ratio(x, env));
        if (!rungs.empty() && rungs.back() == R)
            sups.back() = std::max(sups.back(), s);
        else {
            rungs.push_back(R);
            sups.push_back(s);
        }
    }
    const std::size_t n = sups.size();
    if (n >= 3 && sups[n - 1] > sups[n - 2] && sups[n - 2] > sups[n - 3] &&
        sups[n - 1] > best + 1e-9 * (1.0 + std::abs(best)))
        return std::numeric_limits<double>::infinity();
    for (double s : sups) best = std::max(best, s);
    return best;
}

}  // namespace fellerdyn
