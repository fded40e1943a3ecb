#include "fellerdyn/classify1d.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "fellerdyn/errors.hpp"
#include "fellerdyn/expr.hpp"
#include "fellerdyn/parallel.hpp"

namespace fellerdyn {

namespace {

ProbeOptions probe_opts(const ClassifyOptions& opts) {
    ProbeOptions po;
    if (!opts.ladder.empty()) po.ladder = opts.ladder;
    return po;
}

// Hypothesis check: a(.,i) must be strictly positive. Sampled on a geometric
// grid; a witness point is reported on failure.
void check_diffusion_positive(const Model& model, int env) {
    auto probe = [&](double u) {
        double x[1] = {u};
        double a[1];
        model.eval_diffusion(x, env, a);
        if (!(a[0] > 0.0) || !std::isfinite(a[0])) {
            std::ostringstream os;
            os << "a(x,i) = " << a[0] << " at x=" << u << ", i=" << env;
            throw NonPositiveDiffusion(os.str());
        }
    };
    probe(0.0);
    for (double mag = 1e-3; mag <= 1e6; mag *= 10.0) {
        for (double mult : {1.0, 2.0, 5.0}) {
            probe(mag * mult);
            probe(-mag * mult);
        }
    }
}

}  // namespace

double ScaleData::s(double y) const { return std::exp(-2.0 * (*B)(y)); }

double ScaleData::m(double u) const { return std::exp(2.0 * (*B)(u)) / a(u); }

ScaleData make_scale_data(const Model& model, int env) {
    if (model.d != 1) throw DimensionError("scale data requires a one-dimensional state space");
    check_diffusion_positive(model, env);
    ScaleData sd;
    sd.env = env;
    const Model* m = &model;
    sd.a = [m, env](double u) {
        double x[1] = {u};
        double a[1];
        m->eval_diffusion(x, env, a);
        return a[0];
    };
    auto ratio = [m, env](double u) {
        double x[1] = {u};
        double b[1], a[1];
        m->eval_drift(x, env, b);
        m->eval_diffusion(x, env, a);
        return b[0] / a[0];
    };
    sd.B = std::make_shared<CumulativeIntegral>(ratio, 0.0);
    return sd;
}

DivergenceVerdict feller_nonexplosion_side(const Model& model, const ScaleData& sd,
                                           bool positive_side, const ClassifyOptions& opts) {
    (void)model;
    double sign = positive_side ? 1.0 : -1.0;
    // kappa(x) = int_0^x s(y) int_0^y 2 m(u) du dy, probed as a forward fold
    // so that only the difference B(u) - B(y) enters the exponent.
    auto Bdir = [&, sign](double u) { return 2.0 * (*sd.B)(sign * u); };
    auto weight = [&, sign](double u) { return 2.0 / sd.a(sign * u); };
    return probe_double_head(Bdir, weight, 0.0, probe_opts(opts));
}

DivergenceVerdict feller_nonexplosion_test(const Model& model, int env,
                                           const ClassifyOptions& opts) {
    ScaleData sd = make_scale_data(model, env);
    DivergenceVerdict plus = feller_nonexplosion_side(model, sd, true, opts);
    DivergenceVerdict minus = feller_nonexplosion_side(model, sd, false, opts);
    DivergenceVerdict out;
    out.ladder = plus.ladder;
    std::ostringstream os;
    os << "x->+inf: " << plus.rationale << "; x->-inf: " << minus.rationale;
    out.rationale = os.str();
    using O = DivergenceVerdict::Outcome;
    if (plus.outcome == O::Diverges && minus.outcome == O::Diverges) {
        out.outcome = O::Diverges;
    } else if (plus.outcome == O::Converges || minus.outcome == O::Converges) {
        out.outcome = O::Converges;
    } else {
        out.outcome = O::Inconclusive;
    }
    return out;
}

namespace {

// One half-line of the integral tests. positive_side selects (a1)/(a2)
// versus their mirrored (b1)/(b2) forms.
void classify_side(const ScaleData& sd, bool positive_side, const ClassifyOptions& opts,
                   EnvEvidence& ev) {
    double sign = positive_side ? 1.0 : -1.0;
    ProbeOptions po = probe_opts(opts);

    auto scale_density = [&, sign](double y) { return sd.s(sign * y); };
    DivergenceVerdict first = probe_divergence(scale_density, 0.0, po);
    ev.tests.push_back({positive_side ? "a1" : "b1", sd.env, first});

    using O = DivergenceVerdict::Outcome;
    EnvEvidence::Side& side = positive_side ? ev.plus : ev.minus;
    if (first.outcome == O::Converges) {
        side = EnvEvidence::Side::Pass;
        return;
    }

    // (a2)/(b2): divergence of int_0^inf s(y) int_y^inf m(u) du dy in the
    // folded form int_0^inf [ int_y^inf e^{2(B(u)-B(y))} / a(u) du ] dy.
    // Failing the side needs definite evidence on both tests, so an
    // inconclusive first test can still pass through a divergent second.
    auto Bdir = [&, sign](double u) { return 2.0 * (*sd.B)(sign * u); };
    auto weight = [&, sign](double u) { return 1.0 / sd.a(sign * u); };
    DivergenceVerdict second = probe_double_tail(Bdir, weight, 0.0, po);
    ev.tests.push_back({positive_side ? "a2" : "b2", sd.env, second});
    if (second.outcome == O::Diverges) {
        side = EnvEvidence::Side::Pass;
    } else if (second.outcome == O::Converges && first.outcome == O::Diverges) {
        side = EnvEvidence::Side::Fail;
    } else {
        side = EnvEvidence::Side::Unknown;
    }
}

}  // namespace

EnvEvidence classify_env(const Model& model, int env, const ClassifyOptions& opts) {
    EnvEvidence ev;
    ev.env = env;

    Expr drift = fold_constants(model.drift_expr(env, 0));
    ev.driftless = drift.is_zero();

    ScaleData sd = make_scale_data(model, env);
    classify_side(sd, true, opts, ev);
    classify_side(sd, false, opts, ev);

    if (ev.driftless) {
        // With b = 0 the scale density is 1 and the two-sided test collapses
        // (Fubini) to the divergence of int_0^inf u / a du on each side. The
        // plain ladder probe carries much tighter value estimates than the
        // trapezoid over inner probes, so it decides and the battery above
        // stays as corroborating evidence.
        ProbeOptions po = probe_opts(opts);
        const Model* m = &model;
        auto shortcut = [m, env](double sign) {
            return [m, env, sign](double u) {
                double x[1] = {sign * u};
                double a[1];
                m->eval_diffusion(x, env, a);
                return u / a[0];
            };
        };
        DivergenceVerdict plus = probe_divergence(shortcut(1.0), 0.0, po);
        DivergenceVerdict minus = probe_divergence(shortcut(-1.0), 0.0, po);
        ev.tests.push_back({"shortcut_plus", env, plus});
        ev.tests.push_back({"shortcut_minus", env, minus});
        auto to_side = [](const DivergenceVerdict& v) {
            using O = DivergenceVerdict::Outcome;
            if (v.outcome == O::Diverges) return EnvEvidence::Side::Pass;
            if (v.outcome == O::Converges) return EnvEvidence::Side::Fail;
            return EnvEvidence::Side::Unknown;
        };
        ev.plus = to_side(plus);
        ev.minus = to_side(minus);
    }
    return ev;
}

const char* verdict_name(Verdict::Outcome o) {
    switch (o) {
        case Verdict::Outcome::FellerDynkin: return "feller_dynkin";
        case Verdict::Outcome::NotFellerDynkin: return "not_feller_dynkin";
        default: return "inconclusive";
    }
}

Verdict classify_fd_1d(const Model& model, const ClassifyOptions& opts) {
    if (model.d != 1)
        throw DimensionError("the 1d classifier requires a one-dimensional state space");
    if (!model.state_independent_q())
        throw ConfigError("the 1d classifier requires state-independent switching rates");

    int n_envs = model.envs_for_analysis(opts.n_max);
    if (const auto* dense = std::get_if<DenseQ>(&model.q); dense && model.n_envs > 1) {
        for (int i = 0; i < static_cast<int>(dense->rates.size()); ++i) {
            if (dense->rates[i][i] == 0.0) {
                std::ostringstream os;
                os << "environment " << (i + 1) << " is absorbing (q_ii = 0)";
                throw AbsorbingState(os.str());
            }
        }
    }

    struct PerEnv {
        EnvEvidence ev;
        DivergenceVerdict fc_plus, fc_minus;
    };
    std::vector<PerEnv> results(n_envs);
    int threads = resolve_threads(opts.threads);
    parallel_for(n_envs, threads, [&](int k) {
        int env = k + 1;
        ScaleData sd = make_scale_data(model, env);
        results[k].fc_plus = feller_nonexplosion_side(model, sd, true, opts);
        results[k].fc_minus = feller_nonexplosion_side(model, sd, false, opts);
        results[k].ev = classify_env(model, env, opts);
    });

    Verdict verdict;
    verdict.cb_feller_assumed = true;
    bool fc_all_hold = true;
    bool fc_any_fail = false;
    bool all_pass = true;
    bool any_fail = false;
    bool any_unknown = false;
    for (int k = 0; k < n_envs; ++k) {
        const PerEnv& pe = results[k];
        int env = k + 1;
        verdict.evidence.push_back({"fc_plus", env, pe.fc_plus});
        verdict.evidence.push_back({"fc_minus", env, pe.fc_minus});
        for (const auto& t : pe.ev.tests) verdict.evidence.push_back(t);
        using O = DivergenceVerdict::Outcome;
        bool fc_holds = pe.fc_plus.outcome == O::Diverges && pe.fc_minus.outcome == O::Diverges;
        bool fc_fails =
            pe.fc_plus.outcome == O::Converges || pe.fc_minus.outcome == O::Converges;
        verdict.feller_nonexplosion.emplace_back(env, fc_holds);
        fc_all_hold = fc_all_hold && fc_holds;
        fc_any_fail = fc_any_fail || fc_fails;
        all_pass = all_pass && pe.ev.passed();
        any_fail = any_fail || pe.ev.failed();
        any_unknown = any_unknown || (!pe.ev.passed() && !pe.ev.failed());
    }

    if (model.countable_envs && n_envs >= 4) {
        // Truncation sensitivity: the per-environment outcome must be stable
        // across the top half of the truncated range.
        auto sig = [&](int k) {
            const EnvEvidence& e = results[k].ev;
            using O = DivergenceVerdict::Outcome;
            bool fc = results[k].fc_plus.outcome == O::Diverges &&
                      results[k].fc_minus.outcome == O::Diverges;
            return std::make_tuple(e.plus, e.minus, fc);
        };
        bool stable = true;
        for (int k = n_envs / 2; k < n_envs; ++k) {
            if (sig(k) != sig(n_envs / 2)) stable = false;
        }
        std::ostringstream os;
        os << "environment space truncated at n_max=" << n_envs;
        if (!stable) {
            os << "; per-environment outcomes vary across the top half of the truncation range";
            verdict.note = os.str();
            verdict.outcome = Verdict::Outcome::Inconclusive;
            return verdict;
        }
        os << "; outcomes stable across the top half";
        verdict.note = os.str();
    }

    if (fc_any_fail) {
        verdict.outcome = Verdict::Outcome::Inconclusive;
        std::string msg = "non-explosion prerequisite fails for some environment";
        verdict.note = verdict.note.empty() ? msg : verdict.note + "; " + msg;
        return verdict;
    }
    if (!fc_all_hold) {
        verdict.outcome = Verdict::Outcome::Inconclusive;
        std::string msg = "non-explosion prerequisite could not be certified";
        verdict.note = verdict.note.empty() ? msg : verdict.note + "; " + msg;
        return verdict;
    }

    if (any_fail) {
        verdict.outcome = Verdict::Outcome::NotFellerDynkin;
    } else if (all_pass) {
        verdict.outcome = Verdict::Outcome::FellerDynkin;
    } else {
        verdict.outcome = Verdict::Outcome::Inconclusive;
        (void)any_unknown;
    }
    return verdict;
}

}  // namespace fellerdyn
