#include "property_suites.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fellerdyn/classify1d.hpp"
#include "fellerdyn/expr.hpp"
#include "fellerdyn/lyapunov.hpp"
#include "fellerdyn/model.hpp"

#include "test_models.hpp"

using namespace fellerdyn;
using nlohmann::json;

namespace {

// Random expression trees over x1..xd and the environment variable i.
// `smooth` drops abs/min/max (kinks break finite-difference checks) and
// keeps exponents integral so negative bases stay differentiable.
class ExprGen {
public:
    ExprGen(std::mt19937_64& rng, int d, bool smooth, bool allow_env)
        : rng_(rng), d_(d), smooth_(smooth), allow_env_(allow_env) {}

    Expr gen(int depth) {
        std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 9);
        switch (pick(rng_)) {
            case 0:
                return Expr::constant(constant());
            case 1: {
                if (allow_env_ && flip(0.2)) return Expr::env_var();
                std::uniform_int_distribution<int> v(1, d_);
                return Expr::var(v(rng_));
            }
            case 2:
                return Expr::add(gen(depth - 1), gen(depth - 1));
            case 3:
                return Expr::sub(gen(depth - 1), gen(depth - 1));
            case 4:
                return Expr::mul(gen(depth - 1), gen(depth - 1));
            case 5:
                return Expr::div(gen(depth - 1), gen(depth - 1));
            case 6: {
                std::uniform_int_distribution<int> e(smooth_ ? 1 : -3, 4);
                int k = e(rng_);
                if (k == 0) k = 2;
                return Expr::pow(gen(depth - 1), static_cast<double>(k));
            }
            case 7:
                return Expr::neg(gen(depth - 1));
            default: {
                std::uniform_int_distribution<int> f(0, smooth_ ? 4 : 8);
                auto func = static_cast<Expr::Func>(f(rng_));
                std::vector<Expr> args;
                args.push_back(gen(depth - 1));
                if (func == Expr::Func::Min || func == Expr::Func::Max)
                    args.push_back(gen(depth - 1));
                return Expr::call(func, std::move(args));
            }
        }
    }

private:
    double constant() {
        std::uniform_real_distribution<double> u(-4.0, 4.0);
        double v = u(rng_);
        if (flip(0.3)) v = std::round(v);
        return v;
    }
    bool flip(double p) {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        return u(rng_) < p;
    }

    std::mt19937_64& rng_;
    int d_;
    bool smooth_;
    bool allow_env_;
};

bool is_fin(double v) { return std::isfinite(v); }

}  // namespace

SuiteResult prop_parser_roundtrip(int min_cases) {
    std::mt19937_64 rng(0x5eed0001);
    ExprGen gen(rng, 3, false, true);
    SuiteResult out;
    while (out.cases < min_cases) {
        Expr e = gen.gen(5);
        ++out.cases;
        Expr back = parse_expression(e.print(), 3);
        if (!back.equals(e)) {
            ++out.failures;
            if (out.detail.empty()) out.detail = "round-trip changed: " + e.print();
        }
    }
    return out;
}

SuiteResult prop_derivative_matches_fd(int min_cases) {
    std::mt19937_64 rng(0x5eed0002);
    const int d = 2;
    ExprGen gen(rng, d, true, false);
    std::uniform_real_distribution<double> point(-2.0, 2.0);
    std::uniform_int_distribution<int> which(1, d);
    SuiteResult out;
    int attempts = 0;
    while (out.cases < min_cases && attempts < 100 * min_cases) {
        ++attempts;
        Expr e = gen.gen(4);
        int var = which(rng);
        std::vector<double> x = {point(rng), point(rng)};
        Expr de = differentiate(e, var);

        // fourth-order central stencil in coordinate `var`
        auto at = [&](double shift) {
            std::vector<double> y = x;
            y[static_cast<std::size_t>(var - 1)] += shift;
            return e.eval(y, 1.0);
        };
        auto stencil = [&](double h) {
            return (at(-2 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2 * h)) / (12.0 * h);
        };
        double sym = de.eval(x, 1.0);
        double f0 = at(0.0);
        if (!is_fin(sym) || !is_fin(f0) || std::abs(f0) > 1e4) continue;
        double fd1 = stencil(1e-3);
        double fd2 = stencil(5e-4);
        if (!is_fin(fd1) || !is_fin(fd2) || std::abs(fd2) > 1e4) continue;
        // require the stencil to have converged in h before trusting it;
        // this screens out points too close to a pole or kink
        if (std::abs(fd1 - fd2) > 1e-8 * std::max(1.0, std::abs(fd2))) continue;

        ++out.cases;
        double err = std::abs(fd2 - sym) / std::max(1.0, std::abs(sym));
        if (err > 1e-6) {
            ++out.failures;
            if (out.detail.empty()) {
                std::ostringstream os;
                os << "d/dx" << var << " of " << e.print() << " at (" << x[0] << ", " << x[1]
                   << "): symbolic " << sym << " vs stencil " << fd2;
                out.detail = os.str();
            }
        }
    }
    return out;
}

SuiteResult prop_generator_linearity(int min_cases) {
    std::mt19937_64 rng(0x5eed0003);
    std::vector<Model> models;
    models.push_back(load_model(testmodels::brownian_nd(1)));
    models.push_back(load_model(testmodels::switching_ou()));
    models.push_back(load_model(testmodels::quartic()));
    models.push_back(load_model(testmodels::switching_ou_statedep()));

    std::uniform_real_distribution<double> coeff(-3.0, 3.0);
    std::uniform_real_distribution<double> point(-2.0, 2.0);
    SuiteResult out;
    int attempts = 0;
    while (out.cases < min_cases && attempts < 100 * min_cases) {
        ++attempts;
        const Model& model = models[static_cast<std::size_t>(attempts) % models.size()];
        ExprGen gen(rng, model.d, true, model.n_envs > 1);

        EnvExpr f, g, combo;
        double alpha = coeff(rng), beta = coeff(rng);
        int rows = model.n_envs;
        for (int r = 0; r < rows; ++r) {
            Expr fe = gen.gen(3), ge = gen.gen(3);
            f.per_env.push_back(fe);
            g.per_env.push_back(ge);
            combo.per_env.push_back(Expr::add(Expr::mul(Expr::constant(alpha), fe),
                                              Expr::mul(Expr::constant(beta), ge)));
        }

        EnvExpr lf = apply_generator(model, f);
        EnvExpr lg = apply_generator(model, g);
        EnvExpr lc = apply_generator(model, combo);

        std::vector<double> x(static_cast<std::size_t>(model.d));
        for (double& v : x) v = point(rng);
        std::uniform_int_distribution<int> env_pick(1, model.n_envs);
        int env = env_pick(rng);

        double a = lf.eval(x, env), b = lg.eval(x, env), c = lc.eval(x, env);
        if (!is_fin(a) || !is_fin(b) || !is_fin(c)) continue;
        double scale = std::max({1.0, std::abs(alpha * a), std::abs(beta * b), std::abs(c)});
        if (scale > 1e12) continue;

        ++out.cases;
        double err = std::abs(c - (alpha * a + beta * b)) / scale;
        if (err > 1e-10) {
            ++out.failures;
            if (out.detail.empty()) {
                std::ostringstream os;
                os << "L(af+bg) != aLf + bLg: err " << err << " at env " << env;
                out.detail = os.str();
            }
        }
    }
    return out;
}

namespace {

// Rescale a corpus model: a -> c a, b -> c b (expression-level, so the
// classifier sees a genuinely different document).
json scaled_model(const json& base, double c) {
    std::ostringstream cs;
    cs.precision(17);
    cs << c;
    json doc = base;
    for (auto& row : doc["drift"])
        for (auto& e : row) e = "(" + cs.str() + ") * (" + e.get<std::string>() + ")";
    for (auto& row : doc["diffusion"])
        for (auto& mat : row)
            for (auto& e : mat) e = "(" + cs.str() + ") * (" + e.get<std::string>() + ")";
    return doc;
}

}  // namespace

SuiteResult prop_classify_scaling(int min_cases) {
    std::mt19937_64 rng(0x5eed0004);
    std::uniform_real_distribution<double> logc(-2.0, 2.0);
    const std::vector<json> corpus = {testmodels::quartic(), testmodels::brownian2(),
                                      testmodels::switching_ou()};
    std::vector<Verdict::Outcome> base;
    for (const auto& doc : corpus) base.push_back(classify_fd_1d(load_model(doc)).outcome);

    SuiteResult out;
    while (out.cases < min_cases) {
        for (std::size_t m = 0; m < corpus.size() && out.cases < min_cases; ++m) {
            double c = std::pow(10.0, logc(rng));
            Verdict v = classify_fd_1d(load_model(scaled_model(corpus[m], c)));
            ++out.cases;
            if (v.outcome != base[m]) {
                ++out.failures;
                if (out.detail.empty()) {
                    std::ostringstream os;
                    os << "verdict flipped under c = " << c << " on corpus model " << m << ": "
                       << verdict_name(base[m]) << " -> " << verdict_name(v.outcome);
                    out.detail = os.str();
                }
            }
        }
    }
    return out;
}

SuiteResult prop_certificate_scaling(int min_cases) {
    std::mt19937_64 rng(0x5eed0005);
    std::uniform_real_distribution<double> loglam(-6.0, 6.0);

    struct Case {
        Model model;
        double c;
    };
    std::vector<Case> cases;
    cases.push_back({load_model(testmodels::brownian_nd(1)), 0.57});  // holds
    cases.push_back({load_model(testmodels::brownian_nd(1)), 0.50});  // violated
    cases.push_back({load_model(testmodels::switching_ou()), 2.10});  // holds

    CompactSet K;
    K.box.push_back({-1.0, 1.0});

    std::vector<bool> base;
    for (const auto& cs : cases) {
        EnvExpr V;
        V.per_env.push_back(parse_expression("(1 + x1^2)^-1", 1));
        base.push_back(check_forward_certificate(cs.model, V, K, cs.c).holds);
    }

    SuiteResult out;
    while (out.cases < min_cases) {
        for (std::size_t m = 0; m < cases.size() && out.cases < min_cases; ++m) {
            double lam = std::pow(10.0, loglam(rng));
            std::ostringstream ls;
            ls.precision(17);
            ls << lam;
            EnvExpr V;
            V.per_env.push_back(
                parse_expression("(" + ls.str() + ") * (1 + x1^2)^-1", 1));
            bool holds = check_forward_certificate(cases[m].model, V, K, cases[m].c).holds;
            ++out.cases;
            if (holds != base[m]) {
                ++out.failures;
                if (out.detail.empty()) {
                    std::ostringstream os;
                    os << "certificate verdict flipped under lambda = " << lam << " (case " << m
                       << ", c = " << cases[m].c << ")";
                    out.detail = os.str();
                }
            }
        }
    }
    return out;
}
