#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fellerdyn/expr.hpp"
#include "fellerdyn/model.hpp"

namespace fellerdyn {

/// A function on R^d x {environments}: either one shared expression (which
/// may reference the environment variable i) or one expression per
/// environment. Countable environment spaces require the shared form.
struct EnvExpr {
    std::vector<Expr> per_env;

    [[nodiscard]] bool shared() const { return per_env.size() == 1; }
    [[nodiscard]] const Expr& for_env(int env) const {
        return shared() ? per_env[0] : per_env[static_cast<std::size_t>(env) - 1];
    }
    [[nodiscard]] double eval(std::span<const double> x, int env) const {
        return for_env(env).eval(x, env);
    }
};

/// Compact subset of the state space: a box in R^d times a set of
/// environments. An empty env list means every environment.
struct CompactSet {
    std::vector<std::array<double, 2>> box;  // per-axis [lo, hi]
    std::vector<int> envs;

    [[nodiscard]] bool contains(std::span<const double> x) const {
        for (std::size_t k = 0; k < box.size(); ++k)
            if (x[k] < box[k][0] || x[k] > box[k][1]) return false;
        return true;
    }
    [[nodiscard]] bool contains(std::span<const double> x, int env) const {
        if (!envs.empty() && std::find(envs.begin(), envs.end(), env) == envs.end())
            return false;
        return contains(x);
    }
};

/// Symbolic application of the full generator: drift and diffusion terms via
/// expression differentiation, plus the switching term (dense and
/// state-dependent rates as explicit sums over target environments,
/// birth-death ladders via shifts of the environment variable). Birth-death
/// models keep the shared shape; finite environment spaces come back with one
/// expression per environment.
EnvExpr apply_generator(const Model& model, const EnvExpr& f);

struct LyapunovOptions {
    int grid_density = 201;
    std::vector<double> ladder;  // radius rungs, default {1e1..1e6}
    int n_max = 200;
    double slack = 1e-9;  // relative tolerance on inequality checks
};

// Point pinning a failed condition: lhs is the offending value there, rhs the
// bound it had to satisfy.
struct CertificateWitness {
    std::vector<double> x;
    int env = 1;
    double lhs = 0.0;
    double rhs = 0.0;
};

struct CertificateReport {
    bool holds = false;
    double margin = 0.0;        // worst signed violation of the generator bound
    double min_on_K = 0.0;      // forward certificates
    double max_on_K = 0.0;      // reject certificates
    double decay_ratio = 0.0;   // ladder tail sup / first rung sup
    double bound_sup = 0.0;     // sup of the certificate over all samples
    double inf_outside = 0.0;   // reject certificates: inf over S \ C
    long long grid_size = 0;    // number of (x, env) points evaluated
    std::string violated_condition;  // first failed condition, empty if holds
    std::optional<CertificateWitness> witness;  // set iff !holds
    std::vector<std::string> violations;
};

/// Forward certificate (proves the Feller-Dynkin property):
///   V >= 0, V positive on K, V vanishes at infinity, LV <= c V everywhere.
CertificateReport check_forward_certificate(const Model& model, const EnvExpr& V,
                                            const CompactSet& K, double c,
                                            const LyapunovOptions& opts = {});

/// Rejection certificate (disproves it):
///   U bounded, U positive somewhere on K, inf_{S \ C} U > 0,
///   LU >= alpha U on S \ K with alpha > 0.
CertificateReport check_reject_certificate(const Model& model, const EnvExpr& U,
                                           const CompactSet& K, const CompactSet& C,
                                           double alpha,
                                           const LyapunovOptions& opts = {});

/// Smallest c with LV <= c V on the sampled state space: grid sup of LV/V
/// refined by coordinate-wise golden-section ascent. Returns +inf when the
/// ratio keeps growing along the radius ladder.
double fit_c(const Model& model, const EnvExpr& V, const LyapunovOptions& opts = {});

}  // namespace fellerdyn
