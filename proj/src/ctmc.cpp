#include "fellerdyn/ctmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fellerdyn/errors.hpp"
#include "fellerdyn/rng.hpp"

namespace fellerdyn {

int ChainPath::state_at(double t) const {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    const std::size_t k = static_cast<std::size_t>(it - times.begin());
    return states[k > 0 ? k - 1 : 0];
}

ChainPath simulate_chain(const Model& model, int start_env, double t_end,
                         std::uint64_t seed) {
    if (!model.state_independent_q())
        throw ConfigError("simulate_chain needs state-independent rates");
    ChainPath path;
    path.t_end = t_end;
    path.times.push_back(0.0);
    path.states.push_back(start_env);

    std::mt19937_64 rng(seed);
    std::vector<double> origin(static_cast<std::size_t>(model.d), 0.0);
    double t = 0.0;
    int env = start_env;
    while (t < t_end) {
        const double leave = -model.q_diag(origin, env);
        if (!(leave > 0.0)) break;  // absorbing
        t += -std::log(uniform01(rng)) / leave;
        if (t >= t_end) break;
        auto row = model.q_row(origin, env);
        double u = uniform01(rng) * leave;
        int next = row.back().first;
        for (const auto& [j, rate] : row) {
            if (u < rate) {
                next = j;
                break;
            }
            u -= rate;
        }
        env = next;
        path.times.push_back(t);
        path.states.push_back(env);
    }
    return path;
}

BirthDeathReport birthdeath_rs_test(double alpha, double lambda, double mu,
                                    ProbeOptions opts) {
    if (!(lambda > 0.0) || !(mu > 0.0))
        throw ConfigError("birth-death rates must be positive");
    if (opts.ladder.empty()) opts.ladder = {1e2, 1e3, 1e4, 1e5};

    // r_n = (1/lambda) (mu/lambda)^n sum_{j=1..n} (lambda/mu)^j j^-alpha.
    // The inner sum is kept in streaming log-scaled form (value w, exponent E)
    // so neither factor over- or underflows before the divergence cap fires.
    // probe_series calls term(n) once, sequentially, which the closure relies on.
    const double lr = std::log(lambda / mu);
    auto r_term = [alpha, lambda, lr, w = 0.0, E = -std::numeric_limits<double>::infinity()](
                      long long n) mutable {
        const double ln_t = static_cast<double>(n) * lr - alpha * std::log(static_cast<double>(n));
        if (ln_t > E) {
            w = w * std::exp(E - ln_t) + 1.0;
            E = ln_t;
        } else {
            w += std::exp(ln_t - E);
        }
        const double ln_rn = E - static_cast<double>(n) * lr + std::log(w) - std::log(lambda);
        return std::exp(std::min(ln_rn, 693.0));  // clamp far beyond the cap
    };
    const double ratio_up = lambda / mu;
    auto s_term = [alpha, mu, ratio_up](long long n) {
        // s_n = (1/mu_{n+1}) sum_{k=0..n} (lambda/mu)^k
        const double np1 = static_cast<double>(n + 1);
        const double ln_mu_next = std::log(mu) + alpha * std::log(np1);
        if (ratio_up == 1.0) return std::exp(std::log(np1) - ln_mu_next);
        if (ratio_up < 1.0) {
            const double series =
                (1.0 - std::pow(ratio_up, np1)) / (1.0 - ratio_up);
            return series * std::exp(-ln_mu_next);
        }
        const double ln_series =
            np1 * std::log(ratio_up) - std::log(ratio_up - 1.0);
        return std::exp(std::min(ln_series - ln_mu_next, 693.0));
    };

    BirthDeathReport rep;
    rep.r_series = probe_series(r_term, opts);
    rep.s_series = probe_series(s_term, opts);
    using O = DivergenceVerdict::Outcome;
    if (rep.r_series.outcome == O::Diverges && rep.s_series.outcome == O::Diverges)
        rep.outcome = Verdict::Outcome::FellerDynkin;
    else if (rep.r_series.outcome == O::Converges || rep.s_series.outcome == O::Converges)
        rep.outcome = Verdict::Outcome::NotFellerDynkin;
    else
        rep.outcome = Verdict::Outcome::Inconclusive;
    return rep;
}

bool powerlaw_verdict(double alpha, double lambda, double mu) {
    return alpha <= 1.0 || (alpha <= 2.0 && lambda == mu);
}

}  // namespace fellerdyn
