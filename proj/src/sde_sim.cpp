#include "fellerdyn/sde_sim.hpp"

#include <algorithm>
#include <cmath>

#include "fellerdyn/errors.hpp"
#include "fellerdyn/rng.hpp"

namespace fellerdyn {

namespace {

constexpr double kExplosionBound = 1e150;

struct Stepper {
    const Model& model;
    const SimOptions& opts;
    Path& path;
    NormalStream normals;
    std::vector<double> x, b, a, xi;
    double t = 0.0;
    int env = 1;

    Stepper(const Model& m, const SimOptions& o, Path& p, std::mt19937_64 gauss,
            std::span<const double> x0, int env0)
        : model(m), opts(o), path(p), normals(gauss),
          x(x0.begin(), x0.end()), b(static_cast<std::size_t>(m.d)),
          a(static_cast<std::size_t>(m.d) * static_cast<std::size_t>(m.d)),
          xi(static_cast<std::size_t>(m.d)), env(env0) {}

    void record() {
        if (!opts.store_path && !path.times.empty()) {
            path.times.back() = t;
            std::copy(x.begin(), x.end(),
                      path.y.end() - static_cast<std::ptrdiff_t>(model.d));
            path.env.back() = env;
            return;
        }
        path.times.push_back(t);
        path.y.insert(path.y.end(), x.begin(), x.end());
        path.env.push_back(env);
    }

    [[nodiscard]] bool out_of_bounds() const {
        for (double v : x)
            if (!std::isfinite(v) || std::abs(v) > kExplosionBound) return true;
        return false;
    }

    // One tamed Euler-Maruyama step of at most h_max; returns the step taken.
    double step(double h_max) {
        const int d = model.d;
        model.eval_drift(x, env, b);
        model.eval_diffusion(x, env, a);
        if (d == 1) {
            const double h = std::min(h_max, opts.dt / (1.0 + std::abs(b[0]) + a[0]));
            if (!(a[0] >= 0.0))
                throw NonPositiveDiffusion("a = " + std::to_string(a[0]) +
                                           " at x = " + std::to_string(x[0]));
            x[0] += b[0] * h + std::sqrt(a[0] * h) * normals.next();
            t += h;
            return h;
        }
        double bnorm = 0.0, tr = 0.0;
        for (int k = 0; k < d; ++k) {
            bnorm += b[static_cast<std::size_t>(k)] * b[static_cast<std::size_t>(k)];
            tr += a[static_cast<std::size_t>(k) * static_cast<std::size_t>(d) + static_cast<std::size_t>(k)];
        }
        bnorm = std::sqrt(bnorm);
        const double h = std::min(h_max, opts.dt / (1.0 + bnorm + tr));
        MatrixRoot root = matrix_root(a, d);
        const double sqh = std::sqrt(h);
        for (int k = 0; k < d; ++k) xi[static_cast<std::size_t>(k)] = normals.next();
        for (int k = 0; k < d; ++k) {
            double noise = 0.0;
            for (int l = 0; l <= k; ++l)
                noise += root.L[static_cast<std::size_t>(k) * static_cast<std::size_t>(d) + static_cast<std::size_t>(l)] *
                         xi[static_cast<std::size_t>(l)];
            x[static_cast<std::size_t>(k)] += b[static_cast<std::size_t>(k)] * h + noise * sqh;
        }
        t += h;
        return h;
    }
};

}  // namespace

Path simulate_path_state_independent(const Model& model, std::span<const double> x0,
                                     int env0, double t_end, std::uint64_t path_index,
                                     const SimOptions& opts) {
    Path path;
    path.stream_id = stream_seed(opts.master_seed, path_index, kBrownianStream);
    path.dt_base = opts.dt;
    ChainPath chain = simulate_chain(
        model, env0, t_end, stream_seed(opts.master_seed, path_index, kChainStream));
    path.jump_times.assign(chain.times.begin() + 1, chain.times.end());

    Stepper st(model, opts, path,
               std::mt19937_64(path.stream_id), x0, env0);
    st.record();
    for (std::size_t seg = 0; seg < chain.states.size(); ++seg) {
        st.env = chain.states[seg];
        const double seg_end =
            (seg + 1 < chain.times.size()) ? chain.times[seg + 1] : t_end;
        if (seg > 0) st.record();  // environment change at the jump instant
        while (st.t < seg_end) {
            if (st.out_of_bounds()) {
                path.exploded = true;
                return path;
            }
            st.step(seg_end - st.t);
            st.record();
        }
        st.t = seg_end;  // kill accumulated rounding drift
    }
    return path;
}

Path simulate_path_state_dependent(const Model& model, std::span<const double> x0,
                                   int env0, double t_end, std::uint64_t path_index,
                                   const SimOptions& opts) {
    Path path;
    path.stream_id = stream_seed(opts.master_seed, path_index, kBrownianStream);
    path.dt_base = opts.dt;
    std::mt19937_64 chain_rng(stream_seed(opts.master_seed, path_index, kChainStream));

    Stepper st(model, opts, path, std::mt19937_64(path.stream_id), x0, env0);
    st.record();
    while (st.t < t_end) {
        if (st.out_of_bounds()) {
            path.exploded = true;
            return path;
        }
        const double leave = -model.q_diag(st.x, st.env);
        const double h = st.step(t_end - st.t);
        const double p_jump = leave * h;
        if (p_jump > 0.1)
            throw StepTooLarge("switching rate * step = " + std::to_string(p_jump) +
                               " > 0.1; reduce dt");
        if (p_jump > 0.0 && uniform01(chain_rng) < p_jump) {
            auto row = model.q_row(st.x, st.env);
            double u = uniform01(chain_rng) * leave;
            int next = row.back().first;
            for (const auto& [j, rate] : row) {
                if (u < rate) {
                    next = j;
                    break;
                }
                u -= rate;
            }
            st.env = next;
            path.jump_times.push_back(st.t);
        }
        st.record();
    }
    return path;
}

Path simulate_path(const Model& model, std::span<const double> x0, int env0,
                   double t_end, std::uint64_t path_index, const SimOptions& opts) {
    if (static_cast<int>(x0.size()) != model.d)
        throw DimensionError("initial state size does not match the model dimension");
    if (env0 < 1 || env0 > model.envs_for_analysis(1 << 20))
        throw ConfigError("initial environment out of range");
    return model.state_independent_q()
               ? simulate_path_state_independent(model, x0, env0, t_end, path_index, opts)
               : simulate_path_state_dependent(model, x0, env0, t_end, path_index, opts);
}

}  // namespace fellerdyn
