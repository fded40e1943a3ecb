#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fellerdyn/ctmc.hpp"
#include "fellerdyn/model.hpp"

namespace fellerdyn {

/// One simulated trajectory of the switching diffusion. y is row-major
/// (times.size() x d); env[k] is the environment on [times[k], times[k+1]).
/// Steps are tamed Euler-Maruyama: the base step dt shrinks locally by
/// 1 / (1 + |b| + trace a), so superlinear coefficients cannot blow the
/// scheme up; a path is flagged exploded once |y| leaves [-1e150, 1e150].
struct Path {
    std::vector<double> times;
    std::vector<double> y;  // row-major
    std::vector<int> env;
    std::vector<double> jump_times;
    std::uint64_t stream_id = 0;
    double dt_base = 1e-3;
    std::string scheme = "tamed_euler";
    bool exploded = false;

    [[nodiscard]] std::span<const double> state(std::size_t k, int d) const {
        return {y.data() + static_cast<std::ptrdiff_t>(k) * d, static_cast<std::size_t>(d)};
    }
};

struct SimOptions {
    double dt = 1e-3;
    std::uint64_t master_seed = 42;
    bool store_path = true;  // false keeps only the terminal state
};

/// State-independent switching: the environment chain is drawn exactly first
/// (its own substream), then the diffusion is integrated between jumps,
/// landing on every jump time exactly.
Path simulate_path_state_independent(const Model& model, std::span<const double> x0,
                                     int env0, double t_end, std::uint64_t path_index,
                                     const SimOptions& opts);

/// State-dependent switching via per-step Bernoulli thinning with the local
/// leave rate; requires max(-q_ii(x)) * dt <= 0.1 along the path (throws
/// StepTooLarge otherwise).
Path simulate_path_state_dependent(const Model& model, std::span<const double> x0,
                                   int env0, double t_end, std::uint64_t path_index,
                                   const SimOptions& opts);

/// Dispatch on model.state_independent_q().
Path simulate_path(const Model& model, std::span<const double> x0, int env0,
                   double t_end, std::uint64_t path_index, const SimOptions& opts);

}  // namespace fellerdyn
