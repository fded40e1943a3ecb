#pragma once

#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "fellerdyn/expr.hpp"

#include "json.hpp"

namespace fellerdyn {

struct DenseQ {
    std::vector<std::vector<double>> rates;  // n x n, rows sum to 0
};

/// Birth-death rates lambda_n = n^alpha * lambda, mu_n = n^alpha * mu on the
/// 1-based state ladder {1,2,...}; mu_1 = 0 (reflecting bottom state).
struct BirthDeathQ {
    double alpha = 0.0;
    double lambda = 1.0;
    double mu = 1.0;
};

struct StateDependentQ {
    std::vector<std::vector<Expr>> rates;  // n x n expressions over x
};

using QMatrixSpec = std::variant<DenseQ, BirthDeathQ, StateDependentQ>;

struct MatrixRoot {
    int d = 0;
    std::vector<double> L;  // row-major lower-triangular, L*L^T = a
    double jitter = 0.0;    // diagonal shift applied for semidefinite input
};

/// Cholesky-type factor of a symmetric (semi)definite matrix, row-major.
/// Semidefinite pivots get a recorded diagonal jitter of 1e-12*trace.
/// Throws NotPSD when a pivot falls below -1e-9*||a||_inf.
MatrixRoot matrix_root(std::span<const double> a, int d);

/// Validated switching-diffusion model. Environment indices are 1-based.
/// Finite models carry one coefficient row per environment (or a single row
/// over the environment variable i); birth-death models carry a single row.
class Model {
public:
    int d = 1;
    int n_envs = 1;             // finite environment count; truncation target if countable
    bool countable_envs = false;
    std::vector<std::vector<Expr>> drift;                   // [env_row][k]
    std::vector<std::vector<std::vector<Expr>>> diffusion;  // [env_row][k][l], symmetric
    QMatrixSpec q;
    std::vector<std::pair<double, double>> sampling_box;    // per-axis [lo, hi]
    double q_perturbation_bound = 0.0;  // sup_j sup_x |q_jj(x) - qbar_jj| over the sample

    [[nodiscard]] const Expr& drift_expr(int env, int k) const;
    [[nodiscard]] const Expr& diffusion_expr(int env, int k, int l) const;

    void eval_drift(std::span<const double> x, int env, std::span<double> out) const;
    /// Fills out (size d*d, row-major) with a(x, env).
    void eval_diffusion(std::span<const double> x, int env, std::span<double> out) const;

    [[nodiscard]] bool state_independent_q() const;
    /// Diagonal rate q_ii(x) (nonpositive).
    [[nodiscard]] double q_diag(std::span<const double> x, int env) const;
    /// Off-diagonal nonzero entries (j, q_ij(x)) of row env.
    [[nodiscard]] std::vector<std::pair<int, double>> q_row(std::span<const double> x,
                                                            int env) const;
    /// Number of environments an analysis should iterate over, truncating
    /// countable spaces at n_max.
    [[nodiscard]] int envs_for_analysis(int n_max) const;

private:
    [[nodiscard]] int coeff_row(int env) const;
};

/// Build and validate a Model from its JSON document. All Model/QMatrixSpec
/// invariants are checked on a 1000-point quasi-random sample of
/// sampling_box; throws ValidationError (with witness) or ConfigError.
Model load_model(const nlohmann::json& config, int n_max = 200);

/// Low-discrepancy points in [0,1)^dim (Halton sequence).
std::vector<std::vector<double>> halton_points(int count, int dim);

/// Deterministic unit directions: the +-coordinate axes padded to `count`
/// with fixed-seed Box-Muller samples, normalized. d = 1 gives {+1, -1}.
std::vector<std::vector<double>> sphere_directions(int d, int count);

}  // namespace fellerdyn
