#include "fellerdyn/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "fellerdyn/errors.hpp"

namespace fellerdyn {

namespace {

std::string point_witness(std::span<const double> x, int env) {
    std::ostringstream os;
    os << "x=(";
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (k) os << ", ";
        os << x[k];
    }
    os << "), i=" << env;
    return os.str();
}

double birth_rate(const BirthDeathQ& q, int n) {
    return std::pow(static_cast<double>(n), q.alpha) * q.lambda;
}

double death_rate(const BirthDeathQ& q, int n) {
    if (n <= 1) return 0.0;
    return std::pow(static_cast<double>(n), q.alpha) * q.mu;
}

}  // namespace

MatrixRoot matrix_root(std::span<const double> a, int d) {
    double norm = 0.0;
    double trace = 0.0;
    for (int i = 0; i < d; ++i) {
        trace += a[i * d + i];
        for (int j = 0; j < d; ++j) norm = std::max(norm, std::abs(a[i * d + j]));
    }
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < i; ++j)
            if (std::abs(a[i * d + j] - a[j * d + i]) > 1e-12 * (1.0 + norm))
                throw NotPSD("matrix_root: input not symmetric");

    const double pivot_floor = -1e-9 * norm;
    auto attempt = [&](double jit, MatrixRoot& out) -> bool {
        out.d = d;
        out.jitter = jit;
        out.L.assign(static_cast<std::size_t>(d) * d, 0.0);
        for (int j = 0; j < d; ++j) {
            double s = a[j * d + j] + jit;
            for (int k = 0; k < j; ++k) s -= out.L[j * d + k] * out.L[j * d + k];
            if (s < pivot_floor) throw NotPSD("matrix_root: pivot below tolerance");
            if (s <= 0.0) {
                if (jit == 0.0) return false;  // retry with jitter
                out.L[j * d + j] = 0.0;
                continue;
            }
            out.L[j * d + j] = std::sqrt(s);
            for (int i = j + 1; i < d; ++i) {
                double t = a[i * d + j];
                for (int k = 0; k < j; ++k) t -= out.L[i * d + k] * out.L[j * d + k];
                out.L[i * d + j] = t / out.L[j * d + j];
            }
        }
        return true;
    };

    MatrixRoot root;
    if (!attempt(0.0, root)) {
        const double jit = 1e-12 * std::max(trace, 0.0);
        if (!attempt(jit, root))
            throw NotPSD("matrix_root: semidefinite repair failed");
    }

    double recon_err = 0.0;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            double s = 0.0;
            for (int k = 0; k <= std::min(i, j); ++k)
                s += root.L[i * d + k] * root.L[j * d + k];
            recon_err = std::max(recon_err, std::abs(s - a[i * d + j]));
        }
    if (recon_err > 1e-10 * (1.0 + norm))
        throw NotPSD("matrix_root: reconstruction error " + std::to_string(recon_err));
    return root;
}

int Model::coeff_row(int env) const {
    if (drift.size() == 1) return 0;
    return env - 1;
}

const Expr& Model::drift_expr(int env, int k) const {
    return drift[static_cast<std::size_t>(coeff_row(env))][static_cast<std::size_t>(k)];
}

const Expr& Model::diffusion_expr(int env, int k, int l) const {
    return diffusion[static_cast<std::size_t>(coeff_row(env))]
                    [static_cast<std::size_t>(k)][static_cast<std::size_t>(l)];
}

void Model::eval_drift(std::span<const double> x, int env, std::span<double> out) const {
    for (int k = 0; k < d; ++k) out[static_cast<std::size_t>(k)] = drift_expr(env, k).eval(x, env);
}

void Model::eval_diffusion(std::span<const double> x, int env, std::span<double> out) const {
    for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l)
            out[static_cast<std::size_t>(k * d + l)] = diffusion_expr(env, k, l).eval(x, env);
}

bool Model::state_independent_q() const {
    return !std::holds_alternative<StateDependentQ>(q);
}

double Model::q_diag(std::span<const double> x, int env) const {
    if (const auto* dq = std::get_if<DenseQ>(&q))
        return dq->rates[static_cast<std::size_t>(env - 1)][static_cast<std::size_t>(env - 1)];
    if (const auto* bd = std::get_if<BirthDeathQ>(&q))
        return -(birth_rate(*bd, env) + death_rate(*bd, env));
    const auto& sd = std::get<StateDependentQ>(q);
    return sd.rates[static_cast<std::size_t>(env - 1)][static_cast<std::size_t>(env - 1)]
        .eval(x, env);
}

std::vector<std::pair<int, double>> Model::q_row(std::span<const double> x, int env) const {
    std::vector<std::pair<int, double>> row;
    if (const auto* dq = std::get_if<DenseQ>(&q)) {
        const auto& r = dq->rates[static_cast<std::size_t>(env - 1)];
        for (int j = 1; j <= static_cast<int>(r.size()); ++j)
            if (j != env && r[static_cast<std::size_t>(j - 1)] != 0.0)
                row.emplace_back(j, r[static_cast<std::size_t>(j - 1)]);
        return row;
    }
    if (const auto* bd = std::get_if<BirthDeathQ>(&q)) {
        const double mu_n = death_rate(*bd, env);
        if (mu_n > 0.0) row.emplace_back(env - 1, mu_n);
        const double la_n = birth_rate(*bd, env);
        if (la_n > 0.0) row.emplace_back(env + 1, la_n);
        return row;
    }
    const auto& sd = std::get<StateDependentQ>(q);
    const auto& r = sd.rates[static_cast<std::size_t>(env - 1)];
    for (int j = 1; j <= static_cast<int>(r.size()); ++j) {
        if (j == env) continue;
        const double v = r[static_cast<std::size_t>(j - 1)].eval(x, env);
        if (v != 0.0) row.emplace_back(j, v);
    }
    return row;
}

int Model::envs_for_analysis(int n_max) const {
    return countable_envs ? n_max : n_envs;
}

std::vector<std::vector<double>> halton_points(int count, int dim) {
    static const int primes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29,
                                 31, 37, 41, 43, 47, 53, 59, 61, 67, 71};
    std::vector<std::vector<double>> pts(static_cast<std::size_t>(count),
                                         std::vector<double>(static_cast<std::size_t>(dim)));
    for (int a = 0; a < dim; ++a) {
        const int base = primes[a % 20];
        for (int n = 0; n < count; ++n) {
            double f = 1.0, r = 0.0;
            int k = n + 1;
            while (k > 0) {
                f /= base;
                r += f * (k % base);
                k /= base;
            }
            pts[static_cast<std::size_t>(n)][static_cast<std::size_t>(a)] = r;
        }
    }
    return pts;
}

std::vector<std::vector<double>> sphere_directions(int d, int count) {
    std::vector<std::vector<double>> dirs;
    if (d == 1) {
        dirs.push_back({1.0});
        dirs.push_back({-1.0});
        return dirs;
    }
    for (int k = 0; k < d; ++k) {
        std::vector<double> e(static_cast<std::size_t>(d), 0.0);
        e[static_cast<std::size_t>(k)] = 1.0;
        dirs.push_back(e);
        e[static_cast<std::size_t>(k)] = -1.0;
        dirs.push_back(e);
    }
    std::mt19937_64 rng(0x9E3779B97F4A7C15ULL);
    auto uniform = [&rng]() {
        double u;
        do {
            u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        } while (u <= 0.0 || u >= 1.0);
        return u;
    };
    while (static_cast<int>(dirs.size()) < std::max(count, 2 * d)) {
        std::vector<double> v(static_cast<std::size_t>(d));
        for (int k = 0; k < d; k += 2) {
            const double u1 = uniform();
            const double u2 = uniform();
            const double rad = std::sqrt(-2.0 * std::log(u1));
            v[static_cast<std::size_t>(k)] = rad * std::cos(2.0 * M_PI * u2);
            if (k + 1 < d) v[static_cast<std::size_t>(k) + 1] = rad * std::sin(2.0 * M_PI * u2);
        }
        double norm = 0.0;
        for (double c : v) norm += c * c;
        norm = std::sqrt(norm);
        if (norm < 1e-8) continue;
        for (double& c : v) c /= norm;
        dirs.push_back(v);
    }
    return dirs;
}

namespace {

using nlohmann::json;

Expr parse_field(const std::string& text, int d, const std::string& where) {
    try {
        return parse_expression(text, d);
    } catch (const ConfigFailure& e) {
        throw ValidationError(ValidationError::Kind::BadExpression,
                              "bad expression in " + where + ": " + e.what(), text);
    }
}

std::vector<std::vector<Expr>> parse_drift(const json& j, int d, int n_envs,
                                           bool countable) {
    if (!j.is_array() || j.empty())
        throw ConfigError("drift must be a non-empty array of expression rows");
    const int rows = static_cast<int>(j.size());
    if (countable && rows != 1)
        throw ConfigError("birth-death environments take a single drift row over x and i");
    if (!countable && rows != 1 && rows != n_envs)
        throw ConfigError("drift must have 1 or " + std::to_string(n_envs) + " rows");
    std::vector<std::vector<Expr>> out;
    for (int r = 0; r < rows; ++r) {
        const auto& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<int>(row.size()) != d)
            throw ConfigError("each drift row must list d expressions");
        std::vector<Expr> exprs;
        for (int k = 0; k < d; ++k)
            exprs.push_back(parse_field(row[static_cast<std::size_t>(k)].get<std::string>(), d,
                                        "drift[" + std::to_string(r) + "][" +
                                            std::to_string(k) + "]"));
        out.push_back(std::move(exprs));
    }
    return out;
}

std::vector<std::vector<std::vector<Expr>>> parse_diffusion(const json& j, int d,
                                                            int n_envs, bool countable) {
    if (!j.is_array() || j.empty())
        throw ConfigError("diffusion must be a non-empty array of d x d expression matrices");
    const int rows = static_cast<int>(j.size());
    if (countable && rows != 1)
        throw ConfigError("birth-death environments take a single diffusion matrix over x and i");
    if (!countable && rows != 1 && rows != n_envs)
        throw ConfigError("diffusion must have 1 or " + std::to_string(n_envs) + " matrices");
    std::vector<std::vector<std::vector<Expr>>> out;
    for (int r = 0; r < rows; ++r) {
        const auto& mat = j[static_cast<std::size_t>(r)];
        if (!mat.is_array() || static_cast<int>(mat.size()) != d)
            throw ConfigError("each diffusion matrix must be d x d");
        std::vector<std::vector<Expr>> m(static_cast<std::size_t>(d),
                                         std::vector<Expr>(static_cast<std::size_t>(d)));
        for (int k = 0; k < d; ++k) {
            const auto& row = mat[static_cast<std::size_t>(k)];
            if (!row.is_array() || static_cast<int>(row.size()) != d)
                throw ConfigError("each diffusion matrix must be d x d");
            for (int l = k; l < d; ++l) {
                Expr e = parse_field(row[static_cast<std::size_t>(l)].get<std::string>(), d,
                                     "diffusion[" + std::to_string(r) + "][" +
                                         std::to_string(k) + "][" + std::to_string(l) + "]");
                // Upper triangle is authoritative; mirror for exact symmetry.
                m[static_cast<std::size_t>(k)][static_cast<std::size_t>(l)] = e;
                m[static_cast<std::size_t>(l)][static_cast<std::size_t>(k)] = e;
            }
        }
        out.push_back(std::move(m));
    }
    return out;
}

QMatrixSpec parse_qmatrix(const json& j, int d, int n_envs) {
    const std::string type = j.value("type", "dense");
    if (type == "dense") {
        DenseQ q;
        const auto& rates = j.at("rates");
        if (!rates.is_array() || static_cast<int>(rates.size()) != n_envs)
            throw ConfigError("dense qmatrix must be n_envs x n_envs");
        for (const auto& row : rates) {
            if (!row.is_array() || static_cast<int>(row.size()) != n_envs)
                throw ConfigError("dense qmatrix must be n_envs x n_envs");
            q.rates.push_back(row.get<std::vector<double>>());
        }
        return q;
    }
    if (type == "birth_death") {
        BirthDeathQ q;
        q.alpha = j.at("alpha").get<double>();
        q.lambda = j.at("lambda").get<double>();
        q.mu = j.at("mu").get<double>();
        if (q.alpha < 0 || q.lambda <= 0 || q.mu <= 0)
            throw ConfigError("birth_death qmatrix needs alpha >= 0, lambda > 0, mu > 0");
        return q;
    }
    if (type == "state_dependent") {
        StateDependentQ q;
        const auto& rates = j.at("rates");
        if (!rates.is_array() || static_cast<int>(rates.size()) != n_envs)
            throw ConfigError("state_dependent qmatrix must be n_envs x n_envs");
        int r = 0;
        for (const auto& row : rates) {
            if (!row.is_array() || static_cast<int>(row.size()) != n_envs)
                throw ConfigError("state_dependent qmatrix must be n_envs x n_envs");
            std::vector<Expr> exprs;
            int c = 0;
            for (const auto& cell : row)
                exprs.push_back(parse_field(cell.get<std::string>(), d,
                                            "qmatrix[" + std::to_string(r) + "][" +
                                                std::to_string(c++) + "]"));
            q.rates.push_back(std::move(exprs));
            ++r;
        }
        return q;
    }
    throw ConfigError("qmatrix type must be dense, birth_death or state_dependent");
}

void validate_on_sample(Model& m, int n_max) {
    constexpr int kSamplePoints = 1000;
    const auto unit = halton_points(kSamplePoints, m.d);
    std::vector<double> x(static_cast<std::size_t>(m.d));
    std::vector<double> a(static_cast<std::size_t>(m.d) * static_cast<std::size_t>(m.d));

    std::vector<int> envs;
    if (m.countable_envs) {
        for (int i : {1, 2, 3, 5, 10, 50, n_max})
            if (i >= 1 && i <= n_max &&
                (envs.empty() || envs.back() != i))
                envs.push_back(i);
    } else {
        for (int i = 1; i <= m.n_envs; ++i) envs.push_back(i);
    }

    for (const auto& u : unit) {
        for (int k = 0; k < m.d; ++k) {
            const auto [lo, hi] = m.sampling_box[static_cast<std::size_t>(k)];
            x[static_cast<std::size_t>(k)] = lo + (hi - lo) * u[static_cast<std::size_t>(k)];
        }
        for (int i : envs) {
            m.eval_diffusion(x, i, a);
            for (double v : a)
                if (!std::isfinite(v))
                    throw ValidationError(ValidationError::Kind::BadExpression,
                                          "diffusion evaluates non-finite",
                                          point_witness(x, i));
            try {
                (void)matrix_root(a, m.d);
            } catch (const NotPSD&) {
                throw ValidationError(ValidationError::Kind::NotPSD,
                                      "diffusion matrix not positive semidefinite",
                                      point_witness(x, i));
            }
            std::vector<double> b(static_cast<std::size_t>(m.d));
            m.eval_drift(x, i, b);
            for (double v : b)
                if (!std::isfinite(v))
                    throw ValidationError(ValidationError::Kind::BadExpression,
                                          "drift evaluates non-finite", point_witness(x, i));
        }
    }

    if (const auto* dq = std::get_if<DenseQ>(&m.q)) {
        for (int i = 0; i < m.n_envs; ++i) {
            double sum = 0.0;
            double scale = 0.0;
            for (int j = 0; j < m.n_envs; ++j) {
                const double v = dq->rates[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
                sum += v;
                scale = std::max(scale, std::abs(v));
                if (i != j && v < 0.0)
                    throw ValidationError(ValidationError::Kind::NegativeRate,
                                          "negative off-diagonal rate",
                                          "q[" + std::to_string(i + 1) + "][" +
                                              std::to_string(j + 1) + "]");
            }
            if (std::abs(sum) > 1e-9 * (1.0 + scale))
                throw ValidationError(ValidationError::Kind::RowSumNonzero,
                                      "qmatrix row does not sum to 0",
                                      "row " + std::to_string(i + 1));
        }
    } else if (const auto* sq = std::get_if<StateDependentQ>(&m.q)) {
        std::vector<std::vector<double>> qbar(
            static_cast<std::size_t>(m.n_envs),
            std::vector<double>(static_cast<std::size_t>(m.n_envs),
                                -std::numeric_limits<double>::infinity()));
        for (const auto& u : unit) {
            for (int k = 0; k < m.d; ++k) {
                const auto [lo, hi] = m.sampling_box[static_cast<std::size_t>(k)];
                x[static_cast<std::size_t>(k)] = lo + (hi - lo) * u[static_cast<std::size_t>(k)];
            }
            for (int i = 0; i < m.n_envs; ++i) {
                double sum = 0.0;
                double scale = 0.0;
                for (int j = 0; j < m.n_envs; ++j) {
                    const double v =
                        sq->rates[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]
                            .eval(x, i + 1);
                    if (!std::isfinite(v))
                        throw ValidationError(ValidationError::Kind::BadExpression,
                                              "qmatrix entry evaluates non-finite",
                                              point_witness(x, i + 1));
                    sum += v;
                    scale = std::max(scale, std::abs(v));
                    if (i != j) {
                        if (v < 0.0)
                            throw ValidationError(ValidationError::Kind::NegativeRate,
                                                  "negative off-diagonal rate",
                                                  point_witness(x, i + 1));
                        qbar[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                            std::max(qbar[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)], v);
                    }
                }
                if (std::abs(sum) > 1e-9 * (1.0 + scale))
                    throw ValidationError(ValidationError::Kind::RowSumNonzero,
                                          "qmatrix row does not sum to 0",
                                          point_witness(x, i + 1));
            }
        }
        // Bounded-perturbation evidence: sup_x |q_jj(x) - qbar_jj| with
        // qbar_jj = -sum_{k != j} qbar_jk, over the sample.
        double dev = 0.0;
        for (const auto& u : unit) {
            for (int k = 0; k < m.d; ++k) {
                const auto [lo, hi] = m.sampling_box[static_cast<std::size_t>(k)];
                x[static_cast<std::size_t>(k)] = lo + (hi - lo) * u[static_cast<std::size_t>(k)];
            }
            for (int j = 0; j < m.n_envs; ++j) {
                double qbar_jj = 0.0;
                for (int k = 0; k < m.n_envs; ++k)
                    if (k != j)
                        qbar_jj -= qbar[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
                const double qjj =
                    sq->rates[static_cast<std::size_t>(j)][static_cast<std::size_t>(j)]
                        .eval(x, j + 1);
                dev = std::max(dev, std::abs(qjj - qbar_jj));
            }
        }
        m.q_perturbation_bound = dev;
    }
}

}  // namespace

Model load_model(const nlohmann::json& config, int n_max) {
    Model m;
    if (!config.contains("dimension")) throw ConfigError("missing dimension");
    m.d = config.at("dimension").get<int>();
    if (m.d < 1 || m.d > 16) throw ConfigError("dimension must be in 1..16");

    const auto& envs = config.at("environments");
    if (envs.is_number_integer()) {
        m.n_envs = envs.get<int>();
        if (m.n_envs < 1) throw ConfigError("environments must be >= 1");
        m.countable_envs = false;
    } else if (envs.is_object() && envs.contains("birth_death")) {
        const auto& bd = envs.at("birth_death");
        BirthDeathQ q;
        q.alpha = bd.at("alpha").get<double>();
        q.lambda = bd.at("lambda").get<double>();
        q.mu = bd.at("mu").get<double>();
        if (q.alpha < 0 || q.lambda <= 0 || q.mu <= 0)
            throw ConfigError("birth_death environments need alpha >= 0, lambda > 0, mu > 0");
        m.countable_envs = true;
        m.n_envs = n_max;
        m.q = q;
    } else {
        throw ConfigError("environments must be an integer or {\"birth_death\": {...}}");
    }

    if (!config.contains("sampling_box")) throw ConfigError("missing sampling_box");
    for (const auto& iv : config.at("sampling_box")) {
        if (!iv.is_array() || iv.size() != 2) throw ConfigError("sampling_box entries are [lo, hi]");
        const double lo = iv[0].get<double>();
        const double hi = iv[1].get<double>();
        if (!(lo < hi)) throw ConfigError("sampling_box entries need lo < hi");
        m.sampling_box.emplace_back(lo, hi);
    }
    if (static_cast<int>(m.sampling_box.size()) != m.d)
        throw ConfigError("sampling_box must have one interval per dimension");

    m.drift = parse_drift(config.at("drift"), m.d, m.n_envs, m.countable_envs);
    m.diffusion = parse_diffusion(config.at("diffusion"), m.d, m.n_envs, m.countable_envs);

    if (m.countable_envs) {
        if (config.contains("qmatrix")) {
            const auto& qj = config.at("qmatrix");
            if (qj.value("type", "birth_death") != std::string("birth_death"))
                throw ConfigError("birth_death environments require a birth_death qmatrix");
            m.q = parse_qmatrix(qj, m.d, m.n_envs);
        }
    } else {
        if (!config.contains("qmatrix")) throw ConfigError("missing qmatrix");
        m.q = parse_qmatrix(config.at("qmatrix"), m.d, m.n_envs);
        if (std::holds_alternative<BirthDeathQ>(m.q))
            throw ConfigError("birth_death qmatrix requires birth_death environments");
    }

    validate_on_sample(m, n_max);
    return m;
}

}  // namespace fellerdyn
