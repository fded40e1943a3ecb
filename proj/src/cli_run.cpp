#include "fellerdyn/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fellerdyn/classify1d.hpp"
#include "fellerdyn/ctmc.hpp"
#include "fellerdyn/errors.hpp"
#include "fellerdyn/lyapunov.hpp"
#include "fellerdyn/mc_verify.hpp"
#include "fellerdyn/model.hpp"
#include "fellerdyn/parallel.hpp"
#include "fellerdyn/quadrature.hpp"
#include "fellerdyn/radial.hpp"
#include "fellerdyn/sde_sim.hpp"

#include "CLI11.hpp"

namespace fellerdyn {

using nlohmann::json;

std::size_t emit_report(const json& report, std::ostream& sink) {
    std::string bytes = report.dump(2);
    bytes.push_back('\n');
    sink.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    sink.flush();
    if (!sink) throw IoError("failed to write report");
    return bytes.size();
}

namespace {

constexpr const char* kVersion = "0.1.0";

// Shortest round-trip decimal for a double, shared with the JSON emitter so
// CSV output is byte-stable too.
std::string dump_double(double v) { return json(v).dump(); }

// ---------------------------------------------------------------------------
// configuration

struct Knobs {
    double tol = 1e-8;
    std::vector<double> ladder;  // resolved per subcommand when left empty
    bool ladder_set = false;
    long long n_paths = 10000;
    double dt = 1e-3;
    std::uint64_t master_seed = 42;
    int n_max = 200;
    int grid_density = 201;
};

const std::set<std::string>& model_keys() {
    static const std::set<std::string> keys = {"dimension", "environments", "drift",
                                               "diffusion", "qmatrix", "sampling_box"};
    return keys;
}

const std::set<std::string>& knob_keys() {
    static const std::set<std::string> keys = {"tol",         "ladder", "n_paths", "dt",
                                               "master_seed", "n_max",  "grid_density"};
    return keys;
}

// One config file may drive several subcommands, so the analysis block is
// validated against the union of every subcommand's keys; each pipeline then
// reads only the keys it understands.
const std::set<std::string>& analysis_keys() {
    static const std::set<std::string> keys = {
        "direction", "certificate", "fit_c",  "alpha", "lambda", "mu",   "x0",
        "env0",      "t",           "paths_limit", "K", "radii",  "eps",
    };
    return keys;
}

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
    for (const auto& item : obj.items())
        if (!allowed.count(item.key()))
            throw ConfigError("unknown key '" + item.key() + "' in " + where);
}

double require_number(const json& v, const std::string& name) {
    if (!v.is_number()) throw ConfigError("'" + name + "' must be a number");
    return v.get<double>();
}

double require_positive(const json& v, const std::string& name) {
    double x = require_number(v, name);
    if (!(x > 0.0) || !std::isfinite(x))
        throw ConfigError("'" + name + "' must be a positive finite number");
    return x;
}

long long require_count(const json& v, const std::string& name) {
    if (!v.is_number_integer())
        throw ConfigError("'" + name + "' must be a positive integer");
    long long n = v.get<long long>();
    if (n <= 0) throw ConfigError("'" + name + "' must be a positive integer");
    return n;
}

std::vector<double> require_ladder(const json& v, const std::string& name) {
    if (!v.is_array() || v.size() < 2)
        throw ConfigError("'" + name + "' must be an array of at least two rungs");
    std::vector<double> out;
    for (const auto& e : v) out.push_back(require_positive(e, name + " entry"));
    for (std::size_t k = 1; k < out.size(); ++k)
        if (out[k] <= out[k - 1])
            throw ConfigError("'" + name + "' must be strictly increasing");
    return out;
}

void apply_config_knobs(const json& doc, Knobs& k) {
    if (doc.contains("tol")) k.tol = require_positive(doc["tol"], "tol");
    if (doc.contains("ladder")) {
        k.ladder = require_ladder(doc["ladder"], "ladder");
        k.ladder_set = true;
    }
    if (doc.contains("n_paths")) k.n_paths = require_count(doc["n_paths"], "n_paths");
    if (doc.contains("dt")) k.dt = require_positive(doc["dt"], "dt");
    if (doc.contains("master_seed")) {
        if (!doc["master_seed"].is_number_integer() ||
            (doc["master_seed"].is_number_integer() && doc["master_seed"].get<long long>() < 0 &&
             !doc["master_seed"].is_number_unsigned()))
            throw ConfigError("'master_seed' must be a nonnegative integer");
        k.master_seed = doc["master_seed"].get<std::uint64_t>();
    }
    if (doc.contains("n_max")) k.n_max = static_cast<int>(require_count(doc["n_max"], "n_max"));
    if (doc.contains("grid_density")) {
        k.grid_density = static_cast<int>(require_count(doc["grid_density"], "grid_density"));
        if (k.grid_density < 2) throw ConfigError("'grid_density' must be at least 2");
    }
}

std::vector<double> series_rungs() { return {1e2, 1e3, 1e4, 1e5}; }

// ---------------------------------------------------------------------------
// JSON shapes

json verdict_fields(const DivergenceVerdict& v) {
    json j;
    j["outcome"] = outcome_name(v.outcome);
    j["rationale"] = v.rationale;
    if (v.estimate)
        j["estimate"] = {{"value", v.estimate->value}, {"abs_error", v.estimate->abs_error}};
    else
        j["estimate"] = nullptr;
    json rungs = json::array();
    for (const auto& [r, partial] : v.ladder) rungs.push_back(json::array({r, partial}));
    j["ladder"] = rungs;
    return j;
}

json compact_set_json(const CompactSet& K) {
    json box = json::array();
    for (const auto& iv : K.box) box.push_back(json::array({iv[0], iv[1]}));
    return {{"box", box}, {"envs", K.envs}};
}

json occupation_json(const OccupationEstimate& e) {
    return {{"x0", e.x0},         {"env0", e.env0},   {"t", e.t},
            {"n", e.n},           {"hits", e.hits},   {"exploded", e.exploded},
            {"p_hat", e.p_hat},   {"ci_lo", e.ci_lo}, {"ci_hi", e.ci_hi}};
}

json radial_report_json(const RadialReport& r) {
    json j;
    j["conclusion"] = radial_conclusion_name(r.conclusion);
    j["detail"] = r.detail;
    j["p_probe"] = verdict_fields(r.p_probe);
    j["nested_probe"] = r.nested_probe ? verdict_fields(*r.nested_probe) : json(nullptr);
    j["p_limit"] = r.p_limit ? json(*r.p_limit) : json(nullptr);
    return j;
}

json certificate_report_json(const CertificateReport& r) {
    json j;
    j["holds"] = r.holds;
    j["margin"] = r.margin;
    j["min_on_K"] = r.min_on_K;
    j["max_on_K"] = r.max_on_K;
    j["decay_ratio"] = r.decay_ratio;
    j["bound_sup"] = r.bound_sup;
    j["inf_outside"] = r.inf_outside;
    j["grid_size"] = r.grid_size;
    j["violated_condition"] = r.violated_condition;
    if (r.witness)
        j["witness"] = {{"x", r.witness->x},
                        {"env", r.witness->env},
                        {"lhs", r.witness->lhs},
                        {"rhs", r.witness->rhs}};
    else
        j["witness"] = nullptr;
    j["violations"] = r.violations;
    return j;
}

// ---------------------------------------------------------------------------
// analysis-block parsing

CompactSet parse_compact_set(const json& spec, int d, const std::string& where) {
    if (!spec.is_object()) throw ConfigError(where + " must be an object");
    reject_unknown_keys(spec, {"box", "envs"}, where);
    if (!spec.contains("box") || !spec["box"].is_array())
        throw ConfigError(where + " needs a 'box' array of per-axis [lo, hi] pairs");
    CompactSet K;
    for (const auto& iv : spec["box"]) {
        if (!iv.is_array() || iv.size() != 2)
            throw ConfigError(where + ".box entries must be [lo, hi] pairs");
        double lo = require_number(iv[0], where + ".box");
        double hi = require_number(iv[1], where + ".box");
        if (!std::isfinite(lo) || !std::isfinite(hi) || lo > hi)
            throw ConfigError(where + ".box intervals must be bounded with lo <= hi");
        K.box.push_back({lo, hi});
    }
    if (static_cast<int>(K.box.size()) != d)
        throw ConfigError(where + ".box must have one interval per state dimension");
    if (spec.contains("envs")) {
        if (!spec["envs"].is_array()) throw ConfigError(where + ".envs must be an array");
        for (const auto& e : spec["envs"]) {
            long long env = require_count(e, where + ".envs entry");
            K.envs.push_back(static_cast<int>(env));
        }
    }
    return K;
}

EnvExpr parse_env_expr(const json& spec, const Model& model, const std::string& where) {
    EnvExpr f;
    if (spec.is_string()) {
        f.per_env.push_back(parse_expression(spec.get<std::string>(), model.d));
        return f;
    }
    if (!spec.is_array() || spec.empty())
        throw ConfigError(where + " must be an expression string or an array of them");
    for (const auto& e : spec) {
        if (!e.is_string()) throw ConfigError(where + " entries must be expression strings");
        f.per_env.push_back(parse_expression(e.get<std::string>(), model.d));
    }
    if (f.per_env.size() != 1 &&
        (model.countable_envs || static_cast<int>(f.per_env.size()) != model.n_envs))
        throw ConfigError(where + " must have one expression (shared) or one per environment");
    return f;
}

std::vector<double> parse_point(const json& spec, int d, const std::string& where) {
    if (!spec.is_array() || static_cast<int>(spec.size()) != d)
        throw ConfigError(where + " must be an array of " + std::to_string(d) + " numbers");
    std::vector<double> x;
    for (const auto& e : spec) {
        double v = require_number(e, where);
        if (!std::isfinite(v)) throw ConfigError(where + " entries must be finite");
        x.push_back(v);
    }
    return x;
}

// ---------------------------------------------------------------------------
// pipelines

struct PipelineResult {
    json verdict = nullptr;  // "feller_dynkin" | "not_feller_dynkin" | "inconclusive" | null
    bool definite = true;
    json evidence = json::object();
    json analysis_echo = json::object();
    bool cb_feller_assumed = false;
    bool chain_fd_assumed = false;
    bool holder_assumed = false;
    std::string human;
};

PipelineResult run_classify1d(const Model& model, const Knobs& k, int threads) {
    ClassifyOptions opts;
    opts.ladder = k.ladder;
    opts.n_max = k.n_max;
    opts.threads = threads;
    Verdict v = classify_fd_1d(model, opts);

    PipelineResult r;
    r.verdict = verdict_name(v.outcome);
    r.definite = v.outcome != Verdict::Outcome::Inconclusive;
    r.cb_feller_assumed = v.cb_feller_assumed;
    r.chain_fd_assumed = model.countable_envs;
    r.human = verdict_name(v.outcome);

    json tests = json::array();
    for (const auto& te : v.evidence) {
        json t = verdict_fields(te.verdict);
        t["env"] = te.env;
        t["test"] = te.test;
        tests.push_back(std::move(t));
    }
    json fc = json::array();
    for (const auto& [env, holds] : v.feller_nonexplosion)
        fc.push_back({{"env", env}, {"holds", holds}});
    r.evidence = {{"tests", tests}, {"feller_nonexplosion", fc}, {"note", v.note}};
    return r;
}

PipelineResult run_radial(const Model& model, const Knobs& k, const json& analysis) {
    std::string direction = "auto";
    if (analysis.contains("direction")) {
        if (!analysis["direction"].is_string())
            throw ConfigError("'direction' must be \"auto\", \"upper\" or \"lower\"");
        direction = analysis["direction"].get<std::string>();
        if (direction != "auto" && direction != "upper" && direction != "lower")
            throw ConfigError("'direction' must be \"auto\", \"upper\" or \"lower\"");
    }
    RadialOptions opts;
    opts.ladder = k.ladder;
    opts.n_max = k.n_max;

    PipelineResult r;
    r.cb_feller_assumed = true;
    r.holder_assumed = true;
    r.chain_fd_assumed = model.countable_envs;
    r.analysis_echo["direction"] = direction;

    std::optional<RadialReport> upper, lower;
    if (direction != "lower")
        upper = khasminskii_p_tests(make_radial_envelope(model, EnvelopeDirection::Upper, opts),
                                    opts);
    bool fd = upper && (upper->conclusion == RadialReport::Conclusion::FellerFC1 ||
                        upper->conclusion == RadialReport::Conclusion::FellerFC2);
    if (!fd && direction != "upper")
        lower = khasminskii_p_tests(make_radial_envelope(model, EnvelopeDirection::Lower, opts),
                                    opts);
    bool rejected = lower && lower->conclusion == RadialReport::Conclusion::NotFeller;

    if (fd)
        r.verdict = "feller_dynkin";
    else if (rejected)
        r.verdict = "not_feller_dynkin";
    else
        r.verdict = "inconclusive";
    r.definite = fd || rejected;
    r.human = r.verdict.get<std::string>();
    r.evidence = {{"upper", upper ? radial_report_json(*upper) : json(nullptr)},
                  {"lower", lower ? radial_report_json(*lower) : json(nullptr)}};
    return r;
}

PipelineResult run_lyapunov(const Model& model, const Knobs& k, const json& analysis) {
    if (!analysis.contains("certificate"))
        throw ConfigError("lyapunov-check needs analysis.certificate");
    const json& cert = analysis["certificate"];
    if (!cert.is_object()) throw ConfigError("analysis.certificate must be an object");
    reject_unknown_keys(cert, {"kind", "V", "c", "alpha", "K", "C"}, "analysis.certificate");
    if (!cert.contains("kind") || !cert["kind"].is_string())
        throw ConfigError("certificate.kind must be \"forward\" or \"reject\"");
    std::string kind = cert["kind"].get<std::string>();
    if (kind != "forward" && kind != "reject")
        throw ConfigError("certificate.kind must be \"forward\" or \"reject\"");
    if (!cert.contains("V")) throw ConfigError("certificate.V is required");
    if (!cert.contains("K")) throw ConfigError("certificate.K is required");

    EnvExpr V = parse_env_expr(cert["V"], model, "certificate.V");
    CompactSet K = parse_compact_set(cert["K"], model.d, "certificate.K");

    LyapunovOptions opts;
    opts.grid_density = k.grid_density;
    opts.ladder = k.ladder;
    opts.n_max = k.n_max;

    PipelineResult r;
    r.cb_feller_assumed = true;
    r.chain_fd_assumed = model.countable_envs;

    CertificateReport rep;
    json ev;
    ev["kind"] = kind;
    if (kind == "forward") {
        double c = require_positive(
            cert.contains("c") ? cert["c"] : json(nullptr), "certificate.c");
        rep = check_forward_certificate(model, V, K, c, opts);
        ev["c"] = c;
        if (rep.holds) {
            r.verdict = "feller_dynkin";
            ev["status"] =
                "forward certificate numerically supported on the sampled grid (not a proof)";
        } else {
            r.verdict = "inconclusive";
            ev["status"] = "forward certificate violated: " + rep.violated_condition;
        }
    } else {
        double alpha = require_positive(
            cert.contains("alpha") ? cert["alpha"] : json(nullptr), "certificate.alpha");
        if (!cert.contains("C"))
            throw ConfigError("reject certificates need certificate.C");
        CompactSet C = parse_compact_set(cert["C"], model.d, "certificate.C");
        rep = check_reject_certificate(model, V, K, C, alpha, opts);
        ev["alpha"] = alpha;
        if (rep.holds) {
            r.verdict = "not_feller_dynkin";
            ev["status"] =
                "rejection certificate numerically supported on the sampled grid (not a proof)";
        } else {
            r.verdict = "inconclusive";
            ev["status"] = "rejection certificate violated: " + rep.violated_condition;
        }
    }
    r.definite = rep.holds;
    ev["report"] = certificate_report_json(rep);

    bool want_fit = false;
    if (analysis.contains("fit_c")) {
        if (!analysis["fit_c"].is_boolean()) throw ConfigError("'fit_c' must be a boolean");
        want_fit = analysis["fit_c"].get<bool>();
    }
    if (want_fit) {
        double c_star = fit_c(model, V, opts);
        ev["fit_c"] = std::isinf(c_star)
                          ? json({{"unbounded", true}, {"value", nullptr}})
                          : json({{"unbounded", false}, {"value", c_star}});
    } else {
        ev["fit_c"] = nullptr;
    }

    r.evidence = std::move(ev);
    r.analysis_echo = analysis;
    r.human =
        r.verdict.get<std::string>() + " (" + r.evidence["status"].get<std::string>() + ")";
    return r;
}

PipelineResult run_birthdeath(double alpha, double lambda, double mu, const Knobs& k) {
    if (!(alpha >= 0.0)) throw ConfigError("birthdeath needs alpha >= 0");
    if (!(lambda > 0.0) || !(mu > 0.0))
        throw ConfigError("birthdeath needs positive lambda and mu");
    ProbeOptions opts;
    if (k.ladder_set) opts.ladder = k.ladder;
    BirthDeathReport rep = birthdeath_rs_test(alpha, lambda, mu, opts);
    bool closed_form = powerlaw_verdict(alpha, lambda, mu);

    PipelineResult r;
    r.verdict = verdict_name(rep.outcome);
    r.definite = rep.outcome != Verdict::Outcome::Inconclusive;
    r.human = verdict_name(rep.outcome);
    json agrees = nullptr;
    if (r.definite)
        agrees = (rep.outcome == Verdict::Outcome::FellerDynkin) == closed_form;
    r.evidence = {{"alpha", alpha},
                  {"lambda", lambda},
                  {"mu", mu},
                  {"r_series", verdict_fields(rep.r_series)},
                  {"s_series", verdict_fields(rep.s_series)},
                  {"closed_form_feller_dynkin", closed_form},
                  {"agrees_with_closed_form", agrees}};
    r.analysis_echo = {{"alpha", alpha}, {"lambda", lambda}, {"mu", mu}};
    return r;
}

void write_paths_csv(const Model& model, const std::vector<Path>& paths,
                     const std::string& out_path) {
    std::ofstream f(out_path, std::ios::binary);
    if (!f) throw IoError("cannot open paths output file '" + out_path + "'");
    f << "t";
    for (int c = 1; c <= model.d; ++c) f << ",y" << c;
    f << ",env,stream_id\n";
    for (const Path& p : paths) {
        for (std::size_t row = 0; row < p.times.size(); ++row) {
            f << dump_double(p.times[row]);
            auto x = p.state(row, model.d);
            for (double v : x) f << ',' << dump_double(v);
            f << ',' << p.env[row] << ',' << p.stream_id << '\n';
        }
    }
    f.flush();
    if (!f) throw IoError("failed while writing paths CSV");
}

PipelineResult run_simulate(const Model& model, const Knobs& k, const json& analysis,
                            int threads, const std::string& paths_out) {
    std::vector<double> x0(static_cast<std::size_t>(model.d), 0.0);
    if (analysis.contains("x0")) x0 = parse_point(analysis["x0"], model.d, "x0");
    int env0 = 1;
    if (analysis.contains("env0")) env0 = static_cast<int>(require_count(analysis["env0"], "env0"));
    if (!model.countable_envs && env0 > model.n_envs)
        throw ConfigError("env0 exceeds the number of environments");
    double t = 1.0;
    if (analysis.contains("t")) t = require_positive(analysis["t"], "t");
    long long paths_limit = 10;
    if (analysis.contains("paths_limit"))
        paths_limit = require_count(analysis["paths_limit"], "paths_limit");

    const long long n = k.n_paths;
    const int d = model.d;
    SimOptions so;
    so.dt = k.dt;
    so.master_seed = k.master_seed;
    so.store_path = false;

    std::vector<double> terminal(static_cast<std::size_t>(n) * d, 0.0);
    std::vector<int> final_env(static_cast<std::size_t>(n), 0);
    std::vector<char> exploded(static_cast<std::size_t>(n), 0);
    parallel_for(static_cast<int>(n), threads, [&](int i) {
        Path p = simulate_path(model, x0, env0, t, static_cast<std::uint64_t>(i), so);
        std::size_t last = p.times.size() - 1;
        auto x = p.state(last, d);
        std::copy(x.begin(), x.end(), terminal.begin() + static_cast<std::ptrdiff_t>(i) * d);
        final_env[static_cast<std::size_t>(i)] = p.env[last];
        exploded[static_cast<std::size_t>(i)] = p.exploded ? 1 : 0;
    });

    long long n_exploded = 0;
    std::map<int, long long> hist;
    for (long long i = 0; i < n; ++i) {
        if (exploded[static_cast<std::size_t>(i)]) {
            ++n_exploded;
            continue;
        }
        ++hist[final_env[static_cast<std::size_t>(i)]];
    }
    const long long n_ok = n - n_exploded;

    json mean = nullptr, variance = nullptr;
    if (n_ok > 0) {
        std::vector<double> mu(static_cast<std::size_t>(d), 0.0);
        std::vector<double> m2(static_cast<std::size_t>(d), 0.0);
        for (long long i = 0; i < n; ++i) {
            if (exploded[static_cast<std::size_t>(i)]) continue;
            for (int c = 0; c < d; ++c) mu[static_cast<std::size_t>(c)] += terminal[i * d + c];
        }
        for (int c = 0; c < d; ++c) mu[static_cast<std::size_t>(c)] /= static_cast<double>(n_ok);
        for (long long i = 0; i < n; ++i) {
            if (exploded[static_cast<std::size_t>(i)]) continue;
            for (int c = 0; c < d; ++c) {
                double dev = terminal[i * d + c] - mu[static_cast<std::size_t>(c)];
                m2[static_cast<std::size_t>(c)] += dev * dev;
            }
        }
        for (int c = 0; c < d; ++c)
            m2[static_cast<std::size_t>(c)] /= static_cast<double>(std::max<long long>(n_ok - 1, 1));
        mean = mu;
        variance = m2;
    }

    long long dumped = 0;
    if (!paths_out.empty()) {
        SimOptions full = so;
        full.store_path = true;
        std::vector<Path> stored;
        dumped = std::min(n, paths_limit);
        for (long long i = 0; i < dumped; ++i)
            stored.push_back(
                simulate_path(model, x0, env0, t, static_cast<std::uint64_t>(i), full));
        write_paths_csv(model, stored, paths_out);
    }

    json hist_json = json::array();
    for (const auto& [env, count] : hist) hist_json.push_back(json::array({env, count}));

    PipelineResult r;
    r.verdict = nullptr;
    r.definite = true;
    r.human = "completed (" + std::to_string(n) + " paths)";
    r.evidence = {{"t", t},
                  {"x0", x0},
                  {"env0", env0},
                  {"n_paths", n},
                  {"dt", k.dt},
                  {"scheme", "tamed_euler"},
                  {"exploded", n_exploded},
                  {"terminal_mean", mean},
                  {"terminal_variance", variance},
                  {"env_histogram", hist_json},
                  {"paths_dumped", dumped}};
    r.analysis_echo = {{"x0", x0}, {"env0", env0}, {"t", t}, {"paths_limit", paths_limit}};
    return r;
}

PipelineResult run_verify_fd(const Model& model, const Knobs& k, const json& analysis,
                             int threads) {
    CompactSet K;
    if (analysis.contains("K")) {
        K = parse_compact_set(analysis["K"], model.d, "K");
    } else {
        K.box.assign(static_cast<std::size_t>(model.d), {-1.0, 1.0});
    }
    std::vector<double> radii = {2.0, 5.0, 10.0, 20.0};
    if (analysis.contains("radii")) radii = require_ladder(analysis["radii"], "radii");
    double eps = 0.01;
    if (analysis.contains("eps")) eps = require_positive(analysis["eps"], "eps");
    double t = 1.0;
    if (analysis.contains("t")) t = require_positive(analysis["t"], "t");
    int env0 = 1;
    if (analysis.contains("env0")) env0 = static_cast<int>(require_count(analysis["env0"], "env0"));

    MCOptions opts;
    opts.n_paths = k.n_paths;
    opts.dt = k.dt;
    opts.master_seed = k.master_seed;
    opts.threads = threads;
    EmpiricalVerdict ev = fd_empirical_verdict(model, K, radii, eps, t, env0, opts);

    PipelineResult r;
    r.cb_feller_assumed = true;
    r.chain_fd_assumed = model.countable_envs;
    r.verdict = nullptr;
    r.definite = ev.outcome != EmpiricalVerdict::Outcome::Inconclusive;
    r.human = empirical_outcome_name(ev.outcome);
    json occ = json::array();
    for (const auto& e : ev.occupation) occ.push_back(occupation_json(e));
    r.evidence = {{"outcome", empirical_outcome_name(ev.outcome)},
                  {"detail", ev.detail},
                  {"eps", ev.eps},
                  {"t", t},
                  {"env0", env0},
                  {"K", compact_set_json(K)},
                  {"radii", ev.radii},
                  {"occupation", occ}};
    r.analysis_echo = {{"K", compact_set_json(K)}, {"radii", radii}, {"eps", eps},
                       {"t", t},                   {"env0", env0}};
    return r;
}

PipelineResult run_existence_check(const Model& model, const Knobs& k) {
    RadialOptions opts;
    opts.ladder = k.ladder;
    opts.n_max = k.n_max;
    GrowthReport g = growth_check(model, opts);

    PipelineResult r;
    r.verdict = nullptr;
    r.definite = true;
    bool supported = g.linear_growth && g.existence_bound;
    r.human = supported ? "existence bound numerically supported"
                        : "existence bound not supported on the sampled radii";
    r.evidence = {{"radii", g.radii},
                  {"sup_drift", g.sup_drift},
                  {"sup_diffusion_trace", g.sup_diffusion_trace},
                  {"sup_dissipativity", g.sup_dissipativity},
                  {"beta_drift", g.beta_drift},
                  {"beta_diffusion", g.beta_diffusion},
                  {"linear_growth", g.linear_growth},
                  {"existence_bound", g.existence_bound},
                  {"existence_constant", g.existence_constant},
                  {"existence_supported", supported},
                  {"detail", r.human}};
    return r;
}

}  // namespace

RunOutcome run_analysis(const std::string& sub, const json& doc, const std::string& paths_out,
                        int threads_req) {
    static const std::set<std::string> subs = {"classify1d", "radial",   "lyapunov-check",
                                               "birthdeath", "simulate", "verify-fd",
                                               "existence-check"};
    if (!subs.count(sub)) throw ConfigError("unknown subcommand '" + sub + "'");
    if (!doc.is_object()) throw ConfigError("config document must be a JSON object");

    std::set<std::string> top;
    for (const auto& k : model_keys()) top.insert(k);
    for (const auto& k : knob_keys()) top.insert(k);
    top.insert("analysis");
    reject_unknown_keys(doc, top, "config");

    Knobs knobs;
    apply_config_knobs(doc, knobs);
    if (!knobs.ladder_set)
        knobs.ladder = sub == "birthdeath" ? series_rungs() : default_ladder();

    json analysis = doc.value("analysis", json::object());
    if (!analysis.is_object()) throw ConfigError("'analysis' must be an object");
    reject_unknown_keys(analysis, analysis_keys(), "analysis");

    const int threads = resolve_threads(threads_req);

    bool have_model_keys = false;
    for (const auto& key : model_keys())
        if (doc.contains(key)) have_model_keys = true;

    std::optional<Model> model;
    if (sub != "birthdeath") {
        if (!have_model_keys)
            throw ConfigError(sub + " needs a model document (dimension, drift, diffusion, "
                                    "qmatrix, sampling_box)");
        json model_doc = json::object();
        for (const auto& key : model_keys())
            if (doc.contains(key)) model_doc[key] = doc[key];
        model = load_model(model_doc, knobs.n_max);
    }

    PipelineResult res;
    if (sub == "classify1d") {
        res = run_classify1d(*model, knobs, threads);
    } else if (sub == "radial") {
        res = run_radial(*model, knobs, analysis);
    } else if (sub == "lyapunov-check") {
        res = run_lyapunov(*model, knobs, analysis);
    } else if (sub == "birthdeath") {
        std::optional<double> alpha;
        double lambda = 1.0, mu = 1.0;
        if (doc.contains("environments") && doc["environments"].is_object() &&
            doc["environments"].contains("birth_death")) {
            const json& bd = doc["environments"]["birth_death"];
            reject_unknown_keys(bd, {"alpha", "lambda", "mu"}, "environments.birth_death");
            if (bd.contains("alpha")) alpha = require_number(bd["alpha"], "alpha");
            if (bd.contains("lambda")) lambda = require_positive(bd["lambda"], "lambda");
            if (bd.contains("mu")) mu = require_positive(bd["mu"], "mu");
        }
        if (analysis.contains("alpha")) alpha = require_number(analysis["alpha"], "alpha");
        if (analysis.contains("lambda")) lambda = require_positive(analysis["lambda"], "lambda");
        if (analysis.contains("mu")) mu = require_positive(analysis["mu"], "mu");
        if (!alpha) throw ConfigError("birthdeath needs alpha (--alpha or the config)");
        res = run_birthdeath(*alpha, lambda, mu, knobs);
    } else if (sub == "simulate") {
        res = run_simulate(*model, knobs, analysis, threads, paths_out);
    } else if (sub == "verify-fd") {
        res = run_verify_fd(*model, knobs, analysis, threads);
    } else {
        res = run_existence_check(*model, knobs);
    }
    if (res.analysis_echo.empty() && !analysis.empty()) res.analysis_echo = analysis;

    json config_echo;
    config_echo["tol"] = knobs.tol;
    config_echo["ladder"] = knobs.ladder;
    config_echo["n_paths"] = knobs.n_paths;
    config_echo["dt"] = knobs.dt;
    config_echo["master_seed"] = knobs.master_seed;
    config_echo["n_max"] = knobs.n_max;
    config_echo["grid_density"] = knobs.grid_density;
    config_echo["analysis"] = res.analysis_echo;
    if (have_model_keys) {
        json model_echo = json::object();
        for (const auto& key : model_keys())
            if (doc.contains(key)) model_echo[key] = doc[key];
        config_echo["model"] = model_echo;
    } else {
        config_echo["model"] = nullptr;
    }

    json report;
    report["subcommand"] = sub;
    report["version"] = kVersion;
    report["verdict"] = res.verdict;
    report["assumptions"] = {{"cb_feller_assumed", res.cb_feller_assumed},
                             {"chain_fd_assumed", res.chain_fd_assumed},
                             {"holder_assumed", res.holder_assumed}};
    report["evidence"] = res.evidence;
    report["config"] = config_echo;

    RunOutcome out;
    out.report = std::move(report);
    out.definite = res.definite;
    out.summary = sub + ": " + res.human;
    return out;
}

// ---------------------------------------------------------------------------
// front end

namespace {

struct CliArgs {
    std::string config_path;
    std::string out_path;
    std::string paths_out;
    std::uint64_t seed = 42;
    int threads = 0;
    bool json_to_stdout = false;

    double tol = 1e-8;
    std::vector<double> ladder;
    long long n_paths = 10000;
    double dt = 1e-3;
    long long n_max = 200;
    long long grid_density = 201;

    double bd_alpha = 0.0, bd_lambda = 1.0, bd_mu = 1.0;
    std::vector<double> x0;
    long long env0 = 1;
    double t = 1.0;
    double eps = 0.01;
    std::string direction = "auto";
};

bool flag_set(const CLI::App* sc, const std::string& name) {
    const CLI::Option* opt = sc->get_option_no_throw(name);
    return opt != nullptr && opt->count() > 0;
}

json load_config_doc(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open config file '" + path + "'");
    json doc = json::parse(f, nullptr, true, true);  // allow comments
    if (!doc.is_object()) throw ConfigError("config document must be a JSON object");
    return doc;
}

int dispatch(const std::string& sub, CLI::App* sc, CliArgs& args) {
    json doc = json::object();
    if (!args.config_path.empty())
        doc = load_config_doc(args.config_path);
    else if (sub != "birthdeath")
        throw ConfigError(sub + " requires --config with a model document");

    if (flag_set(sc, "--tol")) doc["tol"] = args.tol;
    if (flag_set(sc, "--ladder")) doc["ladder"] = args.ladder;
    if (flag_set(sc, "--n-paths")) doc["n_paths"] = args.n_paths;
    if (flag_set(sc, "--dt")) doc["dt"] = args.dt;
    if (flag_set(sc, "--seed")) doc["master_seed"] = args.seed;
    if (flag_set(sc, "--n-max")) doc["n_max"] = args.n_max;
    if (flag_set(sc, "--grid-density")) doc["grid_density"] = args.grid_density;

    auto set_analysis = [&doc](const char* key, json v) {
        if (!doc.contains("analysis")) doc["analysis"] = json::object();
        doc["analysis"][key] = std::move(v);
    };
    if (flag_set(sc, "--t")) set_analysis("t", args.t);
    if (flag_set(sc, "--env0")) set_analysis("env0", args.env0);
    if (flag_set(sc, "--x0")) set_analysis("x0", args.x0);
    if (flag_set(sc, "--eps")) set_analysis("eps", args.eps);
    if (flag_set(sc, "--direction")) set_analysis("direction", args.direction);
    if (flag_set(sc, "--alpha")) set_analysis("alpha", args.bd_alpha);
    if (flag_set(sc, "--lambda")) set_analysis("lambda", args.bd_lambda);
    if (flag_set(sc, "--mu")) set_analysis("mu", args.bd_mu);

    RunOutcome out = run_analysis(sub, doc, args.paths_out, args.threads);

    if (!args.out_path.empty()) {
        std::ofstream f(args.out_path, std::ios::binary);
        if (!f) throw IoError("cannot open report output file '" + args.out_path + "'");
        emit_report(out.report, f);
    }
    if (args.out_path.empty() || args.json_to_stdout) emit_report(out.report, std::cout);
    std::cerr << out.summary << "\n";
    return out.definite ? 0 : 3;
}

void add_common_options(CLI::App* sc, CliArgs& args, bool with_model_knobs) {
    sc->add_option("--config", args.config_path, "JSON configuration file");
    sc->add_option("--out", args.out_path, "write the JSON report to this file");
    sc->add_option("--seed", args.seed, "override master_seed");
    sc->add_option("--threads", args.threads,
                   "worker threads (0 = FELLERDYN_THREADS or hardware)");
    sc->add_flag("--json", args.json_to_stdout,
                 "print the JSON report to stdout even when --out is given");
    sc->add_option("--ladder", args.ladder, "truncation ladder rungs")->delimiter(',');
    if (with_model_knobs) {
        sc->add_option("--tol", args.tol, "quadrature tolerance");
        sc->add_option("--n-max", args.n_max, "environment truncation bound");
        sc->add_option("--grid-density", args.grid_density, "grid points per axis");
    }
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CliArgs args;
    CLI::App app{"Feller-Dynkin analysis of diffusions with random switching"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    CLI::App* classify = app.add_subcommand(
        "classify1d", "integral classification of one-dimensional switching diffusions");
    add_common_options(classify, args, true);

    CLI::App* radial = app.add_subcommand(
        "radial", "Khasminskii-type radial tests on sphere envelopes");
    add_common_options(radial, args, true);
    radial->add_option("--direction", args.direction, "envelope direction")
        ->check(CLI::IsMember({"auto", "upper", "lower"}));

    CLI::App* lyap = app.add_subcommand(
        "lyapunov-check", "check a user-supplied Lyapunov certificate on a sampled grid");
    add_common_options(lyap, args, true);

    CLI::App* bd = app.add_subcommand(
        "birthdeath", "series test for power-law birth-death switching chains");
    add_common_options(bd, args, false);
    bd->add_option("--alpha", args.bd_alpha, "rate exponent");
    bd->add_option("--lambda", args.bd_lambda, "up-rate factor");
    bd->add_option("--mu", args.bd_mu, "down-rate factor");

    CLI::App* sim = app.add_subcommand(
        "simulate", "sample switching-diffusion paths and report terminal statistics");
    add_common_options(sim, args, false);
    sim->add_option("--paths-out", args.paths_out, "dump stored paths as CSV");
    sim->add_option("--n-paths", args.n_paths, "number of paths");
    sim->add_option("--dt", args.dt, "base step size");
    sim->add_option("--t", args.t, "terminal time");
    sim->add_option("--x0", args.x0, "start point")->delimiter(',');
    sim->add_option("--env0", args.env0, "start environment (1-based)");

    CLI::App* vfd = app.add_subcommand(
        "verify-fd", "Monte Carlo occupation probe along a ladder of start points");
    add_common_options(vfd, args, false);
    vfd->add_option("--n-paths", args.n_paths, "number of paths per rung");
    vfd->add_option("--dt", args.dt, "base step size");
    vfd->add_option("--t", args.t, "probe time");
    vfd->add_option("--env0", args.env0, "start environment (1-based)");
    vfd->add_option("--eps", args.eps, "vanishing threshold");

    CLI::App* exist = app.add_subcommand(
        "existence-check", "coefficient growth scan for the existence bound");
    add_common_options(exist, args, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    CLI::App* sc = app.get_subcommands().front();
    try {
        return dispatch(sc->get_name(), sc, args);
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 1;
    } catch (const ConfigFailure& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const NumericFailure& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace fellerdyn
