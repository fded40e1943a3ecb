#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "fellerdyn/model.hpp"
#include "fellerdyn/quadrature.hpp"

namespace fellerdyn {

/// Scale/speed data for one environment of a d=1 model:
///   B(y) = int_0^y b(z,i)/a(z,i) dz   (memoized antiderivative)
///   s(y) = exp(-2 B(y))               (scale density)
///   m(u) = 1 / (s(u) a(u,i))          (speed-type density)
struct ScaleData {
    int env = 1;
    std::function<double(double)> a;   // a(u, env)
    std::shared_ptr<CumulativeIntegral> B;

    [[nodiscard]] double s(double y) const;
    [[nodiscard]] double m(double u) const;
};

ScaleData make_scale_data(const Model& model, int env);

struct TestEvidence {
    std::string test;  // a1, a2, b1, b2, shortcut_plus, shortcut_minus, fc_plus, fc_minus
    int env = 1;
    DivergenceVerdict verdict;
};

struct Verdict {
    enum class Outcome { FellerDynkin, NotFellerDynkin, Inconclusive };
    Outcome outcome = Outcome::Inconclusive;
    std::vector<TestEvidence> evidence;
    std::vector<std::pair<int, bool>> feller_nonexplosion;  // env -> (FC) holds
    bool cb_feller_assumed = false;
    std::string note;
};

const char* verdict_name(Verdict::Outcome o);

struct ClassifyOptions {
    std::vector<double> ladder;  // default {1e1..1e6}
    int n_max = 200;             // truncation for countable environment spaces
    int threads = 1;
};

/// (FC) non-explosion probe toward +inf or -inf for one environment:
/// divergence of int_0^x s(y) int_0^y 2 m(u) du dy, evaluated in folded form
/// int_0^x [ int_0^y 2 e^{2(B(u)-B(y))} / a(u) du ] dy.
DivergenceVerdict feller_nonexplosion_side(const Model& model, const ScaleData& sd,
                                           bool positive_side,
                                           const ClassifyOptions& opts = {});

/// Combined verdict: Diverges iff both sides diverge (process non-explosive),
/// Converges iff some side converges (explosive), else Inconclusive.
DivergenceVerdict feller_nonexplosion_test(const Model& model, int env,
                                           const ClassifyOptions& opts = {});

struct EnvEvidence {
    int env = 1;
    enum class Side { Pass, Fail, Unknown };
    Side plus = Side::Unknown;
    Side minus = Side::Unknown;
    bool driftless = false;
    std::vector<TestEvidence> tests;

    [[nodiscard]] bool passed() const { return plus == Side::Pass && minus == Side::Pass; }
    [[nodiscard]] bool failed() const { return plus == Side::Fail || minus == Side::Fail; }
};

/// Integral tests for one environment. Uses the driftless shortcut
/// int_0^inf u/a(u,i) du (and its reflection) when the drift expression
/// constant-folds to zero; otherwise evaluates (a1)/(a2) and (b1)/(b2),
/// short-circuiting (a2) when (a1) converges.
EnvEvidence classify_env(const Model& model, int env, const ClassifyOptions& opts = {});

/// Full d=1 classifier for state-independent switching. Requires q_ii != 0
/// for every environment. Countable (birth-death) environment spaces are
/// truncated at n_max; a verdict that changes across the top half of the
/// truncation range degrades to Inconclusive.
Verdict classify_fd_1d(const Model& model, const ClassifyOptions& opts = {});

}  // namespace fellerdyn
