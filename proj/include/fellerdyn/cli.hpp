#pragma once

#include <cstddef>
#include <iosfwd>

#include "json.hpp"

namespace fellerdyn {

/// Serialize a report document: UTF-8 JSON with sorted keys, two-space
/// indentation, shortest round-trip floats, and a trailing newline, so that
/// identical reports produce identical bytes everywhere. Throws IoError when
/// the sink rejects the write.
std::size_t emit_report(const nlohmann::json& report, std::ostream& sink);

struct RunOutcome {
    nlohmann::json report;
    bool definite = true;   // false maps to exit code 3
    std::string summary;    // one human-readable line
};

/// Run one analysis pipeline against a config document (the same schema the
/// CLI reads from --config, with knob and analysis overrides already merged
/// in). `subcommand` is one of classify1d, radial, lyapunov-check,
/// birthdeath, simulate, verify-fd, existence-check. `paths_out` optionally
/// dumps simulated paths as CSV (simulate only); `threads` <= 0 resolves via
/// FELLERDYN_THREADS or the hardware count. Throws ConfigFailure on bad
/// input and NumericFailure when an analysis breaks down.
RunOutcome run_analysis(const std::string& subcommand, const nlohmann::json& config_doc,
                        const std::string& paths_out = {}, int threads = 1);

/// Full command-line front end (subcommand dispatch, config loading, report
/// emission). Returns the process exit code:
///   0 = ran, definite result      3 = ran, inconclusive
///   1 = usage or config error     2 = numeric failure
int run_cli(int argc, const char* const* argv);

}  // namespace fellerdyn
