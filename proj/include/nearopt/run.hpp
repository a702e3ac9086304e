#pragma once

#include "nearopt/runconfig.hpp"

#include <iosfwd>
#include <string>

namespace nearopt {

// Exit codes: 0 pass, 1 fail, 2 hypotheses not met, 3 usage error.
// Without --strict, verdict-bearing runs still exit 0 unless the
// configuration itself is invalid.
struct RunResult {
    int exit_code = 0;
    std::string report_path;
    std::string report_text;
};

RunResult run(const RunConfig& cfg, std::ostream& diagnostics);

} // namespace nearopt
