#ifndef HCSPMM_TOOLS_COMMANDS_HPP
#define HCSPMM_TOOLS_COMMANDS_HPP

#include <iosfwd>
#include <string>

#include <nlohmann/json.hpp>

namespace hcspmm::cli {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kReportFormat = 1;

enum ExitCode : int { kOk = 0, kUsage = 1, kInputError = 2, kInternalError = 3 };

/// One per invocation. metrics is a flat key -> number map.
struct RunReport {
    std::string command;
    nlohmann::ordered_json inputs = nlohmann::ordered_json::object();
    nlohmann::ordered_json outputs = nlohmann::ordered_json::object();
    nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
    nlohmann::ordered_json version = nlohmann::ordered_json::object();
};

nlohmann::ordered_json to_json(const RunReport& r);

/// Parses argv, runs one subcommand, writes the report to `out` (or the
/// --report-file path) and diagnostics to `err`. Returns the exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hcspmm::cli

#endif
