#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace timberlens::cli {

// Stable process exit codes.
enum ExitCode : int { kOk = 0, kConfigError = 1, kIoError = 2, kSchemaError = 3 };

/// Runs one invocation. `args` excludes the program name, e.g.
/// {"evaluate", "--dataset", "a.json", "--predictions", "p.json"}.
///
/// Every subcommand accepts --config FILE holding a JSON object whose keys
/// are the long option names with '-' written as '_'. Precedence, highest
/// first: command-line flag, config file, built-in default. Unknown config
/// keys are a config error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace timberlens::cli
