// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace hlik::app {

inline constexpr const char* kToolVersion = "0.1.0";

/// Runs `hlik <args...>` (program name excluded) and returns the exit code:
/// 0 on success, 2 on usage errors, 1 on any other error. Errors are one
/// line on `err`: "error <Code>: <message>".
int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err);

/// Reads a key=value config file into "--key=value" arguments. Blank lines
/// and lines starting with '#' are skipped. Throws IoError or ParseError.
std::vector<std::string> config_file_args(const std::string& path);

}  // namespace hlik::app
