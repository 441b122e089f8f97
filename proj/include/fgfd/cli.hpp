#pragma once

#include "fgfd/model.hpp"

#include <string>

namespace fgfd::cli {

enum ExitCode : int {
    ok = 0,
    failure = 1,
    config_error = 2,
    protocol_error = 3,
    checkpoint_error = 4,
};

/// Environment variable naming the root that relative --out paths resolve against.
inline constexpr const char* kRunRootEnv = "FGFD_RUN_ROOT";

/// Parses "bs=off,refinement=on" style toggle lists onto `toggles`.
void parse_toggles(const std::string& spec, ModuleToggles& toggles);

/// Entry point of the `fgfd` tool. Never throws; returns the process exit code.
int run(int argc, const char* const* argv);

} // namespace fgfd::cli
