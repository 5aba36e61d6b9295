// Copyright 2026 The CCA Kernels Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace cca::harness {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;  // validation failure
inline constexpr int kExitIo = 2;       // I/O, parse or usage error

/// Runs one command line. `args` excludes the program name. Never throws;
/// errors are reported on `err` and mapped to the exit codes above.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cca::harness
