// Copyright 2026 The CCA Kernels Authors
// SPDX-License-Identifier: Apache-2.0

#include "cca/harness/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
  return cca::harness::run_cli({argv + 1, argv + argc}, std::cout, std::cerr);
}
