// Copyright 2026 The slidekit Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <string>
#include <vector>

#include "slidekit/cli/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return slidekit::cli::run_cli(args, std::cout, std::cerr);
}
