// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tprm Authors

#include "tprm/cli/main.hpp"

int main(int argc, char** argv) { return tprm::cli::main(argc, argv); }
