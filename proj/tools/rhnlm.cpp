// SPDX-License-Identifier: Apache-2.0
#include "rhnlm/cli.hpp"

int main(int argc, char** argv) { return rhnlm::cli::run(argc, argv); }
