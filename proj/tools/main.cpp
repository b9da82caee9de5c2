// SPDX-License-Identifier: Apache-2.0
#include <string>
#include <vector>

#include "csiforge/config.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return csiforge::cli_main(args);
}
