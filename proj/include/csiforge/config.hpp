// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "csiforge/channel.hpp"
#include "csiforge/evaluate.hpp"
#include "csiforge/train.hpp"

namespace csiforge {

// Flat "section.key = value" run configuration over a fixed schema.
// Unknown keys are rejected; every command echoes the resolved values
// and a hash of that echo so runs are attributable.
struct RunConfig {
    std::map<std::string, std::string> values;

    static RunConfig defaults();

    // '#' comments and blank lines are ignored; everything else must be
    // "key = value" with a schema key.
    void load_text(const std::string& text,
                   const std::string& origin = "config");
    void load_file(const std::string& path);
    void set(const std::string& key, const std::string& value);
    void set_pair(const std::string& key_eq_value); // "key=value"

    const std::string& get(const std::string& key) const;
    double num(const std::string& key) const;
    long integer(const std::string& key) const;
    bool flag(const std::string& key) const;
    std::vector<double> num_list(const std::string& key) const;
    std::vector<std::string> name_list(const std::string& key) const;

    std::string echo() const;   // canonical sorted "key = value" lines
    std::uint64_t hash() const; // FNV-1a over the echo

    ChannelConfig channel() const; // slot-shaped
    ModelConfig model(int subcarriers, int symbols) const;
    TrainConfig trainer(int subcarriers, int symbols) const;
    EvalConfig eval() const;
};

// Command bodies shared by the executable and the tests; they throw the
// usual error types, which the entry point maps to exit codes.
void cmd_gen(const RunConfig& cfg);
void cmd_train(const RunConfig& cfg);
void cmd_eval(const RunConfig& cfg);
void cmd_rate(const RunConfig& cfg);

// Argument-vector entry point used by the executable. Prints the
// resolved config and its hash, dispatches the subcommand, and maps
// errors to exit codes: 0 ok, 2 usage, 3 data, 4 numeric.
int cli_main(const std::vector<std::string>& args);

} // namespace csiforge
