#pragma once

#include <string>
#include <vector>

#include "sgt/config.hpp"

namespace sgt::run {

// The operator command set. Each throws a sgt error subclass on failure and
// logs progress to stderr; data goes to files only.
void cmd_gen_data(const RunConfig& cfg);
void cmd_pretrain(const RunConfig& cfg);
void cmd_train(const RunConfig& cfg);
void cmd_eval(const RunConfig& cfg);
void cmd_explain(const RunConfig& cfg);
void cmd_corrupt(const RunConfig& cfg);
void cmd_graph_dump(const RunConfig& cfg);
bool cmd_selftest(const RunConfig& cfg);  // false when any check fails

std::vector<std::string> command_names();
// Dispatch by name; returns false when a selftest reports failures.
// Unknown command → ConfigError.
bool run_command(const RunConfig& cfg, const std::string& command);

}  // namespace sgt::run
