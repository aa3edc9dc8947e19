#pragma once

#include <ostream>
#include <string>

#include "pcflow/config.hpp"

namespace pcflow {

// One function per CLI command. Each reads what earlier commands wrote under
// spec.out, writes its own outputs there and logs progress to `log`.

void cmd_gen_data(const ExperimentSpec& spec, std::ostream& log);
void cmd_precompute(const ExperimentSpec& spec, std::ostream& log);
void cmd_train(const ExperimentSpec& spec, std::ostream& log);
void cmd_sample(const ExperimentSpec& spec, std::ostream& log);
void cmd_eval(const ExperimentSpec& spec, std::ostream& log);
void cmd_diag(const ExperimentSpec& spec, std::ostream& log);
void cmd_bench_coupling(const ExperimentSpec& spec, std::ostream& log);

/// Dispatches by command name; throws ConfigError for unknown names.
void run_command(const std::string& name, const ExperimentSpec& spec, std::ostream& log);

/// Exit status for an exception escaping a command: 2 config, 3 numeric,
/// 4 I/O, 1 anything else.
int exit_code_for(const std::exception& e);

}  // namespace pcflow
