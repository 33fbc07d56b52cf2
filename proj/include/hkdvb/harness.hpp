#pragma once

#include <string>
#include <vector>

#include "hkdvb/model.hpp"
#include "hkdvb/records.hpp"

namespace hkdvb {

SimConfig default_config();

// Strict INI-style parser: sections [coefficients], [domain], [discretization],
// [noise], [run]; unknown sections or keys are errors. Returns a validated
// config.
SimConfig parse_config(const std::string& path);
SimConfig parse_config_text(const std::string& text, const std::string& source_name);

// Canonical dump; parse_config_text(dump_config(c)) reproduces c exactly.
std::string dump_config(const SimConfig& config);

// Flattened snapshot fields (config.*) attached to every output record.
void attach_config(Record& record, const SimConfig& config);

// Exit codes: 0 success, 1 failed check or rejected config, 2 usage error,
// 3 blow-up.
int run_command(const std::vector<std::string>& args);

}  // namespace hkdvb
