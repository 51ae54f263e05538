#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rotgyro/common.hpp"
#include "rotgyro/dynamics.hpp"
#include "rotgyro/eigensolver.hpp"
#include "rotgyro/hamiltonian.hpp"
#include "rotgyro/metrology.hpp"

namespace rotgyro::cli {

using json = nlohmann::json;

/// Schema violation in a run configuration (exit status 2).
class ConfigError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

/// Every recognised key with its default. A null default marks an optional number.
json default_config();

/// Validates `user` against the defaults and returns the merged configuration.
/// Unknown keys and type mismatches throw ConfigError.
json merge_config(const json& user);

/// Parses a JSON file (ConfigError on syntax errors).
json read_config_file(const std::filesystem::path& path);

/// Applies "dotted.key=value" to a user configuration. The value is parsed as
/// JSON when possible and taken as a string otherwise.
void apply_override(json& user, std::string_view assignment);

/// FNV-1a digest of the canonical (sorted, compact) dump, without the output and
/// cache blocks.
std::string config_hash(const json& merged);

// typed views of a merged configuration

ModelParams model_params(const json& cfg);
SolverOptions solver_options(const json& cfg);
IntegratorConfig integrator_config(const json& cfg);
std::vector<double> omega_ext_grid(const json& cfg);
ProtocolConfig protocol_config(const json& cfg);
RampPlanOptions ramp_plan_options(const json& cfg);

}  // namespace rotgyro::cli
