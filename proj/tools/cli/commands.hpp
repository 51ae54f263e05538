#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "rotgyro/cache.hpp"
#include "rotgyro/hamiltonian.hpp"

namespace rotgyro::cli {

inline const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names{"spectrum", "ground-state", "ramp-plan", "protocol",
                                                "qfi", "convergence", "selftest"};
    return names;
}

/// Where a subcommand writes and what it has written.
class RunContext {
public:
    explicit RunContext(const json& merged);

    const json& config() const noexcept { return config_; }
    const Cache* cache() const noexcept { return cache_ ? &*cache_ : nullptr; }
    bool csv_enabled() const noexcept { return csv_; }
    const std::filesystem::path& output_dir() const noexcept { return out_dir_; }

    /// Opens <output>/<name> for writing (or a null sink when CSV output is off).
    std::unique_ptr<std::ostream> open_csv(const std::string& name);
    const std::vector<std::string>& artifacts() const noexcept { return artifacts_; }

private:
    json config_;
    std::filesystem::path out_dir_;
    std::optional<Cache> cache_;
    bool csv_ = true;
    std::vector<std::string> artifacts_;
};

/// Basis plus Hamiltonian; the contact tensor comes from the cache when enabled.
struct ModelBundle {
    std::shared_ptr<const ManyBodyBasis> basis;
    std::unique_ptr<HamiltonianModel> model;
};
ModelBundle build_model(const ModelParams& params, const Cache* cache);

/// Runs one subcommand on a merged configuration and returns its "results" object.
/// A failed selftest throws NumericalError with stage "selftest".
json execute(const std::string& subcommand, RunContext& ctx);

/// Library versions recorded in every summary.
json versions();

/// Full command line: parsing, configuration, execution, summary and exit status.
int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace rotgyro::cli
