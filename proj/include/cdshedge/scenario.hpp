#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cdshedge/simulation.hpp"

namespace cdshedge {

/// Fully parsed and validated scenario: model, instruments, claim,
/// simulation settings and output selection. "at_market" spreads are
/// resolved against the model at time 0 during parsing.
struct ScenarioConfig {
    PiecewiseConstantCurve rate_curve;

    std::optional<IntensityModel> single_model;
    std::optional<MultiNameModel> multi_model;

    std::vector<CdsSpec> cds_instruments;
    std::vector<RollingCdsSpec> rolling_instruments;

    std::optional<DefaultableClaim> single_claim;
    std::optional<FtdClaim> ftd_claim;
    Time claim_maturity = 0.0;

    // reference contract for the spread column of the price table
    TimeFn spread_protection;
    Time spread_maturity = 0.0;
    std::vector<TimeFn> ftd_spread_recoveries;

    SimConfig sim;

    std::string out_dir = "out";
    bool write_price_table = true;
    bool write_hedge_table = true;
    bool write_replication = true;
    bool write_convergence = true;
    std::vector<int> convergence_steps;

    std::string raw_text;         // as read, for the config hash
    std::string normalized_echo;  // validated config re-serialized
};

/// Parse and validate scenario JSON. Unknown keys are rejected; rates,
/// volatilities and hazards must be nonnegative. Throws ConfigError.
ScenarioConfig parse_scenario_text(const std::string& text);

/// Resolve a bundled scenario name or a filesystem path.
ScenarioConfig load_scenario(const std::string& name_or_path);

std::vector<std::string> builtin_scenario_names();

/// Raw JSON text of a bundled scenario; throws ConfigError if unknown.
std::string builtin_scenario_text(const std::string& name);

struct RunOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> paths;
    std::optional<int> steps;
    std::optional<std::string> out_dir;
};

struct ScenarioResult {
    ReplicationOutcome replication;
    std::vector<std::string> files_written;
    // convergence study: (step count, terminal rmse)
    std::vector<std::pair<int, double>> convergence;
};

/// Run the scenario end to end and write the selected CSV reports.
ScenarioResult run_scenario(const ScenarioConfig& config,
                            const RunOverrides& overrides = {});

} // namespace cdshedge
