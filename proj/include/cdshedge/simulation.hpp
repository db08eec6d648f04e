#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "cdshedge/hedging.hpp"
#include "cdshedge/multiname.hpp"
#include "cdshedge/rng.hpp"
#include "cdshedge/rolling.hpp"

namespace cdshedge {

/// How path loops are executed. The serial path is the reference
/// implementation; the parallel path must produce bit-identical results
/// (per-path streams plus block-ordered reductions).
enum class Execution { serial, parallel };

struct SimConfig {
    std::int64_t path_count = 1000;
    int step_count = 100;
    Time horizon = 1.0;
    std::uint64_t seed = 42;
    bool antithetic = false;
    Execution execution = Execution::parallel;

    void validate() const;
};

/// One simulated path of the driver, intensity state, survival and default
/// information on the time grid.
struct PathRecord {
    std::shared_ptr<const std::vector<Time>> grid;  // step_count + 1 nodes
    std::vector<double> dW;          // per step (empty when driver_dim = 0)
    std::vector<double> state;       // per node
    std::vector<double> cum_hazard;  // per node, starts at 0
    std::vector<double> survival;    // exp(-cum_hazard)
    std::vector<double> dM;          // per step: dH - (1-H) lambda d(t ^ tau)
    Time default_time = 0.0;         // +inf when no default on the horizon
    int default_step = -1;           // k with tau in (t_k, t_{k+1}], else -1

    int steps() const { return static_cast<int>(dM.size()); }
    bool defaulted_by(int node) const {
        return default_step >= 0 && node > default_step;
    }
};

/// Deterministic per-index path generator: full-truncation Euler for the
/// square-root state (trapezoidal hazard accumulation), exact hazard
/// integrals for deterministic kinds, default times by threshold inversion.
class PathEngine {
public:
    PathEngine(const IntensityModel& model, const MarketEnv& env,
               SimConfig config);

    const std::vector<Time>& grid() const { return *grid_; }
    const SimConfig& config() const { return config_; }

    void generate(std::int64_t path_index, PathRecord& out) const;

private:
    const IntensityModel* model_;
    SimConfig config_;
    std::shared_ptr<const std::vector<Time>> grid_;
};

std::vector<PathRecord> simulate_paths(const IntensityModel& model,
                                       const MarketEnv& env,
                                       const SimConfig& config);

/// Multi-name counterpart: correlated default times only (deterministic
/// hazards carry no diffusion state).
struct MultiPathRecord {
    std::shared_ptr<const std::vector<Time>> grid;
    std::vector<Time> default_times;
    Time first_time = 0.0;
    std::size_t first_name = 0;
    int first_step = -1;  // step containing the first default, -1 if none
};

class MultiPathEngine {
public:
    MultiPathEngine(const MultiNameModel& model, SimConfig config);

    const std::vector<Time>& grid() const { return *grid_; }
    void generate(std::int64_t path_index, MultiPathRecord& out) const;

private:
    const MultiNameModel* model_;
    SimConfig config_;
    std::shared_ptr<const std::vector<Time>> grid_;
};

/// Hedge positions for the step starting at node `step` (predictable:
/// computed from the left-node state and held over the step).
using HedgeProviderFn =
    std::function<HedgePlan(int step, Time t, double state)>;

struct RollforwardOutput {
    /// Discounted wealth at every node, per path; constant after default.
    std::vector<std::vector<double>> discounted_wealth;
    std::int64_t singular_nodes = 0;
    std::int64_t aborted_paths = 0;
    double max_residual = 0.0;
};

/// Roll self-financing wealth forward: position-weighted exact increments of
/// the instruments' discounted cumulative prices (mark-to-market change plus
/// dividends at their located times).
RollforwardOutput wealth_rollforward(const std::vector<PathRecord>& paths,
                                     const HedgeProviderFn& provider,
                                     std::span<const CdsSpec> instruments,
                                     const IntensityModel& model,
                                     const MarketEnv& env,
                                     double initial_wealth);

/// Discounted stopped cumulative price of the claim along each path.
std::vector<std::vector<double>> claim_cumulative_paths(
    const std::vector<PathRecord>& paths, const DefaultableClaim& claim,
    const IntensityModel& model, const MarketEnv& env);

struct ReplicationReport {
    std::int64_t paths = 0;
    double terminal_mean = 0.0;     // undiscounted error at T ^ tau
    double terminal_rmse = 0.0;
    double terminal_max_abs = 0.0;
    double sup_q50 = 0.0;           // quantiles of the pathwise sup of the
    double sup_q90 = 0.0;           // discounted error
    double sup_q99 = 0.0;
    double sup_max = 0.0;
    double jump_rmse = 0.0;         // wealth-vs-claim jump mismatch at default
    std::int64_t defaulted_paths = 0;
    std::int64_t singular_nodes = 0;
    std::int64_t aborted_paths = 0;
    double max_residual = 0.0;
};

ReplicationReport replication_error(
    const std::vector<std::vector<double>>& discounted_wealth,
    const std::vector<std::vector<double>>& discounted_claim,
    const std::vector<PathRecord>& paths, const MarketEnv& env);

/// Streaming accumulator for the martingale z-test: sample mean of the
/// discounted process at each node against its node-0 value, standardized by
/// the sample standard error of the increment.
class MartingaleStats {
public:
    explicit MartingaleStats(std::size_t nodes);

    void add_path(std::span<const double> discounted_values);
    void merge(const MartingaleStats& other);

    struct Result {
        std::vector<double> z;
        std::vector<double> mean;
        std::vector<double> se;
        double max_abs_z = 0.0;
        bool flagged = false;  // any |z| > 4
    };
    Result finalize() const;

    std::size_t nodes() const { return sum_.size(); }

private:
    std::int64_t count_ = 0;
    std::vector<double> sum_;    // of X_t - X_0
    std::vector<double> sumsq_;  // of (X_t - X_0)^2
    double base_sum_ = 0.0;      // of X_0
};

/// One-call martingale test over a matrix of discounted path values.
MartingaleStats::Result martingale_test(
    const std::vector<std::vector<double>>& discounted_paths);

// ---------------------------------------------------------------------------
// Streaming experiment drivers (paths are generated, consumed and reduced
// block by block; results do not depend on the thread count).
// ---------------------------------------------------------------------------

struct ReplicationOutcome {
    ReplicationReport report;
    double initial_cumulative = 0.0;  // claim cumulative price at time 0
};

/// Hedge a single-name claim with plain CDSs, solving the matching
/// conditions at every pre-default node.
ReplicationOutcome run_cds_replication(const IntensityModel& model,
                                       const MarketEnv& env,
                                       const DefaultableClaim& claim,
                                       std::span<const CdsSpec> instruments,
                                       const SimConfig& config);

/// Hedge a single-name claim with rolling CDS families.
ReplicationOutcome run_rolling_replication(
    const IntensityModel& model, const MarketEnv& env,
    const DefaultableClaim& claim, std::span<const RollingCdsSpec> families,
    const SimConfig& config);

/// Hedge a first-to-default claim with single-name CDSs, using contagion
/// values for the off-name jump entries.
ReplicationOutcome run_ftd_replication(const MultiNameModel& mnm,
                                       const MarketEnv& env,
                                       const FtdClaim& claim,
                                       std::span<const CdsSpec> instruments,
                                       const SimConfig& config);

/// Martingale diagnostics of the discounted cumulative price of a claim
/// sampled along simulated paths.
MartingaleStats::Result run_claim_martingale_test(
    const IntensityModel& model, const MarketEnv& env,
    const DefaultableClaim& claim, const SimConfig& config);

/// Martingale diagnostics of the discounted rolling-CDS wealth (Euler
/// dynamics of the rolling contract).
MartingaleStats::Result run_rolling_martingale_test(
    const IntensityModel& model, const MarketEnv& env,
    const RollingCdsSpec& spec, const SimConfig& config);

/// Monte Carlo estimate (mean, standard error) of the conditional survival
/// factor E[exp(-int_0^T lambda)] for the model, by path simulation.
struct McEstimate {
    double mean = 0.0;
    double se = 0.0;
};

McEstimate mc_survival_estimate(const IntensityModel& model,
                                const MarketEnv& env, Time maturity,
                                const SimConfig& config);

/// Estimates at several maturities from one path sweep; each maturity must
/// fall on the simulation grid.
std::vector<McEstimate> mc_survival_estimates(
    const IntensityModel& model, const MarketEnv& env,
    const std::vector<Time>& maturities, const SimConfig& config);

} // namespace cdshedge
