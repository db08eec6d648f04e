// Timing comparison of the serial reference path loop against the OpenMP
// one, on path generation alone and on a full hedge-and-replicate run.

#include <chrono>
#include <cstdio>

#include "cdshedge/scenario.hpp"

using namespace cdshedge;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
}

MarketEnv make_env() { return MarketEnv::flat(0.02, 100.0); }

double bench_generation(Execution exec, std::int64_t paths) {
    auto model = IntensityModel::square_root({0.5, 0.03, 0.1, 0.03});
    auto env = make_env();
    SimConfig cfg;
    cfg.path_count = paths;
    cfg.step_count = 500;
    cfg.horizon = 5.0;
    cfg.seed = 1234;
    cfg.execution = exec;
    auto t0 = std::chrono::steady_clock::now();
    auto est = mc_survival_estimate(model, env, cfg.horizon, cfg);
    double elapsed = seconds_since(t0);
    std::printf("  generation %-8s paths=%-8lld mean=%.6f  %.3fs\n",
                exec == Execution::serial ? "serial" : "parallel",
                static_cast<long long>(paths), est.mean, elapsed);
    return elapsed;
}

double bench_replication(Execution exec, std::int64_t paths) {
    auto model = IntensityModel::square_root({0.5, 0.03, 0.1, 0.03});
    auto env = make_env();
    SingleNamePricer pricer(model, env);
    const double x0 = model.initial_state();
    const Rate k1 = pricer.market_spread(constant_fn(1.0), 5.0, 0.0, x0);
    const Rate k2 =
        1.5 * pricer.market_spread(constant_fn(0.6), 5.0, 0.0, x0);
    std::vector<CdsSpec> instruments{CdsSpec::make(k1, 1.0, 5.0),
                                     CdsSpec::make(k2, 0.6, 5.0)};
    auto claim = DefaultableClaim::survival_claim(1.0, 3.0);
    SimConfig cfg;
    cfg.path_count = paths;
    cfg.step_count = 250;
    cfg.horizon = 3.0;
    cfg.seed = 99;
    cfg.execution = exec;
    auto t0 = std::chrono::steady_clock::now();
    auto out = run_cds_replication(model, env, claim, instruments, cfg);
    double elapsed = seconds_since(t0);
    std::printf("  replication %-8s paths=%-8lld rmse=%.3e  %.3fs\n",
                exec == Execution::serial ? "serial" : "parallel",
                static_cast<long long>(paths), out.report.terminal_rmse,
                elapsed);
    return elapsed;
}

} // namespace

int main() {
    std::printf("path generation (square-root model, 500 steps)\n");
    for (std::int64_t paths : {20000, 100000}) {
        double ts = bench_generation(Execution::serial, paths);
        double tp = bench_generation(Execution::parallel, paths);
        std::printf("  speedup x%.2f\n", ts / tp);
    }
    std::printf("hedge-and-replicate (2 CDSs, survival claim, 250 steps)\n");
    for (std::int64_t paths : {1000, 4000}) {
        double ts = bench_replication(Execution::serial, paths);
        double tp = bench_replication(Execution::parallel, paths);
        std::printf("  speedup x%.2f\n", ts / tp);
    }
    return 0;
}
