#include <doctest.h>

#include <cmath>

#include "cdshedge/simulation.hpp"

#ifdef CDSHEDGE_HAS_OPENMP
#include <omp.h>
#endif

using namespace cdshedge;

namespace {
const SquareRootParams kCir{0.5, 0.03, 0.1, 0.03};

SimConfig small_config(std::int64_t paths, int steps, Time horizon,
                       std::uint64_t seed) {
    SimConfig cfg;
    cfg.path_count = paths;
    cfg.step_count = steps;
    cfg.horizon = horizon;
    cfg.seed = seed;
    return cfg;
}
}

TEST_CASE("noise-free square-root paths follow the mean-reversion ODE") {
    auto env = MarketEnv::flat(0.0, 20.0);
    auto m = IntensityModel::square_root({0.5, 0.03, 0.0, 0.08});
    double prev_err = 0.0;
    for (int steps : {100, 200, 400}) {
        auto paths = simulate_paths(m, env, small_config(1, steps, 5.0, 3));
        double exact = 0.03 + (0.08 - 0.03) * std::exp(-0.5 * 5.0);
        double err = std::abs(paths[0].state.back() - exact);
        if (prev_err > 0.0) CHECK(prev_err / err >= 1.8);
        prev_err = err;
    }
}

TEST_CASE("square-root terminal mean matches the closed form within 3 SE") {
    auto env = MarketEnv::flat(0.0, 20.0);
    auto m = IntensityModel::square_root({0.5, 0.03, 0.1, 0.06});
    auto cfg = small_config(100000, 200, 5.0, 99);
    auto paths = simulate_paths(m, env, cfg);
    double sum = 0.0, sumsq = 0.0;
    for (const auto& p : paths) {
        sum += p.state.back();
        sumsq += p.state.back() * p.state.back();
    }
    const double n = static_cast<double>(cfg.path_count);
    double mean = sum / n;
    double se = std::sqrt((sumsq / n - mean * mean) / n);
    double exact = 0.03 + (0.06 - 0.03) * std::exp(-0.5 * 5.0);
    CHECK(std::abs(mean - exact) <= 3.0 * se);
}

TEST_CASE("same seed produces identical paths regardless of execution mode") {
    auto env = MarketEnv::flat(0.02, 20.0);
    auto m = IntensityModel::square_root(kCir);
    auto serial_cfg = small_config(512, 50, 2.0, 12345);
    serial_cfg.execution = Execution::serial;
    auto parallel_cfg = serial_cfg;
    parallel_cfg.execution = Execution::parallel;
    auto a = simulate_paths(m, env, serial_cfg);
    auto b = simulate_paths(m, env, parallel_cfg);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].default_time == b[i].default_time);
        for (std::size_t j = 0; j < a[i].state.size(); ++j)
            CHECK(a[i].state[j] == b[i].state[j]);
    }
}

TEST_CASE("path records satisfy the compensated-martingale composition") {
    auto env = MarketEnv::flat(0.0, 20.0);
    auto m = IntensityModel::square_root(kCir);
    auto paths = simulate_paths(m, env, small_config(200, 40, 3.0, 7));
    for (const auto& p : paths) {
        const auto& grid = *p.grid;
        for (int j = 0; j < p.steps(); ++j) {
            double dH =
                (p.default_time > grid[j] && p.default_time <= grid[j + 1]) ? 1.0
                                                                            : 0.0;
            double stopped =
                std::max(0.0, std::min(p.default_time, grid[j + 1]) - grid[j]);
            if (p.default_time <= grid[j]) {
                CHECK(p.dM[j] == 0.0);
            } else {
                double lam = std::max(p.state[j], 0.0);
                CHECK(p.dM[j] ==
                      doctest::Approx(dH - lam * stopped).epsilon(1e-12));
            }
        }
        for (std::size_t j = 1; j < p.survival.size(); ++j) {
            CHECK(p.survival[j] > 0.0);
            CHECK(p.survival[j] <= p.survival[j - 1] + 1e-15);
        }
    }
}

TEST_CASE("antithetic twin mirrors the driver and the default draw") {
    auto env = MarketEnv::flat(0.0, 20.0);
    auto m = IntensityModel::square_root(kCir);
    auto cfg = small_config(2, 30, 2.0, 555);
    cfg.antithetic = true;
    auto paths = simulate_paths(m, env, cfg);
    for (int j = 0; j < paths[0].steps(); ++j)
        CHECK(paths[0].dW[j] == doctest::Approx(-paths[1].dW[j]).epsilon(1e-15));
}

TEST_CASE("zero positions leave discounted wealth constant") {
    auto env = MarketEnv::flat(0.03, 20.0);
    auto m = IntensityModel::square_root(kCir);
    auto paths = simulate_paths(m, env, small_config(50, 60, 3.0, 21));
    std::vector<CdsSpec> insts{CdsSpec::make(0.01, 0.6, 5.0)};
    auto provider = [](int, Time, double) {
        HedgePlan plan;
        plan.positions = {0.0};
        return plan;
    };
    auto out = wealth_rollforward(paths, provider, insts, m, env, 0.7);
    for (const auto& w : out.discounted_wealth)
        for (double v : w) CHECK(v == 0.7);
}

TEST_CASE("buy-and-hold one CDS: terminal wealth is a martingale estimate of "
          "the initial price") {
    auto env = MarketEnv::flat(0.02, 20.0);
    auto m = IntensityModel::square_root(kCir);
    auto cfg = small_config(20000, 150, 3.0, 97);
    auto paths = simulate_paths(m, env, cfg);
    auto cds = CdsSpec::make(0.012, 0.6, 3.0);
    std::vector<CdsSpec> insts{cds};
    SingleNamePricer pricer(m, env);
    double s0 = pricer.cds_ex_dividend_price(cds, 0.0, kCir.initial_state, false);
    auto provider = [](int, Time, double) {
        HedgePlan plan;
        plan.positions = {1.0};
        return plan;
    };
    auto out = wealth_rollforward(paths, provider, insts, m, env, s0);
    double sum = 0.0, sumsq = 0.0;
    for (const auto& w : out.discounted_wealth) {
        sum += w.back();
        sumsq += w.back() * w.back();
    }
    const double n = static_cast<double>(cfg.path_count);
    double mean = sum / n;
    double se = std::sqrt((sumsq / n - mean * mean) / n);
    CHECK(std::abs(mean - s0) <= 3.0 * se);
}

TEST_CASE("hedging a traded CDS with itself replicates pathwise") {
    auto env = MarketEnv::flat(0.02, 20.0);
    auto m = IntensityModel::square_root(kCir);
    auto cfg = small_config(300, 120, 3.0, 4242);
    auto paths = simulate_paths(m, env, cfg);
    auto cds = CdsSpec::make(0.012, 0.6, 3.0);
    std::vector<CdsSpec> insts{cds, CdsSpec::make(0.03, 1.0, 5.0)};
    auto claim = cds.as_claim();

    auto claims = claim_cumulative_paths(paths, claim, m, env);
    SingleNamePricer pricer(m, env);
    double v0 = pricer.claim_ex_dividend_price(claim, 0.0, kCir.initial_state,
                                               false);
    const auto& grid = *paths.front().grid;
    std::vector<CdsLegsSlice> s1, s2;
    std::vector<ClaimSlice> cs;
    for (double t : grid) {
        s1.emplace_back(m, env, t, insts[0].maturity, insts[0].protection);
        s2.emplace_back(m, env, t, insts[1].maturity, insts[1].protection);
        cs.emplace_back(m, env, claim, t);
    }
    auto provider = [&](int step, Time t, double x) {
        const std::size_t j = static_cast<std::size_t>(step);
        auto loading = [&](auto&& fn) {
            const double h = std::max(1e-5 * std::abs(x), 1e-8);
            return m.diffusion_loading(x) * (fn(x + h) - fn(x - h)) / (2.0 * h);
        };
        std::vector<HedgeInstrument> hi(2);
        hi[0].jump_exposure =
            insts[0].protection(t) - s1[j].price(x, insts[0].spread);
        hi[0].diffusion_exposure = {
            loading([&](double y) { return s1[j].price(y, insts[0].spread); })};
        hi[1].jump_exposure =
            insts[1].protection(t) - s2[j].price(x, insts[1].spread);
        hi[1].diffusion_exposure = {
            loading([&](double y) { return s2[j].price(y, insts[1].spread); })};
        HedgeTarget target;
        target.jump_target = claim.recovery(t, x) - cs[j].value(x);
        target.diffusion_target = {
            loading([&](double y) { return cs[j].value(y); })};
        return solve_matching(hi, target);
    };
    auto out = wealth_rollforward(paths, provider, insts, m, env, v0);
    CHECK(out.singular_nodes == 0);
    auto rep = replication_error(out.discounted_wealth, claims, paths, env);
    CHECK(rep.sup_max <= 1e-10);
    CHECK(rep.terminal_rmse <= 1e-10);
    CHECK(rep.jump_rmse <= 1e-10);
}

TEST_CASE("replication report on identical streams is all zeros") {
    auto env = MarketEnv::flat(0.0, 20.0);
    auto m = IntensityModel::constant(0.05);
    auto paths = simulate_paths(m, env, small_config(100, 30, 2.0, 13));
    auto claim = CdsSpec::make(0.02, 0.4, 2.0).as_claim();
    auto claims = claim_cumulative_paths(paths, claim, m, env);
    auto rep = replication_error(claims, claims, paths, env);
    CHECK(rep.terminal_rmse == 0.0);
    CHECK(rep.sup_max == 0.0);
    CHECK(rep.jump_rmse == 0.0);
    CHECK(rep.defaulted_paths > 0);
}

TEST_CASE("martingale test: constant process scores zero everywhere") {
    std::vector<std::vector<double>> paths(50, std::vector<double>(10, 0.3));
    auto res = martingale_test(paths);
    CHECK(res.max_abs_z == 0.0);
    CHECK(!res.flagged);
}

TEST_CASE("martingale test flags an uncompensated default indicator") {
    auto env = MarketEnv::flat(0.0, 20.0);
    auto m = IntensityModel::constant(0.08);
    auto cfg = small_config(20000, 40, 4.0, 5150);
    auto paths = simulate_paths(m, env, cfg);
    MartingaleStats stats(paths.front().grid->size());
    std::vector<double> h(paths.front().grid->size());
    for (const auto& p : paths) {
        const auto& grid = *p.grid;
        for (std::size_t j = 0; j < grid.size(); ++j)
            h[j] = p.default_time <= grid[j] ? 1.0 : 0.0;
        stats.add_path(h);
    }
    auto res = stats.finalize();
    CHECK(res.flagged);
    CHECK(res.max_abs_z > 20.0);
}

TEST_CASE("discounted cumulative CDS price passes the martingale test") {
    auto env = MarketEnv::flat(0.02, 20.0);
    auto m = IntensityModel::square_root(kCir);
    auto cfg = small_config(20000, 100, 3.0, 31);
    auto cds = CdsSpec::make(0.015, 0.6, 3.0);
    auto res = run_claim_martingale_test(m, env, cds.as_claim(), cfg);
    CHECK(res.max_abs_z <= 4.0);
}

TEST_CASE("streaming replication is bitwise identical across execution modes") {
    auto env = MarketEnv::flat(0.02, 20.0);
    auto m = IntensityModel::square_root(kCir);
    SingleNamePricer pricer(m, env);
    double x0 = kCir.initial_state;
    Rate k1 = pricer.market_spread(constant_fn(1.0), 5.0, 0.0, x0);
    Rate k2 = 1.5 * pricer.market_spread(constant_fn(0.6), 5.0, 0.0, x0);
    std::vector<CdsSpec> insts{CdsSpec::make(k1, 1.0, 5.0),
                               CdsSpec::make(k2, 0.6, 5.0)};
    auto claim = DefaultableClaim::survival_claim(1.0, 2.0);
    auto cfg = small_config(600, 50, 2.0, 88);
    cfg.execution = Execution::serial;
    auto serial = run_cds_replication(m, env, claim, insts, cfg);
    cfg.execution = Execution::parallel;
    auto parallel = run_cds_replication(m, env, claim, insts, cfg);
    CHECK(serial.report.terminal_rmse == parallel.report.terminal_rmse);
    CHECK(serial.report.terminal_mean == parallel.report.terminal_mean);
    CHECK(serial.report.sup_max == parallel.report.sup_max);
    CHECK(serial.initial_cumulative == parallel.initial_cumulative);
}

TEST_CASE("monte carlo survival estimate agrees with the closed form") {
    auto env = MarketEnv::flat(0.0, 20.0);
    auto m = IntensityModel::square_root(kCir);
    auto cfg = small_config(50000, 400, 2.0, 2718);
    auto est = mc_survival_estimate(m, env, 2.0, cfg);
    double exact = m.survival(0.0, kCir.initial_state, 2.0);
    CHECK(std::abs(est.mean - exact) <= 3.0 * est.se);
}

TEST_CASE("config validation rejects degenerate settings") {
    SimConfig cfg;
    cfg.path_count = 0;
    CHECK_THROWS_AS(cfg.validate(), ArgumentError);
    cfg.path_count = 10;
    cfg.step_count = 1;
    CHECK_THROWS_AS(cfg.validate(), ArgumentError);
    cfg.step_count = 10;
    cfg.antithetic = true;
    cfg.path_count = 11;
    CHECK_THROWS_AS(cfg.validate(), ArgumentError);
}

TEST_CASE("doubling the path count halves the standard error") {
    auto env = MarketEnv::flat(0.0, 20.0);
    auto m = IntensityModel::square_root(kCir);
    auto base = small_config(20000, 100, 2.0, 999);
    auto twice = small_config(40000, 100, 2.0, 999);
    auto e1 = mc_survival_estimate(m, env, 2.0, base);
    auto e2 = mc_survival_estimate(m, env, 2.0, twice);
    CHECK(e1.se / e2.se == doctest::Approx(std::sqrt(2.0)).epsilon(0.1));
}

TEST_CASE("self-financing identity re-verified from instrument price paths") {
    // wealth increments must equal the position-weighted increments of the
    // instruments' discounted cumulative prices, recomputed independently
    // through the claim-pricing route
    auto env = MarketEnv::flat(0.02, 20.0);
    auto m = IntensityModel::square_root(kCir);
    auto cfg = small_config(40, 60, 3.0, 1612);
    auto paths = simulate_paths(m, env, cfg);
    std::vector<CdsSpec> insts{CdsSpec::make(0.012, 0.6, 5.0),
                               CdsSpec::make(0.03, 1.0, 4.0)};
    // positions vary over time but are deterministic, so both routes see the
    // same strategy
    auto provider = [](int step, Time, double) {
        HedgePlan plan;
        plan.positions = {1.0 + 0.01 * step, -0.5};
        return plan;
    };
    auto out = wealth_rollforward(paths, provider, insts, m, env, 0.0);

    std::vector<std::vector<std::vector<double>>> inst_paths;
    for (const auto& cds : insts)
        inst_paths.push_back(claim_cumulative_paths(paths, cds.as_claim(), m, env));

    for (std::size_t p = 0; p < paths.size(); ++p) {
        const auto& w = out.discounted_wealth[p];
        for (std::size_t j = 0; j + 1 < w.size(); ++j) {
            if (paths[p].default_step >= 0 &&
                static_cast<int>(j) > paths[p].default_step)
                break;
            double dv = w[j + 1] - w[j];
            double expected = 0.0;
            auto plan = provider(static_cast<int>(j), 0.0, 0.0);
            for (std::size_t i = 0; i < insts.size(); ++i)
                expected += plan.positions[i] *
                            (inst_paths[i][p][j + 1] - inst_paths[i][p][j]);
            CHECK(dv == doctest::Approx(expected).epsilon(1e-12));
        }
    }
}

TEST_CASE("stopped stability: discounted streams freeze after default") {
    auto env = MarketEnv::flat(0.04, 20.0);
    auto m = IntensityModel::constant(0.4);  // frequent defaults
    auto cfg = small_config(200, 50, 3.0, 5);
    auto paths = simulate_paths(m, env, cfg);
    auto cds = CdsSpec::make(0.2, 0.6, 3.0);
    auto claims = claim_cumulative_paths(paths, cds.as_claim(), m, env);
    std::vector<CdsSpec> insts{cds};
    auto provider = [](int, Time, double) {
        HedgePlan plan;
        plan.positions = {1.0};
        return plan;
    };
    auto out = wealth_rollforward(paths, provider, insts, m, env, 0.1);
    int seen = 0;
    for (std::size_t p = 0; p < paths.size(); ++p) {
        if (paths[p].default_step < 0) continue;
        ++seen;
        const auto& w = out.discounted_wealth[p];
        const auto& c = claims[p];
        for (std::size_t j =
                 static_cast<std::size_t>(paths[p].default_step) + 1;
             j + 1 < w.size(); ++j) {
            CHECK(w[j + 1] == w[j]);
            CHECK(c[j + 1] == c[j]);
        }
    }
    CHECK(seen > 50);
}

TEST_CASE("affine survival matches Monte Carlo on a grid of (t, T, x) triples") {
    // time homogeneity: the law from (t, x) over horizon T - t equals the law
    // from (0, x), so each triple is simulated with a re-anchored model
    auto env = MarketEnv::flat(0.0, 40.0);
    for (double t : {0.0, 1.0}) {
        for (double dT : {1.0, 4.0}) {
            for (double x : {0.015, 0.06}) {
                auto m = IntensityModel::square_root(
                    {kCir.mean_reversion, kCir.long_run_level, kCir.volatility,
                     x});
                SimConfig cfg;
                cfg.path_count = 100000;
                cfg.step_count = static_cast<int>(200 * dT);
                cfg.horizon = dT;
                cfg.seed = 7000 + static_cast<std::uint64_t>(
                                      1000 * t + 100 * dT + 1000 * x);
                auto est = mc_survival_estimate(m, env, dT, cfg);
                double closed = m.survival(t, x, t + dT);
                CHECK(std::abs(est.mean - closed) <= 3.0 * est.se);
            }
        }
    }
}

#ifdef CDSHEDGE_HAS_OPENMP
TEST_CASE("thread count does not change simulation results") {
    auto env = MarketEnv::flat(0.02, 20.0);
    auto m = IntensityModel::square_root(kCir);
    auto cfg = small_config(2000, 40, 2.0, 777);
    int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    auto e1 = mc_survival_estimate(m, env, 2.0, cfg);
    omp_set_num_threads(2);
    auto e2 = mc_survival_estimate(m, env, 2.0, cfg);
    omp_set_num_threads(saved);
    CHECK(e1.mean == e2.mean);
    CHECK(e1.se == e2.se);
}
#endif
