// Acceptance suite: one pass/fail line per criterion. Run all criteria by
// default or a single one with --criterion N.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "cdshedge/scenario.hpp"

using namespace cdshedge;

namespace {

const SquareRootParams kCir{0.5, 0.03, 0.1, 0.03};

struct Outcome {
    bool pass = true;
    std::string detail;
};

template <class... Args>
std::string fmt(const char* f, Args... args) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), f, args...);
    return buf;
}

// 1. constant-hazard identity: market spread equals protection times hazard
Outcome criterion1() {
    Outcome out;
    double worst = 0.0;
    for (double lam : {0.005, 0.02, 0.1}) {
        for (double delta : {0.4, 1.0}) {
            for (double r : {0.0, 0.03, 0.1}) {
                auto model = IntensityModel::constant(lam);
                auto env = MarketEnv::flat(r, 40.0);
                SingleNamePricer pricer(model, env);
                double spread =
                    pricer.market_spread(constant_fn(delta), 5.0, 0.0, 0.0);
                double rel = std::abs(spread / (delta * lam) - 1.0);
                worst = std::max(worst, rel);
            }
        }
    }
    out.pass = worst <= 1e-10;
    out.detail = fmt("max relative error %.3e (tol 1e-10)", worst);
    return out;
}

// 2. affine survival transform vs a 1e6-path Monte Carlo estimate
Outcome criterion2() {
    Outcome out;
    auto model = IntensityModel::square_root(kCir);
    auto env = MarketEnv::flat(0.0, 40.0);
    SimConfig cfg;
    cfg.path_count = 1000000;
    cfg.step_count = 2000;  // dt = 0.005 up to the longest maturity
    cfg.horizon = 10.0;
    cfg.seed = 60601;
    std::vector<Time> maturities{1.0, 5.0, 10.0};
    auto estimates = mc_survival_estimates(model, env, maturities, cfg);
    std::ostringstream detail;
    for (std::size_t k = 0; k < maturities.size(); ++k) {
        double closed = model.survival(0.0, kCir.initial_state, maturities[k]);
        double gap = std::abs(closed - estimates[k].mean);
        bool ok = gap <= 3.0 * estimates[k].se;
        out.pass = out.pass && ok;
        detail << fmt("T=%g: |closed-mc|=%.2e, 3se=%.2e%s ", maturities[k], gap,
                      3.0 * estimates[k].se, ok ? "" : " FAIL");
    }
    out.detail = detail.str();
    return out;
}

// 3. martingale z-tests for discounted cumulative prices and rolling wealth
Outcome criterion3() {
    Outcome out;
    std::ostringstream detail;
    SimConfig cfg;
    cfg.path_count = 100000;
    cfg.step_count = 150;
    cfg.horizon = 3.0;
    auto env = MarketEnv::flat(0.02, 40.0);
    std::vector<std::pair<std::string, IntensityModel>> models;
    models.emplace_back("const", IntensityModel::constant(0.04));
    models.emplace_back("sqrt", IntensityModel::square_root(kCir));
    int run = 0;
    for (const auto& [tag, model] : models) {
        cfg.seed = 8800 + 7 * run++;
        auto cds = CdsSpec::make(0.015, 0.6, 3.0);
        auto z1 = run_claim_martingale_test(model, env, cds.as_claim(), cfg);
        auto z2 = run_claim_martingale_test(
            model, env, DefaultableClaim::survival_claim(1.0, 3.0), cfg);
        auto roll = RollingCdsSpec::make(0.0, 5.0, 0.25, 0.6);
        auto z3 = run_rolling_martingale_test(model, env, roll, cfg);
        bool ok = !z1.flagged && !z2.flagged && !z3.flagged;
        out.pass = out.pass && ok;
        detail << fmt("%s: max|z| cds %.2f claim %.2f rolling %.2f%s ",
                      tag.c_str(), z1.max_abs_z, z2.max_abs_z, z3.max_abs_z,
                      ok ? "" : " FAIL");
    }
    out.detail = detail.str();
    return out;
}

// 4. replication convergence of the two-CDS hedge of a survival claim,
//    driven through the bundled scenario
Outcome criterion4() {
    Outcome out;
    auto cfg = load_scenario("cir_2cds_hedge");
    RunOverrides o;
    auto dir = std::filesystem::temp_directory_path() / "cdshedge_acc4";
    std::filesystem::remove_all(dir);
    o.out_dir = dir.string();
    auto result = run_scenario(cfg, o);
    std::ostringstream detail;
    double s0 = result.replication.initial_cumulative;
    detail << fmt("s0=%.4f rmse:", s0);
    double prev = 0.0;
    bool mono = true;
    for (std::size_t i = 0; i < result.convergence.size(); ++i) {
        auto [steps, rmse] = result.convergence[i];
        detail << fmt(" %d->%.3e", steps, rmse);
        if (i > 0) {
            double ratio = prev / rmse;
            detail << fmt(" (x%.2f)", ratio);
            if (!(ratio >= 1.3)) mono = false;
        }
        prev = rmse;
    }
    double final_rmse = result.convergence.back().second;
    bool small_enough = final_rmse <= 0.01 * s0;
    out.pass = mono && small_enough;
    detail << fmt(" final<=1%%*s0: %s", small_enough ? "yes" : "NO");
    out.detail = detail.str();
    return out;
}

// 5. deterministic intensity with zero-protection CDSs cannot hedge a
//    claim carrying spread risk: singular at every pre-default node
Outcome criterion5() {
    Outcome out;
    auto model = IntensityModel::constant(0.02, 1);  // deterministic, 1 driver
    auto env = MarketEnv::flat(0.0, 40.0);
    auto cds1 = CdsSpec::make(0.01, 0.0, 6.0);
    auto cds2 = CdsSpec::make(0.02, 0.0, 8.0);
    const Time T = 5.0;
    int singular_nodes = 0, nodes = 0;
    for (int j = 0; j < 100; ++j) {
        Time t = T * j / 100.0;
        std::vector<HedgeInstrument> insts{
            build_instrument(model, env, cds1, t, 0.0),
            build_instrument(model, env, cds2, t, 0.0)};
        // claim with a nonconstant promised payoff: its price carries a
        // Brownian loading while both instruments have none
        HedgeTarget target;
        target.jump_target = 0.0 - 0.0;
        target.diffusion_target = {env.discount(t, T) *
                                   model.survival(t, 0.0, T)};
        auto plan = solve_matching(insts, target);
        ++nodes;
        if (plan.singular && plan.non_hedgeable) ++singular_nodes;
    }
    out.pass = singular_nodes == nodes;
    out.detail = fmt("%d/%d pre-default nodes singular", singular_nodes, nodes);
    return out;
}

// 6. two-CDS determinant: closed form vs assembled matrix
Outcome criterion6() {
    Outcome out;
    PathRng rng(606, 0);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        double d1 = rng.uniform(), d2 = rng.uniform();
        double k1 = 0.1 * rng.uniform(), k2 = 0.1 * rng.uniform();
        double ph = rng.uniform(), at = 5.0 * rng.uniform();
        double s1 = 0.1 * rng.normal(), s2 = 0.1 * rng.normal();
        double formula = prop_determinant_two_cds(d1, k1, d2, k2, ph, at, s1, s2);
        double generic = (d1 * ph - k1 * at) * (d2 * s1 - k2 * s2) -
                         (d2 * ph - k2 * at) * (d1 * s1 - k1 * s2);
        worst = std::max(worst, std::abs(formula - generic));
    }
    bool zeros =
        prop_determinant_two_cds(1.0, 0.02, 2.0, 0.04, 0.3, 4.0, 0.2, 0.1) ==
            0.0 &&
        prop_determinant_two_cds(1.0, 0.02, 0.5, 0.04, 0.5, 2.0, 0.1, 0.4) ==
            0.0;
    out.pass = worst <= 1e-12 && zeros;
    out.detail = fmt("max |formula - generic| = %.3e, degeneracies exact: %s",
                     worst, zeros ? "yes" : "NO");
    return out;
}

// 7. rolling hedges: machine-exact jump-only replication under a constant
//    hazard, and the square-root convergence profile with two families
Outcome criterion7() {
    Outcome out;
    std::ostringstream detail;
    {
        auto cfg = load_scenario("rolling_const_hedge");
        RunOverrides o;
        auto dir = std::filesystem::temp_directory_path() / "cdshedge_acc7";
        std::filesystem::remove_all(dir);
        o.out_dir = dir.string();
        auto result = run_scenario(cfg, o);
        double worst = std::max(result.replication.report.sup_max,
                                result.replication.report.terminal_max_abs);
        bool ok = worst <= 1e-8;
        out.pass = out.pass && ok;
        detail << fmt("jump-only sup error %.2e (tol 1e-8)%s; ", worst,
                      ok ? "" : " FAIL");
    }
    {
        auto model = IntensityModel::square_root(kCir);
        auto env = MarketEnv::flat(0.02, 60.0);
        std::vector<RollingCdsSpec> families{
            RollingCdsSpec::make(0.0, 5.0, 0.25, 0.6),
            RollingCdsSpec::make(0.0, 9.0, 0.25, 1.0)};
        auto claim = DefaultableClaim::survival_claim(1.0, 3.0);
        SimConfig sim;
        sim.path_count = 10000;
        sim.horizon = 3.0;
        sim.seed = 20240916;
        double prev = 0.0;
        bool mono = true;
        detail << "sqrt rmse:";
        for (int steps : {125, 250, 500, 1000}) {
            sim.step_count = steps;
            auto oc = run_rolling_replication(model, env, claim, families, sim);
            double rmse = oc.report.terminal_rmse;
            detail << fmt(" %d->%.3e", steps, rmse);
            if (prev > 0.0) {
                double ratio = prev / rmse;
                detail << fmt(" (x%.2f)", ratio);
                if (!(ratio >= 1.3)) mono = false;
            }
            prev = rmse;
        }
        out.pass = out.pass && mono;
        if (!mono) detail << " FAIL";
    }
    out.detail = detail.str();
    return out;
}

// 8. first-to-default closed form and single-name degeneration
Outcome criterion8() {
    Outcome out;
    MultiNameModel mnm({PiecewiseConstantCurve::flat(0.01),
                        PiecewiseConstantCurve::flat(0.02),
                        PiecewiseConstantCurve::flat(0.03)},
                       Copula::independence());
    auto env = MarketEnv::flat(0.0, 40.0);
    FtdClaim unit{5.0,
                  [](double) { return 0.0; },
                  constant_fn(0.0),
                  {constant_state_fn(1.0), constant_state_fn(1.0),
                   constant_state_fn(1.0)}};
    double price = ftd_price(mnm, env, unit, 0.0, false);
    double closed = 1.0 - std::exp(-0.3);
    double gap1 = std::abs(price - closed);

    // n = 1 degeneration against the single-name pricer
    PiecewiseConstantCurve hz({0.0, 1.0}, {0.02, 0.05});
    MultiNameModel single({hz}, Copula::independence());
    auto env2 = MarketEnv::flat(0.02, 40.0);
    FtdClaim claim{4.0, [](double) { return 0.25; }, constant_fn(-0.01),
                   {constant_state_fn(0.6)}};
    auto model = IntensityModel::piecewise(hz);
    SingleNamePricer pricer(model, env2);
    double gap2 = 0.0;
    for (double t : {0.0, 0.8, 2.9}) {
        double a = ftd_price(single, env2, claim, t, false);
        double b = pricer.claim_ex_dividend_price(claim.as_single_name(), t,
                                                  0.0, false);
        gap2 = std::max(gap2, std::abs(a - b));
    }
    out.pass = gap1 <= 1e-9 && gap2 <= 1e-10;
    out.detail = fmt("closed-form gap %.2e (tol 1e-9), n=1 gap %.2e (tol 1e-10)",
                     gap1, gap2);
    return out;
}

// 9. first-to-default replication with contagion entries
Outcome criterion9() {
    Outcome out;
    std::ostringstream detail;
    for (const char* name : {"ftd_clayton_hedge", "ftd_independence_hedge"}) {
        auto cfg = load_scenario(name);
        RunOverrides o;
        auto dir = std::filesystem::temp_directory_path() /
                   (std::string("cdshedge_acc9_") + name);
        std::filesystem::remove_all(dir);
        o.out_dir = dir.string();
        auto result = run_scenario(cfg, o);
        double rmse = result.replication.report.terminal_rmse;
        bool ok = rmse <= 1e-3 && result.replication.report.aborted_paths == 0;
        out.pass = out.pass && ok;
        detail << fmt("%s rmse %.2e (tol 1e-3)%s; ", name, rmse,
                      ok ? "" : " FAIL");
    }
    out.detail = detail.str();
    return out;
}

// 10. immersion diagnostic: zero under independence, nonzero under clayton,
//     finite differences against the closed form
Outcome criterion10() {
    Outcome out;
    MultiNameModel ind({PiecewiseConstantCurve::flat(0.02),
                        PiecewiseConstantCurve::flat(0.05)},
                       Copula::independence());
    MultiNameModel cl({PiecewiseConstantCurve::flat(0.02),
                       PiecewiseConstantCurve::flat(0.05)},
                      Copula::clayton(2.0));
    double worst_ind = 0.0, largest_cl = 0.0, worst_fd = 0.0;
    for (int i = 1; i <= 50; ++i) {
        double t = 10.0 * i / 50.0;
        worst_ind = std::max(worst_ind, std::abs(immersion_diagnostic(ind, t)));
        double fd = immersion_diagnostic(cl, t);
        double an = immersion_diagnostic_analytic(cl, t);
        largest_cl = std::max(largest_cl, std::abs(an));
        worst_fd = std::max(worst_fd, std::abs(fd - an));
    }
    out.pass = worst_ind <= 1e-10 && largest_cl >= 1e-4 && worst_fd <= 1e-6;
    out.detail =
        fmt("independence max %.2e (tol 1e-10), clayton max %.3f (>=1e-4), "
            "fd-vs-closed %.2e (tol 1e-6)",
            worst_ind, largest_cl, worst_fd);
    return out;
}

struct Criterion {
    int id;
    const char* name;
    Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "constant-hazard market spread identity", criterion1},
    {2, "affine survival vs Monte Carlo", criterion2},
    {3, "martingale suite", criterion3},
    {4, "two-CDS replication convergence", criterion4},
    {5, "deterministic-intensity non-hedgeability", criterion5},
    {6, "two-CDS determinant formula", criterion6},
    {7, "rolling-CDS hedges", criterion7},
    {8, "first-to-default closed forms", criterion8},
    {9, "first-to-default replication", criterion9},
    {10, "immersion diagnostic", criterion10},
};

} // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc)
            only = std::atoi(argv[++i]);
    }
    bool all_pass = true;
    for (const auto& c : kCriteria) {
        if (only != 0 && c.id != only) continue;
        auto t0 = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception& e) {
            out.pass = false;
            out.detail = std::string("exception: ") + e.what();
        }
        double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        std::printf("%s criterion %d: %s [%s] (%.1fs)\n",
                    out.pass ? "PASS" : "FAIL", c.id, c.name,
                    out.detail.c_str(), secs);
        std::fflush(stdout);
        all_pass = all_pass && out.pass;
    }
    return all_pass ? 0 : 1;
}
