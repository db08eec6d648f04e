#include <doctest.h>

#include <cmath>
#include <limits>

#include "cdshedge/contracts.hpp"
#include "cdshedge/rng.hpp"

using namespace cdshedge;

namespace {
const double kInf = std::numeric_limits<double>::infinity();
double zero_state(Time) { return 0.0; }
}

TEST_CASE("CDS dividends with no default: a single premium accrual") {
    auto cds = CdsSpec::make(0.01, 0.6, 5.0);
    auto ledger = realized_dividends(cds, kInf, 5.0);
    CHECK(ledger.lumps().empty());
    REQUIRE(ledger.accruals().size() == 1);
    CHECK(ledger.value_at(5.0) == doctest::Approx(-0.05).epsilon(1e-12));
}

TEST_CASE("CDS dividends with default at 2: accrual plus protection lump") {
    auto cds = CdsSpec::make(0.01, 0.6, 5.0);
    auto ledger = realized_dividends(cds, 2.0, 5.0);
    REQUIRE(ledger.lumps().size() == 1);
    CHECK(ledger.lumps()[0].time == 2.0);
    CHECK(ledger.lumps()[0].amount == 0.6);
    CHECK(ledger.value_at(5.0) == doctest::Approx(0.6 - 0.02).epsilon(1e-12));
    CHECK(ledger.value_at(1.0) == doctest::Approx(-0.01).epsilon(1e-12));
}

TEST_CASE("claim dividends pay the promised amount only past maturity") {
    auto claim = DefaultableClaim::survival_claim(1.0, 3.0);
    auto l1 = realized_dividends(claim, kInf, 2.0, zero_state);
    CHECK(l1.lumps().empty());
    auto l2 = realized_dividends(claim, kInf, 3.0, zero_state);
    REQUIRE(l2.lumps().size() == 1);
    CHECK(l2.lumps()[0].time == 3.0);
    CHECK(l2.lumps()[0].amount == 1.0);
    auto l3 = realized_dividends(claim, 2.5, 3.0, zero_state);  // defaulted
    CHECK(l3.lumps().empty());  // zero recovery pays no cash
}

TEST_CASE("first-to-default dividends select the first defaulter's recovery") {
    FtdClaim claim{5.0,
                   [](double) { return 0.0; },
                   constant_fn(0.2),
                   {constant_state_fn(0.4), constant_state_fn(0.7)}};
    auto ledger = realized_dividends(claim, {2.0, 1.5}, 5.0, zero_state);
    REQUIRE(ledger.lumps().size() == 1);
    CHECK(ledger.lumps()[0].time == 1.5);
    CHECK(ledger.lumps()[0].amount == 0.7);
    REQUIRE(ledger.accruals().size() == 1);
    CHECK(ledger.accruals()[0].end == 1.5);
}

TEST_CASE("ledger truncation is prefix-consistent") {
    auto cds = CdsSpec::make(0.02, 0.5, 4.0);
    PathRng rng(99, 0);
    for (int trial = 0; trial < 50; ++trial) {
        double tau = 8.0 * rng.uniform();
        double t1 = 6.0 * rng.uniform();
        double t2 = t1 + (6.0 - t1) * rng.uniform();
        auto l1 = realized_dividends(cds, tau, t1);
        auto l2 = realized_dividends(cds, tau, t2);
        CHECK(l1.value_at(t1) == doctest::Approx(l2.value_at(t1)).epsilon(1e-12));
    }
}

TEST_CASE("CDS ledger reproduces the stylized dividend formula pathwise") {
    PathRng rng(7, 1);
    for (int trial = 0; trial < 200; ++trial) {
        double kappa = 0.005 + 0.03 * rng.uniform();
        double delta = 0.2 + 0.7 * rng.uniform();
        double T = 1.0 + 6.0 * rng.uniform();
        double tau = rng.uniform() < 0.3 ? kInf : 8.0 * rng.uniform() + 1e-3;
        double t = 8.0 * rng.uniform();
        auto cds = CdsSpec::make(kappa, delta, T);
        auto ledger = realized_dividends(cds, tau, t);
        double expected = (tau <= std::min(t, T) ? delta : 0.0) -
                          kappa * std::min({t, T, tau});
        CHECK(ledger.value_at(t) == doctest::Approx(expected).epsilon(1e-10));
    }
}

TEST_CASE("discounted dividend value: empty ledger and unit discounting") {
    auto env = MarketEnv::flat(0.0, 10.0);
    DividendLedger empty;
    CHECK(discounted_dividend_value(empty, env, 5.0) == 0.0);

    auto cds = CdsSpec::make(0.01, 0.6, 5.0);
    auto ledger = realized_dividends(cds, 2.0, 5.0);
    // r = 0: plain sum of all amounts
    CHECK(discounted_dividend_value(ledger, env, 5.0) ==
          doctest::Approx(0.6 - 0.02).epsilon(1e-10));
}

TEST_CASE("discounted dividend value: lump reinvested at the short rate") {
    auto env = MarketEnv::flat(0.02, 10.0);
    DividendLedger ledger;
    ledger.add_lump(1.0, 1.0);
    CHECK(discounted_dividend_value(ledger, env, 2.0) ==
          doctest::Approx(std::exp(0.02)).epsilon(1e-12));
}
