#include "cdshedge/contracts.hpp"

#include <algorithm>
#include <cmath>

#include "cdshedge/quadrature.hpp"

namespace cdshedge {

DefaultableClaim DefaultableClaim::survival_claim(Amount payoff, Time maturity) {
    return {maturity, [payoff](double) { return payoff; }, constant_fn(0.0),
            constant_state_fn(0.0)};
}

DefaultableClaim DefaultableClaim::zero(Time maturity) {
    return survival_claim(0.0, maturity);
}

CdsSpec CdsSpec::make(Rate spread, double protection, Time maturity,
                      int reference_name) {
    return make(spread, constant_fn(protection), maturity, reference_name);
}

CdsSpec CdsSpec::make(Rate spread, TimeFn protection, Time maturity,
                      int reference_name) {
    require(maturity > 0.0, "CDS maturity must be positive");
    require(reference_name >= 1, "CDS reference name index starts at 1");
    CdsSpec s;
    s.spread = spread;
    s.protection = std::move(protection);
    s.maturity = maturity;
    s.reference_name = reference_name;
    return s;
}

DefaultableClaim CdsSpec::as_claim() const {
    TimeFn delta = protection;
    Rate kappa = spread;
    return {maturity, [](double) { return 0.0; }, constant_fn(-kappa),
            [delta](Time t, double) { return delta(t); }};
}

DefaultableClaim FtdClaim::as_single_name() const {
    require(recoveries.size() == 1,
            "single-name degeneration needs exactly one recovery");
    return {maturity, promised_payoff, dividend_rate, recoveries.front()};
}

void DividendLedger::add_lump(Time t, Amount amount) {
    if (amount != 0.0) lumps_.push_back({t, amount});
}

void DividendLedger::add_accrual(Time start, Time end, TimeFn rate) {
    if (end > start) accruals_.push_back({start, end, std::move(rate)});
}

Amount DividendLedger::value_at(Time t) const {
    Amount acc = 0.0;
    for (const auto& l : lumps_)
        if (l.time <= t) acc += l.amount;
    for (const auto& a : accruals_) {
        Time hi = std::min(t, a.end);
        if (hi > a.start)
            acc += integrate([&](double u) { return a.rate(u); }, a.start, hi, 32);
    }
    return acc;
}

DividendLedger realized_dividends(const DefaultableClaim& claim,
                                  Time default_time, Time horizon,
                                  const std::function<double(Time)>& state_at) {
    require(default_time > 0.0, "default time must be positive");
    require(horizon >= 0.0, "horizon must be nonnegative");
    DividendLedger ledger;
    const Time T = claim.maturity;
    const Time cutoff = std::min({horizon, T, default_time});
    ledger.add_accrual(0.0, cutoff, claim.dividend_rate);
    if (default_time <= std::min(horizon, T)) {
        ledger.add_lump(default_time,
                        claim.recovery(default_time, state_at(default_time)));
    } else if (horizon >= T && default_time > T) {
        ledger.add_lump(T, claim.promised_payoff(state_at(T)));
    }
    return ledger;
}

DividendLedger realized_dividends(const CdsSpec& cds, Time default_time,
                                  Time horizon) {
    return realized_dividends(cds.as_claim(), default_time, horizon,
                              [](Time) { return 0.0; });
}

DividendLedger realized_dividends(const FtdClaim& claim,
                                  const std::vector<Time>& default_times,
                                  Time horizon,
                                  const std::function<double(Time)>& state_at) {
    require(!default_times.empty() && default_times.size() == claim.names(),
            "one default time per name is required");
    auto first = std::min_element(default_times.begin(), default_times.end());
    const std::size_t first_name =
        static_cast<std::size_t>(first - default_times.begin());
    DefaultableClaim single{claim.maturity, claim.promised_payoff,
                            claim.dividend_rate, claim.recoveries[first_name]};
    return realized_dividends(single, *first, horizon, state_at);
}

Amount discounted_dividend_value(const DividendLedger& ledger,
                                 const MarketEnv& env, Time t) {
    if (ledger.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& l : ledger.lumps()) {
        require(l.time <= t + 1e-12, "ledger event beyond the valuation time");
        acc += l.amount / env.savings(l.time);
    }
    const auto& rate_knots = env.rate_curve().knots();
    for (const auto& a : ledger.accruals()) {
        require(a.end <= t + 1e-12, "ledger accrual beyond the valuation time");
        std::vector<double> breaks(rate_knots.begin(), rate_knots.end());
        acc += integrate_adaptive(
            [&](double u) { return a.rate(u) / env.savings(u); }, a.start,
            a.end, breaks, 1e-12, 32);
    }
    return env.savings(t) * acc;
}

} // namespace cdshedge
