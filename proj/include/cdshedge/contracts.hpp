#pragma once

#include <vector>

#include "cdshedge/market.hpp"
#include "cdshedge/types.hpp"

namespace cdshedge {

/// Defaultable claim: promised payoff X at maturity if no default, a
/// continuous dividend stream at rate a(t) while alive, and a recovery
/// Z(t, state) paid at default. The recovery is evaluated at the left limit
/// of the state path at the default time.
struct DefaultableClaim {
    Time maturity;
    std::function<double(double)> promised_payoff;  // of terminal state
    TimeFn dividend_rate;
    StateFn recovery;

    static DefaultableClaim survival_claim(Amount payoff, Time maturity);
    static DefaultableClaim zero(Time maturity);
};

/// Stylized credit default swap: protection delta(t) received at default,
/// premium kappa paid continuously up to default or maturity.
struct CdsSpec {
    Rate spread = 0.0;
    TimeFn protection;
    Time maturity = 0.0;
    int reference_name = 1;

    static CdsSpec make(Rate spread, double protection, Time maturity,
                        int reference_name = 1);
    static CdsSpec make(Rate spread, TimeFn protection, Time maturity,
                        int reference_name = 1);

    /// The CDS viewed as a defaultable claim (X = 0, Z = delta, a = -kappa).
    DefaultableClaim as_claim() const;
};

/// First-to-default claim on n names: pays recovery Z^i at the first default
/// when name i defaults first, promised payoff X at maturity if all survive.
struct FtdClaim {
    Time maturity;
    std::function<double(double)> promised_payoff;
    TimeFn dividend_rate;
    std::vector<StateFn> recoveries;

    std::size_t names() const { return recoveries.size(); }

    /// Degenerates exactly to the single-name claim when n = 1.
    DefaultableClaim as_single_name() const;
};

/// Realized cash flows of a contract along one path: lump payments plus
/// accrual segments carrying a rate function. No events occur after
/// min(default time, maturity).
class DividendLedger {
public:
    struct Lump {
        Time time;
        Amount amount;
    };
    struct Accrual {
        Time start;
        Time end;
        TimeFn rate;
    };

    void add_lump(Time t, Amount amount);
    void add_accrual(Time start, Time end, TimeFn rate);

    const std::vector<Lump>& lumps() const { return lumps_; }
    const std::vector<Accrual>& accruals() const { return accruals_; }

    bool empty() const { return lumps_.empty() && accruals_.empty(); }

    /// Undiscounted cumulative dividend total over (0, t].
    Amount value_at(Time t) const;

private:
    std::vector<Lump> lumps_;
    std::vector<Accrual> accruals_;
};

/// Pathwise dividends of a claim up to the horizon. The state accessor
/// supplies the model state at a given time (identically 0 for deterministic
/// models).
DividendLedger realized_dividends(const DefaultableClaim& claim,
                                  Time default_time, Time horizon,
                                  const std::function<double(Time)>& state_at);

DividendLedger realized_dividends(const CdsSpec& cds, Time default_time,
                                  Time horizon);

/// First-to-default dividends: the first defaulter's recovery is paid at the
/// first default time.
DividendLedger realized_dividends(const FtdClaim& claim,
                                  const std::vector<Time>& default_times,
                                  Time horizon,
                                  const std::function<double(Time)>& state_at);

/// B(t) * sum of discounted ledger amounts: lump amounts at their payment
/// times plus accruals integrated against the rate curve.
Amount discounted_dividend_value(const DividendLedger& ledger,
                                 const MarketEnv& env, Time t);

} // namespace cdshedge
