#pragma once

#include "cdshedge/piecewise.hpp"
#include "cdshedge/types.hpp"

namespace cdshedge {

/// Deterministic rate environment: a piecewise-constant short-rate curve and
/// the savings account it generates.
class MarketEnv {
public:
    MarketEnv(PiecewiseConstantCurve short_rate, Time horizon);

    static MarketEnv flat(Rate r, Time horizon);

    Rate short_rate(Time t) const { return rate_(t); }
    Time horizon() const { return horizon_; }

    /// Savings account value B(t), B(0) = 1.
    double savings(Time t) const;

    /// Discount factor B(t)/B(T) between two dates, t <= T.
    double discount(Time t, Time T) const;

    /// Exact integral of the short rate over [a, b].
    double rate_integral(Time a, Time b) const { return rate_.integral(a, b); }

    /// Exact integral of B(u)^{-1} over [a, b] (piecewise closed form).
    double discounted_unit_integral(Time a, Time b) const;

    const PiecewiseConstantCurve& rate_curve() const { return rate_; }

private:
    PiecewiseConstantCurve rate_;
    Time horizon_;
};

} // namespace cdshedge
