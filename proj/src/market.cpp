#include "cdshedge/market.hpp"

#include <cmath>

namespace cdshedge {

MarketEnv::MarketEnv(PiecewiseConstantCurve short_rate, Time horizon)
    : rate_(std::move(short_rate)), horizon_(horizon) {
    require(horizon_ > 0.0, "horizon must be positive");
}

MarketEnv MarketEnv::flat(Rate r, Time horizon) {
    return MarketEnv(PiecewiseConstantCurve::flat(r), horizon);
}

double MarketEnv::savings(Time t) const {
    require(t >= 0.0, "savings account: time must be nonnegative");
    return std::exp(rate_.integral(0.0, t));
}

double MarketEnv::discount(Time t, Time T) const {
    require(0.0 <= t && t <= T, "discount: need 0 <= t <= T");
    require(T <= horizon_ + 1e-12, "discount: T beyond the model horizon");
    return std::exp(-rate_.integral(t, T));
}

double MarketEnv::discounted_unit_integral(Time a, Time b) const {
    require(0.0 <= a && a <= b, "discounted integral: need 0 <= a <= b");
    const auto& knots = rate_.knots();
    const auto& vals = rate_.values();
    double acc = 0.0;
    double big_r = rate_.integral(0.0, a);  // running integral of r to `lo`
    for (std::size_t i = 0; i < knots.size(); ++i) {
        Time lo = std::max(a, knots[i]);
        Time hi = (i + 1 < knots.size()) ? std::min(b, knots[i + 1]) : b;
        if (hi <= lo) continue;
        double r = vals[i];
        double head = std::exp(-(big_r));
        if (r == 0.0)
            acc += head * (hi - lo);
        else
            acc += head * (1.0 - std::exp(-r * (hi - lo))) / r;
        big_r += r * (hi - lo);
    }
    return acc;
}

} // namespace cdshedge
