#pragma once

#include <span>

#include "cdshedge/hedging.hpp"

namespace cdshedge {

/// Rolling CDS family: a contract that is continuously entered at the
/// current market spread and unwound one step later. The family is
/// rebalanced on a tenor schedule: window k covers
/// [start + k tenor, start + (k+1) tenor) and trades the maturity
/// expiry + k tenor, so the nominal duration stays constant.
struct RollingCdsSpec {
    Time start = 0.0;
    Time expiry = 0.0;   // maturity traded in window 0
    double tenor = 0.25; // window length
    TimeFn protection;

    static RollingCdsSpec make(Time start, Time expiry, double tenor,
                               double protection);
    static RollingCdsSpec make(Time start, Time expiry, double tenor,
                               TimeFn protection);
};

/// The contract of a rolling family that is alive at time t.
struct ActiveRoll {
    int window_index;
    Time window_start;
    Time window_end;
    Time maturity;
};

ActiveRoll active_contract(const RollingCdsSpec& spec, Time t);

/// Exposures of the active rolling contract at (t, state). The freshly
/// entered CDS is worthless, so the jump exposure is the protection itself;
/// the diffusion exposure is the Brownian loading of the protection leg
/// minus the current market spread times the loading of the annuity leg.
HedgeInstrument rolling_instrument(const IntensityModel& model,
                                   const MarketEnv& env,
                                   const RollingCdsSpec& spec, Time t,
                                   double state);

/// One Euler step of the rolling wealth dynamics
///   dR = r R dt + delta dM + (1-H) (zeta1 - kappa(t) zeta2) dW.
/// default_time is the path's default time (+infinity when no default);
/// the compensator is stopped at the default time within the step.
double rolling_wealth_step(const IntensityModel& model, const MarketEnv& env,
                           const RollingCdsSpec& spec, Time t, double state,
                           double wealth, double dt,
                           std::span<const double> dW, Time default_time);

/// Solve the rolling-hedge matching conditions with the currently active
/// instruments.
HedgePlan rolling_hedge_solve(std::span<const HedgeInstrument> active,
                              const HedgeTarget& target);

} // namespace cdshedge
