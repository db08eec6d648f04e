#include "cdshedge/rolling.hpp"

#include <cmath>

namespace cdshedge {

RollingCdsSpec RollingCdsSpec::make(Time start, Time expiry, double tenor,
                                    double protection) {
    return make(start, expiry, tenor, constant_fn(protection));
}

RollingCdsSpec RollingCdsSpec::make(Time start, Time expiry, double tenor,
                                    TimeFn protection) {
    require(start < expiry, "rolling CDS needs start < expiry");
    require(tenor > 0.0, "rolling CDS tenor must be positive");
    RollingCdsSpec s;
    s.start = start;
    s.expiry = expiry;
    s.tenor = tenor;
    s.protection = std::move(protection);
    return s;
}

ActiveRoll active_contract(const RollingCdsSpec& spec, Time t) {
    require(t >= spec.start, "rolling CDS not yet started");
    int k = static_cast<int>(std::floor((t - spec.start) / spec.tenor + 1e-12));
    ActiveRoll a;
    a.window_index = k;
    a.window_start = spec.start + k * spec.tenor;
    a.window_end = spec.start + (k + 1) * spec.tenor;
    a.maturity = spec.expiry + k * spec.tenor;
    return a;
}

HedgeInstrument rolling_instrument(const IntensityModel& model,
                                   const MarketEnv& env,
                                   const RollingCdsSpec& spec, Time t,
                                   double state) {
    ActiveRoll act = active_contract(spec, t);
    require(t < act.maturity, "active rolling contract already matured");
    CdsLegsSlice slice(model, env, t, act.maturity, spec.protection);
    double prot, ann;
    slice.legs(state, prot, ann);
    require(ann > 0.0, "rolling instrument: degenerate annuity");
    const Rate kappa = prot / ann;

    HedgeInstrument inst;
    inst.cds = CdsSpec::make(kappa, spec.protection, act.maturity);
    inst.jump_exposure = spec.protection(t);  // fresh contract has zero value
    auto zeta1 = repr_coefficient(
        model,
        [&](Time, double x) {
            double p, a;
            slice.legs(x, p, a);
            return p;
        },
        t, state);
    auto zeta2 = repr_coefficient(
        model,
        [&](Time, double x) {
            double p, a;
            slice.legs(x, p, a);
            return a;
        },
        t, state);
    inst.diffusion_exposure.resize(zeta1.size());
    for (std::size_t i = 0; i < zeta1.size(); ++i)
        inst.diffusion_exposure[i] = zeta1[i] - kappa * zeta2[i];
    return inst;
}

double rolling_wealth_step(const IntensityModel& model, const MarketEnv& env,
                           const RollingCdsSpec& spec, Time t, double state,
                           double wealth, double dt,
                           std::span<const double> dW, Time default_time) {
    require(dt > 0.0, "step size must be positive");
    const bool alive = t < default_time;
    double next = wealth + env.short_rate(t) * wealth * dt;
    if (!alive) return next;

    const Time t_next = t + dt;
    const bool defaults_now = default_time <= t_next;
    const double stopped_dt = std::min(default_time, t_next) - t;
    // protection lump at the located default time, compensator at the left node
    if (defaults_now) next += spec.protection(default_time);
    next -= spec.protection(t) * model.lambda(t, state) * stopped_dt;

    if (model.driver_dim() > 0 && model.diffusion_loading(state) != 0.0) {
        HedgeInstrument inst = rolling_instrument(model, env, spec, t, state);
        for (std::size_t i = 0; i < inst.diffusion_exposure.size(); ++i)
            next += inst.diffusion_exposure[i] * dW[i];
    }
    return next;
}

HedgePlan rolling_hedge_solve(std::span<const HedgeInstrument> active,
                              const HedgeTarget& target) {
    require(!active.empty(), "no active rolling instrument at this time");
    return solve_matching(active, target);
}

} // namespace cdshedge
