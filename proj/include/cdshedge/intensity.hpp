#pragma once

#include <span>
#include <vector>

#include "cdshedge/piecewise.hpp"
#include "cdshedge/types.hpp"

namespace cdshedge {

/// Square-root diffusion parameters: dx = a (b - x) dt + sigma sqrt(x) dW.
struct SquareRootParams {
    double mean_reversion;   // a
    double long_run_level;   // b
    double volatility;       // sigma
    double initial_state;    // x0
};

/// Factors of the affine conditional survival transform
///   E[ exp(-int_t^T x_u du) | x_t = x ] = A exp(-B x),
/// together with their derivatives in the time-to-maturity.
struct AffineSurvivalFactors {
    double a_factor;   // A
    double b_factor;   // B
    double a_prime;    // dA/dtau
    double b_prime;    // dB/dtau
};

/// Default-intensity model. Three kinds: constant, piecewise-deterministic
/// (left-continuous steps, exact integrals) and square-root diffusion with
/// the affine survival closed form. The state argument is the diffusion
/// state x for the square-root kind and is ignored by deterministic kinds.
class IntensityModel {
public:
    enum class Kind { constant, piecewise, square_root };

    static IntensityModel constant(double lambda0, int driver_dim = 0);
    static IntensityModel piecewise(PiecewiseConstantCurve curve,
                                    int driver_dim = 0);
    static IntensityModel square_root(SquareRootParams p);

    Kind kind() const { return kind_; }

    /// Number of Brownian coordinates feeding the model. Deterministic kinds
    /// may declare a driver for claims written on it; their diffusion loading
    /// is identically zero regardless.
    int driver_dim() const { return driver_dim_; }

    bool is_deterministic() const { return kind_ != Kind::square_root; }

    double initial_state() const;

    /// lambda(t, state) >= 0.
    double lambda(Time t, double state) const;

    /// Coefficient of dW in the state dynamics: sigma sqrt(x^+), or 0 for
    /// deterministic kinds.
    double diffusion_loading(double state) const;

    /// Conditional survival factor E[exp(-int_t^T lambda du) | state] in (0,1].
    double survival(Time t, double state, Time T) const;

    /// Minus the T-derivative of survival(t, state, .), the density of the
    /// default time against survival to t.
    double survival_density(Time t, double state, Time u) const;

    /// Exact hazard integral for deterministic kinds.
    double hazard_integral(Time a, Time b) const;

    /// Affine transform factors at time-to-maturity tau (square-root kind,
    /// including the sigma = 0 degenerate branch).
    AffineSurvivalFactors affine_factors(Time tau) const;

    const SquareRootParams& square_root_params() const;
    const PiecewiseConstantCurve& hazard_curve() const { return curve_; }

    /// Knot times of a deterministic hazard curve (quadrature split points).
    std::vector<Time> hazard_knots() const;

private:
    IntensityModel() = default;

    Kind kind_ = Kind::constant;
    int driver_dim_ = 0;
    PiecewiseConstantCurve curve_;   // constant/piecewise kinds
    SquareRootParams cir_{};
};

/// Brownian integrand of the martingale part of a pricing function: the
/// model's diffusion loading times the state derivative of pricing_fn,
/// obtained by central differencing (relative bump 1e-5 of the state,
/// floored at 1e-8). Deterministic models return the zero vector.
std::vector<double> repr_coefficient(
    const IntensityModel& model,
    const std::function<double(Time, double)>& pricing_fn, Time t,
    double state);

/// First grid-interpolated time at which the cumulative hazard path crosses
/// -ln(uniform_draw); +infinity when the threshold is never reached on the
/// grid. The path must start at 0 and be nondecreasing.
Time sample_default_time(std::span<const Time> times,
                         std::span<const double> cumulative_hazard,
                         double uniform_draw);

} // namespace cdshedge
