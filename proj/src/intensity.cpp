#include "cdshedge/intensity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cdshedge {

IntensityModel IntensityModel::constant(double lambda0, int driver_dim) {
    require(lambda0 >= 0.0, "constant intensity must be nonnegative");
    require(driver_dim >= 0, "driver dimension must be nonnegative");
    IntensityModel m;
    m.kind_ = Kind::constant;
    m.driver_dim_ = driver_dim;
    m.curve_ = PiecewiseConstantCurve::flat(lambda0);
    return m;
}

IntensityModel IntensityModel::piecewise(PiecewiseConstantCurve curve,
                                         int driver_dim) {
    require(curve.nonnegative(), "piecewise intensity must be nonnegative");
    require(driver_dim >= 0, "driver dimension must be nonnegative");
    IntensityModel m;
    m.kind_ = Kind::piecewise;
    m.driver_dim_ = driver_dim;
    m.curve_ = std::move(curve);
    return m;
}

IntensityModel IntensityModel::square_root(SquareRootParams p) {
    require(p.mean_reversion > 0.0, "square-root model: mean reversion a > 0");
    require(p.long_run_level >= 0.0, "square-root model: long-run level b >= 0");
    require(p.volatility >= 0.0, "square-root model: volatility >= 0");
    require(p.initial_state >= 0.0, "square-root model: initial state >= 0");
    IntensityModel m;
    m.kind_ = Kind::square_root;
    m.driver_dim_ = 1;
    m.cir_ = p;
    return m;
}

double IntensityModel::initial_state() const {
    return kind_ == Kind::square_root ? cir_.initial_state : 0.0;
}

double IntensityModel::lambda(Time t, double state) const {
    if (kind_ == Kind::square_root) return std::max(state, 0.0);
    return curve_(t);
}

double IntensityModel::diffusion_loading(double state) const {
    if (kind_ != Kind::square_root) return 0.0;
    return cir_.volatility * std::sqrt(std::max(state, 0.0));
}

AffineSurvivalFactors IntensityModel::affine_factors(Time tau) const {
    require(kind_ == Kind::square_root,
            "affine factors only exist for the square-root kind");
    require(tau >= 0.0, "affine factors: time to maturity must be >= 0");
    const double a = cir_.mean_reversion;
    const double b = cir_.long_run_level;
    const double s = cir_.volatility;
    if (s == 0.0) {
        // noise-free limit: survival = exp(-b tau - (x - b) B), B = (1-e^{-a tau})/a
        double e = std::exp(-a * tau);
        double B = (1.0 - e) / a;
        double A = std::exp(-b * (tau - B));
        double Bp = e;
        double Ap = -b * (1.0 - Bp) * A;
        return {A, B, Ap, Bp};
    }
    const double h = std::sqrt(a * a + 2.0 * s * s);
    const double em = std::exp(-h * tau);              // e^{-h tau} <= 1
    const double denom = (a + h) * (1.0 - em) + 2.0 * h * em;
    const double B = 2.0 * (1.0 - em) / denom;
    // ln A = (2ab/s^2) [ ln(2h) + (a - h) tau / 2 - ln(denom) ]
    const double coef = 2.0 * a * b / (s * s);
    const double lnA =
        coef * (std::log(2.0 * h) + 0.5 * (a - h) * tau - std::log(denom));
    const double A = std::exp(lnA);
    if (!std::isfinite(A) || !std::isfinite(B))
        throw NumericsError("affine survival factors overflowed; parameters "
                            "outside the supported domain");
    // derivatives in tau: denom' = h e^{-h tau} (a - h) + ... worked out below
    // denom = (a+h) - (a - h) em   =>  denom' = (a - h) h em
    const double denom_p = (a - h) * h * em;
    const double Bp = (2.0 * h * em * denom - 2.0 * (1.0 - em) * denom_p) /
                      (denom * denom);
    const double Ap = A * coef * (0.5 * (a - h) - denom_p / denom);
    return {A, B, Ap, Bp};
}

double IntensityModel::survival(Time t, double state, Time T) const {
    require(t <= T, "survival: need t <= T");
    if (kind_ == Kind::square_root) {
        auto f = affine_factors(T - t);
        return f.a_factor * std::exp(-f.b_factor * std::max(state, 0.0));
    }
    return std::exp(-curve_.integral(t, T));
}

double IntensityModel::survival_density(Time t, double state, Time u) const {
    require(t <= u, "survival density: need t <= u");
    if (kind_ == Kind::square_root) {
        auto f = affine_factors(u - t);
        double x = std::max(state, 0.0);
        // -d/du [A e^{-Bx}] = (A B' x - A') e^{-Bx}
        return (f.a_factor * f.b_prime * x - f.a_prime) *
               std::exp(-f.b_factor * x);
    }
    return curve_(u) * std::exp(-curve_.integral(t, u));
}

double IntensityModel::hazard_integral(Time a, Time b) const {
    require(is_deterministic(),
            "hazard integral is only exact for deterministic kinds");
    return curve_.integral(a, b);
}

const SquareRootParams& IntensityModel::square_root_params() const {
    require(kind_ == Kind::square_root, "not a square-root model");
    return cir_;
}

std::vector<Time> IntensityModel::hazard_knots() const {
    if (kind_ == Kind::square_root) return {};
    return curve_.knots();
}

std::vector<double> repr_coefficient(
    const IntensityModel& model,
    const std::function<double(Time, double)>& pricing_fn, Time t,
    double state) {
    std::vector<double> out(static_cast<std::size_t>(model.driver_dim()), 0.0);
    if (model.is_deterministic() || out.empty()) return out;
    const double loading = model.diffusion_loading(state);
    if (loading == 0.0) return out;
    const double h = std::max(1e-5 * std::abs(state), 1e-8);
    const double up = pricing_fn(t, state + h);
    const double dn = pricing_fn(t, state - h);
    const double deriv = (up - dn) / (2.0 * h);
    if (!std::isfinite(deriv))
        throw NumericsError("representation coefficient: non-finite "
                            "finite-difference quotient");
    out[0] = loading * deriv;
    return out;
}

Time sample_default_time(std::span<const Time> times,
                         std::span<const double> cumulative_hazard,
                         double uniform_draw) {
    require(uniform_draw > 0.0 && uniform_draw < 1.0,
            "default-time draw must lie strictly inside (0, 1)");
    require(times.size() == cumulative_hazard.size() && times.size() >= 2,
            "default-time sampling needs a grid of at least two points");
    require(cumulative_hazard.front() == 0.0,
            "cumulative hazard path must start at 0");
    const double threshold = -std::log(uniform_draw);
    if (threshold > cumulative_hazard.back())
        return std::numeric_limits<Time>::infinity();
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (cumulative_hazard[i] >= threshold) {
            const double lo = cumulative_hazard[i - 1];
            const double hi = cumulative_hazard[i];
            if (hi <= lo) return times[i];  // flat segment, crossing at its end
            const double w = (threshold - lo) / (hi - lo);
            return times[i - 1] + w * (times[i] - times[i - 1]);
        }
    }
    return std::numeric_limits<Time>::infinity();
}

} // namespace cdshedge
