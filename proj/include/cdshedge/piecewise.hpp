#pragma once

#include <vector>

#include "cdshedge/types.hpp"

namespace cdshedge {

/// Piecewise-constant curve on [0, inf). Knot i carries value values[i] on
/// the interval (knots[i], knots[i+1]]; the last value extends to infinity.
/// Left-continuous step evaluation; integrals are exact sums over knots.
class PiecewiseConstantCurve {
public:
    PiecewiseConstantCurve() = default;

    PiecewiseConstantCurve(std::vector<Time> knots, std::vector<double> values);

    static PiecewiseConstantCurve flat(double value);

    double operator()(Time t) const;

    /// Exact integral over [a, b].
    double integral(Time a, Time b) const;

    /// First time t with integral(0, t) >= threshold; +infinity when the
    /// threshold is never reached. Requires nonnegative values.
    Time first_passage(double threshold) const;

    bool nonnegative() const;

    double min_value() const;
    double max_value() const;

    const std::vector<Time>& knots() const { return knots_; }
    const std::vector<double>& values() const { return values_; }

private:
    std::vector<Time> knots_{0.0};
    std::vector<double> values_{0.0};
};

} // namespace cdshedge
