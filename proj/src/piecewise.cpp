#include "cdshedge/piecewise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cdshedge {

PiecewiseConstantCurve::PiecewiseConstantCurve(std::vector<Time> knots,
                                               std::vector<double> values)
    : knots_(std::move(knots)), values_(std::move(values)) {
    require(!knots_.empty() && knots_.size() == values_.size(),
            "piecewise curve needs matching, nonempty knots and values");
    require(knots_.front() == 0.0, "piecewise curve must start at t = 0");
    require(std::is_sorted(knots_.begin(), knots_.end()) &&
                std::adjacent_find(knots_.begin(), knots_.end()) == knots_.end(),
            "piecewise curve knots must be strictly increasing");
    for (double v : values_)
        require(std::isfinite(v), "piecewise curve values must be finite");
}

PiecewiseConstantCurve PiecewiseConstantCurve::flat(double value) {
    return PiecewiseConstantCurve({0.0}, {value});
}

double PiecewiseConstantCurve::operator()(Time t) const {
    // value i applies on (knots[i], knots[i+1]]; at t = 0 take the first value
    if (t <= knots_.front()) return values_.front();
    // first knot >= t; left continuity puts a knot time in the segment ending there
    auto it = std::lower_bound(knots_.begin(), knots_.end(), t);
    return values_[static_cast<std::size_t>(it - knots_.begin()) - 1];
}

double PiecewiseConstantCurve::integral(Time a, Time b) const {
    if (b < a) return -integral(b, a);
    double acc = 0.0;
    for (std::size_t i = 0; i < knots_.size(); ++i) {
        Time lo = std::max(a, knots_[i]);
        Time hi = (i + 1 < knots_.size()) ? std::min(b, knots_[i + 1]) : b;
        if (hi > lo) acc += values_[i] * (hi - lo);
    }
    // segment before the first knot is empty since knots start at 0 and a >= 0
    return acc;
}

Time PiecewiseConstantCurve::first_passage(double threshold) const {
    require(threshold >= 0.0, "first passage threshold must be nonnegative");
    require(nonnegative(), "first passage needs a nonnegative curve");
    if (threshold == 0.0) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < knots_.size(); ++i) {
        if (acc >= threshold) return knots_[i];
        const double v = values_[i];
        const bool last = (i + 1 == knots_.size());
        const Time seg_end = last ? std::numeric_limits<Time>::infinity()
                                  : knots_[i + 1];
        const double seg_mass =
            last ? (v > 0.0 ? std::numeric_limits<double>::infinity() : 0.0)
                 : v * (seg_end - knots_[i]);
        if (acc + seg_mass >= threshold && v > 0.0)
            return knots_[i] + (threshold - acc) / v;
        acc += seg_mass;
    }
    return std::numeric_limits<Time>::infinity();
}

bool PiecewiseConstantCurve::nonnegative() const {
    return std::all_of(values_.begin(), values_.end(),
                       [](double v) { return v >= 0.0; });
}

double PiecewiseConstantCurve::min_value() const {
    return *std::min_element(values_.begin(), values_.end());
}

double PiecewiseConstantCurve::max_value() const {
    return *std::max_element(values_.begin(), values_.end());
}

} // namespace cdshedge
