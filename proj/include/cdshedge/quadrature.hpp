#pragma once

#include <functional>
#include <vector>

#include "cdshedge/types.hpp"

namespace cdshedge {

/// Gauss-Legendre rule on [-1, 1]. Tables are computed once per order and
/// cached for the process lifetime.
struct GaussLegendre {
    std::vector<double> nodes;
    std::vector<double> weights;

    static const GaussLegendre& rule(int order);
};

/// Integrate f over [a, b] with a fixed-order rule.
double integrate(const std::function<double(double)>& f, double a, double b,
                 int order);

/// Integrate f over [a, b] with a fixed-order rule per panel, splitting at
/// the interior points of `breaks`.
double integrate_panels(const std::function<double(double)>& f, double a,
                        double b, const std::vector<double>& breaks, int order);

/// Integrate f over [a, b], splitting at the interior points of `breaks`
/// and doubling the order per panel until the change is below
/// max(rel_tol * scale, abs_tol). Throws NumericsError if the doubling does
/// not settle.
double integrate_adaptive(const std::function<double(double)>& f, double a,
                          double b, const std::vector<double>& breaks,
                          double rel_tol = 1e-9, int initial_order = 64,
                          double abs_tol = 1e-13);

} // namespace cdshedge
