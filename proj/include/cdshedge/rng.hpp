#pragma once

#include <cmath>
#include <cstdint>

namespace cdshedge {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Inverse standard normal CDF, Acklam's rational approximation (relative
/// error ~1.2e-9, far below Monte Carlo resolution). Odd around p = 0.5, so
/// antithetic pairs mirror exactly.
inline double inverse_normal_cdf(double p) {
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425, phigh = 1.0 - plow;
    double x;
    if (p < plow) {
        double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= phigh) {
        double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    return x;
}

} // namespace detail

/// Per-path random stream. Path streams are derived from the master seed and
/// the path index by counter-based mixing, so the draws of path i do not
/// depend on how paths are scheduled across threads.
class PathRng {
public:
    PathRng(std::uint64_t master_seed, std::uint64_t path_index) {
        std::uint64_t s = master_seed;
        std::uint64_t h1 = detail::splitmix64(s);
        s = h1 ^ (path_index * 0xD1342543DE82EF95ULL + 0x2545F4914F6CDD1DULL);
        state_ = detail::splitmix64(s) ^ detail::splitmix64(s);
    }

    /// Uniform draw in the open interval (0, 1).
    double uniform() {
        std::uint64_t bits = detail::splitmix64(state_);
        return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal draw by inverse-CDF; antithetic twin uses 1 - u.
    double normal() { return detail::inverse_normal_cdf(uniform()); }

    /// Gamma(shape, 1) draw, Marsaglia-Tsang with boost for shape < 1.
    double gamma(double shape) {
        if (shape < 1.0) {
            double u = uniform();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        double d = shape - 1.0 / 3.0;
        double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = normal();
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            double u = uniform();
            if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v))
                return d * v;
        }
    }

    double exponential() { return -std::log(uniform()); }

private:
    std::uint64_t state_;
};

} // namespace cdshedge
