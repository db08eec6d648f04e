#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "cdshedge/intensity.hpp"
#include "cdshedge/rng.hpp"

using namespace cdshedge;

namespace {
const SquareRootParams kCir{0.5, 0.03, 0.1, 0.03};
}

TEST_CASE("survival: zero intensity gives 1") {
    auto m = IntensityModel::constant(0.0);
    CHECK(m.survival(0.0, 0.0, 8.0) == 1.0);
    CHECK(m.survival(3.0, 0.0, 3.0) == 1.0);
}

TEST_CASE("survival: constant-hazard exponential") {
    auto m = IntensityModel::constant(0.03);
    CHECK(m.survival(1.0, 0.0, 11.0) ==
          doctest::Approx(std::exp(-0.3)).epsilon(1e-14));
}

TEST_CASE("survival: piecewise hazard uses exact integrals") {
    auto m = IntensityModel::piecewise(
        PiecewiseConstantCurve({0.0, 2.0}, {0.01, 0.05}));
    CHECK(m.survival(0.0, 0.0, 5.0) ==
          doctest::Approx(std::exp(-(0.02 + 0.15))).epsilon(1e-14));
    CHECK(m.hazard_integral(1.0, 3.0) ==
          doctest::Approx(0.01 + 0.05).epsilon(1e-14));
}

TEST_CASE("square-root survival: affine factors against the ODE limit") {
    // sigma = 0 collapses to the deterministic mean-reversion hazard
    auto m0 = IntensityModel::square_root({0.5, 0.03, 0.0, 0.05});
    double x = 0.05, t = 0.0, T = 5.0;
    double integral = 0.03 * T + (x - 0.03) * (1.0 - std::exp(-0.5 * T)) / 0.5;
    CHECK(m0.survival(t, x, T) ==
          doctest::Approx(std::exp(-integral)).epsilon(1e-12));
}

TEST_CASE("square-root survival factors: derivative identities by FD") {
    auto m = IntensityModel::square_root(kCir);
    const double h = 1e-6;
    for (double tau : {0.25, 1.0, 5.0, 10.0}) {
        auto f = m.affine_factors(tau);
        auto fu = m.affine_factors(tau + h);
        auto fd = m.affine_factors(tau - h);
        CHECK(f.a_prime ==
              doctest::Approx((fu.a_factor - fd.a_factor) / (2 * h)).epsilon(1e-6));
        CHECK(f.b_prime ==
              doctest::Approx((fu.b_factor - fd.b_factor) / (2 * h)).epsilon(1e-6));
    }
}

TEST_CASE("square-root survival density integrates to the default probability") {
    auto m = IntensityModel::square_root(kCir);
    // int_t^T dens(u) du = survival(t,t) - survival(t,T) = 1 - P
    double t = 0.5, x = 0.04, T = 6.0;
    int n = 20000;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        double u0 = t + (T - t) * i / n, u1 = t + (T - t) * (i + 1) / n;
        acc += 0.5 * (m.survival_density(t, x, u0) + m.survival_density(t, x, u1)) *
               (u1 - u0);
    }
    CHECK(acc == doctest::Approx(1.0 - m.survival(t, x, T)).epsilon(1e-7));
}

TEST_CASE("survival is nonincreasing in maturity and 1 at t") {
    std::vector<IntensityModel> models;
    models.push_back(IntensityModel::constant(0.02));
    models.push_back(IntensityModel::piecewise(
        PiecewiseConstantCurve({0.0, 1.0, 3.0}, {0.01, 0.07, 0.002})));
    models.push_back(IntensityModel::square_root(kCir));
    PathRng rng(123, 0);
    for (const auto& m : models) {
        for (int trial = 0; trial < 50; ++trial) {
            double t = 8.0 * rng.uniform();
            double x = 0.1 * rng.uniform();
            CHECK(m.survival(t, x, t) == doctest::Approx(1.0).epsilon(1e-12));
            double prev = 1.0;
            for (double dT = 0.5; dT <= 4.0; dT += 0.5) {
                double s = m.survival(t, x, t + dT);
                CHECK(s <= prev + 1e-12);
                CHECK(s > 0.0);
                prev = s;
            }
        }
    }
}

TEST_CASE("repr coefficient: deterministic models give the zero vector") {
    auto m = IntensityModel::constant(0.02, 1);
    auto out = repr_coefficient(
        m, [](Time t, double) { return std::exp(-0.1 * t); }, 1.0, 0.0);
    REQUIRE(out.size() == 1);
    CHECK(out[0] == 0.0);
}

TEST_CASE("repr coefficient: survival transform matches the analytic loading") {
    auto m = IntensityModel::square_root(kCir);
    const double T = 7.0;
    for (double t : {0.0, 2.0}) {
        for (double x : {0.01, 0.03, 0.08}) {
            auto out = repr_coefficient(
                m, [&](Time s, double y) { return m.survival(s, y, T); }, t, x);
            REQUIRE(out.size() == 1);
            auto f = m.affine_factors(T - t);
            double analytic = -f.b_factor * m.survival(t, x, T) *
                              kCir.volatility * std::sqrt(x);
            CHECK(out[0] == doctest::Approx(analytic).epsilon(1e-6));
        }
    }
}

TEST_CASE("repr coefficient: linear pricing function recovers its slope") {
    auto m = IntensityModel::square_root(kCir);
    const double c = 3.7;
    auto out = repr_coefficient(
        m, [&](Time, double y) { return 2.0 + c * y; }, 1.0, 0.04);
    double expected = c * kCir.volatility * std::sqrt(0.04);
    CHECK(out[0] == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("repr coefficient of a constant function is zero") {
    auto m = IntensityModel::square_root(kCir);
    auto out = repr_coefficient(m, [](Time, double) { return 42.0; }, 0.5, 0.03);
    CHECK(out[0] == 0.0);
}

TEST_CASE("default-time sampling: threshold never reached") {
    std::vector<Time> times{0.0, 1.0, 2.0};
    std::vector<double> haz{0.0, 0.01, 0.02};
    // -ln u = 1 > 0.02
    CHECK(sample_default_time(times, haz, std::exp(-1.0)) ==
          std::numeric_limits<Time>::infinity());
}

TEST_CASE("default-time sampling: exact inversion of a linear hazard") {
    // constant lambda = 0.1, draw u = e^{-0.5} -> tau = 5
    std::vector<Time> times, haz;
    for (int i = 0; i <= 100; ++i) {
        times.push_back(0.1 * i);
        haz.push_back(0.01 * i);
    }
    CHECK(sample_default_time(times, haz, std::exp(-0.5)) ==
          doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("default-time sampling is monotone in the draw") {
    std::vector<Time> times, haz;
    for (int i = 0; i <= 50; ++i) {
        times.push_back(0.2 * i);
        haz.push_back(0.03 * i + 0.001 * i * i);
    }
    PathRng rng(5, 1);
    for (int trial = 0; trial < 200; ++trial) {
        double u1 = rng.uniform(), u2 = rng.uniform();
        if (u1 > u2) std::swap(u1, u2);  // u2 larger -> smaller threshold
        Time t1 = sample_default_time(times, haz, u1);
        Time t2 = sample_default_time(times, haz, u2);
        CHECK(t2 <= t1);
    }
}

TEST_CASE("default-time sampling: binomial check against the exponential law") {
    std::vector<Time> times, haz;
    const double lam = 0.1;
    for (int i = 0; i <= 600; ++i) {
        times.push_back(0.01 * i);
        haz.push_back(lam * 0.01 * i);
    }
    const int n = 100000;
    PathRng rng(777, 3);
    int alive1 = 0, alive5 = 0;
    for (int i = 0; i < n; ++i) {
        Time tau = sample_default_time(times, haz, rng.uniform());
        if (tau > 1.0) ++alive1;
        if (tau > 5.0) ++alive5;
    }
    for (auto [t, count] : {std::pair{1.0, alive1}, {5.0, alive5}}) {
        double p = std::exp(-lam * t);
        double se = std::sqrt(p * (1.0 - p) / n);
        CHECK(std::abs(static_cast<double>(count) / n - p) <= 3.0 * se);
    }
}

TEST_CASE("draws outside (0,1) are rejected") {
    std::vector<Time> times{0.0, 1.0};
    std::vector<double> haz{0.0, 0.5};
    CHECK_THROWS_AS(sample_default_time(times, haz, 0.0), ArgumentError);
    CHECK_THROWS_AS(sample_default_time(times, haz, 1.0), ArgumentError);
}
