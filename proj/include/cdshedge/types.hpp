#pragma once

#include <functional>
#include <stdexcept>
#include <string>

namespace cdshedge {

using Time = double;   // years
using Rate = double;   // per year
using Amount = double; // units of currency, notional 1 unless stated

/// Deterministic function of time, e.g. a protection payment or dividend rate.
using TimeFn = std::function<double(Time)>;

/// Function of (time, model state), e.g. a state-dependent recovery.
using StateFn = std::function<double(Time, double)>;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Bad input to an operation (times out of range, invalid draw, ...).
struct ArgumentError : Error {
    using Error::Error;
};

/// A numerical procedure failed to deliver (overflow, non-convergence).
struct NumericsError : Error {
    using Error::Error;
};

/// Configuration file failed schema validation.
struct ConfigError : Error {
    using Error::Error;
};

/// The hedge matching conditions have no admissible solution.
struct NonHedgeableError : Error {
    double residual;
    explicit NonHedgeableError(const std::string& what, double res)
        : Error(what), residual(res) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ArgumentError(msg);
}

inline TimeFn constant_fn(double v) {
    return [v](Time) { return v; };
}

inline StateFn constant_state_fn(double v) {
    return [v](Time, double) { return v; };
}

} // namespace cdshedge
