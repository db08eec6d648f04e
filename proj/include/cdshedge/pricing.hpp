#pragma once

#include <vector>

#include "cdshedge/contracts.hpp"
#include "cdshedge/intensity.hpp"
#include "cdshedge/market.hpp"

namespace cdshedge {

/// Pre-default values of the two CDS legs: the protection leg and the risky
/// annuity (value of one unit of spread paid until default or maturity).
struct CdsLegs {
    Amount protection_value;
    Amount annuity_value;
};

/// Single-name pricing under a Markovian intensity model: all conditional
/// expectations are functions of (t, state), evaluated with the affine
/// survival transform and Gauss-Legendre quadrature over the time integral
/// (order doubling until the relative change is below rel_tol).
class SingleNamePricer {
public:
    SingleNamePricer(const IntensityModel& model, const MarketEnv& env,
                     double rel_tol = 1e-9, int initial_order = 64);

    const IntensityModel& model() const { return *model_; }
    const MarketEnv& env() const { return *env_; }

    CdsLegs cds_legs(const CdsSpec& cds, Time t, double state) const;

    /// Pre-default mark-to-market of the CDS; 0 once defaulted.
    Amount cds_ex_dividend_price(const CdsSpec& cds, Time t, double state,
                                 bool defaulted) const;

    /// The spread making a fresh CDS with this protection worthless at t.
    Rate market_spread(const TimeFn& protection, Time maturity, Time t,
                       double state) const;

    /// Value at t of a CDS entered at an earlier date at inception_spread:
    /// (market spread - inception spread) times the risky annuity.
    Amount seasoned_cds_value(const TimeFn& protection, Time maturity,
                              Rate inception_spread, Time t, double state,
                              bool defaulted) const;

    Amount claim_ex_dividend_price(const DefaultableClaim& claim, Time t,
                                   double state, bool defaulted) const;

    /// Ex-dividend price plus reinvested realized dividends.
    Amount claim_cumulative_price(const DefaultableClaim& claim, Time t,
                                  double state, const DividendLedger& ledger,
                                  bool defaulted) const;

private:
    const IntensityModel* model_;
    const MarketEnv* env_;
    double rel_tol_;
    int initial_order_;

    std::vector<double> breaks_;  // rate and hazard knots

    double protection_leg(const TimeFn& protection, Time t, double state,
                          Time T) const;
    double annuity_leg(Time t, double state, Time T) const;
};

/// Fixed-(t, maturity) evaluator of the CDS legs as functions of the state,
/// with discount factors and affine survival factors precomputed on the
/// quadrature nodes. Used in path loops where the same slice is evaluated
/// at many states.
class CdsLegsSlice {
public:
    CdsLegsSlice(const IntensityModel& model, const MarketEnv& env, Time t,
                 Time maturity, const TimeFn& protection, int order = 64);

    void legs(double state, double& protection_value,
              double& annuity_value) const;

    /// delta-weighted protection leg minus spread times annuity.
    double price(double state, Rate spread) const;

    Time eval_time() const { return t_; }
    Time maturity() const { return maturity_; }

private:
    Time t_, maturity_;
    bool stochastic_;
    struct Node {
        double w_disc;    // quadrature weight times discount(t, u)
        double delta;     // protection at u
        double a, b, ap, bp;  // affine factors at u - t (stochastic kind)
        double surv, dens;    // precomputed values (deterministic kinds)
    };
    std::vector<Node> nodes_;
};

/// Fixed-t evaluator of a claim's pre-default price as a function of the
/// state. Promised payoff and recovery must be state-independent under a
/// stochastic intensity model (verified at construction).
class ClaimSlice {
public:
    ClaimSlice(const IntensityModel& model, const MarketEnv& env,
               const DefaultableClaim& claim, Time t, int order = 64);

    double value(double state) const;

private:
    Time t_, maturity_;
    bool stochastic_;
    double payoff_;
    double disc_T_;
    double surv_a_T_, surv_b_T_;  // terminal affine factors
    double surv_T_;               // deterministic terminal survival
    struct Node {
        double w_disc;
        double recovery;  // Z(u)
        double rate;      // a(u)
        double a, b, ap, bp;
        double surv, dens;
    };
    std::vector<Node> nodes_;
};

} // namespace cdshedge
