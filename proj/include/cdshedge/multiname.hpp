#pragma once

#include <span>
#include <vector>

#include "cdshedge/contracts.hpp"
#include "cdshedge/hedging.hpp"
#include "cdshedge/rng.hpp"

namespace cdshedge {

/// Copula coupling the default thresholds of the names.
class Copula {
public:
    enum class Kind { independence, clayton };

    static Copula independence();
    static Copula clayton(double theta);

    Kind kind() const { return kind_; }
    double theta() const { return theta_; }

    double value(std::span<const double> u) const;

    /// Partial derivative dC/du_i.
    double partial(std::size_t i, std::span<const double> u) const;

private:
    Kind kind_ = Kind::independence;
    double theta_ = 0.0;
};

/// Multi-name default model: deterministic marginal hazard curves coupled by
/// a copula on the default thresholds.
class MultiNameModel {
public:
    MultiNameModel(std::vector<PiecewiseConstantCurve> marginal_hazards,
                   Copula copula);

    std::size_t names() const { return hazards_.size(); }
    const Copula& copula() const { return copula_; }
    const PiecewiseConstantCurve& hazard(std::size_t i) const {
        return hazards_[i];
    }

    /// K_i(t) = exp(-integral of the i-th hazard over [0, t]).
    double marginal_survival(std::size_t i, Time t) const;

    /// Joint survival of the first default, G(t) = C(K_1(t), ..., K_n(t)).
    double joint_survival(Time t) const;

    /// Quadrature split points: union of all hazard knots.
    std::vector<Time> knots() const;

private:
    std::vector<PiecewiseConstantCurve> hazards_;
    Copula copula_;
};

/// First-to-default intensities at a time: per-name rates of "name i
/// defaults first given all alive", summing exactly to the intensity of the
/// first default time.
struct FtdIntensities {
    std::vector<double> per_name;
    double total;
};

FtdIntensities ftd_intensities(const MultiNameModel& mnm, Time t);

/// Copula-coupled default times by threshold inversion of the marginal
/// cumulative hazards (exact on the piecewise-constant curves).
struct JointDefaults {
    std::vector<Time> times;
    Time first_time;
    std::size_t first_name;  // 0-based; meaningful when first_time < inf
};

JointDefaults sample_joint_defaults(const MultiNameModel& mnm, PathRng& rng);

/// Pre-first-default price of a first-to-default claim (0 once the first
/// default has occurred). Recoveries are evaluated at state 0: the verified
/// configuration uses deterministic hazards.
Amount ftd_price(const MultiNameModel& mnm, const MarketEnv& env,
                 const FtdClaim& claim, Time t, bool first_default_occurred);

/// Protection and risky-annuity legs of a first-to-default swap paying
/// recoveries[i] if name i defaults first.
CdsLegs ftd_legs(const MultiNameModel& mnm, const MarketEnv& env,
                 const std::vector<TimeFn>& recoveries, Time maturity, Time t);

/// Spread making a fresh first-to-default swap worthless at t.
Rate ftd_market_spread(const MultiNameModel& mnm, const MarketEnv& env,
                       const std::vector<TimeFn>& recoveries, Time maturity,
                       Time t);

/// Conditional law of a surviving name given the first default: survival
/// and hazard of name i on the event that name j (j != i) defaulted at
/// base_time with every other name alive. Closed form per copula.
class ContagionCurve {
public:
    ContagionCurve(const MultiNameModel& mnm, std::size_t name,
                   std::size_t defaulter, Time base_time);

    double survival(Time u) const;  // normalized to 1 at base_time
    double hazard(Time u) const;

private:
    const MultiNameModel* mnm_;
    std::size_t name_;
    Time base_;
    double base_value_;      // copula value at the base point
    double shift_offset_;    // Clayton: sum u^-theta offset excluding name i
};

/// Ex-dividend value of CDS `cds` (written on name cds.reference_name) at
/// time t on the event that name `defaulter` has just defaulted first,
/// priced as a single-name contract under the contagion-adjusted hazard.
Amount contagion_cds_value(const MultiNameModel& mnm, const MarketEnv& env,
                           const CdsSpec& cds, Time t, std::size_t defaulter);

/// Pre-first-default value of a single-name CDS inside the basket: the CDS
/// viewed as a first-to-default claim whose off-name recoveries are its
/// contagion values.
Amount basket_cds_price(const MultiNameModel& mnm, const MarketEnv& env,
                        const CdsSpec& cds, Time t);

/// Solve the per-name jump matching conditions for a first-to-default claim
/// hedged with single-name CDSs. With deterministic hazards all Brownian
/// loadings vanish and only the n jump conditions are assembled.
HedgePlan ftd_hedge_solve(const MultiNameModel& mnm, const MarketEnv& env,
                          std::span<const CdsSpec> instruments,
                          const FtdClaim& claim, Time t);

/// Martingale-part coefficient of the conditional survival of name 1 given
/// the filtration of name 2, evaluated by central finite differences on the
/// joint survival surface; identically zero under independence.
double immersion_diagnostic(const MultiNameModel& mnm, Time t);

/// Same coefficient for an arbitrary two-name joint survival surface
/// G(u, v); `step` is the finite-difference step in the second argument.
/// The default balances truncation against cancellation noise in the
/// partial-derivative ratio.
double immersion_coefficient(
    const std::function<double(Time, Time)>& joint_survival, Time t,
    double step = 1e-4);

/// Closed-form version of the diagnostic (independent oracle for the
/// finite-difference route).
double immersion_diagnostic_analytic(const MultiNameModel& mnm, Time t);

} // namespace cdshedge
