#include "cdshedge/multiname.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cdshedge/quadrature.hpp"

namespace cdshedge {

Copula Copula::independence() { return Copula{}; }

Copula Copula::clayton(double theta) {
    require(theta > 0.0, "Clayton copula needs theta > 0");
    Copula c;
    c.kind_ = Kind::clayton;
    c.theta_ = theta;
    return c;
}

double Copula::value(std::span<const double> u) const {
    for (double v : u)
        require(v > 0.0 && v <= 1.0, "copula arguments must lie in (0, 1]");
    if (kind_ == Kind::independence) {
        double p = 1.0;
        for (double v : u) p *= v;
        return p;
    }
    // (sum u^-theta - n + 1)^(-1/theta), evaluated stably for small theta
    double s = 0.0;
    for (double v : u) s += std::expm1(-theta_ * std::log(v));
    return std::exp(-std::log1p(s) / theta_);
}

double Copula::partial(std::size_t i, std::span<const double> u) const {
    require(i < u.size(), "copula partial: index out of range");
    if (kind_ == Kind::independence) {
        double p = 1.0;
        for (std::size_t l = 0; l < u.size(); ++l)
            if (l != i) p *= u[l];
        return p;
    }
    double c = value(u);
    return std::exp((1.0 + theta_) * std::log(c) -
                    (1.0 + theta_) * std::log(u[i]));
}

MultiNameModel::MultiNameModel(
    std::vector<PiecewiseConstantCurve> marginal_hazards, Copula copula)
    : hazards_(std::move(marginal_hazards)), copula_(copula) {
    require(!hazards_.empty(), "multi-name model needs at least one name");
    for (const auto& h : hazards_)
        require(h.nonnegative(), "marginal hazards must be nonnegative");
}

double MultiNameModel::marginal_survival(std::size_t i, Time t) const {
    require(i < names(), "name index out of range");
    return std::exp(-hazards_[i].integral(0.0, t));
}

double MultiNameModel::joint_survival(Time t) const {
    std::vector<double> u(names());
    for (std::size_t i = 0; i < names(); ++i) u[i] = marginal_survival(i, t);
    return copula_.value(u);
}

std::vector<Time> MultiNameModel::knots() const {
    std::vector<Time> k;
    for (const auto& h : hazards_)
        k.insert(k.end(), h.knots().begin(), h.knots().end());
    std::sort(k.begin(), k.end());
    k.erase(std::unique(k.begin(), k.end()), k.end());
    return k;
}

FtdIntensities ftd_intensities(const MultiNameModel& mnm, Time t) {
    const std::size_t n = mnm.names();
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = mnm.marginal_survival(i, t);
    const double c = mnm.copula().value(u);
    FtdIntensities out;
    out.per_name.resize(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        // lambda_i = gamma_i K_i dC/du_i / C
        double li = mnm.hazard(i)(t) * u[i] * mnm.copula().partial(i, u) / c;
        out.per_name[i] = li;
        total += li;
    }
    out.total = total;
    return out;
}

JointDefaults sample_joint_defaults(const MultiNameModel& mnm, PathRng& rng) {
    const std::size_t n = mnm.names();
    std::vector<double> thresholds(n);  // -ln xi_i
    if (mnm.copula().kind() == Copula::Kind::independence) {
        for (std::size_t i = 0; i < n; ++i) thresholds[i] = rng.exponential();
    } else {
        // frailty representation: xi_i = (1 + E_i / V)^(-1/theta),
        // V ~ Gamma(1/theta, 1), E_i iid standard exponential
        const double theta = mnm.copula().theta();
        const double v = rng.gamma(1.0 / theta);
        for (std::size_t i = 0; i < n; ++i)
            thresholds[i] = std::log1p(rng.exponential() / v) / theta;
    }
    JointDefaults out;
    out.times.resize(n);
    out.first_time = std::numeric_limits<Time>::infinity();
    out.first_name = 0;
    for (std::size_t i = 0; i < n; ++i) {
        out.times[i] = mnm.hazard(i).first_passage(thresholds[i]);
        if (out.times[i] < out.first_time) {
            out.first_time = out.times[i];
            out.first_name = i;
        }
    }
    return out;
}

namespace {

std::vector<double> pricing_breaks(const MultiNameModel& mnm,
                                   const MarketEnv& env) {
    std::vector<double> b = env.rate_curve().knots();
    auto hk = mnm.knots();
    b.insert(b.end(), hk.begin(), hk.end());
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    return b;
}

} // namespace

Amount ftd_price(const MultiNameModel& mnm, const MarketEnv& env,
                 const FtdClaim& claim, Time t, bool first_default_occurred) {
    if (first_default_occurred) return 0.0;
    const Time T = claim.maturity;
    require(t <= T, "first-to-default price: t beyond maturity");
    require(claim.names() == mnm.names(),
            "claim recoveries must match the model's number of names");
    if (t >= T) return 0.0;
    const double g_t = mnm.joint_survival(t);
    double terminal = env.discount(t, T) * (mnm.joint_survival(T) / g_t) *
                      claim.promised_payoff(0.0);
    double running = integrate_adaptive(
        [&](double u) {
            auto lam = ftd_intensities(mnm, u);
            double flow = claim.dividend_rate(u);
            for (std::size_t i = 0; i < mnm.names(); ++i)
                flow += claim.recoveries[i](u, 0.0) * lam.per_name[i];
            return env.discount(t, u) * (mnm.joint_survival(u) / g_t) * flow;
        },
        t, T, pricing_breaks(mnm, env), 1e-9, 64);
    return terminal + running;
}

CdsLegs ftd_legs(const MultiNameModel& mnm, const MarketEnv& env,
                 const std::vector<TimeFn>& recoveries, Time maturity,
                 Time t) {
    require(recoveries.size() == mnm.names(),
            "one recovery per name is required");
    require(t <= maturity, "ftd legs: t beyond maturity");
    if (t >= maturity) return {0.0, 0.0};
    const double g_t = mnm.joint_survival(t);
    auto breaks = pricing_breaks(mnm, env);
    double prot = integrate_adaptive(
        [&](double u) {
            auto lam = ftd_intensities(mnm, u);
            double flow = 0.0;
            for (std::size_t i = 0; i < mnm.names(); ++i)
                flow += recoveries[i](u) * lam.per_name[i];
            return env.discount(t, u) * (mnm.joint_survival(u) / g_t) * flow;
        },
        t, maturity, breaks, 1e-9, 64);
    double ann = integrate_adaptive(
        [&](double u) {
            return env.discount(t, u) * (mnm.joint_survival(u) / g_t);
        },
        t, maturity, breaks, 1e-9, 64);
    return {prot, ann};
}

Rate ftd_market_spread(const MultiNameModel& mnm, const MarketEnv& env,
                       const std::vector<TimeFn>& recoveries, Time maturity,
                       Time t) {
    auto legs = ftd_legs(mnm, env, recoveries, maturity, t);
    require(legs.annuity_value > 0.0,
            "first-to-default spread: degenerate annuity");
    return legs.protection_value / legs.annuity_value;
}

ContagionCurve::ContagionCurve(const MultiNameModel& mnm, std::size_t name,
                               std::size_t defaulter, Time base_time)
    : mnm_(&mnm), name_(name), base_(base_time) {
    require(name < mnm.names() && defaulter < mnm.names(),
            "contagion curve: name index out of range");
    require(name != defaulter,
            "contagion curve applies to a surviving name only");
    std::vector<double> u(mnm.names());
    for (std::size_t i = 0; i < mnm.names(); ++i)
        u[i] = mnm.marginal_survival(i, base_time);
    base_value_ = mnm.copula().value(u);
    if (mnm.copula().kind() == Copula::Kind::clayton) {
        const double theta = mnm.copula().theta();
        shift_offset_ = std::pow(base_value_, -theta) -
                        std::pow(u[name], -theta);
    } else {
        shift_offset_ = 0.0;
    }
}

double ContagionCurve::survival(Time u) const {
    require(u >= base_, "contagion survival: time before the default");
    const double k_u = mnm_->marginal_survival(name_, u);
    if (mnm_->copula().kind() == Copula::Kind::independence)
        return k_u / mnm_->marginal_survival(name_, base_);
    const double theta = mnm_->copula().theta();
    const double d = shift_offset_ + std::pow(k_u, -theta);
    return std::pow(std::pow(base_value_, -theta) / d, (1.0 + theta) / theta);
}

double ContagionCurve::hazard(Time u) const {
    const double gamma = mnm_->hazard(name_)(u);
    if (mnm_->copula().kind() == Copula::Kind::independence) return gamma;
    const double theta = mnm_->copula().theta();
    const double k_u = mnm_->marginal_survival(name_, u);
    const double d = shift_offset_ + std::pow(k_u, -theta);
    return (1.0 + theta) * gamma * std::pow(k_u, -theta) / d;
}

Amount contagion_cds_value(const MultiNameModel& mnm, const MarketEnv& env,
                           const CdsSpec& cds, Time t,
                           std::size_t defaulter) {
    const std::size_t name = static_cast<std::size_t>(cds.reference_name - 1);
    require(t <= cds.maturity, "contagion value: t beyond maturity");
    if (t >= cds.maturity) return 0.0;
    ContagionCurve curve(mnm, name, defaulter, t);
    // fixed-order panels: smooth closed-form integrand, and the value feeds
    // outer quadratures that need a noise-free integrand
    return integrate_panels(
        [&](double u) {
            return env.discount(t, u) * curve.survival(u) *
                   (cds.protection(u) * curve.hazard(u) - cds.spread);
        },
        t, cds.maturity, pricing_breaks(mnm, env), 64);
}

Amount basket_cds_price(const MultiNameModel& mnm, const MarketEnv& env,
                        const CdsSpec& cds, Time t) {
    const std::size_t name = static_cast<std::size_t>(cds.reference_name - 1);
    require(name < mnm.names(), "CDS reference name outside the model");
    require(t <= cds.maturity, "basket CDS price: t beyond maturity");
    if (t >= cds.maturity) return 0.0;
    const double g_t = mnm.joint_survival(t);
    // the CDS is a first-to-default claim whose off-name recoveries are its
    // contagion values at the first default
    return integrate_adaptive(
        [&](double u) {
            auto lam = ftd_intensities(mnm, u);
            double flow = cds.protection(u) * lam.per_name[name] - cds.spread;
            if (mnm.names() > 1) {
                double off_rate = lam.total - lam.per_name[name];
                if (off_rate > 0.0) {
                    std::size_t other = name == 0 ? 1 : 0;
                    flow += contagion_cds_value(mnm, env, cds, u, other) *
                            off_rate;
                }
            }
            return env.discount(t, u) * (mnm.joint_survival(u) / g_t) * flow;
        },
        t, cds.maturity, pricing_breaks(mnm, env), 1e-9, 32);
}

HedgePlan ftd_hedge_solve(const MultiNameModel& mnm, const MarketEnv& env,
                          std::span<const CdsSpec> instruments,
                          const FtdClaim& claim, Time t) {
    const std::size_t n = mnm.names();
    require(!instruments.empty(), "at least one instrument is required");
    require(instruments.size() >= n,
            "need at least one instrument per jump condition");
    const double claim_value = ftd_price(mnm, env, claim, t, false);
    std::vector<std::vector<double>> columns;
    columns.reserve(instruments.size());
    for (const auto& cds : instruments) {
        const std::size_t jl = static_cast<std::size_t>(cds.reference_name - 1);
        require(jl < n, "instrument written on a name outside the model");
        const double own_value = basket_cds_price(mnm, env, cds, t);
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (i == jl)
                col[i] = cds.protection(t) - own_value;
            else
                col[i] = contagion_cds_value(mnm, env, cds, t, i) - own_value;
        }
        columns.push_back(std::move(col));
    }
    std::vector<double> rhs(n);
    for (std::size_t i = 0; i < n; ++i)
        rhs[i] = claim.recoveries[i](t, 0.0) - claim_value;
    return solve_exposure_system(columns, rhs);
}

double immersion_coefficient(
    const std::function<double(Time, Time)>& joint_survival, Time t,
    double step) {
    require(t > step, "immersion coefficient needs t larger than the step");
    auto d2 = [&](Time u) {
        return (joint_survival(u, t + step) - joint_survival(u, t - step)) /
               (2.0 * step);
    };
    return d2(t) / d2(0.0) - joint_survival(t, t) / joint_survival(0.0, t);
}

double immersion_diagnostic(const MultiNameModel& mnm, Time t) {
    require(mnm.names() == 2, "the diagnostic is defined for two names");
    auto surface = [&](Time u, Time v) {
        double a[2] = {mnm.marginal_survival(0, u), mnm.marginal_survival(1, v)};
        return mnm.copula().value(a);
    };
    return immersion_coefficient(surface, t);
}

double immersion_diagnostic_analytic(const MultiNameModel& mnm, Time t) {
    require(mnm.names() == 2, "the diagnostic is defined for two names");
    double u[2] = {mnm.marginal_survival(0, t), mnm.marginal_survival(1, t)};
    const double c = mnm.copula().value(u);
    if (mnm.copula().kind() == Copula::Kind::independence)
        return 0.0;
    const double theta = mnm.copula().theta();
    const double ratio = c / u[1];
    return std::pow(ratio, 1.0 + theta) - ratio;
}

} // namespace cdshedge
