#include "cdshedge/pricing.hpp"

#include <algorithm>
#include <cmath>

#include "cdshedge/quadrature.hpp"

namespace cdshedge {

namespace {

// States used to probe whether a payoff/recovery depends on the model state.
void check_state_independent(const std::function<double(double)>& f,
                             double state, const char* what) {
    double x0 = state, x1 = state * 1.05 + 1e-3;
    if (std::abs(f(x1) - f(x0)) > 1e-12 * (1.0 + std::abs(f(x0))))
        throw ArgumentError(std::string(what) +
                            " must not depend on the state under a "
                            "stochastic intensity model");
}

std::vector<double> merge_breaks(const IntensityModel& model,
                                 const MarketEnv& env) {
    std::vector<double> b = env.rate_curve().knots();
    auto hk = model.hazard_knots();
    b.insert(b.end(), hk.begin(), hk.end());
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    return b;
}

} // namespace

SingleNamePricer::SingleNamePricer(const IntensityModel& model,
                                   const MarketEnv& env, double rel_tol,
                                   int initial_order)
    : model_(&model), env_(&env), rel_tol_(rel_tol),
      initial_order_(initial_order), breaks_(merge_breaks(model, env)) {}

double SingleNamePricer::protection_leg(const TimeFn& protection, Time t,
                                        double state, Time T) const {
    if (T <= t) return 0.0;
    return integrate_adaptive(
        [&](double u) {
            return env_->discount(t, u) * protection(u) *
                   model_->survival_density(t, state, u);
        },
        t, T, breaks_, rel_tol_, initial_order_);
}

double SingleNamePricer::annuity_leg(Time t, double state, Time T) const {
    if (T <= t) return 0.0;
    return integrate_adaptive(
        [&](double u) {
            return env_->discount(t, u) * model_->survival(t, state, u);
        },
        t, T, breaks_, rel_tol_, initial_order_);
}

CdsLegs SingleNamePricer::cds_legs(const CdsSpec& cds, Time t,
                                   double state) const {
    require(t <= cds.maturity, "cds_legs: t beyond the CDS maturity");
    return {protection_leg(cds.protection, t, state, cds.maturity),
            annuity_leg(t, state, cds.maturity)};
}

Amount SingleNamePricer::cds_ex_dividend_price(const CdsSpec& cds, Time t,
                                               double state,
                                               bool defaulted) const {
    if (defaulted) return 0.0;
    auto legs = cds_legs(cds, t, state);
    return legs.protection_value - cds.spread * legs.annuity_value;
}

Rate SingleNamePricer::market_spread(const TimeFn& protection, Time maturity,
                                     Time t, double state) const {
    if (t >= maturity)
        throw ArgumentError("market spread is undefined at zero tenor");
    double prot = protection_leg(protection, t, state, maturity);
    double ann = annuity_leg(t, state, maturity);
    if (ann <= 0.0)
        throw ArgumentError("market spread: degenerate (zero) risky annuity");
    return prot / ann;
}

Amount SingleNamePricer::seasoned_cds_value(const TimeFn& protection,
                                            Time maturity,
                                            Rate inception_spread, Time t,
                                            double state,
                                            bool defaulted) const {
    if (defaulted) return 0.0;
    if (t >= maturity) return 0.0;
    double prot = protection_leg(protection, t, state, maturity);
    double ann = annuity_leg(t, state, maturity);
    if (ann <= 0.0)
        throw ArgumentError("seasoned CDS value: degenerate risky annuity");
    Rate kappa_t = prot / ann;
    return (kappa_t - inception_spread) * ann;
}

Amount SingleNamePricer::claim_ex_dividend_price(const DefaultableClaim& claim,
                                                 Time t, double state,
                                                 bool defaulted) const {
    if (defaulted) return 0.0;
    const Time T = claim.maturity;
    require(t <= T, "claim price: t beyond maturity");
    if (t >= T) return 0.0;  // ex-dividend convention at maturity
    const bool stochastic = !model_->is_deterministic();
    if (stochastic) {
        check_state_independent(claim.promised_payoff, state,
                                "promised payoff");
        for (Time u : {t, 0.5 * (t + T), T})
            check_state_independent(
                [&](double x) { return claim.recovery(u, x); }, state,
                "recovery");
    }
    const double eval_state = stochastic ? state : 0.0;
    double terminal = env_->discount(t, T) * model_->survival(t, state, T) *
                      claim.promised_payoff(eval_state);
    double running = integrate_adaptive(
        [&](double u) {
            return env_->discount(t, u) *
                   (claim.recovery(u, eval_state) *
                        model_->survival_density(t, state, u) +
                    claim.dividend_rate(u) * model_->survival(t, state, u));
        },
        t, T, breaks_, rel_tol_, initial_order_);
    return terminal + running;
}

Amount SingleNamePricer::claim_cumulative_price(const DefaultableClaim& claim,
                                                Time t, double state,
                                                const DividendLedger& ledger,
                                                bool defaulted) const {
    Amount ex = defaulted ? 0.0 : claim_ex_dividend_price(claim, t, state, false);
    return ex + discounted_dividend_value(ledger, *env_, t);
}

CdsLegsSlice::CdsLegsSlice(const IntensityModel& model, const MarketEnv& env,
                           Time t, Time maturity, const TimeFn& protection,
                           int order)
    : t_(t), maturity_(maturity), stochastic_(!model.is_deterministic()) {
    require(t <= maturity, "slice: t beyond maturity");
    if (t >= maturity) return;
    std::vector<double> pts{t};
    for (double k : merge_breaks(model, env))
        if (k > t && k < maturity) pts.push_back(k);
    pts.push_back(maturity);
    std::sort(pts.begin(), pts.end());
    const auto& rule = GaussLegendre::rule(order);
    for (std::size_t p = 0; p + 1 < pts.size(); ++p) {
        double mid = 0.5 * (pts[p] + pts[p + 1]);
        double half = 0.5 * (pts[p + 1] - pts[p]);
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
            double u = mid + half * rule.nodes[i];
            Node n{};
            n.w_disc = rule.weights[i] * half * env.discount(t, u);
            n.delta = protection(u);
            if (stochastic_) {
                auto f = model.affine_factors(u - t);
                n.a = f.a_factor;
                n.b = f.b_factor;
                n.ap = f.a_prime;
                n.bp = f.b_prime;
            } else {
                n.surv = model.survival(t, 0.0, u);
                n.dens = model.survival_density(t, 0.0, u);
            }
            nodes_.push_back(n);
        }
    }
}

void CdsLegsSlice::legs(double state, double& protection_value,
                        double& annuity_value) const {
    double prot = 0.0, ann = 0.0;
    if (stochastic_) {
        double x = std::max(state, 0.0);
        for (const auto& n : nodes_) {
            double surv = n.a * std::exp(-n.b * x);
            double dens = (n.bp * x - n.ap / n.a) * surv;
            prot += n.w_disc * n.delta * dens;
            ann += n.w_disc * surv;
        }
    } else {
        for (const auto& n : nodes_) {
            prot += n.w_disc * n.delta * n.dens;
            ann += n.w_disc * n.surv;
        }
    }
    protection_value = prot;
    annuity_value = ann;
}

double CdsLegsSlice::price(double state, Rate spread) const {
    double prot, ann;
    legs(state, prot, ann);
    return prot - spread * ann;
}

ClaimSlice::ClaimSlice(const IntensityModel& model, const MarketEnv& env,
                       const DefaultableClaim& claim, Time t, int order)
    : t_(t), maturity_(claim.maturity), stochastic_(!model.is_deterministic()) {
    require(t <= maturity_, "slice: t beyond maturity");
    double probe_state = model.initial_state();
    if (stochastic_) {
        check_state_independent(claim.promised_payoff, probe_state,
                                "promised payoff");
        for (Time u : {t, 0.5 * (t + claim.maturity), claim.maturity})
            check_state_independent(
                [&](double x) { return claim.recovery(u, x); }, probe_state,
                "recovery");
    }
    payoff_ = claim.promised_payoff(stochastic_ ? probe_state : 0.0);
    disc_T_ = t_ < maturity_ ? env.discount(t, maturity_) : 1.0;
    if (stochastic_) {
        auto f = model.affine_factors(maturity_ - t);
        surv_a_T_ = f.a_factor;
        surv_b_T_ = f.b_factor;
    } else {
        surv_T_ = model.survival(t, 0.0, maturity_);
    }
    if (t >= maturity_) return;
    std::vector<double> pts{t};
    for (double k : merge_breaks(model, env))
        if (k > t && k < maturity_) pts.push_back(k);
    pts.push_back(maturity_);
    std::sort(pts.begin(), pts.end());
    const auto& rule = GaussLegendre::rule(order);
    for (std::size_t p = 0; p + 1 < pts.size(); ++p) {
        double mid = 0.5 * (pts[p] + pts[p + 1]);
        double half = 0.5 * (pts[p + 1] - pts[p]);
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
            double u = mid + half * rule.nodes[i];
            Node n{};
            n.w_disc = rule.weights[i] * half * env.discount(t, u);
            if (stochastic_) {
                n.recovery = claim.recovery(u, probe_state);
                auto f = model.affine_factors(u - t);
                n.a = f.a_factor;
                n.b = f.b_factor;
                n.ap = f.a_prime;
                n.bp = f.b_prime;
            } else {
                n.recovery = claim.recovery(u, 0.0);
                n.surv = model.survival(t, 0.0, u);
                n.dens = model.survival_density(t, 0.0, u);
            }
            n.rate = claim.dividend_rate(u);
            nodes_.push_back(n);
        }
    }
}

double ClaimSlice::value(double state) const {
    if (t_ >= maturity_) return 0.0;
    double acc;
    if (stochastic_) {
        double x = std::max(state, 0.0);
        acc = disc_T_ * surv_a_T_ * std::exp(-surv_b_T_ * x) * payoff_;
        for (const auto& n : nodes_) {
            double surv = n.a * std::exp(-n.b * x);
            double dens = (n.bp * x - n.ap / n.a) * surv;
            acc += n.w_disc * (n.recovery * dens + n.rate * surv);
        }
    } else {
        acc = disc_T_ * surv_T_ * payoff_;
        for (const auto& n : nodes_)
            acc += n.w_disc * (n.recovery * n.dens + n.rate * n.surv);
    }
    return acc;
}

} // namespace cdshedge
