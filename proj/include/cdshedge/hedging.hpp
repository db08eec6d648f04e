#pragma once

#include <span>
#include <vector>

#include "cdshedge/pricing.hpp"

namespace cdshedge {

/// One tradeable CDS with its exposures at a node: the jump the holder
/// receives at default (protection minus pre-default value) and the Brownian
/// loading of its pre-default price function.
struct HedgeInstrument {
    CdsSpec cds;
    double jump_exposure = 0.0;
    std::vector<double> diffusion_exposure;
};

/// Exposures of the claim to be replicated at a node.
struct HedgeTarget {
    double jump_target = 0.0;
    std::vector<double> diffusion_target;
};

/// Solved hedge: positions in the traded CDSs, the bank account position,
/// and solve diagnostics. `singular` flags rank deficiency (smallest singular
/// value below 1e-10 of the largest); `non_hedgeable` additionally means the
/// conditions are inconsistent, i.e. the least-squares residual survives.
/// A rank-deficient but consistent system (e.g. a vanished diffusion loading
/// on both sides) keeps its minimum-norm solution.
struct HedgePlan {
    std::vector<double> positions;
    double bank = 0.0;
    double condition_number = 0.0;
    bool singular = false;
    bool non_hedgeable = false;
    double residual_norm = 0.0;
};

/// Exposures of a CDS at (t, state): jump = delta(t) - pre-default price,
/// diffusion = Brownian loading of the price function via repr_coefficient.
HedgeInstrument build_instrument(const IntensityModel& model,
                                 const MarketEnv& env, const CdsSpec& cds,
                                 Time t, double state);

/// Solve the jump and diffusion matching conditions
///   sum_i phi_i jump_i = jump_target,  sum_i phi_i zeta_i = xi
/// as a (1+d) x k linear system. Exact solve when k = d+1 and the matrix is
/// well conditioned; minimum-norm least squares otherwise. The singular flag
/// is raised when the smallest singular value drops below 1e-10 of the
/// largest, or when the least-squares residual exceeds 1e-8.
HedgePlan solve_matching(std::span<const HedgeInstrument> instruments,
                         const HedgeTarget& target);

/// Lower-level solve on raw exposure columns (shared with the rolling and
/// first-to-default assemblies).
HedgePlan solve_exposure_system(const std::vector<std::vector<double>>& columns,
                                const std::vector<double>& rhs);

/// Throws NonHedgeableError if the plan is singular or has a residual.
void require_hedgeable(const HedgePlan& plan);

/// Closed-form determinant of the two-CDS matching matrix with a single
/// Brownian driver and common maturity:
///   (delta2 kappa1 - delta1 kappa2) (Phat psi2 - Atilde psi1).
/// Vanishes exactly when delta1 kappa2 = delta2 kappa1 or
/// Phat psi2 = Atilde psi1.
double prop_determinant_two_cds(double delta1, double kappa1, double delta2,
                                double kappa2, double p_hat, double a_tilde,
                                double psi1, double psi2);

/// Bank-account position phi0 = B(t)^{-1} (V - sum_i phi_i S_i).
double bank_position(double wealth, std::span<const double> positions,
                     std::span<const double> prices, const MarketEnv& env,
                     Time t);

} // namespace cdshedge
