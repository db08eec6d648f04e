#include "cdshedge/hedging.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

namespace cdshedge {

namespace {
constexpr double kSingularRelTol = 1e-10;
constexpr double kResidualTol = 1e-8;
} // namespace

HedgeInstrument build_instrument(const IntensityModel& model,
                                 const MarketEnv& env, const CdsSpec& cds,
                                 Time t, double state) {
    require(t < cds.maturity, "instrument must be alive at t");
    SingleNamePricer pricer(model, env);
    HedgeInstrument inst;
    inst.cds = cds;
    double price = pricer.cds_ex_dividend_price(cds, t, state, false);
    inst.jump_exposure = cds.protection(t) - price;
    CdsLegsSlice slice(model, env, t, cds.maturity, cds.protection);
    inst.diffusion_exposure = repr_coefficient(
        model,
        [&](Time, double x) { return slice.price(x, cds.spread); }, t, state);
    return inst;
}

HedgePlan solve_exposure_system(const std::vector<std::vector<double>>& columns,
                                const std::vector<double>& rhs) {
    require(!columns.empty(), "at least one hedge instrument is required");
    const auto rows = rhs.size();
    const auto cols = columns.size();
    for (const auto& c : columns)
        require(c.size() == rows, "exposure column has inconsistent dimension");

    Eigen::MatrixXd m(rows, cols);
    for (std::size_t j = 0; j < cols; ++j)
        for (std::size_t i = 0; i < rows; ++i)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                columns[j][i];
    Eigen::VectorXd b(rows);
    for (std::size_t i = 0; i < rows; ++i)
        b(static_cast<Eigen::Index>(i)) = rhs[i];

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(
        m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    double smax = sv.size() > 0 ? sv(0) : 0.0;
    double smin = sv.size() > 0 ? sv(sv.size() - 1) : 0.0;

    HedgePlan plan;
    plan.condition_number =
        smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();

    svd.setThreshold(kSingularRelTol);
    Eigen::VectorXd x = svd.solve(b);  // minimum-norm least squares
    double residual = (m * x - b).norm();

    plan.positions.assign(x.data(), x.data() + x.size());
    plan.residual_norm = residual;
    double rhs_scale = std::max(b.norm(), 1.0);
    plan.singular = smax == 0.0 || smin < kSingularRelTol * smax;
    plan.non_hedgeable = residual > kResidualTol * rhs_scale;
    return plan;
}

HedgePlan solve_matching(std::span<const HedgeInstrument> instruments,
                         const HedgeTarget& target) {
    require(!instruments.empty(), "at least one hedge instrument is required");
    const std::size_t d = target.diffusion_target.size();
    std::vector<std::vector<double>> columns;
    columns.reserve(instruments.size());
    for (const auto& inst : instruments) {
        require(inst.diffusion_exposure.size() == d,
                "instrument diffusion dimension does not match the target");
        std::vector<double> col(1 + d);
        col[0] = inst.jump_exposure;
        for (std::size_t i = 0; i < d; ++i)
            col[1 + i] = inst.diffusion_exposure[i];
        columns.push_back(std::move(col));
    }
    std::vector<double> rhs(1 + d);
    rhs[0] = target.jump_target;
    for (std::size_t i = 0; i < d; ++i) rhs[1 + i] = target.diffusion_target[i];
    return solve_exposure_system(columns, rhs);
}

void require_hedgeable(const HedgePlan& plan) {
    if (plan.non_hedgeable)
        throw NonHedgeableError(
            "matching conditions cannot be satisfied (residual " +
                std::to_string(plan.residual_norm) + ")",
            plan.residual_norm);
}

double prop_determinant_two_cds(double delta1, double kappa1, double delta2,
                                double kappa2, double p_hat, double a_tilde,
                                double psi1, double psi2) {
    return (delta2 * kappa1 - delta1 * kappa2) *
           (p_hat * psi2 - a_tilde * psi1);
}

double bank_position(double wealth, std::span<const double> positions,
                     std::span<const double> prices, const MarketEnv& env,
                     Time t) {
    require(positions.size() == prices.size(),
            "one price per position is required");
    double invested = 0.0;
    for (std::size_t i = 0; i < positions.size(); ++i)
        invested += positions[i] * prices[i];
    return (wealth - invested) / env.savings(t);
}

} // namespace cdshedge
