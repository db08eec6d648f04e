#include "cdshedge/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "cdshedge/quadrature.hpp"

#ifdef CDSHEDGE_HAS_OPENMP
#include <omp.h>
#endif

namespace cdshedge {

namespace {

constexpr std::int64_t kBlock = 256;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Runs body(block, begin, end) over fixed-size blocks of the index range.
// Block contents are deterministic, so results folded in block order do not
// depend on the schedule or thread count.
template <class Body>
void for_blocks(std::int64_t n, Execution exec, Body&& body) {
    const std::int64_t nblocks = (n + kBlock - 1) / kBlock;
#ifdef CDSHEDGE_HAS_OPENMP
    if (exec == Execution::parallel) {
#pragma omp parallel for schedule(dynamic)
        for (std::int64_t b = 0; b < nblocks; ++b)
            body(b, b * kBlock, std::min(n, (b + 1) * kBlock));
        return;
    }
#endif
    (void)exec;
    for (std::int64_t b = 0; b < nblocks; ++b)
        body(b, b * kBlock, std::min(n, (b + 1) * kBlock));
}

double fd_bump(double x) { return std::max(1e-5 * std::abs(x), 1e-8); }

} // namespace

void SimConfig::validate() const {
    require(path_count >= 1, "simulation needs at least one path");
    require(step_count >= 2, "simulation needs at least two steps");
    require(horizon > 0.0, "simulation horizon must be positive");
    if (antithetic)
        require(path_count % 2 == 0,
                "antithetic sampling needs an even path count");
}

PathEngine::PathEngine(const IntensityModel& model, const MarketEnv& env,
                       SimConfig config)
    : model_(&model), config_(config) {
    config_.validate();
    require(config_.horizon <= env.horizon() + 1e-12,
            "simulation horizon beyond the market horizon");
    auto g = std::make_shared<std::vector<Time>>();
    g->resize(static_cast<std::size_t>(config_.step_count) + 1);
    for (int j = 0; j <= config_.step_count; ++j)
        (*g)[static_cast<std::size_t>(j)] =
            config_.horizon * j / config_.step_count;
    grid_ = std::move(g);
}

void PathEngine::generate(std::int64_t path_index, PathRecord& out) const {
    require(path_index >= 0 && path_index < config_.path_count,
            "path index out of range");
    const auto& grid = *grid_;
    const std::size_t nodes = grid.size();
    const int steps = config_.step_count;
    const int d = model_->driver_dim();

    out.grid = grid_;
    out.state.assign(nodes, 0.0);
    out.cum_hazard.assign(nodes, 0.0);
    out.survival.assign(nodes, 1.0);
    out.dM.assign(static_cast<std::size_t>(steps), 0.0);
    out.dW.assign(d > 0 ? static_cast<std::size_t>(steps) : 0, 0.0);

    const bool anti = config_.antithetic;
    const std::uint64_t stream = anti ? static_cast<std::uint64_t>(path_index / 2)
                                      : static_cast<std::uint64_t>(path_index);
    const bool mirror = anti && (path_index % 2 == 1);
    PathRng rng(config_.seed, stream);

    double u = rng.uniform();
    if (mirror) u = 1.0 - u;

    if (model_->kind() == IntensityModel::Kind::square_root) {
        const auto& p = model_->square_root_params();
        double x = p.initial_state;
        out.state[0] = x;
        for (int j = 0; j < steps; ++j) {
            const double dt = grid[j + 1] - grid[j];
            double z = rng.normal();
            if (mirror) z = -z;
            const double dw = z * std::sqrt(dt);
            if (!out.dW.empty()) out.dW[static_cast<std::size_t>(j)] = dw;
            const double xp = std::max(x, 0.0);  // full truncation
            const double x_next = x + p.mean_reversion * (p.long_run_level - xp) * dt +
                                  p.volatility * std::sqrt(xp) * dw;
            // trapezoidal hazard accumulation on the truncated state
            out.cum_hazard[j + 1] = out.cum_hazard[j] +
                                    0.5 * dt * (xp + std::max(x_next, 0.0));
            x = x_next;
            out.state[j + 1] = x;
        }
    } else {
        for (int j = 0; j < steps; ++j) {
            if (d > 0) {
                double z = rng.normal();
                if (mirror) z = -z;
                out.dW[static_cast<std::size_t>(j)] =
                    z * std::sqrt(grid[j + 1] - grid[j]);
            }
            out.cum_hazard[j + 1] = model_->hazard_integral(0.0, grid[j + 1]);
        }
    }
    for (std::size_t j = 0; j < nodes; ++j)
        out.survival[j] = std::exp(-out.cum_hazard[j]);

    out.default_time = sample_default_time(grid, out.cum_hazard, u);
    out.default_step = -1;
    if (out.default_time <= grid.back()) {
        auto it = std::lower_bound(grid.begin(), grid.end(), out.default_time);
        int k = static_cast<int>(it - grid.begin());
        out.default_step = std::max(0, k - 1);
    }

    for (int j = 0; j < steps; ++j) {
        const Time t0 = grid[j], t1 = grid[j + 1];
        if (out.default_time <= t0) break;  // dM already zeroed
        const double lam = model_->lambda(t0, out.state[j]);
        const double stopped = std::min(out.default_time, t1) - t0;
        const double dH = (out.default_time <= t1) ? 1.0 : 0.0;
        out.dM[static_cast<std::size_t>(j)] = dH - lam * stopped;
    }
}

std::vector<PathRecord> simulate_paths(const IntensityModel& model,
                                       const MarketEnv& env,
                                       const SimConfig& config) {
    PathEngine engine(model, env, config);
    std::vector<PathRecord> out(static_cast<std::size_t>(config.path_count));
    for_blocks(config.path_count, config.execution,
               [&](std::int64_t, std::int64_t begin, std::int64_t end) {
                   for (std::int64_t i = begin; i < end; ++i)
                       engine.generate(i, out[static_cast<std::size_t>(i)]);
               });
    return out;
}

MultiPathEngine::MultiPathEngine(const MultiNameModel& model, SimConfig config)
    : model_(&model), config_(config) {
    config_.validate();
    auto g = std::make_shared<std::vector<Time>>();
    g->resize(static_cast<std::size_t>(config_.step_count) + 1);
    for (int j = 0; j <= config_.step_count; ++j)
        (*g)[static_cast<std::size_t>(j)] =
            config_.horizon * j / config_.step_count;
    grid_ = std::move(g);
}

void MultiPathEngine::generate(std::int64_t path_index,
                               MultiPathRecord& out) const {
    require(path_index >= 0 && path_index < config_.path_count,
            "path index out of range");
    const bool anti = config_.antithetic;
    const std::uint64_t stream = anti ? static_cast<std::uint64_t>(path_index / 2)
                                      : static_cast<std::uint64_t>(path_index);
    PathRng rng(config_.seed, stream);
    // antithetic mirroring is not defined for the frailty draw; pair paths
    // share a stream but consume it sequentially
    JointDefaults d = sample_joint_defaults(*model_, rng);
    if (anti && (path_index % 2 == 1)) d = sample_joint_defaults(*model_, rng);
    out.grid = grid_;
    out.default_times = std::move(d.times);
    out.first_time = d.first_time;
    out.first_name = d.first_name;
    out.first_step = -1;
    const auto& grid = *grid_;
    if (out.first_time <= grid.back()) {
        auto it = std::lower_bound(grid.begin(), grid.end(), out.first_time);
        int k = static_cast<int>(it - grid.begin());
        out.first_step = std::max(0, k - 1);
    }
}

// ---------------------------------------------------------------------------
// Grid caches
// ---------------------------------------------------------------------------

namespace {

// Per-node leg slices of the traded CDSs plus per-step discounted premium
// integrals, all path-independent.
struct CdsGridCache {
    std::vector<CdsSpec> instruments;
    const MarketEnv* env = nullptr;
    const IntensityModel* model = nullptr;
    std::vector<Time> grid;
    // [instrument][node]; disengaged once the node is at/after maturity
    std::vector<std::vector<std::optional<CdsLegsSlice>>> slices;
    std::vector<std::vector<double>> premium_int;  // [instrument][step]

    CdsGridCache(const IntensityModel& m, const MarketEnv& e,
                 std::span<const CdsSpec> insts, const std::vector<Time>& g)
        : env(&e), model(&m), grid(g) {
        instruments.assign(insts.begin(), insts.end());
        const std::size_t n = instruments.size();
        const std::size_t nodes = grid.size();
        slices.resize(n);
        premium_int.assign(n, std::vector<double>(nodes - 1, 0.0));
        for (std::size_t i = 0; i < n; ++i) {
            slices[i].resize(nodes);
            for (std::size_t j = 0; j < nodes; ++j)
                if (grid[j] < instruments[i].maturity)
                    slices[i][j].emplace(m, e, grid[j], instruments[i].maturity,
                                         instruments[i].protection);
            for (std::size_t j = 0; j + 1 < nodes; ++j) {
                Time hi = std::min(grid[j + 1], instruments[i].maturity);
                if (grid[j] < hi)
                    premium_int[i][j] = e.discounted_unit_integral(grid[j], hi);
            }
        }
    }

    double price(std::size_t i, std::size_t node, double x) const {
        const auto& s = slices[i][node];
        if (!s) return 0.0;
        return s->price(x, instruments[i].spread);
    }

    // Brownian loading of the pre-default price function at (node, x).
    double loading(std::size_t i, std::size_t node, double x) const {
        const double dl = model->diffusion_loading(x);
        if (dl == 0.0 || !slices[i][node]) return 0.0;
        const double h = fd_bump(x);
        return dl * (price(i, node, x + h) - price(i, node, x - h)) / (2.0 * h);
    }

    double jump(std::size_t i, std::size_t node, double x) const {
        if (!slices[i][node]) return 0.0;
        return instruments[i].protection(grid[node]) - price(i, node, x);
    }
};

struct ClaimGridCache {
    const DefaultableClaim* claim = nullptr;
    const MarketEnv* env = nullptr;
    const IntensityModel* model = nullptr;
    std::vector<Time> grid;
    std::vector<ClaimSlice> slices;        // per node
    std::vector<double> accrual_step;      // discounted dividend rate per step

    bool pays_at_horizon = false;

    ClaimGridCache(const IntensityModel& m, const MarketEnv& e,
                   const DefaultableClaim& c, const std::vector<Time>& g)
        : claim(&c), env(&e), model(&m), grid(g) {
        require(c.maturity >= grid.back() - 1e-9,
                "the claim must not mature inside the simulation horizon");
        pays_at_horizon = std::abs(grid.back() - c.maturity) < 1e-9;
        slices.reserve(grid.size());
        for (Time t : grid) slices.emplace_back(m, e, c, t);
        accrual_step.resize(grid.size() - 1);
        const auto& rk = e.rate_curve().knots();
        std::vector<double> breaks(rk.begin(), rk.end());
        for (std::size_t j = 0; j + 1 < grid.size(); ++j)
            accrual_step[j] = integrate_adaptive(
                [&](double u) { return c.dividend_rate(u) / e.savings(u); },
                grid[j], grid[j + 1], breaks, 1e-12, 16);
    }

    double value(std::size_t node, double x) const {
        return slices[node].value(x);
    }

    double loading(std::size_t node, double x) const {
        const double dl = model->diffusion_loading(x);
        if (dl == 0.0) return 0.0;
        const double h = fd_bump(x);
        return dl * (value(node, x + h) - value(node, x - h)) / (2.0 * h);
    }

    double accrual_partial(Time a, Time b) const {
        const auto& rk = env->rate_curve().knots();
        std::vector<double> breaks(rk.begin(), rk.end());
        return integrate_adaptive(
            [&](double u) { return claim->dividend_rate(u) / env->savings(u); },
            a, b, breaks, 1e-12, 16);
    }
};

// Discounted stopped cumulative claim price at every node of one path.
void claim_path_values(const PathRecord& p, const ClaimGridCache& cache,
                       std::vector<double>& out) {
    const auto& grid = *p.grid;
    const std::size_t nodes = grid.size();
    out.assign(nodes, 0.0);
    out[0] = cache.value(0, p.state[0]);
    double divs = 0.0;
    const int steps = p.steps();
    for (int j = 0; j < steps; ++j) {
        const std::size_t sj = static_cast<std::size_t>(j);
        if (p.default_step == j) {
            const Time tau = p.default_time;
            divs += cache.accrual_partial(grid[sj], tau);
            divs += cache.claim->recovery(tau, p.state[sj]) / cache.env->savings(tau);
            for (std::size_t k = sj + 1; k < nodes; ++k) out[k] = divs;
            return;
        }
        divs += cache.accrual_step[sj];
        out[sj + 1] = cache.value(sj + 1, p.state[sj + 1]) /
                          cache.env->savings(grid[sj + 1]) +
                      divs;
    }
    // survived to the horizon: the promised payoff is the final dividend
    // when the claim matures there
    if (cache.pays_at_horizon) {
        const bool stochastic = !cache.model->is_deterministic();
        const double x_T = stochastic ? p.state[nodes - 1] : 0.0;
        out[nodes - 1] = divs + cache.claim->promised_payoff(x_T) /
                                    cache.env->savings(grid[nodes - 1]);
    }
}

struct PathDiag {
    std::int64_t singular_nodes = 0;
    double max_residual = 0.0;
    bool aborted = false;
};

// Discounted self-financing wealth along one path: exact position-weighted
// increments of the instruments' discounted cumulative prices.
void wealth_path_values(const PathRecord& p, const CdsGridCache& cache,
                        const HedgeProviderFn& provider, double initial_wealth,
                        std::vector<double>& out, PathDiag& diag) {
    const auto& grid = *p.grid;
    const std::size_t nodes = grid.size();
    const std::size_t ninst = cache.instruments.size();
    out.assign(nodes, initial_wealth);
    diag = PathDiag{};

    std::vector<double> price_prev(ninst), price_next(ninst);
    for (std::size_t i = 0; i < ninst; ++i)
        price_prev[i] = cache.price(i, 0, p.state[0]);

    const int steps = p.steps();
    double wealth = initial_wealth;
    for (int j = 0; j < steps; ++j) {
        const std::size_t sj = static_cast<std::size_t>(j);
        const Time t0 = grid[sj], t1 = grid[sj + 1];
        if (p.default_step >= 0 && j > p.default_step) {
            out[sj + 1] = wealth;  // stopped
            continue;
        }
        HedgePlan plan = provider(j, t0, p.state[sj]);
        if (plan.singular) ++diag.singular_nodes;
        if (plan.non_hedgeable) {
            diag.aborted = true;
            for (std::size_t k = sj + 1; k < nodes; ++k) out[k] = wealth;
            return;
        }
        diag.max_residual = std::max(diag.max_residual, plan.residual_norm);

        double dv = 0.0;
        if (p.default_step == j) {
            const Time tau = p.default_time;
            for (std::size_t i = 0; i < ninst; ++i) {
                const Time mat = cache.instruments[i].maturity;
                if (t0 >= mat) continue;
                double inc = -price_prev[i] / cache.env->savings(t0);
                inc -= cache.instruments[i].spread *
                       cache.env->discounted_unit_integral(t0, std::min(tau, mat));
                if (tau <= mat)
                    inc += cache.instruments[i].protection(tau) /
                           cache.env->savings(tau);
                dv += plan.positions[i] * inc;
            }
            wealth += dv;
            for (std::size_t k = sj + 1; k < nodes; ++k) out[k] = wealth;
            return;
        }
        for (std::size_t i = 0; i < ninst; ++i) {
            price_next[i] = cache.price(i, sj + 1, p.state[sj + 1]);
            const Time mat = cache.instruments[i].maturity;
            if (t0 >= mat) continue;
            double inc = price_next[i] / cache.env->savings(t1) -
                         price_prev[i] / cache.env->savings(t0) -
                         cache.instruments[i].spread * cache.premium_int[i][sj];
            dv += plan.positions[i] * inc;
        }
        wealth += dv;
        out[sj + 1] = wealth;
        std::swap(price_prev, price_next);
    }
}

} // namespace

RollforwardOutput wealth_rollforward(const std::vector<PathRecord>& paths,
                                     const HedgeProviderFn& provider,
                                     std::span<const CdsSpec> instruments,
                                     const IntensityModel& model,
                                     const MarketEnv& env,
                                     double initial_wealth) {
    require(!paths.empty(), "no paths to roll forward");
    CdsGridCache cache(model, env, instruments, *paths.front().grid);
    RollforwardOutput out;
    out.discounted_wealth.resize(paths.size());
    for (std::size_t p = 0; p < paths.size(); ++p) {
        PathDiag diag;
        wealth_path_values(paths[p], cache, provider, initial_wealth,
                           out.discounted_wealth[p], diag);
        out.singular_nodes += diag.singular_nodes;
        out.aborted_paths += diag.aborted ? 1 : 0;
        out.max_residual = std::max(out.max_residual, diag.max_residual);
    }
    return out;
}

std::vector<std::vector<double>> claim_cumulative_paths(
    const std::vector<PathRecord>& paths, const DefaultableClaim& claim,
    const IntensityModel& model, const MarketEnv& env) {
    require(!paths.empty(), "no paths given");
    ClaimGridCache cache(model, env, claim, *paths.front().grid);
    std::vector<std::vector<double>> out(paths.size());
    for (std::size_t p = 0; p < paths.size(); ++p)
        claim_path_values(paths[p], cache, out[p]);
    return out;
}

ReplicationReport replication_error(
    const std::vector<std::vector<double>>& discounted_wealth,
    const std::vector<std::vector<double>>& discounted_claim,
    const std::vector<PathRecord>& paths, const MarketEnv& env) {
    require(discounted_wealth.size() == discounted_claim.size() &&
                discounted_wealth.size() == paths.size(),
            "replication error: mismatched path sets");
    ReplicationReport rep;
    rep.paths = static_cast<std::int64_t>(paths.size());
    std::vector<double> sups;
    sups.reserve(paths.size());
    double sum = 0.0, sumsq = 0.0, jump_sumsq = 0.0;
    std::int64_t jumps = 0;
    for (std::size_t p = 0; p < paths.size(); ++p) {
        const auto& w = discounted_wealth[p];
        const auto& c = discounted_claim[p];
        require(w.size() == c.size() && w.size() == paths[p].grid->size(),
                "replication error: mismatched grids");
        double sup = 0.0;
        for (std::size_t j = 0; j < w.size(); ++j)
            sup = std::max(sup, std::abs(w[j] - c[j]));
        sups.push_back(sup);
        const Time stop = std::min(paths[p].default_time, paths[p].grid->back());
        const double bfac = env.savings(stop);
        const double term = (w.back() - c.back()) * bfac;
        sum += term;
        sumsq += term * term;
        rep.terminal_max_abs = std::max(rep.terminal_max_abs, std::abs(term));
        if (paths[p].default_step >= 0) {
            ++rep.defaulted_paths;
            const std::size_t k = static_cast<std::size_t>(paths[p].default_step);
            const double jw = w[k + 1] - w[k];
            const double jc = c[k + 1] - c[k];
            jump_sumsq += (jw - jc) * (jw - jc);
            ++jumps;
        }
    }
    const double n = static_cast<double>(paths.size());
    rep.terminal_mean = sum / n;
    rep.terminal_rmse = std::sqrt(sumsq / n);
    rep.jump_rmse = jumps > 0 ? std::sqrt(jump_sumsq / jumps) : 0.0;
    std::sort(sups.begin(), sups.end());
    auto quantile = [&](double q) {
        if (sups.empty()) return 0.0;
        const double pos = q * (sups.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, sups.size() - 1);
        const double w = pos - lo;
        return (1.0 - w) * sups[lo] + w * sups[hi];
    };
    rep.sup_q50 = quantile(0.5);
    rep.sup_q90 = quantile(0.9);
    rep.sup_q99 = quantile(0.99);
    rep.sup_max = sups.back();
    return rep;
}

MartingaleStats::MartingaleStats(std::size_t nodes)
    : sum_(nodes, 0.0), sumsq_(nodes, 0.0) {}

void MartingaleStats::add_path(std::span<const double> values) {
    require(values.size() == sum_.size(), "martingale stats: wrong node count");
    ++count_;
    const double base = values[0];
    base_sum_ += base;
    for (std::size_t j = 0; j < values.size(); ++j) {
        const double d = values[j] - base;
        sum_[j] += d;
        sumsq_[j] += d * d;
    }
}

void MartingaleStats::merge(const MartingaleStats& other) {
    require(other.sum_.size() == sum_.size(),
            "martingale stats: incompatible accumulators");
    count_ += other.count_;
    base_sum_ += other.base_sum_;
    for (std::size_t j = 0; j < sum_.size(); ++j) {
        sum_[j] += other.sum_[j];
        sumsq_[j] += other.sumsq_[j];
    }
}

MartingaleStats::Result MartingaleStats::finalize() const {
    require(count_ >= 2, "martingale test needs at least two paths");
    Result r;
    const double n = static_cast<double>(count_);
    r.z.resize(sum_.size(), 0.0);
    r.mean.resize(sum_.size());
    r.se.resize(sum_.size());
    const double base_mean = base_sum_ / n;
    for (std::size_t j = 0; j < sum_.size(); ++j) {
        const double mean = sum_[j] / n;  // mean of X_t - X_0
        double var = std::max(0.0, sumsq_[j] / n - mean * mean) * n / (n - 1.0);
        const double se = std::sqrt(var / n);
        r.mean[j] = base_mean + mean;
        r.se[j] = se;
        r.z[j] = se > 0.0 ? mean / se : (mean == 0.0 ? 0.0 : kInf);
        r.max_abs_z = std::max(r.max_abs_z, std::abs(r.z[j]));
    }
    r.flagged = r.max_abs_z > 4.0;
    return r;
}

MartingaleStats::Result martingale_test(
    const std::vector<std::vector<double>>& discounted_paths) {
    require(!discounted_paths.empty(), "martingale test: no paths");
    MartingaleStats stats(discounted_paths.front().size());
    for (const auto& p : discounted_paths) stats.add_path(p);
    return stats.finalize();
}

// ---------------------------------------------------------------------------
// Streaming drivers
// ---------------------------------------------------------------------------

namespace {

struct ErrorAccum {
    double sum = 0.0, sumsq = 0.0, max_abs = 0.0;
    double jump_sumsq = 0.0;
    std::int64_t jumps = 0, defaulted = 0;
    std::int64_t singular_nodes = 0, aborted = 0;
    double max_residual = 0.0;

    void merge(const ErrorAccum& o) {
        sum += o.sum;
        sumsq += o.sumsq;
        max_abs = std::max(max_abs, o.max_abs);
        jump_sumsq += o.jump_sumsq;
        jumps += o.jumps;
        defaulted += o.defaulted;
        singular_nodes += o.singular_nodes;
        aborted += o.aborted;
        max_residual = std::max(max_residual, o.max_residual);
    }
};

ReplicationReport reduce_report(const std::vector<ErrorAccum>& blocks,
                                std::vector<double>& sups,
                                std::int64_t npaths) {
    ErrorAccum total;
    for (const auto& b : blocks) total.merge(b);
    ReplicationReport rep;
    rep.paths = npaths;
    const double n = static_cast<double>(std::max<std::int64_t>(
        npaths - total.aborted, 1));
    rep.terminal_mean = total.sum / n;
    rep.terminal_rmse = std::sqrt(total.sumsq / n);
    rep.terminal_max_abs = total.max_abs;
    rep.jump_rmse =
        total.jumps > 0 ? std::sqrt(total.jump_sumsq / total.jumps) : 0.0;
    rep.defaulted_paths = total.defaulted;
    rep.singular_nodes = total.singular_nodes;
    rep.aborted_paths = total.aborted;
    rep.max_residual = total.max_residual;
    sups.erase(std::remove_if(sups.begin(), sups.end(),
                              [](double v) { return v < 0.0; }),
               sups.end());
    std::sort(sups.begin(), sups.end());
    auto quantile = [&](double q) {
        if (sups.empty()) return 0.0;
        const double pos = q * (sups.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, sups.size() - 1);
        const double w = pos - lo;
        return (1.0 - w) * sups[lo] + w * sups[hi];
    };
    rep.sup_q50 = quantile(0.5);
    rep.sup_q90 = quantile(0.9);
    rep.sup_q99 = quantile(0.99);
    rep.sup_max = sups.empty() ? 0.0 : sups.back();
    return rep;
}

void accumulate_path_error(const PathRecord& rec,
                           const std::vector<double>& wealth,
                           const std::vector<double>& claim,
                           const MarketEnv& env, const PathDiag& diag,
                           ErrorAccum& acc, double& sup_out) {
    acc.singular_nodes += diag.singular_nodes;
    acc.max_residual = std::max(acc.max_residual, diag.max_residual);
    if (diag.aborted) {
        ++acc.aborted;
        sup_out = -1.0;  // excluded from the quantiles
        return;
    }
    double sup = 0.0;
    for (std::size_t j = 0; j < wealth.size(); ++j)
        sup = std::max(sup, std::abs(wealth[j] - claim[j]));
    sup_out = sup;
    const Time stop = std::min(rec.default_time, rec.grid->back());
    const double term = (wealth.back() - claim.back()) * env.savings(stop);
    acc.sum += term;
    acc.sumsq += term * term;
    acc.max_abs = std::max(acc.max_abs, std::abs(term));
    if (rec.default_step >= 0) {
        ++acc.defaulted;
        const std::size_t k = static_cast<std::size_t>(rec.default_step);
        const double jw = wealth[k + 1] - wealth[k];
        const double jc = claim[k + 1] - claim[k];
        acc.jump_sumsq += (jw - jc) * (jw - jc);
        ++acc.jumps;
    }
}

} // namespace

ReplicationOutcome run_cds_replication(const IntensityModel& model,
                                       const MarketEnv& env,
                                       const DefaultableClaim& claim,
                                       std::span<const CdsSpec> instruments,
                                       const SimConfig& config) {
    PathEngine engine(model, env, config);
    const auto& grid = engine.grid();
    CdsGridCache icache(model, env, instruments, grid);
    ClaimGridCache ccache(model, env, claim, grid);
    const double v0 = ccache.value(0, model.initial_state());
    const std::size_t ninst = instruments.size();

    const bool stochastic = !model.is_deterministic();
    HedgeProviderFn provider = [&](int step, Time t, double x) {
        const std::size_t sj = static_cast<std::size_t>(step);
        HedgeTarget target;
        const double eval_state = stochastic ? x : 0.0;
        target.jump_target =
            ccache.claim->recovery(t, eval_state) - ccache.value(sj, x);
        std::vector<HedgeInstrument> insts(ninst);
        const int d = model.driver_dim();
        target.diffusion_target.assign(static_cast<std::size_t>(d), 0.0);
        if (d > 0) target.diffusion_target[0] = ccache.loading(sj, x);
        for (std::size_t i = 0; i < ninst; ++i) {
            insts[i].jump_exposure = icache.jump(i, sj, x);
            insts[i].diffusion_exposure.assign(static_cast<std::size_t>(d), 0.0);
            if (d > 0) insts[i].diffusion_exposure[0] = icache.loading(i, sj, x);
        }
        return solve_matching(insts, target);
    };

    const std::int64_t n = config.path_count;
    const std::int64_t nblocks = (n + kBlock - 1) / kBlock;
    std::vector<ErrorAccum> blocks(static_cast<std::size_t>(nblocks));
    std::vector<double> sups(static_cast<std::size_t>(n), 0.0);
    for_blocks(n, config.execution,
               [&](std::int64_t b, std::int64_t begin, std::int64_t end) {
                   PathRecord rec;
                   std::vector<double> wealth, claimv;
                   for (std::int64_t i = begin; i < end; ++i) {
                       engine.generate(i, rec);
                       claim_path_values(rec, ccache, claimv);
                       PathDiag diag;
                       wealth_path_values(rec, icache, provider, v0, wealth,
                                          diag);
                       accumulate_path_error(rec, wealth, claimv, env, diag,
                                             blocks[static_cast<std::size_t>(b)],
                                             sups[static_cast<std::size_t>(i)]);
                   }
               });
    ReplicationOutcome out;
    out.report = reduce_report(blocks, sups, n);
    out.initial_cumulative = v0;
    return out;
}

// ---------------------------------------------------------------------------
// Rolling replication
// ---------------------------------------------------------------------------

namespace {

// Per-family, per-node slices of the active contract's legs, plus the
// matching unwind slices (next node, same maturity).
struct RollingGridCache {
    std::vector<RollingCdsSpec> families;
    const MarketEnv* env = nullptr;
    const IntensityModel* model = nullptr;
    std::vector<Time> grid;
    std::vector<std::vector<CdsLegsSlice>> enter;   // [family][node<steps]
    std::vector<std::vector<CdsLegsSlice>> unwind;  // [family][node<steps]
    std::vector<std::vector<double>> premium_int;   // [family][step]

    RollingGridCache(const IntensityModel& m, const MarketEnv& e,
                     std::span<const RollingCdsSpec> fams,
                     const std::vector<Time>& g)
        : env(&e), model(&m), grid(g) {
        families.assign(fams.begin(), fams.end());
        const std::size_t steps = grid.size() - 1;
        enter.resize(families.size());
        unwind.resize(families.size());
        premium_int.assign(families.size(), std::vector<double>(steps, 0.0));
        for (std::size_t f = 0; f < families.size(); ++f) {
            enter[f].reserve(steps);
            unwind[f].reserve(steps);
            for (std::size_t j = 0; j < steps; ++j) {
                ActiveRoll act = active_contract(families[f], grid[j]);
                require(grid[j + 1] <= act.maturity,
                        "rolling contract matures inside a step");
                enter[f].emplace_back(m, e, grid[j], act.maturity,
                                      families[f].protection);
                unwind[f].emplace_back(m, e, grid[j + 1], act.maturity,
                                       families[f].protection);
                premium_int[f][j] =
                    e.discounted_unit_integral(grid[j], grid[j + 1]);
            }
        }
    }

    Rate entry_spread(std::size_t f, std::size_t step, double x) const {
        double prot, ann;
        enter[f][step].legs(x, prot, ann);
        require(ann > 0.0, "rolling contract: degenerate annuity");
        return prot / ann;
    }

    // zeta1 - kappa zeta2 at the left node
    double diffusion(std::size_t f, std::size_t step, double x,
                     Rate kappa) const {
        const double dl = model->diffusion_loading(x);
        if (dl == 0.0) return 0.0;
        const double h = fd_bump(x);
        double pu, au, pd, ad;
        enter[f][step].legs(x + h, pu, au);
        enter[f][step].legs(x - h, pd, ad);
        return dl * ((pu - pd) - kappa * (au - ad)) / (2.0 * h);
    }
};

} // namespace

ReplicationOutcome run_rolling_replication(
    const IntensityModel& model, const MarketEnv& env,
    const DefaultableClaim& claim, std::span<const RollingCdsSpec> families,
    const SimConfig& config) {
    PathEngine engine(model, env, config);
    const auto& grid = engine.grid();
    RollingGridCache rcache(model, env, families, grid);
    ClaimGridCache ccache(model, env, claim, grid);
    const double v0 = ccache.value(0, model.initial_state());
    const std::size_t nfam = families.size();
    const bool stochastic = !model.is_deterministic();
    const int d = model.driver_dim();

    const std::int64_t n = config.path_count;
    const std::int64_t nblocks = (n + kBlock - 1) / kBlock;
    std::vector<ErrorAccum> blocks(static_cast<std::size_t>(nblocks));
    std::vector<double> sups(static_cast<std::size_t>(n), 0.0);

    for_blocks(n, config.execution, [&](std::int64_t b, std::int64_t begin,
                                        std::int64_t end) {
        PathRecord rec;
        std::vector<double> wealth, claimv;
        std::vector<double> kappa(nfam);
        std::vector<HedgeInstrument> insts(nfam);
        for (std::int64_t ip = begin; ip < end; ++ip) {
            engine.generate(ip, rec);
            claim_path_values(rec, ccache, claimv);
            const std::size_t nodes = grid.size();
            wealth.assign(nodes, v0);
            PathDiag diag;
            double w = v0;
            for (int j = 0; j < rec.steps(); ++j) {
                const std::size_t sj = static_cast<std::size_t>(j);
                const Time t0 = grid[sj], t1 = grid[sj + 1];
                if (rec.default_step >= 0 && j > rec.default_step) {
                    wealth[sj + 1] = w;
                    continue;
                }
                const double x = rec.state[sj];
                HedgeTarget target;
                const double eval_state = stochastic ? x : 0.0;
                target.jump_target = ccache.claim->recovery(t0, eval_state) -
                                     ccache.value(sj, x);
                target.diffusion_target.assign(static_cast<std::size_t>(d), 0.0);
                if (d > 0) target.diffusion_target[0] = ccache.loading(sj, x);
                for (std::size_t f = 0; f < nfam; ++f) {
                    kappa[f] = rcache.entry_spread(f, sj, x);
                    insts[f].jump_exposure = rcache.families[f].protection(t0);
                    insts[f].diffusion_exposure.assign(
                        static_cast<std::size_t>(d), 0.0);
                    if (d > 0)
                        insts[f].diffusion_exposure[0] =
                            rcache.diffusion(f, sj, x, kappa[f]);
                }
                HedgePlan plan = rolling_hedge_solve(insts, target);
                if (plan.singular) ++diag.singular_nodes;
                if (plan.non_hedgeable) {
                    diag.aborted = true;
                    for (std::size_t k = sj + 1; k < nodes; ++k) wealth[k] = w;
                    break;
                }
                diag.max_residual =
                    std::max(diag.max_residual, plan.residual_norm);

                double dv = 0.0;
                if (rec.default_step == j) {
                    const Time tau = rec.default_time;
                    for (std::size_t f = 0; f < nfam; ++f) {
                        double inc = rcache.families[f].protection(tau) /
                                         env.savings(tau) -
                                     kappa[f] *
                                         env.discounted_unit_integral(t0, tau);
                        dv += plan.positions[f] * inc;
                    }
                    w += dv;
                    for (std::size_t k = sj + 1; k < nodes; ++k) wealth[k] = w;
                    break;
                }
                for (std::size_t f = 0; f < nfam; ++f) {
                    double prot, ann;
                    rcache.unwind[f][sj].legs(rec.state[sj + 1], prot, ann);
                    const double unwind_value = prot - kappa[f] * ann;
                    double inc = unwind_value / env.savings(t1) -
                                 kappa[f] * rcache.premium_int[f][sj];
                    dv += plan.positions[f] * inc;
                }
                w += dv;
                wealth[sj + 1] = w;
            }
            accumulate_path_error(rec, wealth, claimv, env, diag,
                                  blocks[static_cast<std::size_t>(b)],
                                  sups[static_cast<std::size_t>(ip)]);
        }
    });
    ReplicationOutcome out;
    out.report = reduce_report(blocks, sups, n);
    out.initial_cumulative = v0;
    return out;
}

// ---------------------------------------------------------------------------
// First-to-default replication
// ---------------------------------------------------------------------------

ReplicationOutcome run_ftd_replication(const MultiNameModel& mnm,
                                       const MarketEnv& env,
                                       const FtdClaim& claim,
                                       std::span<const CdsSpec> instruments,
                                       const SimConfig& config) {
    MultiPathEngine engine(mnm, config);
    const auto& grid = engine.grid();
    require(std::abs(grid.back() - claim.maturity) < 1e-9,
            "the simulation horizon must equal the claim maturity");
    const std::size_t nodes = grid.size();
    const std::size_t steps = nodes - 1;
    const std::size_t ninst = instruments.size();
    const std::size_t n_names = mnm.names();

    // deterministic hazards: per-node quantities are path-independent
    std::vector<double> claim_value(nodes, 0.0);
    std::vector<std::vector<double>> inst_value(ninst,
                                                std::vector<double>(nodes, 0.0));
    std::vector<HedgePlan> plans(steps);
    std::vector<double> claim_accrual(steps, 0.0);
    std::vector<std::vector<double>> premium_int(
        ninst, std::vector<double>(steps, 0.0));

    const auto& rk = env.rate_curve().knots();
    std::vector<double> rate_breaks(rk.begin(), rk.end());

#ifdef CDSHEDGE_HAS_OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (std::int64_t jj = 0; jj < static_cast<std::int64_t>(nodes); ++jj) {
        const std::size_t j = static_cast<std::size_t>(jj);
        claim_value[j] = ftd_price(mnm, env, claim, grid[j], false);
        for (std::size_t i = 0; i < ninst; ++i)
            inst_value[i][j] =
                grid[j] < instruments[i].maturity
                    ? basket_cds_price(mnm, env, instruments[i], grid[j])
                    : 0.0;
        if (j < steps) {
            plans[j] = ftd_hedge_solve(mnm, env, instruments, claim, grid[j]);
            claim_accrual[j] = integrate_adaptive(
                [&](double u) {
                    return claim.dividend_rate(u) / env.savings(u);
                },
                grid[j], grid[j + 1], rate_breaks, 1e-12, 16);
            for (std::size_t i = 0; i < ninst; ++i) {
                Time hi = std::min(grid[j + 1], instruments[i].maturity);
                if (grid[j] < hi)
                    premium_int[i][j] = env.discounted_unit_integral(grid[j], hi);
            }
        }
    }

    const double v0 = claim_value[0];
    const std::int64_t n = config.path_count;
    const std::int64_t nblocks = (n + kBlock - 1) / kBlock;
    std::vector<ErrorAccum> blocks(static_cast<std::size_t>(nblocks));
    std::vector<double> sups(static_cast<std::size_t>(n), 0.0);

    for_blocks(n, config.execution, [&](std::int64_t b, std::int64_t begin,
                                        std::int64_t end) {
        MultiPathRecord rec;
        std::vector<double> wealth(nodes), claimv(nodes);
        auto& acc = blocks[static_cast<std::size_t>(b)];
        for (std::int64_t ip = begin; ip < end; ++ip) {
            engine.generate(ip, rec);
            // claim path
            double divs = 0.0;
            claimv.assign(nodes, 0.0);
            claimv[0] = claim_value[0];
            for (std::size_t j = 0; j < steps; ++j) {
                if (rec.first_step == static_cast<int>(j)) {
                    const Time tau = rec.first_time;
                    divs += integrate_adaptive(
                        [&](double u) {
                            return claim.dividend_rate(u) / env.savings(u);
                        },
                        grid[j], tau, rate_breaks, 1e-12, 16);
                    divs += claim.recoveries[rec.first_name](tau, 0.0) /
                            env.savings(tau);
                    for (std::size_t k = j + 1; k < nodes; ++k) claimv[k] = divs;
                    break;
                }
                divs += claim_accrual[j];
                claimv[j + 1] = claim_value[j + 1] / env.savings(grid[j + 1]) +
                                divs;
            }
            if (rec.first_step < 0) {
                claimv[nodes - 1] =
                    divs + claim.promised_payoff(0.0) /
                               env.savings(grid[nodes - 1]);
            }
            // wealth path
            PathDiag diag;
            wealth.assign(nodes, v0);
            double w = v0;
            for (std::size_t j = 0; j < steps; ++j) {
                if (rec.first_step >= 0 && static_cast<int>(j) > rec.first_step) {
                    wealth[j + 1] = w;
                    continue;
                }
                const HedgePlan& plan = plans[j];
                if (plan.singular) ++diag.singular_nodes;
                if (plan.non_hedgeable) {
                    diag.aborted = true;
                    for (std::size_t k = j + 1; k < nodes; ++k) wealth[k] = w;
                    break;
                }
                diag.max_residual =
                    std::max(diag.max_residual, plan.residual_norm);
                double dv = 0.0;
                if (rec.first_step == static_cast<int>(j)) {
                    const Time tau = rec.first_time;
                    for (std::size_t i = 0; i < ninst; ++i) {
                        const Time mat = instruments[i].maturity;
                        if (grid[j] >= mat) continue;
                        double mark = 0.0;
                        if (tau <= mat) {
                            const std::size_t jl = static_cast<std::size_t>(
                                instruments[i].reference_name - 1);
                            mark = (jl == rec.first_name)
                                       ? instruments[i].protection(tau)
                                       : contagion_cds_value(mnm, env,
                                                             instruments[i],
                                                             tau,
                                                             rec.first_name);
                        }
                        double inc =
                            mark / env.savings(tau) -
                            instruments[i].spread *
                                env.discounted_unit_integral(
                                    grid[j], std::min(tau, mat)) -
                            inst_value[i][j] / env.savings(grid[j]);
                        dv += plan.positions[i] * inc;
                    }
                    w += dv;
                    for (std::size_t k = j + 1; k < nodes; ++k) wealth[k] = w;
                    break;
                }
                for (std::size_t i = 0; i < ninst; ++i) {
                    if (grid[j] >= instruments[i].maturity) continue;
                    double inc = inst_value[i][j + 1] /
                                     env.savings(grid[j + 1]) -
                                 inst_value[i][j] / env.savings(grid[j]) -
                                 instruments[i].spread * premium_int[i][j];
                    dv += plan.positions[i] * inc;
                }
                w += dv;
                wealth[j + 1] = w;
            }
            acc.singular_nodes += diag.singular_nodes;
            acc.max_residual = std::max(acc.max_residual, diag.max_residual);
            if (diag.aborted) {
                ++acc.aborted;
                sups[static_cast<std::size_t>(ip)] = -1.0;
                continue;
            }
            double sup = 0.0;
            for (std::size_t j = 0; j < nodes; ++j)
                sup = std::max(sup, std::abs(wealth[j] - claimv[j]));
            sups[static_cast<std::size_t>(ip)] = sup;
            const Time stop = std::min(rec.first_time, grid.back());
            const double term = (wealth.back() - claimv.back()) *
                                env.savings(stop);
            acc.sum += term;
            acc.sumsq += term * term;
            acc.max_abs = std::max(acc.max_abs, std::abs(term));
            if (rec.first_step >= 0) {
                ++acc.defaulted;
                const std::size_t k = static_cast<std::size_t>(rec.first_step);
                const double jw = wealth[k + 1] - wealth[k];
                const double jc = claimv[k + 1] - claimv[k];
                acc.jump_sumsq += (jw - jc) * (jw - jc);
                ++acc.jumps;
            }
        }
    });
    ReplicationOutcome out;
    out.report = reduce_report(blocks, sups, n);
    out.initial_cumulative = v0;
    return out;
}

// ---------------------------------------------------------------------------
// Martingale diagnostics and Monte Carlo oracles
// ---------------------------------------------------------------------------

MartingaleStats::Result run_claim_martingale_test(
    const IntensityModel& model, const MarketEnv& env,
    const DefaultableClaim& claim, const SimConfig& config) {
    PathEngine engine(model, env, config);
    ClaimGridCache cache(model, env, claim, engine.grid());
    const std::size_t nodes = engine.grid().size();
    const std::int64_t n = config.path_count;
    const std::int64_t nblocks = (n + kBlock - 1) / kBlock;
    std::vector<MartingaleStats> blocks(static_cast<std::size_t>(nblocks),
                                        MartingaleStats(nodes));
    for_blocks(n, config.execution,
               [&](std::int64_t b, std::int64_t begin, std::int64_t end) {
                   PathRecord rec;
                   std::vector<double> values;
                   for (std::int64_t i = begin; i < end; ++i) {
                       engine.generate(i, rec);
                       claim_path_values(rec, cache, values);
                       blocks[static_cast<std::size_t>(b)].add_path(values);
                   }
               });
    MartingaleStats total(nodes);
    for (const auto& blk : blocks) total.merge(blk);
    return total.finalize();
}

MartingaleStats::Result run_rolling_martingale_test(
    const IntensityModel& model, const MarketEnv& env,
    const RollingCdsSpec& spec, const SimConfig& config) {
    PathEngine engine(model, env, config);
    const auto& grid = engine.grid();
    RollingGridCache cache(model, env, std::span(&spec, 1), grid);
    const std::size_t nodes = grid.size();
    const std::int64_t n = config.path_count;
    const std::int64_t nblocks = (n + kBlock - 1) / kBlock;
    std::vector<MartingaleStats> blocks(static_cast<std::size_t>(nblocks),
                                        MartingaleStats(nodes));
    for_blocks(n, config.execution, [&](std::int64_t b, std::int64_t begin,
                                        std::int64_t end) {
        PathRecord rec;
        std::vector<double> values(nodes);
        for (std::int64_t i = begin; i < end; ++i) {
            engine.generate(i, rec);
            values.assign(nodes, 0.0);
            double r = 0.0;  // discounted rolling wealth
            for (int j = 0; j < rec.steps(); ++j) {
                const std::size_t sj = static_cast<std::size_t>(j);
                if (rec.default_step >= 0 && j > rec.default_step) {
                    values[sj + 1] = r;
                    continue;
                }
                const Time t0 = grid[sj];
                const double x = rec.state[sj];
                const double binv = 1.0 / env.savings(t0);
                double dr = binv * spec.protection(t0) * rec.dM[sj];
                if (!rec.dW.empty() && model.diffusion_loading(x) != 0.0) {
                    const Rate kappa = cache.entry_spread(0, sj, x);
                    dr += binv * cache.diffusion(0, sj, x, kappa) * rec.dW[sj];
                }
                r += dr;
                values[sj + 1] = r;
            }
            blocks[static_cast<std::size_t>(b)].add_path(values);
        }
    });
    MartingaleStats total(nodes);
    for (const auto& blk : blocks) total.merge(blk);
    return total.finalize();
}

McEstimate mc_survival_estimate(const IntensityModel& model,
                                const MarketEnv& env, Time maturity,
                                const SimConfig& config) {
    return mc_survival_estimates(model, env, {maturity}, config).front();
}

std::vector<McEstimate> mc_survival_estimates(
    const IntensityModel& model, const MarketEnv& env,
    const std::vector<Time>& maturities, const SimConfig& config) {
    require(!maturities.empty(), "at least one maturity is required");
    SimConfig cfg = config;
    cfg.horizon = *std::max_element(maturities.begin(), maturities.end());
    PathEngine engine(model, env, cfg);
    const auto& grid = engine.grid();
    std::vector<std::size_t> at;
    for (Time T : maturities) {
        auto it = std::lower_bound(grid.begin(), grid.end(), T - 1e-12);
        require(it != grid.end() && std::abs(*it - T) < 1e-9,
                "maturity must fall on the simulation grid");
        at.push_back(static_cast<std::size_t>(it - grid.begin()));
    }
    const std::size_t nm = at.size();
    const std::int64_t n = cfg.path_count;
    const std::int64_t nblocks = (n + kBlock - 1) / kBlock;
    struct Acc {
        std::vector<double> sum, sumsq;
    };
    std::vector<Acc> blocks(static_cast<std::size_t>(nblocks));
    for (auto& blk : blocks) {
        blk.sum.assign(nm, 0.0);
        blk.sumsq.assign(nm, 0.0);
    }
    for_blocks(n, cfg.execution,
               [&](std::int64_t b, std::int64_t begin, std::int64_t end) {
                   PathRecord rec;
                   auto& acc = blocks[static_cast<std::size_t>(b)];
                   for (std::int64_t i = begin; i < end; ++i) {
                       engine.generate(i, rec);
                       for (std::size_t k = 0; k < nm; ++k) {
                           const double v = rec.survival[at[k]];
                           acc.sum[k] += v;
                           acc.sumsq[k] += v * v;
                       }
                   }
               });
    std::vector<McEstimate> out(nm);
    const double nn = static_cast<double>(n);
    for (std::size_t k = 0; k < nm; ++k) {
        double sum = 0.0, sumsq = 0.0;
        for (const auto& blk : blocks) {
            sum += blk.sum[k];
            sumsq += blk.sumsq[k];
        }
        out[k].mean = sum / nn;
        const double var = std::max(
            0.0, (sumsq / nn - out[k].mean * out[k].mean) * nn / (nn - 1.0));
        out[k].se = std::sqrt(var / nn);
    }
    return out;
}

} // namespace cdshedge
