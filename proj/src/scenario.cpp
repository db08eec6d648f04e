#include "cdshedge/scenario.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "cdshedge/quadrature.hpp"

namespace cdshedge {

namespace {

using nlohmann::json;

[[noreturn]] void config_fail(const std::string& where, const std::string& msg) {
    throw ConfigError(where + ": " + msg);
}

void expect_object(const json& j, const std::string& where) {
    if (!j.is_object()) config_fail(where, "expected an object");
}

void expect_keys(const json& j, const std::string& where,
                 std::initializer_list<const char*> allowed) {
    expect_object(j, where);
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) ok = true;
        if (!ok) config_fail(where, "unknown key '" + it.key() + "'");
    }
}

const json& need(const json& j, const char* key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end()) config_fail(where, std::string("missing key '") + key + "'");
    return *it;
}

double need_number(const json& j, const char* key, const std::string& where) {
    const json& v = need(j, key, where);
    if (!v.is_number()) config_fail(where, std::string("'") + key + "' must be a number");
    return v.get<double>();
}

std::string need_string(const json& j, const char* key,
                        const std::string& where) {
    const json& v = need(j, key, where);
    if (!v.is_string()) config_fail(where, std::string("'") + key + "' must be a string");
    return v.get<std::string>();
}

double opt_number(const json& j, const char* key, double fallback,
                  const std::string& where) {
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    if (!it->is_number()) config_fail(where, std::string("'") + key + "' must be a number");
    return it->get<double>();
}

bool opt_bool(const json& j, const char* key, bool fallback,
              const std::string& where) {
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    if (!it->is_boolean()) config_fail(where, std::string("'") + key + "' must be a boolean");
    return it->get<bool>();
}

PiecewiseConstantCurve parse_step_curve(const json& j, const std::string& where,
                                        bool require_nonneg) {
    std::vector<Time> knots;
    std::vector<double> values;
    if (j.is_number()) {
        knots = {0.0};
        values = {j.get<double>()};
    } else if (j.is_array()) {
        for (const auto& pair : j) {
            if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() ||
                !pair[1].is_number())
                config_fail(where, "knots must be [time, value] pairs");
            knots.push_back(pair[0].get<double>());
            values.push_back(pair[1].get<double>());
        }
    } else {
        config_fail(where, "expected a number or a knot list");
    }
    if (require_nonneg)
        for (double v : values)
            if (v < 0.0) config_fail(where, "values must be nonnegative");
    try {
        return PiecewiseConstantCurve(std::move(knots), std::move(values));
    } catch (const Error& e) {
        config_fail(where, e.what());
    }
}

struct SpreadSpec {
    bool at_market = false;
    double scale = 1.0;
    double value = 0.0;
};

SpreadSpec parse_spread(const json& j, const std::string& where) {
    SpreadSpec s;
    const json& v = need(j, "spread", where);
    if (v.is_number()) {
        s.value = v.get<double>();
        if (j.contains("at_market_scale"))
            config_fail(where, "'at_market_scale' needs spread = \"at_market\"");
    } else if (v.is_string() && v.get<std::string>() == "at_market") {
        s.at_market = true;
        s.scale = opt_number(j, "at_market_scale", 1.0, where);
    } else {
        config_fail(where, "'spread' must be a number or \"at_market\"");
    }
    return s;
}

} // namespace

ScenarioConfig parse_scenario_text(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    expect_keys(root, "scenario",
                {"market", "model", "instruments", "claim", "simulation",
                 "outputs"});

    ScenarioConfig cfg;
    cfg.raw_text = text;

    // --- simulation ---------------------------------------------------------
    {
        const json& sim = need(root, "simulation", "scenario");
        expect_keys(sim, "simulation",
                    {"paths", "steps", "horizon", "seed", "antithetic"});
        cfg.sim.path_count =
            static_cast<std::int64_t>(need_number(sim, "paths", "simulation"));
        cfg.sim.step_count =
            static_cast<int>(need_number(sim, "steps", "simulation"));
        cfg.sim.horizon = need_number(sim, "horizon", "simulation");
        cfg.sim.seed = static_cast<std::uint64_t>(
            opt_number(sim, "seed", 42.0, "simulation"));
        cfg.sim.antithetic = opt_bool(sim, "antithetic", false, "simulation");
        try {
            cfg.sim.validate();
        } catch (const Error& e) {
            config_fail("simulation", e.what());
        }
    }

    // --- market --------------------------------------------------------------
    {
        const json& mkt = need(root, "market", "scenario");
        expect_keys(mkt, "market", {"rate", "rate_knots"});
        if (mkt.contains("rate") == mkt.contains("rate_knots"))
            config_fail("market", "give exactly one of 'rate' or 'rate_knots'");
        cfg.rate_curve = mkt.contains("rate")
                             ? parse_step_curve(mkt["rate"], "market.rate", true)
                             : parse_step_curve(mkt["rate_knots"],
                                                "market.rate_knots", true);
    }
    MarketEnv env(cfg.rate_curve, cfg.sim.horizon * 4.0 + 40.0);

    // --- model ---------------------------------------------------------------
    {
        const json& model = need(root, "model", "scenario");
        expect_object(model, "model");
        const std::string kind = need_string(model, "kind", "model");
        if (kind == "constant") {
            expect_keys(model, "model", {"kind", "lambda", "driver_dim"});
            double lam = need_number(model, "lambda", "model");
            if (lam < 0.0) config_fail("model", "hazard must be nonnegative");
            int dd = static_cast<int>(opt_number(model, "driver_dim", 0.0, "model"));
            cfg.single_model = IntensityModel::constant(lam, dd);
        } else if (kind == "piecewise") {
            expect_keys(model, "model", {"kind", "knots", "driver_dim"});
            auto curve = parse_step_curve(need(model, "knots", "model"),
                                          "model.knots", true);
            int dd = static_cast<int>(opt_number(model, "driver_dim", 0.0, "model"));
            cfg.single_model = IntensityModel::piecewise(std::move(curve), dd);
        } else if (kind == "square_root") {
            expect_keys(model, "model",
                        {"kind", "mean_reversion", "long_run_level",
                         "volatility", "initial_state"});
            SquareRootParams p;
            p.mean_reversion = need_number(model, "mean_reversion", "model");
            p.long_run_level = need_number(model, "long_run_level", "model");
            p.volatility = need_number(model, "volatility", "model");
            p.initial_state = need_number(model, "initial_state", "model");
            if (p.volatility < 0.0)
                config_fail("model", "volatility must be nonnegative");
            if (p.long_run_level < 0.0 || p.initial_state < 0.0)
                config_fail("model", "hazard levels must be nonnegative");
            try {
                cfg.single_model = IntensityModel::square_root(p);
            } catch (const Error& e) {
                config_fail("model", e.what());
            }
        } else if (kind == "multi_name") {
            expect_keys(model, "model", {"kind", "hazards", "copula"});
            const json& hz = need(model, "hazards", "model");
            if (!hz.is_array() || hz.empty())
                config_fail("model", "'hazards' must be a nonempty list");
            std::vector<PiecewiseConstantCurve> curves;
            for (std::size_t i = 0; i < hz.size(); ++i)
                curves.push_back(parse_step_curve(
                    hz[i], "model.hazards[" + std::to_string(i) + "]", true));
            const json& cop = need(model, "copula", "model");
            expect_keys(cop, "model.copula", {"kind", "theta"});
            const std::string ck = need_string(cop, "kind", "model.copula");
            Copula copula = Copula::independence();
            if (ck == "clayton") {
                double theta = need_number(cop, "theta", "model.copula");
                if (theta <= 0.0)
                    config_fail("model.copula", "clayton needs theta > 0");
                copula = Copula::clayton(theta);
            } else if (ck != "independence") {
                config_fail("model.copula", "unknown copula kind '" + ck + "'");
            }
            cfg.multi_model = MultiNameModel(std::move(curves), copula);
        } else {
            config_fail("model", "unknown kind '" + kind + "'");
        }
    }

    // --- instruments ----------------------------------------------------------
    {
        const json& insts = need(root, "instruments", "scenario");
        if (!insts.is_array())
            config_fail("instruments", "expected a list");
        for (std::size_t i = 0; i < insts.size(); ++i) {
            const std::string where = "instruments[" + std::to_string(i) + "]";
            const json& inst = insts[i];
            expect_object(inst, where);
            const std::string type = need_string(inst, "type", where);
            if (type == "cds") {
                expect_keys(inst, where,
                            {"type", "protection", "spread", "at_market_scale",
                             "maturity", "name"});
                double prot = need_number(inst, "protection", where);
                if (prot < 0.0) config_fail(where, "protection must be nonnegative");
                double mat = need_number(inst, "maturity", where);
                int name = static_cast<int>(opt_number(inst, "name", 1.0, where));
                SpreadSpec sp = parse_spread(inst, where);
                double spread = sp.value;
                if (sp.at_market) {
                    if (cfg.single_model) {
                        SingleNamePricer pricer(*cfg.single_model, env);
                        spread = sp.scale *
                                 pricer.market_spread(constant_fn(prot), mat,
                                                      0.0,
                                                      cfg.single_model
                                                          ->initial_state());
                    } else {
                        // basket value is affine in the spread
                        CdsSpec probe0 = CdsSpec::make(0.0, prot, mat, name);
                        CdsSpec probe1 = CdsSpec::make(1.0, prot, mat, name);
                        double p0 = basket_cds_price(*cfg.multi_model, env,
                                                     probe0, 0.0);
                        double p1 = basket_cds_price(*cfg.multi_model, env,
                                                     probe1, 0.0);
                        spread = sp.scale * p0 / (p0 - p1);
                    }
                }
                if (spread < 0.0) config_fail(where, "spread must be nonnegative");
                cfg.cds_instruments.push_back(
                    CdsSpec::make(spread, prot, mat, name));
            } else if (type == "rolling_cds") {
                expect_keys(inst, where,
                            {"type", "start", "expiry", "tenor", "protection"});
                double prot = need_number(inst, "protection", where);
                if (prot < 0.0) config_fail(where, "protection must be nonnegative");
                try {
                    cfg.rolling_instruments.push_back(RollingCdsSpec::make(
                        need_number(inst, "start", where),
                        need_number(inst, "expiry", where),
                        need_number(inst, "tenor", where), prot));
                } catch (const Error& e) {
                    config_fail(where, e.what());
                }
            } else {
                config_fail(where, "unknown instrument type '" + type + "'");
            }
        }
        if (!cfg.cds_instruments.empty() && !cfg.rolling_instruments.empty())
            config_fail("instruments",
                        "mixing plain and rolling CDSs is not supported");
        if (cfg.multi_model && !cfg.rolling_instruments.empty())
            config_fail("instruments",
                        "rolling CDSs are single-name instruments");
    }

    // --- claim -----------------------------------------------------------------
    {
        const json& claim = need(root, "claim", "scenario");
        expect_object(claim, "claim");
        const std::string kind = need_string(claim, "kind", "claim");
        const std::string where = "claim";
        if (kind == "survival") {
            expect_keys(claim, where, {"kind", "payoff", "maturity"});
            double payoff = need_number(claim, "payoff", where);
            double mat = need_number(claim, "maturity", where);
            cfg.single_claim = DefaultableClaim::survival_claim(payoff, mat);
            cfg.claim_maturity = mat;
        } else if (kind == "recovery") {
            expect_keys(claim, where,
                        {"kind", "recovery", "payoff", "dividend_rate",
                         "maturity"});
            double rec = need_number(claim, "recovery", where);
            double payoff = opt_number(claim, "payoff", 0.0, where);
            double divr = opt_number(claim, "dividend_rate", 0.0, where);
            double mat = need_number(claim, "maturity", where);
            cfg.single_claim =
                DefaultableClaim{mat, [payoff](double) { return payoff; },
                                 constant_fn(divr), constant_state_fn(rec)};
            cfg.claim_maturity = mat;
        } else if (kind == "cds") {
            expect_keys(claim, where,
                        {"kind", "protection", "spread", "at_market_scale",
                         "maturity"});
            if (!cfg.single_model)
                config_fail(where, "a CDS claim needs a single-name model");
            double prot = need_number(claim, "protection", where);
            if (prot < 0.0) config_fail(where, "protection must be nonnegative");
            double mat = need_number(claim, "maturity", where);
            SpreadSpec sp = parse_spread(claim, where);
            double spread = sp.value;
            if (sp.at_market) {
                SingleNamePricer pricer(*cfg.single_model, env);
                spread = sp.scale * pricer.market_spread(
                                        constant_fn(prot), mat, 0.0,
                                        cfg.single_model->initial_state());
            }
            CdsSpec spec = CdsSpec::make(spread, prot, mat);
            cfg.single_claim = spec.as_claim();
            cfg.claim_maturity = mat;
            cfg.spread_protection = spec.protection;
            cfg.spread_maturity = mat;
        } else if (kind == "ftd_swap") {
            expect_keys(claim, where,
                        {"kind", "recoveries", "spread", "at_market_scale",
                         "maturity"});
            if (!cfg.multi_model)
                config_fail(where, "an ftd_swap claim needs a multi-name model");
            const json& recs = need(claim, "recoveries", where);
            if (!recs.is_array() || recs.size() != cfg.multi_model->names())
                config_fail(where, "'recoveries' must list one value per name");
            std::vector<TimeFn> rec_fns;
            std::vector<StateFn> rec_state_fns;
            for (const auto& r : recs) {
                if (!r.is_number() || r.get<double>() < 0.0)
                    config_fail(where, "recoveries must be nonnegative numbers");
                rec_fns.push_back(constant_fn(r.get<double>()));
                rec_state_fns.push_back(constant_state_fn(r.get<double>()));
            }
            double mat = need_number(claim, "maturity", where);
            SpreadSpec sp = parse_spread(claim, where);
            double spread = sp.value;
            if (sp.at_market)
                spread = sp.scale * ftd_market_spread(*cfg.multi_model, env,
                                                      rec_fns, mat, 0.0);
            Rate kappa = spread;
            cfg.ftd_claim = FtdClaim{mat, [](double) { return 0.0; },
                                     constant_fn(-kappa), rec_state_fns};
            cfg.claim_maturity = mat;
            cfg.ftd_spread_recoveries = rec_fns;
            cfg.spread_maturity = mat;
        } else {
            config_fail(where, "unknown claim kind '" + kind + "'");
        }
        if (cfg.multi_model && cfg.single_claim)
            config_fail("claim", "a multi-name model needs an ftd_swap claim");
        if (!cfg.multi_model && cfg.ftd_claim)
            config_fail("claim", "an ftd_swap claim needs a multi-name model");
    }

    if (std::abs(cfg.claim_maturity - cfg.sim.horizon) > 1e-9)
        config_fail("simulation",
                    "'horizon' must equal the claim maturity (replication is "
                    "measured up to the claim's life)");

    // default spread-column reference: the first traded contract
    if (!cfg.spread_protection) {
        if (!cfg.cds_instruments.empty()) {
            cfg.spread_protection = cfg.cds_instruments.front().protection;
            cfg.spread_maturity = cfg.cds_instruments.front().maturity;
        } else if (!cfg.rolling_instruments.empty()) {
            cfg.spread_protection = cfg.rolling_instruments.front().protection;
            cfg.spread_maturity = 0.0;  // resolved per row from the schedule
        }
    }

    // --- outputs ---------------------------------------------------------------
    {
        const json& out = need(root, "outputs", "scenario");
        expect_keys(out, "outputs",
                    {"dir", "price_table", "hedge_table", "replication",
                     "convergence", "convergence_steps"});
        if (out.contains("dir")) {
            if (!out["dir"].is_string())
                config_fail("outputs", "'dir' must be a string");
            cfg.out_dir = out["dir"].get<std::string>();
        }
        cfg.write_price_table = opt_bool(out, "price_table", true, "outputs");
        cfg.write_hedge_table = opt_bool(out, "hedge_table", true, "outputs");
        cfg.write_replication = opt_bool(out, "replication", true, "outputs");
        cfg.write_convergence = opt_bool(out, "convergence", true, "outputs");
        if (out.contains("convergence_steps")) {
            for (const auto& s : out["convergence_steps"]) {
                if (!s.is_number()) config_fail("outputs", "steps must be numbers");
                cfg.convergence_steps.push_back(s.get<int>());
            }
        }
        if (cfg.write_convergence && cfg.convergence_steps.empty())
            cfg.convergence_steps = {cfg.sim.step_count / 8,
                                     cfg.sim.step_count / 4,
                                     cfg.sim.step_count / 2, cfg.sim.step_count};
    }

    if (cfg.cds_instruments.empty() && cfg.rolling_instruments.empty())
        config_fail("instruments", "at least one instrument is required");

    cfg.normalized_echo = root.dump(2);
    return cfg;
}

// ---------------------------------------------------------------------------
// Bundled scenarios
// ---------------------------------------------------------------------------

namespace {

const std::map<std::string, const char*>& builtin_table() {
    static const std::map<std::string, const char*> table = {
        {"const_cds_hedge", R"({
  "market": {"rate": 0.02},
  "model": {"kind": "constant", "lambda": 0.02},
  "instruments": [
    {"type": "cds", "protection": 0.6, "spread": "at_market", "maturity": 5.0}
  ],
  "claim": {"kind": "recovery", "recovery": 0.5, "maturity": 5.0},
  "simulation": {"paths": 2000, "steps": 250, "horizon": 5.0, "seed": 7},
  "outputs": {"dir": "out_const_cds_hedge"}
})"},
        {"cir_2cds_hedge", R"({
  "market": {"rate": 0.02},
  "model": {"kind": "square_root", "mean_reversion": 0.5,
            "long_run_level": 0.03, "volatility": 0.1, "initial_state": 0.03},
  "instruments": [
    {"type": "cds", "protection": 1.0, "spread": "at_market", "maturity": 5.0},
    {"type": "cds", "protection": 0.6, "spread": "at_market",
     "at_market_scale": 1.5, "maturity": 5.0}
  ],
  "claim": {"kind": "survival", "payoff": 1.0, "maturity": 3.0},
  "simulation": {"paths": 10000, "steps": 1000, "horizon": 3.0, "seed": 20240915},
  "outputs": {"dir": "out_cir_2cds_hedge", "convergence": true,
              "convergence_steps": [125, 250, 500, 1000]}
})"},
        {"rolling_const_hedge", R"({
  "market": {"rate": 0.01},
  "model": {"kind": "constant", "lambda": 0.05},
  "instruments": [
    {"type": "rolling_cds", "start": 0.0, "expiry": 5.0, "tenor": 0.25,
     "protection": 0.5}
  ],
  "claim": {"kind": "cds", "protection": 1.0, "spread": "at_market",
            "maturity": 2.0},
  "simulation": {"paths": 2000, "steps": 500, "horizon": 2.0, "seed": 11},
  "outputs": {"dir": "out_rolling_const_hedge"}
})"},
        {"ftd_clayton_hedge", R"({
  "market": {"rate": 0.01},
  "model": {"kind": "multi_name", "hazards": [0.02, 0.05],
            "copula": {"kind": "clayton", "theta": 2.0}},
  "instruments": [
    {"type": "cds", "protection": 0.6, "spread": "at_market", "maturity": 5.0,
     "name": 1},
    {"type": "cds", "protection": 0.8, "spread": "at_market", "maturity": 5.0,
     "name": 2}
  ],
  "claim": {"kind": "ftd_swap", "recoveries": [0.6, 0.8],
            "spread": "at_market", "maturity": 5.0},
  "simulation": {"paths": 10000, "steps": 1000, "horizon": 5.0, "seed": 31},
  "outputs": {"dir": "out_ftd_clayton_hedge", "convergence": false}
})"},
        {"ftd_independence_hedge", R"({
  "market": {"rate": 0.01},
  "model": {"kind": "multi_name", "hazards": [0.02, 0.05],
            "copula": {"kind": "independence"}},
  "instruments": [
    {"type": "cds", "protection": 0.6, "spread": "at_market", "maturity": 5.0,
     "name": 1},
    {"type": "cds", "protection": 0.8, "spread": "at_market", "maturity": 5.0,
     "name": 2}
  ],
  "claim": {"kind": "ftd_swap", "recoveries": [0.6, 0.8],
            "spread": "at_market", "maturity": 5.0},
  "simulation": {"paths": 10000, "steps": 1000, "horizon": 5.0, "seed": 32},
  "outputs": {"dir": "out_ftd_independence_hedge", "convergence": false}
})"}};
    return table;
}

std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::string& header)
        : out_(path) {
        if (!out_) throw Error("cannot open output file " + path.string());
        out_ << header << "\n";
    }

    void row(std::initializer_list<double> values) {
        bool first = true;
        for (double v : values) {
            if (!first) out_ << ",";
            out_ << format_double(v);
            first = false;
        }
        out_ << "\n";
    }

    void row_named(const std::string& name, double value) {
        out_ << name << "," << format_double(value) << "\n";
    }

    void row_vec(const std::vector<double>& values) {
        for (std::size_t i = 0; i < values.size(); ++i)
            out_ << (i ? "," : "") << format_double(values[i]);
        out_ << "\n";
    }

    void footer(std::uint64_t seed, const std::string& hash) {
        char line[160];
        std::snprintf(line, sizeof(line),
                      "# seed=%" PRIu64 " build=cdshedge-%s config_hash=%s",
                      seed, CDSHEDGE_VERSION, hash.c_str());
        out_ << line << "\n";
    }

private:
    std::ofstream out_;
};

} // namespace

std::vector<std::string> builtin_scenario_names() {
    std::vector<std::string> names;
    for (const auto& [k, v] : builtin_table()) names.push_back(k);
    return names;
}

std::string builtin_scenario_text(const std::string& name) {
    auto it = builtin_table().find(name);
    if (it == builtin_table().end())
        throw ConfigError("unknown bundled scenario '" + name + "'");
    return it->second;
}

ScenarioConfig load_scenario(const std::string& name_or_path) {
    if (std::filesystem::exists(name_or_path)) {
        std::ifstream in(name_or_path);
        if (!in) throw ConfigError("cannot read " + name_or_path);
        std::ostringstream ss;
        ss << in.rdbuf();
        return parse_scenario_text(ss.str());
    }
    auto it = builtin_table().find(name_or_path);
    if (it != builtin_table().end()) return parse_scenario_text(it->second);
    throw ConfigError("no such file or bundled scenario: " + name_or_path);
}

ScenarioResult run_scenario(const ScenarioConfig& config,
                            const RunOverrides& overrides) {
    ScenarioConfig cfg = config;
    if (overrides.seed) cfg.sim.seed = *overrides.seed;
    if (overrides.paths) cfg.sim.path_count = *overrides.paths;
    if (overrides.steps) cfg.sim.step_count = *overrides.steps;
    if (overrides.out_dir) cfg.out_dir = *overrides.out_dir;
    cfg.sim.validate();

    MarketEnv env(cfg.rate_curve, cfg.sim.horizon * 4.0 + 40.0);
    const std::string hash = [&] {
        char buf[20];
        std::snprintf(buf, sizeof(buf), "%016" PRIx64, fnv1a64(cfg.raw_text));
        return std::string(buf);
    }();

    ScenarioResult result;

    // --- replication run -----------------------------------------------------
    if (cfg.single_model) {
        if (!cfg.rolling_instruments.empty())
            result.replication = run_rolling_replication(
                *cfg.single_model, env, *cfg.single_claim,
                cfg.rolling_instruments, cfg.sim);
        else
            result.replication =
                run_cds_replication(*cfg.single_model, env, *cfg.single_claim,
                                    cfg.cds_instruments, cfg.sim);
    } else {
        result.replication = run_ftd_replication(
            *cfg.multi_model, env, *cfg.ftd_claim, cfg.cds_instruments, cfg.sim);
    }

    if (cfg.write_convergence) {
        for (int steps : cfg.convergence_steps) {
            SimConfig sim = cfg.sim;
            sim.step_count = steps;
            ReplicationOutcome oc;
            if (cfg.single_model) {
                if (!cfg.rolling_instruments.empty())
                    oc = run_rolling_replication(*cfg.single_model, env,
                                                 *cfg.single_claim,
                                                 cfg.rolling_instruments, sim);
                else
                    oc = run_cds_replication(*cfg.single_model, env,
                                             *cfg.single_claim,
                                             cfg.cds_instruments, sim);
            } else {
                oc = run_ftd_replication(*cfg.multi_model, env, *cfg.ftd_claim,
                                         cfg.cds_instruments, sim);
            }
            result.convergence.emplace_back(steps, oc.report.terminal_rmse);
        }
    }

    // --- report files ---------------------------------------------------------
    std::filesystem::create_directories(cfg.out_dir);
    const std::filesystem::path dir(cfg.out_dir);

    // tables are written along the no-noise mean state path
    const int steps = cfg.sim.step_count;
    std::vector<Time> grid(static_cast<std::size_t>(steps) + 1);
    for (int j = 0; j <= steps; ++j)
        grid[static_cast<std::size_t>(j)] = cfg.sim.horizon * j / steps;
    auto mean_state = [&](Time t) {
        if (!cfg.single_model ||
            cfg.single_model->kind() != IntensityModel::Kind::square_root)
            return 0.0;
        const auto& p = cfg.single_model->square_root_params();
        return p.long_run_level + (p.initial_state - p.long_run_level) *
                                      std::exp(-p.mean_reversion * t);
    };

    if (cfg.write_price_table) {
        CsvWriter csv(dir / "price_table.csv", "t,ex_dividend,cumulative,spread");
        double divs = 0.0;  // discounted accrued dividends, no-default path
        for (int j = 0; j <= steps; ++j) {
            const Time t = grid[static_cast<std::size_t>(j)];
            const double x = mean_state(t);
            double ex = 0.0, spread = 0.0;
            if (cfg.single_model) {
                SingleNamePricer pricer(*cfg.single_model, env);
                ex = pricer.claim_ex_dividend_price(*cfg.single_claim, t, x,
                                                    false);
                if (cfg.spread_protection) {
                    Time mat = cfg.spread_maturity;
                    if (mat == 0.0 && !cfg.rolling_instruments.empty())
                        mat = active_contract(cfg.rolling_instruments.front(), t)
                                  .maturity;
                    spread = t < mat ? pricer.market_spread(
                                           cfg.spread_protection, mat, t, x)
                                     : 0.0;
                }
            } else {
                ex = ftd_price(*cfg.multi_model, env, *cfg.ftd_claim, t, false);
                spread = t < cfg.spread_maturity
                             ? ftd_market_spread(*cfg.multi_model, env,
                                                 cfg.ftd_spread_recoveries,
                                                 cfg.spread_maturity, t)
                             : 0.0;
            }
            if (j > 0) {
                const Time t0 = grid[static_cast<std::size_t>(j - 1)];
                const TimeFn rate = cfg.single_model
                                        ? cfg.single_claim->dividend_rate
                                        : cfg.ftd_claim->dividend_rate;
                divs += integrate(
                    [&](double u) { return rate(u) / env.savings(u); }, t0, t,
                    16);
            }
            const double cumulative = ex + env.savings(t) * divs;
            csv.row({t, ex, cumulative, spread});
        }
        csv.footer(cfg.sim.seed, hash);
        result.files_written.push_back((dir / "price_table.csv").string());
    }

    if (cfg.write_hedge_table) {
        const std::size_t ninst = cfg.single_model
                                      ? (cfg.rolling_instruments.empty()
                                             ? cfg.cds_instruments.size()
                                             : cfg.rolling_instruments.size())
                                      : cfg.cds_instruments.size();
        std::string header = "t,phi_0";
        for (std::size_t i = 1; i <= ninst; ++i)
            header += ",phi_" + std::to_string(i);
        header += ",condition_number";
        CsvWriter csv(dir / "hedge_table.csv", header);
        double divs = 0.0;
        for (int j = 0; j < steps; ++j) {
            const Time t = grid[static_cast<std::size_t>(j)];
            const double x = mean_state(t);
            HedgePlan plan;
            std::vector<double> prices(ninst, 0.0);
            double claim_value = 0.0;
            if (cfg.single_model) {
                SingleNamePricer pricer(*cfg.single_model, env);
                claim_value = pricer.claim_ex_dividend_price(*cfg.single_claim,
                                                             t, x, false);
                HedgeTarget target;
                const int d = cfg.single_model->driver_dim();
                target.jump_target =
                    cfg.single_claim->recovery(t, x) - claim_value;
                target.diffusion_target.assign(static_cast<std::size_t>(d), 0.0);
                if (d > 0) {
                    ClaimSlice slice(*cfg.single_model, env, *cfg.single_claim,
                                     t);
                    target.diffusion_target = repr_coefficient(
                        *cfg.single_model,
                        [&](Time, double s) { return slice.value(s); }, t, x);
                }
                std::vector<HedgeInstrument> insts;
                if (cfg.rolling_instruments.empty()) {
                    for (std::size_t i = 0; i < ninst; ++i) {
                        insts.push_back(build_instrument(
                            *cfg.single_model, env, cfg.cds_instruments[i], t,
                            x));
                        prices[i] = insts[i].cds.protection(t) -
                                    insts[i].jump_exposure;
                    }
                } else {
                    for (std::size_t i = 0; i < ninst; ++i) {
                        insts.push_back(
                            rolling_instrument(*cfg.single_model, env,
                                               cfg.rolling_instruments[i], t, x));
                        prices[i] = 0.0;  // entered at market
                    }
                }
                plan = solve_matching(insts, target);
            } else {
                claim_value =
                    ftd_price(*cfg.multi_model, env, *cfg.ftd_claim, t, false);
                plan = ftd_hedge_solve(*cfg.multi_model, env,
                                       cfg.cds_instruments, *cfg.ftd_claim, t);
                for (std::size_t i = 0; i < ninst; ++i)
                    prices[i] = basket_cds_price(*cfg.multi_model, env,
                                                 cfg.cds_instruments[i], t);
            }
            if (j > 0) {
                const Time t0 = grid[static_cast<std::size_t>(j - 1)];
                const TimeFn rate = cfg.single_model
                                        ? cfg.single_claim->dividend_rate
                                        : cfg.ftd_claim->dividend_rate;
                divs += integrate(
                    [&](double u) { return rate(u) / env.savings(u); }, t0, t,
                    16);
            }
            const double wealth = claim_value + env.savings(t) * divs;
            const double phi0 =
                bank_position(wealth, plan.positions, prices, env, t);
            std::vector<double> row{t, phi0};
            row.insert(row.end(), plan.positions.begin(), plan.positions.end());
            row.push_back(plan.condition_number);
            csv.row_vec(row);
        }
        csv.footer(cfg.sim.seed, hash);
        result.files_written.push_back((dir / "hedge_table.csv").string());
    }

    if (cfg.write_replication) {
        CsvWriter csv(dir / "replication_report.csv", "metric,value");
        const auto& r = result.replication.report;
        csv.row_named("initial_cumulative", result.replication.initial_cumulative);
        csv.row_named("paths", static_cast<double>(r.paths));
        csv.row_named("steps", static_cast<double>(cfg.sim.step_count));
        csv.row_named("terminal_mean", r.terminal_mean);
        csv.row_named("terminal_rmse", r.terminal_rmse);
        csv.row_named("terminal_max_abs", r.terminal_max_abs);
        csv.row_named("sup_q50", r.sup_q50);
        csv.row_named("sup_q90", r.sup_q90);
        csv.row_named("sup_q99", r.sup_q99);
        csv.row_named("sup_max", r.sup_max);
        csv.row_named("jump_rmse", r.jump_rmse);
        csv.row_named("defaulted_paths", static_cast<double>(r.defaulted_paths));
        csv.row_named("singular_nodes", static_cast<double>(r.singular_nodes));
        csv.row_named("aborted_paths", static_cast<double>(r.aborted_paths));
        csv.row_named("max_residual", r.max_residual);
        csv.footer(cfg.sim.seed, hash);
        result.files_written.push_back((dir / "replication_report.csv").string());
    }

    if (cfg.write_convergence) {
        CsvWriter csv(dir / "convergence.csv", "steps,terminal_rmse,ratio");
        double prev = 0.0;
        for (std::size_t i = 0; i < result.convergence.size(); ++i) {
            const auto& [s, rmse] = result.convergence[i];
            const double ratio = i > 0 && rmse > 0.0 ? prev / rmse : 0.0;
            csv.row({static_cast<double>(s), rmse, ratio});
            prev = rmse;
        }
        csv.footer(cfg.sim.seed, hash);
        result.files_written.push_back((dir / "convergence.csv").string());
    }

    return result;
}

} // namespace cdshedge
