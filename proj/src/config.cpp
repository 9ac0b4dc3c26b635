#include "dsmp/config.h"

#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include "json.hpp"

namespace dsmp {

using json = nlohmann::json;
using ordered = nlohmann::ordered_json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) { throw ConfigError(path + ": " + what); }

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

void expect_object(const json& j, const std::string& path) {
    if (!j.is_object()) fail(path.empty() ? "<root>" : path, "expected an object");
}

void allow_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
    expect_object(j, path);
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) fail(join(path, it.key()), "unknown key");
}

const json* child(const json& j, const char* key) {
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

void read(const json& j, const char* key, const std::string& path, double& out) {
    if (const json* v = child(j, key)) {
        if (!v->is_number()) fail(join(path, key), "expected a number");
        out = v->get<double>();
    }
}

template <typename Int>
void read_int(const json& j, const char* key, const std::string& path, Int& out) {
    if (const json* v = child(j, key)) {
        if (!v->is_number_integer()) fail(join(path, key), "expected an integer");
        const auto x = v->get<std::int64_t>();
        if (x < 0) fail(join(path, key), "expected a non-negative integer");
        out = static_cast<Int>(x);
    }
}

void read(const json& j, const char* key, const std::string& path, bool& out) {
    if (const json* v = child(j, key)) {
        if (!v->is_boolean()) fail(join(path, key), "expected true or false");
        out = v->get<bool>();
    }
}

void read(const json& j, const char* key, const std::string& path, std::string& out) {
    if (const json* v = child(j, key)) {
        if (!v->is_string()) fail(join(path, key), "expected a string");
        out = v->get<std::string>();
    }
}

void read(const json& j, const char* key, const std::string& path, Range& out) {
    if (const json* v = child(j, key)) {
        const std::string p = join(path, key);
        if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number() || !(*v)[1].is_number())
            fail(p, "expected [low, high]");
        out = {(*v)[0].get<double>(), (*v)[1].get<double>()};
        if (out.high < out.low) fail(p, "low exceeds high");
    }
}

void read(const json& j, const char* key, const std::string& path, optim::PiecewiseSchedule& out) {
    const json* v = child(j, key);
    if (!v) return;
    const std::string p = join(path, key);
    allow_keys(*v, p, {"boundaries", "values"});
    std::vector<std::int64_t> boundaries;
    std::vector<double> values;
    if (const json* b = child(*v, "boundaries")) {
        if (!b->is_array()) fail(join(p, "boundaries"), "expected an array of integers");
        for (const auto& e : *b) {
            if (!e.is_number_integer()) fail(join(p, "boundaries"), "expected an array of integers");
            boundaries.push_back(e.get<std::int64_t>());
        }
    }
    const json* vals = child(*v, "values");
    if (!vals || !vals->is_array()) fail(join(p, "values"), "expected an array of numbers");
    for (const auto& e : *vals) {
        if (!e.is_number()) fail(join(p, "values"), "expected an array of numbers");
        values.push_back(e.get<double>());
    }
    try {
        out = optim::PiecewiseSchedule(boundaries, values);
    } catch (const std::exception& e) {
        fail(p, e.what());
    }
}

SigmaProfile parse_profile(const std::string& s, const std::string& path) {
    if (s == "one_plus_sqrt") return SigmaProfile::OnePlusSqrt;
    if (s == "over_one_plus_t") return SigmaProfile::OverOnePlusT;
    if (s == "constant") return SigmaProfile::Constant;
    fail(path, "unknown sigma profile '" + s + "' (one_plus_sqrt, over_one_plus_t, constant)");
}

std::string profile_name(SigmaProfile p) {
    switch (p) {
        case SigmaProfile::OnePlusSqrt: return "one_plus_sqrt";
        case SigmaProfile::OverOnePlusT: return "over_one_plus_t";
        case SigmaProfile::Constant: return "constant";
    }
    return "constant";
}

MarketParams parse_market(const json& j, const std::string& path) {
    expect_object(j, path);
    std::string kind;
    read(j, "kind", path, kind);
    std::string profile;
    if (kind == "deterministic") {
        allow_keys(j, path, {"kind", "m", "rate_level", "rate_growth", "mu_base", "mu_amplitude", "mu_phase",
                             "sigma_profile", "sigma_diag", "sigma_off"});
        DeterministicParams p;
        read_int(j, "m", path, p.m);
        read(j, "rate_level", path, p.rate_level);
        read(j, "rate_growth", path, p.rate_growth);
        read(j, "mu_base", path, p.mu_base);
        read(j, "mu_amplitude", path, p.mu_amplitude);
        read(j, "mu_phase", path, p.mu_phase);
        profile = profile_name(p.sigma_profile);
        read(j, "sigma_profile", path, profile);
        p.sigma_profile = parse_profile(profile, join(path, "sigma_profile"));
        read(j, "sigma_diag", path, p.sigma_diag);
        read(j, "sigma_off", path, p.sigma_off);
        return p;
    }
    if (kind == "momentum") {
        allow_keys(j, path, {"kind", "m", "rate", "sigma_diag", "sigma_off", "mu_low", "mu_high", "s0", "trapezoid"});
        MomentumParams p;
        read_int(j, "m", path, p.m);
        read(j, "rate", path, p.rate);
        read(j, "sigma_diag", path, p.sigma_diag);
        read(j, "sigma_off", path, p.sigma_off);
        read(j, "mu_low", path, p.mu_low);
        read(j, "mu_high", path, p.mu_high);
        read(j, "s0", path, p.s0);
        read(j, "trapezoid", path, p.trapezoid);
        return p;
    }
    if (kind == "heston") {
        allow_keys(j, path,
                   {"kind", "rate", "risk_premium", "kappa", "theta_nu", "xi", "rho", "nu0", "truncation"});
        HestonParams p;
        read(j, "rate", path, p.rate);
        read(j, "risk_premium", path, p.risk_premium);
        read(j, "kappa", path, p.kappa);
        read(j, "theta_nu", path, p.theta_nu);
        read(j, "xi", path, p.xi);
        read(j, "rho", path, p.rho);
        read(j, "nu0", path, p.nu0);
        read(j, "truncation", path, p.truncation);
        return p;
    }
    if (kind == "vasicek") {
        allow_keys(j, path, {"kind", "m", "r0", "alpha", "beta", "gamma", "mu_base", "mu_amplitude", "mu_phase",
                             "sigma_profile", "sigma_diag", "sigma_off"});
        VasicekParams p;
        read_int(j, "m", path, p.m);
        read(j, "r0", path, p.r0);
        read(j, "alpha", path, p.alpha);
        read(j, "beta", path, p.beta);
        read(j, "gamma", path, p.gamma);
        read(j, "mu_base", path, p.mu_base);
        read(j, "mu_amplitude", path, p.mu_amplitude);
        read(j, "mu_phase", path, p.mu_phase);
        profile = profile_name(p.sigma_profile);
        read(j, "sigma_profile", path, profile);
        p.sigma_profile = parse_profile(profile, join(path, "sigma_profile"));
        read(j, "sigma_diag", path, p.sigma_diag);
        read(j, "sigma_off", path, p.sigma_off);
        return p;
    }
    fail(join(path, "kind"), "unknown market '" + kind + "' (deterministic, momentum, heston, vasicek)");
}

Utility parse_utility(const json& j, const std::string& path) {
    allow_keys(j, path, {"kind", "p"});
    std::string kind;
    read(j, "kind", path, kind);
    if (kind == "log") {
        if (child(j, "p")) fail(join(path, "p"), "log utility takes no parameter");
        return Utility::log();
    }
    if (kind == "power") {
        double p = 0.5;
        read(j, "p", path, p);
        try {
            return Utility::power(p);
        } catch (const std::exception& e) {
            fail(join(path, "p"), e.what());
        }
    }
    fail(join(path, "kind"), "unknown utility '" + kind + "' (log, power)");
}

ConstraintSpec parse_constraint(const json& j, const std::string& path) {
    allow_keys(j, path, {"kind", "kappa"});
    std::string kind;
    read(j, "kind", path, kind);
    ConstraintSpec c;
    if (kind == "full_space") {
        c.kind = ConstraintSet::Kind::FullSpace;
    } else if (kind == "non_negative") {
        c.kind = ConstraintSet::Kind::NonNegOrthant;
    } else if (kind == "floor_box") {
        c.kind = ConstraintSet::Kind::FloorBox;
        if (!child(j, "kappa")) fail(join(path, "kappa"), "required for floor_box");
        read(j, "kappa", path, c.kappa);
        if (!(c.kappa >= 0.0)) fail(join(path, "kappa"), "must be non-negative");
    } else {
        fail(join(path, "kind"), "unknown constraint '" + kind + "' (full_space, non_negative, floor_box)");
    }
    if (c.kind != ConstraintSet::Kind::FloorBox && child(j, "kappa"))
        fail(join(path, "kappa"), "only floor_box takes kappa");
    return c;
}

void parse_architecture(const json& j, const std::string& path, Architecture& a) {
    allow_keys(j, path, {"hidden", "bn_epsilon", "bn_momentum", "control_recurrent", "integrand_recurrent",
                         "integrand_extra_inputs"});
    if (const json* h = child(j, "hidden")) {
        if (!h->is_array() || h->empty()) fail(join(path, "hidden"), "expected a non-empty array of widths");
        a.hidden.clear();
        for (const auto& e : *h) {
            if (!e.is_number_integer() || e.get<std::int64_t>() <= 0)
                fail(join(path, "hidden"), "expected a non-empty array of positive widths");
            a.hidden.push_back(e.get<std::size_t>());
        }
    }
    read(j, "bn_epsilon", path, a.bn_epsilon);
    read(j, "bn_momentum", path, a.bn_momentum);
    read(j, "control_recurrent", path, a.control_recurrent);
    read(j, "integrand_recurrent", path, a.integrand_recurrent);
    read(j, "integrand_extra_inputs", path, a.integrand_extra_inputs);
    if (!(a.bn_epsilon > 0.0)) fail(join(path, "bn_epsilon"), "must be positive");
    if (!(a.bn_momentum >= 0.0 && a.bn_momentum < 1.0)) fail(join(path, "bn_momentum"), "must lie in [0, 1)");
}

void parse_training(const json& j, const std::string& path, TrainingSettings& t) {
    allow_keys(j, path, {"steps", "batch", "mc_size", "eval_every", "epochs", "mc_shard", "nan_limit", "adam"});
    read_int(j, "steps", path, t.steps);
    read_int(j, "batch", path, t.batch);
    read_int(j, "mc_size", path, t.mc_size);
    read_int(j, "eval_every", path, t.eval_every);
    read_int(j, "epochs", path, t.epochs);
    read_int(j, "mc_shard", path, t.mc_shard);
    read_int(j, "nan_limit", path, t.nan_limit);
    if (const json* a = child(j, "adam")) {
        const std::string p = join(path, "adam");
        allow_keys(*a, p, {"beta1", "beta2", "epsilon"});
        read(*a, "beta1", p, t.adam.beta1);
        read(*a, "beta2", p, t.adam.beta2);
        read(*a, "epsilon", p, t.adam.epsilon);
    }
    if (t.batch == 0) fail(join(path, "batch"), "must be positive");
    if (t.mc_size == 0) fail(join(path, "mc_size"), "must be positive");
    if (t.mc_shard == 0) fail(join(path, "mc_shard"), "must be positive");
}

ordered schedule_json(const optim::PiecewiseSchedule& s) {
    return ordered{{"boundaries", s.boundaries()}, {"values", s.values()}};
}

ordered range_json(const Range& r) { return ordered::array({r.low, r.high}); }

ordered architecture_json(const Architecture& a) {
    return ordered{{"hidden", a.hidden},
                   {"bn_epsilon", a.bn_epsilon},
                   {"bn_momentum", a.bn_momentum},
                   {"control_recurrent", a.control_recurrent},
                   {"integrand_recurrent", a.integrand_recurrent},
                   {"integrand_extra_inputs", a.integrand_extra_inputs}};
}

ordered market_json(const MarketParams& params) {
    return std::visit(
        [](const auto& p) -> ordered {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, DeterministicParams>) {
                return ordered{{"kind", "deterministic"},      {"m", p.m},
                               {"rate_level", p.rate_level},   {"rate_growth", p.rate_growth},
                               {"mu_base", p.mu_base},         {"mu_amplitude", p.mu_amplitude},
                               {"mu_phase", p.mu_phase},       {"sigma_profile", profile_name(p.sigma_profile)},
                               {"sigma_diag", p.sigma_diag},   {"sigma_off", p.sigma_off}};
            } else if constexpr (std::is_same_v<P, MomentumParams>) {
                return ordered{{"kind", "momentum"},         {"m", p.m},           {"rate", p.rate},
                               {"sigma_diag", p.sigma_diag}, {"sigma_off", p.sigma_off}, {"mu_low", p.mu_low},
                               {"mu_high", p.mu_high},       {"s0", p.s0},         {"trapezoid", p.trapezoid}};
            } else if constexpr (std::is_same_v<P, HestonParams>) {
                return ordered{{"kind", "heston"}, {"rate", p.rate},   {"risk_premium", p.risk_premium},
                               {"kappa", p.kappa}, {"theta_nu", p.theta_nu}, {"xi", p.xi},
                               {"rho", p.rho},     {"nu0", p.nu0},     {"truncation", p.truncation}};
            } else {
                return ordered{{"kind", "vasicek"},        {"m", p.m},
                               {"r0", p.r0},               {"alpha", p.alpha},
                               {"beta", p.beta},           {"gamma", p.gamma},
                               {"mu_base", p.mu_base},     {"mu_amplitude", p.mu_amplitude},
                               {"mu_phase", p.mu_phase},   {"sigma_profile", profile_name(p.sigma_profile)},
                               {"sigma_diag", p.sigma_diag}, {"sigma_off", p.sigma_off}};
            }
        },
        params);
}

std::size_t traded_of(const MarketParams& params) {
    return std::visit(
        [](const auto& p) -> std::size_t {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, HestonParams>) return 1;
            else return p.m;
        },
        params);
}

}  // namespace

std::string to_string(SolverKind kind) {
    switch (kind) {
        case SolverKind::Primal: return "primal";
        case SolverKind::Dual: return "dual";
        case SolverKind::Both: return "both";
    }
    return "primal";
}

ExperimentConfig parse_config(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("<root>: malformed JSON: ") + e.what());
    }
    allow_keys(root, "", {"name", "solver", "seed", "problem", "training", "primal", "dual", "oracle", "snapshots"});

    ExperimentConfig c;
    read(root, "name", "", c.name);
    std::string solver = to_string(c.solver);
    read(root, "solver", "", solver);
    if (solver == "primal") c.solver = SolverKind::Primal;
    else if (solver == "dual") c.solver = SolverKind::Dual;
    else if (solver == "both") c.solver = SolverKind::Both;
    else fail("solver", "expected primal, dual or both");
    read_int(root, "seed", "", c.training.seed);
    read(root, "snapshots", "", c.snapshots);

    const json* problem = child(root, "problem");
    if (!problem) fail("problem", "required");
    allow_keys(*problem, "problem", {"market", "utility", "constraint", "x0", "T", "N"});
    if (!child(*problem, "market")) fail("problem.market", "required");
    c.market = parse_market(problem->at("market"), "problem.market");
    if (const json* u = child(*problem, "utility")) c.utility = parse_utility(*u, "problem.utility");
    if (const json* k = child(*problem, "constraint")) c.constraint = parse_constraint(*k, "problem.constraint");
    read(*problem, "x0", "problem", c.x0);
    read(*problem, "T", "problem", c.T);
    read_int(*problem, "N", "problem", c.N);

    if (const json* t = child(root, "training")) parse_training(*t, "training", c.training);

    if (const json* p = child(root, "primal")) {
        allow_keys(*p, "primal", {"architecture", "p0_init", "pi0_init", "q0_init", "bsde_lr", "control_lr"});
        if (const json* a = child(*p, "architecture")) parse_architecture(*a, "primal.architecture", c.primal.arch);
        read(*p, "p0_init", "primal", c.primal.p0_init);
        read(*p, "pi0_init", "primal", c.primal.pi0_init);
        read(*p, "q0_init", "primal", c.primal.q0_init);
        read(*p, "bsde_lr", "primal", c.primal.bsde_lr);
        read(*p, "control_lr", "primal", c.primal.control_lr);
    }
    if (const json* d = child(root, "dual")) {
        allow_keys(*d, "dual", {"architecture", "y_init", "v0_init", "q0_init", "bsde_lr", "control_lr", "y_lr",
                                "integrand_uses_control"});
        if (const json* a = child(*d, "architecture")) parse_architecture(*a, "dual.architecture", c.dual.arch);
        read(*d, "y_init", "dual", c.dual.y_init);
        read(*d, "v0_init", "dual", c.dual.v0_init);
        read(*d, "q0_init", "dual", c.dual.q0_init);
        read(*d, "bsde_lr", "dual", c.dual.bsde_lr);
        read(*d, "control_lr", "dual", c.dual.control_lr);
        read(*d, "y_lr", "dual", c.dual.y_lr);
        read(*d, "integrand_uses_control", "dual", c.dual.integrand_uses_control);
    }
    if (const json* o = child(root, "oracle")) {
        allow_keys(*o, "oracle", {"enabled", "grid", "tolerance", "midpoint"});
        read(*o, "enabled", "oracle", c.oracle.enabled);
        read_int(*o, "grid", "oracle", c.oracle.grid);
        read(*o, "tolerance", "oracle", c.oracle.tolerance);
        read(*o, "midpoint", "oracle", c.oracle.midpoint);
    }
    c.primal.training = c.training;
    c.dual.training = c.training;
    validate_config(c);
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open config file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& c) {
    ordered utility{{"kind", c.utility.kind() == Utility::Kind::Log ? "log" : "power"}};
    if (c.utility.kind() == Utility::Kind::Power) utility["p"] = c.utility.p();
    ordered constraint;
    switch (c.constraint.kind) {
        case ConstraintSet::Kind::FullSpace: constraint["kind"] = "full_space"; break;
        case ConstraintSet::Kind::NonNegOrthant: constraint["kind"] = "non_negative"; break;
        case ConstraintSet::Kind::FloorBox:
            constraint["kind"] = "floor_box";
            constraint["kappa"] = c.constraint.kappa;
            break;
    }
    const TrainingSettings& t = c.training;
    ordered root;
    root["name"] = c.name;
    root["solver"] = to_string(c.solver);
    root["seed"] = t.seed;
    root["snapshots"] = c.snapshots;
    root["problem"] = ordered{{"market", market_json(c.market)}, {"utility", utility}, {"constraint", constraint},
                              {"x0", c.x0},  {"T", c.T},  {"N", c.N}};
    root["training"] = ordered{{"steps", t.steps},           {"batch", t.batch},
                               {"mc_size", t.mc_size},       {"eval_every", t.eval_every},
                               {"epochs", t.epochs},         {"mc_shard", t.mc_shard},
                               {"nan_limit", t.nan_limit},
                               {"adam", ordered{{"beta1", t.adam.beta1}, {"beta2", t.adam.beta2},
                                                {"epsilon", t.adam.epsilon}}}};
    root["primal"] = ordered{{"architecture", architecture_json(c.primal.arch)},
                             {"p0_init", range_json(c.primal.p0_init)},
                             {"pi0_init", range_json(c.primal.pi0_init)},
                             {"q0_init", range_json(c.primal.q0_init)},
                             {"bsde_lr", schedule_json(c.primal.bsde_lr)},
                             {"control_lr", schedule_json(c.primal.control_lr)}};
    root["dual"] = ordered{{"architecture", architecture_json(c.dual.arch)},
                           {"y_init", range_json(c.dual.y_init)},
                           {"v0_init", range_json(c.dual.v0_init)},
                           {"q0_init", range_json(c.dual.q0_init)},
                           {"bsde_lr", schedule_json(c.dual.bsde_lr)},
                           {"control_lr", schedule_json(c.dual.control_lr)},
                           {"y_lr", schedule_json(c.dual.y_lr)},
                           {"integrand_uses_control", c.dual.integrand_uses_control}};
    root["oracle"] = ordered{{"enabled", c.oracle.enabled},
                             {"grid", c.oracle.grid},
                             {"tolerance", c.oracle.tolerance},
                             {"midpoint", c.oracle.midpoint}};
    return root.dump(2) + "\n";
}

void validate_config(const ExperimentConfig& c) {
    if (!(c.x0 > 0.0)) fail("problem.x0", "must be positive");
    if (!(c.T > 0.0)) fail("problem.T", "must be positive");
    if (c.N < 2) fail("problem.N", "needs at least two time steps");
    if (traded_of(c.market) == 0) fail("problem.market.m", "needs at least one stock");
    if (c.training.epochs > 0 && c.training.steps % static_cast<std::int64_t>(c.training.epochs) != 0)
        fail("training.epochs", "must divide training.steps");
    if (std::holds_alternative<HestonParams>(c.market) && c.constraint.kind != ConstraintSet::Kind::FullSpace)
        fail("problem.constraint", "the Heston market is only supported unconstrained");
    try {
        build_market(c.market);
    } catch (const std::invalid_argument& e) {
        fail("problem.market", e.what());
    }
    const bool extra_ok = !std::holds_alternative<DeterministicParams>(c.market) &&
                          !std::holds_alternative<MomentumParams>(c.market);
    if (c.primal.arch.integrand_extra_inputs && !extra_ok)
        fail("primal.architecture.integrand_extra_inputs", "market has no extra inputs");
    if (c.dual.arch.integrand_extra_inputs && !extra_ok)
        fail("dual.architecture.integrand_extra_inputs", "market has no extra inputs");
    if (!(c.dual.y_init.low > 0.0)) fail("dual.y_init", "must be positive");
    if (c.oracle.enabled) {
        if (c.utility.kind() != Utility::Kind::Log) fail("oracle.enabled", "the oracle needs log utility");
        if (!std::holds_alternative<DeterministicParams>(c.market))
            fail("oracle.enabled", "the oracle needs a deterministic market");
        if (c.oracle.grid == 0) fail("oracle.grid", "must be positive");
        if (!(c.oracle.tolerance > 0.0)) fail("oracle.tolerance", "must be positive");
    }
}

std::shared_ptr<const MarketModel> build_market(const MarketParams& params) {
    return std::visit(
        [](const auto& p) -> std::shared_ptr<const MarketModel> {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, DeterministicParams>) return std::make_shared<DeterministicMarket>(p);
            else if constexpr (std::is_same_v<P, MomentumParams>) return std::make_shared<MomentumMarket>(p);
            else if constexpr (std::is_same_v<P, HestonParams>) return std::make_shared<HestonMarket>(p);
            else return std::make_shared<VasicekMarket>(p);
        },
        params);
}

namespace {

ConstraintSet build_constraints(const ConstraintSpec& spec, const MarketModel& market) {
    const std::size_t m = market.traded();
    ConstraintSet K = ConstraintSet::full_space(m);
    switch (spec.kind) {
        case ConstraintSet::Kind::FullSpace: break;
        case ConstraintSet::Kind::NonNegOrthant: K = ConstraintSet::non_negative(m); break;
        case ConstraintSet::Kind::FloorBox: K = ConstraintSet::floor_box(spec.kappa, m); break;
    }
    const std::size_t extra = market.noise_dim() - m;
    return extra > 0 ? K.zero_padded(extra) : K;
}

}  // namespace

Problem build_problem(const ExperimentConfig& c) {
    Problem p;
    p.market = build_market(c.market);
    p.utility = c.utility;
    p.constraints = build_constraints(c.constraint, *p.market);
    p.x0 = c.x0;
    p.T = c.T;
    p.N = c.N;
    p.validate();
    return p;
}

OracleConfig build_oracle(const ExperimentConfig& c) {
    OracleConfig o;
    o.market = build_market(c.market);
    o.constraints = build_constraints(c.constraint, *o.market);
    o.x0 = c.x0;
    o.T = c.T;
    o.grid = c.oracle.grid;
    o.tolerance = c.oracle.tolerance;
    o.midpoint = c.oracle.midpoint;
    o.workers = default_workers();
    return o;
}

}  // namespace dsmp
