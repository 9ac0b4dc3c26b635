#include <filesystem>
#include <string>

#include "doctest.h"
#include "dsmp/config.h"
#include "json.hpp"

using namespace dsmp;
using nlohmann::json;

namespace {

const std::string kDir = DSMP_CONFIG_DIR;

json base() {
    return json::parse(R"({
      "name": "t", "solver": "primal", "seed": 3,
      "problem": {"market": {"kind": "deterministic", "m": 2}, "utility": {"kind": "log"},
                  "constraint": {"kind": "floor_box", "kappa": 0.1}, "x0": 1.0, "T": 0.5, "N": 4},
      "training": {"steps": 20, "batch": 8, "mc_size": 100, "eval_every": 10}
    })");
}

std::string error_of(const json& j) {
    try {
        parse_config(j.dump());
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

}  // namespace

TEST_CASE("every bundled config loads and round-trips") {
    std::size_t count = 0;
    for (const auto& entry : std::filesystem::directory_iterator(kDir)) {
        if (entry.path().extension() != ".json") continue;
        INFO(entry.path().string());
        const auto cfg = load_config(entry.path().string());
        const auto again = parse_config(serialize_config(cfg));
        CHECK(again == cfg);
        CHECK(serialize_config(again) == serialize_config(cfg));
        CHECK_NOTHROW(build_problem(cfg));
        ++count;
    }
    CHECK(count >= 10);
}

TEST_CASE("minimal config gets defaults and copies shared training settings") {
    auto cfg = parse_config(base().dump());
    CHECK(cfg.name == "t");
    CHECK(cfg.solver == SolverKind::Primal);
    CHECK(cfg.training.seed == 3);
    CHECK(cfg.primal.training.seed == 3);
    CHECK(cfg.primal.training.steps == 20);
    CHECK(cfg.dual.training.batch == 8);
    auto prob = build_problem(cfg);
    CHECK(prob.constraints.kind() == ConstraintSet::Kind::FloorBox);
    CHECK(prob.constraints.kappa() == 0.1);
    CHECK(prob.N == 4);
}

TEST_CASE("Example 4.1 config matches the described setup") {
    auto cfg = load_config(kDir + "/example_4_1.json");
    CHECK(cfg.solver == SolverKind::Both);
    auto prob = build_problem(cfg);
    CHECK(prob.traded() == 30);
    CHECK(prob.x0 == 10.0);
    CHECK(prob.T == 0.5);
    CHECK(prob.N == 10);
    CHECK(prob.constraints.kappa() == doctest::Approx(1.0 / 30.0));
    CHECK(cfg.training.steps == 10000);
    CHECK(cfg.training.batch == 64);
    CHECK(cfg.training.mc_size == 100000);
    CHECK(cfg.training.eval_every == 200);
    CHECK(cfg.oracle.enabled);
}

TEST_CASE("Vasicek config pads the constraint with the untraded coordinate") {
    auto prob = build_problem(load_config(kDir + "/example_4_9.json"));
    CHECK(prob.dim() == 31);
    CHECK(prob.constraints.padding() == 1);
}

TEST_CASE("unknown keys are reported with their path") {
    auto j = base();
    j["problem"]["market"]["colour"] = 1;
    CHECK(starts_with(error_of(j), "problem.market.colour: unknown key"));
    j = base();
    j["trainig"] = json::object();
    CHECK(starts_with(error_of(j), "trainig: unknown key"));
}

TEST_CASE("type and range errors name the offending field") {
    auto j = base();
    j["training"]["batch"] = "many";
    CHECK(starts_with(error_of(j), "training.batch:"));
    j = base();
    j["training"]["batch"] = 0;
    CHECK(starts_with(error_of(j), "training.batch:"));
    j = base();
    j["problem"]["N"] = 1;
    CHECK(starts_with(error_of(j), "problem.N:"));
    j = base();
    j["problem"]["x0"] = -1.0;
    CHECK(starts_with(error_of(j), "problem.x0:"));
    j = base();
    j["problem"]["constraint"] = {{"kind", "floor_box"}};
    CHECK(starts_with(error_of(j), "problem.constraint.kappa:"));
    j = base();
    j["problem"]["market"]["kind"] = "crypto";
    CHECK(starts_with(error_of(j), "problem.market.kind:"));
    j = base();
    j["primal"]["bsde_lr"] = {{"boundaries", {5, 1}}, {"values", {1.0, 2.0, 3.0}}};
    CHECK(starts_with(error_of(j), "primal.bsde_lr:"));
    j = base();
    j["solver"] = "neither";
    CHECK(starts_with(error_of(j), "solver:"));
    CHECK(starts_with(error_of(json::parse("[1, 2]")), "<root>:"));
    try {
        parse_config("{ not json");
        FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
        CHECK(starts_with(e.what(), "<root>: malformed JSON"));
    }
}

TEST_CASE("cross-field validation") {
    auto j = base();
    j["training"]["epochs"] = 3;
    CHECK(starts_with(error_of(j), "training.epochs:"));
    j = base();
    j["problem"]["market"] = {{"kind", "heston"}};
    CHECK(starts_with(error_of(j), "problem.constraint:"));
    j["problem"]["constraint"] = {{"kind", "full_space"}};
    CHECK(error_of(j).empty());
    j["problem"]["market"]["xi"] = 5.0;
    CHECK(starts_with(error_of(j), "problem.market:"));
    j = base();
    j["oracle"] = {{"enabled", true}};
    j["problem"]["utility"] = {{"kind", "power"}, {"p", 0.5}};
    CHECK(starts_with(error_of(j), "oracle.enabled:"));
    j = base();
    j["problem"]["utility"] = {{"kind", "power"}, {"p", 1.5}};
    CHECK(starts_with(error_of(j), "problem.utility.p:"));
    j = base();
    j["primal"]["architecture"] = {{"integrand_extra_inputs", true}};
    CHECK(starts_with(error_of(j), "primal.architecture.integrand_extra_inputs:"));
}

TEST_CASE("missing files raise a config error") {
    CHECK_THROWS_AS(load_config("/nonexistent/x.json"), ConfigError);
}
