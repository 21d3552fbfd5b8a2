#include <doctest.h>

#include <string>

#include "dcgrid/errors.hpp"
#include "dcgrid/scenario_io.hpp"

using namespace dcgrid;

namespace {

const std::string kScenarioDir = DCGRID_SCENARIO_DIR;
const std::string kDataDir = DCGRID_TEST_DATA_DIR;

/// Minimal valid document the error tests mutate.
std::string minimal_doc() {
    return R"({
      "network": {
        "nodes": { "sources": 2, "loads": 1 },
        "lines": [
          { "from": 1, "to": 3, "conductance_S": 1.0 },
          { "from": 2, "to": 3, "conductance_S": 1.0 }
        ],
        "comm_edges": [[1, 2]]
      },
      "sources": { "C": [1.0, 1.0], "controller": "consensus" },
      "loads": { "Istar_A": [-1.0], "Ystar_S": [0.04], "Pstar_W": [-35.0] },
      "initial": { "Vs": [50.0, 46.08] },
      "t_end_s": 1.0
    })";
}

void expect_config_error(const std::string& text, const std::string& needle) {
    try {
        (void)parse_scenario(text);
        FAIL("expected ConfigError mentioning ", needle);
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
}

}  // namespace

TEST_CASE("bundled tee scenario parses with the documented fields") {
    const Scenario s = load_scenario(kScenarioDir + "/t_network.json");
    CHECK(s.name == "t_network");
    CHECK(s.network.n_sources() == 2);
    CHECK(s.network.n_loads() == 1);
    CHECK(s.params.C(0) == 1.0);
    CHECK(s.controller == ControllerKind::consensus);
    CHECK(s.mode == SimulationMode::dae);
    CHECK(s.loads.istar()(0) == -1.0);
    CHECK(s.loads.ystar()(0) == 0.04);
    CHECK(s.loads.pstar()(0) == -35.0);
    CHECK(s.initial_vs(0) == 50.0);
    CHECK(s.initial_vs(1) == 46.08);
    CHECK(s.t_end == 1.0);
    CHECK(s.integrator.method == IntegrationMethod::rk45_adaptive);
    CHECK(s.integrator.rtol == 1e-8);
    CHECK(s.outputs.sample_interval == 5e-4);
    CHECK(s.outputs.csv_path == "t_network.csv");
    CHECK(s.events.empty());
    CHECK(s.last_event_end() == 0.0);
}

TEST_CASE("bundled ten-bus scenario carries the load-step events") {
    const Scenario s = load_scenario(kScenarioDir + "/belk10.json");
    CHECK(s.network.n_sources() == 3);
    CHECK(s.network.n_loads() == 7);
    REQUIRE(s.events.size() == 5);
    // Global node 6 is the third load bus (0-based index 2).
    CHECK(s.events[0].load_index == 2);
    CHECK(s.events[0].t_start == 0.0095);
    CHECK(s.events[0].t_end == 0.0105);
    CHECK(s.events[0].pstar_target == -35.0);
    CHECK(s.last_event_end() == 0.0105);

    // Ramp interpolation: before, halfway, after.
    CHECK(s.bank_at(0.0).pstar()(2) == 0.0);
    CHECK(s.bank_at(0.01).pstar()(2) == doctest::Approx(-17.5).epsilon(1e-12));
    CHECK(s.bank_at(0.02).pstar()(2) == -35.0);
    CHECK(s.final_bank().pstar().sum() == doctest::Approx(-245.0));
    // Loads untouched by events keep their initial draw.
    CHECK(s.bank_at(0.02).pstar()(0) == -35.0);
}

TEST_CASE("bundled capacitive scenario selects the terminal-capacitor mode") {
    const Scenario s = load_scenario(kScenarioDir + "/t_network_capacitive.json");
    CHECK(s.mode == SimulationMode::capacitive);
    REQUIRE(s.cl.size() == 1);
    CHECK(s.cl(0) == 1e-3);
    REQUIRE(s.initial_vl.size() == 1);
    CHECK(s.initial_vl(0) == 48.0);
}

TEST_CASE("scenario name falls back to the file stem") {
    const Scenario s = load_scenario(kDataDir + "/unnamed.json");
    CHECK(s.name == "unnamed");
}

TEST_CASE("minimal document gets the documented defaults") {
    const Scenario s = parse_scenario(minimal_doc());
    CHECK(s.name == "scenario");
    CHECK(s.mode == SimulationMode::dae);
    CHECK(s.integrator.method == IntegrationMethod::rk45_adaptive);
    CHECK(s.integrator.rtol == 1e-8);
    CHECK(s.integrator.atol == 1e-10);
    CHECK(s.outputs.sample_interval == 0.0);  // simulate() derives t_end / 2000
    CHECK(s.outputs.csv_path.empty());
    CHECK(s.initial_vl.size() == 0);
}

TEST_CASE("schema violations carry the JSON pointer of the offender") {
    SUBCASE("not JSON at all") {
        CHECK_THROWS_AS((void)parse_scenario("not json"), ConfigError);
    }
    SUBCASE("unknown top-level key") {
        std::string doc = minimal_doc();
        doc.insert(doc.rfind('}'), R"(, "extra_key": 1)");
        expect_config_error(doc, "/extra_key");
    }
    SUBCASE("missing t_end_s") {
        std::string doc = minimal_doc();
        const auto pos = doc.find(R"("t_end_s": 1.0)");
        doc.replace(pos, 14, R"("t_end_s_typo": 1.0)");
        expect_config_error(doc, "t_end_s");
    }
    SUBCASE("dapi without integral weights") {
        std::string doc = minimal_doc();
        const auto pos = doc.find("\"consensus\"");
        doc.replace(pos, 11, "\"dapi\"");
        expect_config_error(doc, "/sources/D");
    }
    SUBCASE("unknown controller") {
        std::string doc = minimal_doc();
        const auto pos = doc.find("\"consensus\"");
        doc.replace(pos, 11, "\"droop\"");
        expect_config_error(doc, "/sources/controller");
    }
    SUBCASE("capacitive mode without capacitances") {
        std::string doc = minimal_doc();
        doc.insert(doc.rfind('}'), R"(, "mode": "capacitive")");
        expect_config_error(doc, "/Cl_F");
    }
    SUBCASE("capacitances outside capacitive mode") {
        std::string doc = minimal_doc();
        doc.insert(doc.rfind('}'), R"(, "Cl_F": [1e-3])");
        expect_config_error(doc, "/Cl_F");
    }
    SUBCASE("event on a source bus") {
        std::string doc = minimal_doc();
        doc.insert(doc.rfind('}'),
                   R"(, "events": [{ "load_node": 1, "t_start_s": 0, "t_end_s": 0.1,
                       "target": { "Istar_A": 0, "Ystar_S": 0, "Pstar_W": -70 } }])");
        expect_config_error(doc, "/events/0/load_node");
    }
    SUBCASE("nonpositive sample interval") {
        std::string doc = minimal_doc();
        doc.insert(doc.rfind('}'), R"(, "outputs": { "sample_interval_s": 0.0 })");
        expect_config_error(doc, "sample_interval_s");
    }
    SUBCASE("load arrays disagree with the node counts") {
        std::string doc = minimal_doc();
        const auto pos = doc.find(R"("Istar_A": [-1.0])");
        doc.replace(pos, 17, R"("Istar_A": [-1.0, -1.0])");
        expect_config_error(doc, "/loads");
    }
    SUBCASE("unknown integrator method") {
        std::string doc = minimal_doc();
        doc.insert(doc.rfind('}'), R"(, "integrator": { "method": "euler" })");
        expect_config_error(doc, "/integrator/method");
    }
}

TEST_CASE("cross-field validation catches inconsistent scenarios") {
    Scenario s = parse_scenario(minimal_doc());
    SUBCASE("wrong C length") {
        s.params.C = Eigen::VectorXd::Ones(3);
        CHECK_THROWS_AS(s.validate(), ConfigError);
    }
    SUBCASE("nonpositive t_end") {
        s.t_end = 0.0;
        CHECK_THROWS_AS(s.validate(), ConfigError);
    }
    SUBCASE("voltage floor above initial voltages") {
        s.integrator.voltage_floor = 60.0;
        CHECK_THROWS_AS(s.validate(), ConfigError);
    }
    SUBCASE("overlapping events on one load") {
        LoadEvent a;
        a.load_index = 0;
        a.t_start = 0.1;
        a.t_end = 0.3;
        a.pstar_target = -50.0;
        LoadEvent b = a;
        b.t_start = 0.2;
        b.t_end = 0.4;
        s.events = {a, b};
        CHECK_THROWS_AS(s.validate(), ConfigError);
    }
    SUBCASE("event target with the wrong sign") {
        LoadEvent a;
        a.load_index = 0;
        a.t_start = 0.1;
        a.t_end = 0.3;
        a.pstar_target = 50.0;
        s.events = {a};
        CHECK_THROWS_AS(s.validate(), ConfigError);
    }
}

TEST_CASE("report JSON carries the documented keys") {
    ConditionReport cond;
    cond.ok = true;
    cond.min_eig_schur = 0.25;
    cond.ok_full = true;
    cond.min_eig_full = 0.125;
    const std::string text = to_json(cond);
    CHECK(text.find("\"ok\": true") != std::string::npos);
    CHECK(text.find("min_eig_schur") != std::string::npos);
    CHECK(text.find("\"formulations_agree\": true") != std::string::npos);

    SteadyStateReport steady;
    steady.steady = true;
    steady.sharing_residual = 1e-8;
    const std::string stext = to_json(steady);
    CHECK(stext.find("sharing_residual") != std::string::npos);
    CHECK(stext.find("\"steady\": true") != std::string::npos);
}
