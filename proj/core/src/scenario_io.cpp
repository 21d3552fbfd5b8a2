#include "dcgrid/scenario_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dcgrid/errors.hpp"

namespace dcgrid {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& pointer, const std::string& what) {
    throw ConfigError("scenario schema violation at " +
                      (pointer.empty() ? std::string("/") : pointer) + ": " + what);
}

void check_keys(const json& obj, const std::string& ptr,
                std::initializer_list<const char*> required,
                std::initializer_list<const char*> optional) {
    if (!obj.is_object()) fail(ptr, "expected an object");
    for (const char* key : required) {
        if (!obj.contains(key)) fail(ptr + "/" + key, "missing required key");
    }
    for (const auto& item : obj.items()) {
        const auto known = [&](std::initializer_list<const char*> names) {
            return std::any_of(names.begin(), names.end(),
                               [&](const char* n) { return item.key() == n; });
        };
        if (!known(required) && !known(optional)) fail(ptr + "/" + item.key(), "unknown key");
    }
}

double as_number(const json& v, const std::string& ptr) {
    if (!v.is_number()) fail(ptr, "expected a number");
    return v.get<double>();
}

int as_int(const json& v, const std::string& ptr) {
    if (!v.is_number_integer()) fail(ptr, "expected an integer");
    return v.get<int>();
}

std::string as_string(const json& v, const std::string& ptr) {
    if (!v.is_string()) fail(ptr, "expected a string");
    return v.get<std::string>();
}

Eigen::VectorXd as_vector(const json& v, const std::string& ptr) {
    if (!v.is_array()) fail(ptr, "expected an array of numbers");
    Eigen::VectorXd out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[static_cast<Eigen::Index>(i)] = as_number(v[i], ptr + "/" + std::to_string(i));
    }
    return out;
}

MicrogridNetwork parse_network(const json& j, const std::string& ptr) {
    check_keys(j, ptr, {"nodes", "lines", "comm_edges"}, {});
    check_keys(j["nodes"], ptr + "/nodes", {"sources", "loads"}, {});
    const int ns = as_int(j["nodes"]["sources"], ptr + "/nodes/sources");
    const int nl = as_int(j["nodes"]["loads"], ptr + "/nodes/loads");

    const json& jlines = j["lines"];
    if (!jlines.is_array()) fail(ptr + "/lines", "expected an array of line objects");
    std::vector<Line> lines;
    for (std::size_t i = 0; i < jlines.size(); ++i) {
        const std::string lptr = ptr + "/lines/" + std::to_string(i);
        check_keys(jlines[i], lptr, {"from", "to", "conductance_S"}, {});
        Line line;
        line.from = as_int(jlines[i]["from"], lptr + "/from");
        line.to = as_int(jlines[i]["to"], lptr + "/to");
        line.conductance = as_number(jlines[i]["conductance_S"], lptr + "/conductance_S");
        lines.push_back(line);
    }

    const json& jcomm = j["comm_edges"];
    if (!jcomm.is_array()) fail(ptr + "/comm_edges", "expected an array of [i, j] pairs");
    std::vector<std::pair<int, int>> comm;
    for (std::size_t i = 0; i < jcomm.size(); ++i) {
        const std::string eptr = ptr + "/comm_edges/" + std::to_string(i);
        if (!jcomm[i].is_array() || jcomm[i].size() != 2) fail(eptr, "expected an [i, j] pair");
        comm.emplace_back(as_int(jcomm[i][0], eptr + "/0"), as_int(jcomm[i][1], eptr + "/1"));
    }

    try {
        return MicrogridNetwork(ns, nl, std::move(lines), std::move(comm));
    } catch (const ConfigError& e) {
        fail(ptr, e.what());
    }
}

ZipLoadBank parse_bank(const json& j, const std::string& ptr) {
    check_keys(j, ptr, {"Istar_A", "Ystar_S", "Pstar_W"}, {});
    try {
        return ZipLoadBank(as_vector(j["Istar_A"], ptr + "/Istar_A"),
                           as_vector(j["Ystar_S"], ptr + "/Ystar_S"),
                           as_vector(j["Pstar_W"], ptr + "/Pstar_W"));
    } catch (const ConfigError& e) {
        fail(ptr, e.what());
    }
}

ControllerKind parse_controller(const json& v, const std::string& ptr) {
    const std::string name = as_string(v, ptr);
    if (name == "consensus") return ControllerKind::consensus;
    if (name == "dapi") return ControllerKind::dapi;
    if (name == "constant_voltage") return ControllerKind::constant_voltage;
    fail(ptr, "unknown controller '" + name +
                  "' (expected consensus, dapi, or constant_voltage)");
}

LoadEvent parse_event(const json& j, const std::string& ptr, int n_sources, int n_loads) {
    check_keys(j, ptr, {"load_node", "t_start_s", "t_end_s", "target"}, {});
    LoadEvent ev;
    const int node = as_int(j["load_node"], ptr + "/load_node");
    if (node <= n_sources || node > n_sources + n_loads) {
        fail(ptr + "/load_node",
             "node " + std::to_string(node) + " is not a load bus (loads are " +
                 std::to_string(n_sources + 1) + ".." + std::to_string(n_sources + n_loads) +
                 ")");
    }
    ev.load_index = node - n_sources - 1;
    ev.t_start = as_number(j["t_start_s"], ptr + "/t_start_s");
    ev.t_end = as_number(j["t_end_s"], ptr + "/t_end_s");
    const std::string tptr = ptr + "/target";
    check_keys(j["target"], tptr, {"Istar_A", "Ystar_S", "Pstar_W"}, {});
    ev.istar_target = as_number(j["target"]["Istar_A"], tptr + "/Istar_A");
    ev.ystar_target = as_number(j["target"]["Ystar_S"], tptr + "/Ystar_S");
    ev.pstar_target = as_number(j["target"]["Pstar_W"], tptr + "/Pstar_W");
    return ev;
}

void parse_integrator(const json& j, const std::string& ptr, IntegratorSettings& settings) {
    check_keys(j, ptr, {},
               {"method", "rtol", "atol", "dt_s", "voltage_floor_V", "newton_tol_A",
                "max_newton_iter"});
    if (j.contains("method")) {
        const std::string m = as_string(j["method"], ptr + "/method");
        if (m == "rk4_fixed") {
            settings.method = IntegrationMethod::rk4_fixed;
        } else if (m == "rk45_adaptive") {
            settings.method = IntegrationMethod::rk45_adaptive;
        } else {
            fail(ptr + "/method",
                 "unknown method '" + m + "' (expected rk4_fixed or rk45_adaptive)");
        }
    }
    if (j.contains("rtol")) settings.rtol = as_number(j["rtol"], ptr + "/rtol");
    if (j.contains("atol")) settings.atol = as_number(j["atol"], ptr + "/atol");
    if (j.contains("dt_s")) settings.dt = as_number(j["dt_s"], ptr + "/dt_s");
    if (j.contains("voltage_floor_V")) {
        settings.voltage_floor = as_number(j["voltage_floor_V"], ptr + "/voltage_floor_V");
    }
    if (j.contains("newton_tol_A")) {
        settings.newton_tol = as_number(j["newton_tol_A"], ptr + "/newton_tol_A");
    }
    if (j.contains("max_newton_iter")) {
        settings.max_newton_iter = as_int(j["max_newton_iter"], ptr + "/max_newton_iter");
    }
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
    return {v.data(), v.data() + v.size()};
}

json condition_to_json(const ConditionReport& r) {
    json j;
    j["ok"] = r.ok;
    j["min_eig_schur"] = r.min_eig_schur;
    j["ok_full"] = r.ok_full;
    j["min_eig_full"] = r.min_eig_full;
    j["formulations_agree"] = r.ok == r.ok_full;
    return j;
}

}  // namespace

Scenario parse_scenario(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("scenario is not valid JSON: ") + e.what());
    }

    check_keys(doc, "",
               {"network", "sources", "loads", "initial", "t_end_s"},
               {"name", "mode", "Cl_F", "events", "integrator", "outputs"});

    MicrogridNetwork network = parse_network(doc["network"], "/network");
    ZipLoadBank bank = parse_bank(doc["loads"], "/loads");
    if (bank.size() != network.n_loads()) {
        fail("/loads", "arrays have length " + std::to_string(bank.size()) + " but the network has " +
                           std::to_string(network.n_loads()) + " load buses");
    }
    Scenario scenario(std::move(network), std::move(bank));

    const json& jsrc = doc["sources"];
    check_keys(jsrc, "/sources", {"C", "controller"}, {"D"});
    scenario.params.C = as_vector(jsrc["C"], "/sources/C");
    scenario.controller = parse_controller(jsrc["controller"], "/sources/controller");
    if (jsrc.contains("D")) scenario.params.D = as_vector(jsrc["D"], "/sources/D");
    if (scenario.controller == ControllerKind::dapi && scenario.params.D.size() == 0) {
        fail("/sources/D", "the dapi controller requires the integral weights D");
    }

    const json& jinit = doc["initial"];
    check_keys(jinit, "/initial", {"Vs"}, {"Vl"});
    scenario.initial_vs = as_vector(jinit["Vs"], "/initial/Vs");
    if (jinit.contains("Vl")) scenario.initial_vl = as_vector(jinit["Vl"], "/initial/Vl");

    scenario.t_end = as_number(doc["t_end_s"], "/t_end_s");

    if (doc.contains("mode")) {
        const std::string mode = as_string(doc["mode"], "/mode");
        if (mode == "dae") {
            scenario.mode = SimulationMode::dae;
        } else if (mode == "capacitive") {
            scenario.mode = SimulationMode::capacitive;
        } else {
            fail("/mode", "unknown mode '" + mode + "' (expected dae or capacitive)");
        }
    }
    if (scenario.mode == SimulationMode::capacitive) {
        if (!doc.contains("Cl_F")) fail("/Cl_F", "capacitive mode requires load capacitances");
        scenario.cl = as_vector(doc["Cl_F"], "/Cl_F");
    } else if (doc.contains("Cl_F")) {
        fail("/Cl_F", "load capacitances are only meaningful in capacitive mode");
    }

    if (doc.contains("events")) {
        const json& jev = doc["events"];
        if (!jev.is_array()) fail("/events", "expected an array of event objects");
        for (std::size_t i = 0; i < jev.size(); ++i) {
            scenario.events.push_back(parse_event(jev[i], "/events/" + std::to_string(i),
                                                  scenario.network.n_sources(),
                                                  scenario.network.n_loads()));
        }
        std::stable_sort(scenario.events.begin(), scenario.events.end(),
                         [](const LoadEvent& a, const LoadEvent& b) { return a.t_start < b.t_start; });
    }

    if (doc.contains("integrator")) {
        parse_integrator(doc["integrator"], "/integrator", scenario.integrator);
    }

    if (doc.contains("outputs")) {
        const json& jout = doc["outputs"];
        check_keys(jout, "/outputs", {}, {"csv_path", "sample_interval_s"});
        if (jout.contains("csv_path")) {
            scenario.outputs.csv_path = as_string(jout["csv_path"], "/outputs/csv_path");
        }
        if (jout.contains("sample_interval_s")) {
            scenario.outputs.sample_interval =
                as_number(jout["sample_interval_s"], "/outputs/sample_interval_s");
            if (!(scenario.outputs.sample_interval > 0.0)) {
                fail("/outputs/sample_interval_s", "must be > 0");
            }
        }
    }

    if (doc.contains("name")) scenario.name = as_string(doc["name"], "/name");

    scenario.validate();
    return scenario;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    Scenario scenario = parse_scenario(buffer.str());
    if (scenario.name == "scenario") {
        scenario.name = std::filesystem::path(path).stem().string();
    }
    return scenario;
}

std::string to_json(const ConditionReport& report) {
    return condition_to_json(report).dump(2) + "\n";
}

std::string to_json(const EquilibriumReport& report) {
    json j;
    j["converged"] = report.converged;
    j["iterations"] = report.iterations;
    j["Vs_V"] = to_std(report.vs);
    j["Vl_V"] = to_std(report.vl);
    j["p_star"] = report.p_star;
    j["source_power_W"] = to_std(report.source_power);
    j["power_residual_W"] = report.power_residual;
    j["current_residual_A"] = report.current_residual;
    j["condition"] = condition_to_json(report.condition);
    return j.dump(2) + "\n";
}

std::string to_json(const DecreaseAuditReport& report) {
    json j;
    j["samples_audited"] = report.samples_audited;
    j["max_energy_increase"] = report.max_energy_increase;
    j["max_rate"] = report.max_rate;
    j["max_fd_rate_gap"] = report.max_fd_rate_gap;
    j["drift_tolerance"] = report.drift_tolerance;
    j["rate_margin"] = report.rate_margin;
    j["energy_nonincreasing"] = report.energy_nonincreasing;
    j["rate_nonpositive"] = report.rate_nonpositive;
    return j.dump(2) + "\n";
}

std::string to_json(const SteadyStateReport& report) {
    json j;
    j["window_s"] = report.window;
    j["max_dvs_dt_V_per_s"] = report.max_dvs_dt;
    j["sharing_residual"] = report.sharing_residual;
    j["sharing_mean"] = report.sharing_mean;
    j["geomean_drift"] = report.geomean_drift;
    j["steady"] = report.steady;
    return j.dump(2) + "\n";
}

}  // namespace dcgrid
