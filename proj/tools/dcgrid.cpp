// Command-line front end: scenario-driven simulation, equilibrium analysis,
// stability-condition checks, Lyapunov audits, and controller comparison.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "dcgrid/analysis.hpp"
#include "dcgrid/errors.hpp"
#include "dcgrid/scenario_io.hpp"
#include "dcgrid/simulator.hpp"

namespace fs = std::filesystem;
using namespace dcgrid;

namespace {

ControllerKind controller_from_name(const std::string& name) {
    if (name == "consensus") return ControllerKind::consensus;
    if (name == "dapi") return ControllerKind::dapi;
    if (name == "constant_voltage") return ControllerKind::constant_voltage;
    throw ConfigError("unknown controller '" + name +
                      "' (expected consensus, dapi, or constant_voltage)");
}

fs::path csv_destination(const Scenario& scenario, const fs::path& output_dir) {
    const std::string name =
        scenario.outputs.csv_path.empty() ? scenario.name + ".csv" : scenario.outputs.csv_path;
    return output_dir / name;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open output file: " + path.string());
    out << text;
}

/// Geomean pin for the analysis commands: the weighted log-mean the dynamics
/// conserve, either from an explicit target (volts) or the initial voltages.
double geomean_target(const Scenario& scenario, const std::optional<double>& geomean_volts) {
    if (geomean_volts) {
        if (!(*geomean_volts > 0.0)) throw ConfigError("--geomean must be a positive voltage");
        return scenario.params.C.sum() * std::log(*geomean_volts);
    }
    return (scenario.params.C.array() * scenario.initial_vs.array().log()).sum();
}

/// Load-voltage guess for the analysis commands: explicit initial values when
/// present, otherwise the closed form for the impedance/current part.
Eigen::VectorXd load_guess(const Scenario& scenario, const ConductanceBlocks& blocks,
                           const ZipLoadBank& bank) {
    if (scenario.initial_vl.size() > 0) return scenario.initial_vl;
    const ZipLoadBank zi_part(bank.istar(), bank.ystar(), Eigen::VectorXd::Zero(bank.size()));
    return zi_load_voltages(blocks, zi_part, scenario.initial_vs);
}

/// Solves the post-event equilibrium pinned to the scenario's geomean.
EquilibriumReport solve_scenario_equilibrium(const Scenario& scenario,
                                             const std::optional<double>& geomean_volts) {
    const ConductanceBlocks blocks = build_laplacian(scenario.network);
    const ZipLoadBank bank = scenario.final_bank();
    return find_equilibrium(blocks, bank, scenario.params.C,
                            geomean_target(scenario, geomean_volts), scenario.initial_vs,
                            load_guess(scenario, blocks, bank));
}

struct SimulationArtifacts {
    Trajectory trajectory;
    SteadyStateReport steady;
    fs::path csv_path;
};

SimulationArtifacts run_and_write(const Scenario& scenario, const fs::path& output_dir,
                                  const fs::path& csv_path) {
    SimulationArtifacts artifacts;
    artifacts.trajectory = simulate(scenario);
    fs::create_directories(output_dir);
    write_csv(artifacts.trajectory, csv_path.string());
    artifacts.steady = steady_state_check(artifacts.trajectory, scenario.params.C,
                                          scenario.t_end / 10.0, 1e-6);
    artifacts.csv_path = csv_path;
    return artifacts;
}

int cmd_simulate(const std::string& path, const fs::path& output_dir,
                 const std::string& controller_override) {
    Scenario scenario = load_scenario(path);
    if (!controller_override.empty()) {
        scenario.controller = controller_from_name(controller_override);
        if (scenario.controller == ControllerKind::dapi && scenario.params.D.size() == 0) {
            throw ConfigError("scenario does not define sources/D, required for dapi");
        }
        scenario.validate();
    }
    const SimulationArtifacts artifacts =
        run_and_write(scenario, output_dir, csv_destination(scenario, output_dir));
    const std::string summary = to_json(artifacts.steady);
    write_text(output_dir / (scenario.name + "_summary.json"), summary);
    std::cerr << "wrote " << artifacts.csv_path.string() << " ("
              << artifacts.trajectory.size() << " samples)\n";
    std::cout << summary;
    return 0;
}

int cmd_equilibrium(const std::string& path, const std::optional<double>& geomean_volts) {
    const Scenario scenario = load_scenario(path);
    try {
        std::cout << to_json(solve_scenario_equilibrium(scenario, geomean_volts));
    } catch (const ConvergenceError& e) {
        std::cout << "{\n  \"converged\": false,\n  \"residual\": " << e.residual()
                  << ",\n  \"error\": \"no equilibrium found: solver stalled\"\n}\n";
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

int cmd_check(const std::string& path, const std::optional<double>& geomean_volts) {
    const Scenario scenario = load_scenario(path);
    const EquilibriumReport report = solve_scenario_equilibrium(scenario, geomean_volts);
    std::cout << to_json(report.condition);
    return 0;
}

int cmd_audit(const std::string& path, const fs::path& output_dir,
              const std::string& csv_override, const std::optional<double>& t_from) {
    const Scenario scenario = load_scenario(path);
    const fs::path csv = csv_override.empty() ? csv_destination(scenario, output_dir)
                                              : fs::path(csv_override);
    if (!fs::exists(csv)) {
        throw ConfigError("trajectory CSV not found: " + csv.string() +
                          " (run the simulate subcommand first or pass --csv)");
    }
    const Trajectory traj = read_csv(csv.string());

    const std::optional<LyapunovContext> ctx = reference_context(scenario);
    if (!ctx) {
        throw NumericalError(
            "reference equilibrium could not be computed; energy audit unavailable");
    }
    const double from = t_from ? *t_from : scenario.last_event_end();
    const int n_buses = scenario.network.n_nodes();
    const double drift_tol = 100.0 * scenario.integrator.atol * n_buses;
    const DecreaseAuditReport report = decrease_audit(*ctx, traj, from, drift_tol);
    std::cout << to_json(report);
    return report.energy_nonincreasing && report.rate_nonpositive ? 0 : 1;
}

int cmd_compare(const std::string& path, const fs::path& output_dir) {
    Scenario base = load_scenario(path);
    if (base.params.D.size() == 0) {
        throw ConfigError("scenario must define sources/D for the dapi leg of compare");
    }

    Scenario consensus = base;
    consensus.controller = ControllerKind::consensus;
    Scenario dapi = base;
    dapi.controller = ControllerKind::dapi;

    const fs::path consensus_csv = output_dir / (base.name + "_consensus.csv");
    const fs::path dapi_csv = output_dir / (base.name + "_dapi.csv");
    fs::create_directories(output_dir);

    auto dapi_future = std::async(std::launch::async, [&] {
        return run_and_write(dapi, output_dir, dapi_csv);
    });
    const SimulationArtifacts cons_art = run_and_write(consensus, output_dir, consensus_csv);
    const SimulationArtifacts dapi_art = dapi_future.get();

    // Relative per-source power overshoot above the final value.
    auto overshoot = [](const Trajectory& traj) {
        const Eigen::VectorXd final_power = traj.back().source_power;
        Eigen::VectorXd peak = final_power;
        for (const TrajectorySample& s : traj.samples) {
            peak = peak.cwiseMax(s.source_power);
        }
        std::vector<double> rel(static_cast<std::size_t>(peak.size()));
        for (int i = 0; i < peak.size(); ++i) {
            rel[static_cast<std::size_t>(i)] =
                (peak[i] - final_power[i]) / std::max(std::abs(final_power[i]), 1e-12);
        }
        return rel;
    };

    auto leg = [&](const SimulationArtifacts& art) {
        nlohmann::json j;
        j["csv"] = art.csv_path.string();
        j["power_overshoot_rel"] = overshoot(art.trajectory);
        j["steady_state"] = nlohmann::json::parse(to_json(art.steady));
        return j;
    };
    nlohmann::json summary;
    summary["scenario"] = base.name;
    summary["consensus"] = leg(cons_art);
    summary["dapi"] = leg(dapi_art);
    const std::string text = summary.dump(2) + "\n";

    write_text(output_dir / (base.name + "_compare.json"), text);
    std::cout << text;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DC microgrid power-consensus simulation and analysis toolkit"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::string output_dir = ".";
    std::string controller_override;
    std::string csv_override;
    std::optional<double> geomean_volts;
    std::optional<double> t_from;

    auto add_scenario_arg = [&](CLI::App* cmd) {
        cmd->add_option("scenario", scenario_path, "Scenario JSON file")
            ->required()
            ->check(CLI::ExistingFile);
    };

    CLI::App* sim = app.add_subcommand(
        "simulate", "Integrate the closed loop; write trajectory CSV and summary JSON");
    add_scenario_arg(sim);
    sim->add_option("--output-dir", output_dir, "Directory for CSV/JSON artifacts");
    sim->add_option("--controller-override", controller_override,
                    "Run with this controller instead of the scenario's");

    CLI::App* eq = app.add_subcommand(
        "equilibrium", "Solve the post-event equilibrium; print the report as JSON");
    add_scenario_arg(eq);
    eq->add_option("--geomean", geomean_volts,
                   "Pin the weighted geometric mean of the source voltages to this value "
                   "(volts; default: from the initial voltages)");

    CLI::App* chk = app.add_subcommand(
        "check", "Evaluate the equilibrium stability condition; print the verdict as JSON");
    add_scenario_arg(chk);
    chk->add_option("--geomean", geomean_volts,
                    "Pin the weighted geometric mean of the source voltages (volts)");

    CLI::App* aud = app.add_subcommand(
        "audit", "Audit energy decrease along a recorded trajectory CSV");
    add_scenario_arg(aud);
    aud->add_option("--output-dir", output_dir, "Directory the CSV was written to");
    aud->add_option("--csv", csv_override, "Trajectory CSV (default: the scenario's output)");
    aud->add_option("--from", t_from,
                    "Audit samples with t >= this time (seconds; default: last event end)");

    CLI::App* cmp = app.add_subcommand(
        "compare", "Run the scenario under both controllers; write CSVs and a summary");
    add_scenario_arg(cmp);
    cmp->add_option("--output-dir", output_dir, "Directory for CSV/JSON artifacts");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (sim->parsed()) return cmd_simulate(scenario_path, output_dir, controller_override);
        if (eq->parsed()) return cmd_equilibrium(scenario_path, geomean_volts);
        if (chk->parsed()) return cmd_check(scenario_path, geomean_volts);
        if (aud->parsed()) return cmd_audit(scenario_path, output_dir, csv_override, t_from);
        if (cmp->parsed()) return cmd_compare(scenario_path, output_dir);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
