#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dcgrid/controllers.hpp"
#include "dcgrid/loads.hpp"
#include "dcgrid/lyapunov.hpp"
#include "dcgrid/network.hpp"
#include "dcgrid/trajectory.hpp"

namespace dcgrid {

/// Timed linear ramp of one load's ZIP parameters from their previous values
/// to the target triple over [t_start, t_end].
struct LoadEvent {
    int load_index = 0;  ///< 0-based index into the load bank
    double t_start = 0.0;
    double t_end = 0.0;
    double istar_target = 0.0;
    double ystar_target = 0.0;
    double pstar_target = 0.0;
};

enum class IntegrationMethod { rk4_fixed, rk45_adaptive };

struct IntegratorSettings {
    IntegrationMethod method = IntegrationMethod::rk45_adaptive;
    double rtol = 1e-8;            ///< adaptive relative tolerance
    double atol = 1e-10;           ///< adaptive absolute tolerance (volts)
    double dt = 1e-4;              ///< fixed-step size (seconds)
    double voltage_floor = 1e-3;   ///< volts
    double newton_tol = 1e-10;     ///< amperes
    int max_newton_iter = 50;
};

enum class SimulationMode { dae, capacitive };

struct OutputSettings {
    std::string csv_path;              ///< empty: caller decides
    double sample_interval = 0.0;      ///< seconds; 0 means t_end / 2000
};

/// Complete description of one simulation run: the network, the initial load
/// bank, controller selection and weights, initial conditions, timed load
/// events, integrator settings, and output policy.
class Scenario {
public:
    Scenario(MicrogridNetwork network, ZipLoadBank loads);

    MicrogridNetwork network;
    ZipLoadBank loads;  ///< bank at t = 0
    ControllerParams params;
    ControllerKind controller = ControllerKind::consensus;
    SimulationMode mode = SimulationMode::dae;
    Eigen::VectorXd cl;          ///< load capacitances (farads), capacitive mode
    Eigen::VectorXd initial_vs;  ///< volts
    Eigen::VectorXd initial_vl;  ///< volts; may be empty (solved/derived)
    double t_end = 1.0;          ///< seconds
    std::vector<LoadEvent> events;
    IntegratorSettings integrator;
    OutputSettings outputs;
    std::string name = "scenario";

    /// Load bank at simulation time t with all event ramps applied.
    [[nodiscard]] ZipLoadBank bank_at(double t) const;

    /// Bank after every event has completed.
    [[nodiscard]] ZipLoadBank final_bank() const;

    /// End time of the last event (0 when there are none).
    [[nodiscard]] double last_event_end() const;

    /// Validates cross-field invariants; throws ConfigError.
    void validate() const;
};

/// Integrates the closed loop over [0, t_end] and records samples at the
/// fixed observation interval. Event ramp endpoints, sample times and t_end
/// are forced step boundaries, so the integrator never straddles a kink and
/// identical inputs produce byte-identical trajectories.
///
/// The energy column is the Bregman-centered energy around the equilibrium of
/// the final bank (geomean-pinned to the initial source voltages); NaN when
/// that equilibrium solve fails.
[[nodiscard]] Trajectory simulate(const Scenario& scenario);

/// Builds the Lyapunov context simulate() uses for the energy column.
/// Empty when the reference equilibrium cannot be computed.
[[nodiscard]] std::optional<LyapunovContext> reference_context(const Scenario& scenario);

/// Steady-state diagnostics over the trailing window of a trajectory.
struct SteadyStateReport {
    double window = 0.0;              ///< seconds inspected at the tail
    double max_dvs_dt = 0.0;          ///< volts/second, finite differences
    double sharing_residual = 0.0;    ///< max_{i,j} |P_i/C_i - P_j/C_j| (watts)
    double sharing_mean = 0.0;        ///< mean of P_i/C_i at the final sample
    double geomean_drift = 0.0;       ///< |geomean_log(end) - geomean_log(0)|
    bool steady = false;              ///< sharing_residual < tol * |sharing_mean|
};

[[nodiscard]] SteadyStateReport steady_state_check(const Trajectory& traj,
                                                   const Eigen::VectorXd& C, double window,
                                                   double tol);

}  // namespace dcgrid
