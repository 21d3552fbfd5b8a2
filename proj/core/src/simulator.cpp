#include "dcgrid/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dcgrid/analysis.hpp"
#include "dcgrid/errors.hpp"

namespace dcgrid {

Scenario::Scenario(MicrogridNetwork net, ZipLoadBank bank)
    : network(std::move(net)), loads(std::move(bank)) {}

ZipLoadBank Scenario::bank_at(double t) const {
    Eigen::VectorXd istar = loads.istar();
    Eigen::VectorXd ystar = loads.ystar();
    Eigen::VectorXd pstar = loads.pstar();
    // Events are validated non-overlapping per load and sorted by start time,
    // so sequential application composes ramps correctly.
    for (const LoadEvent& ev : events) {
        if (t <= ev.t_start) continue;
        double theta = 1.0;
        if (t < ev.t_end) theta = (t - ev.t_start) / (ev.t_end - ev.t_start);
        const int i = ev.load_index;
        istar[i] += theta * (ev.istar_target - istar[i]);
        ystar[i] += theta * (ev.ystar_target - ystar[i]);
        pstar[i] += theta * (ev.pstar_target - pstar[i]);
    }
    return ZipLoadBank(std::move(istar), std::move(ystar), std::move(pstar));
}

ZipLoadBank Scenario::final_bank() const { return bank_at(std::numeric_limits<double>::max()); }

double Scenario::last_event_end() const {
    double t = 0.0;
    for (const LoadEvent& ev : events) t = std::max(t, ev.t_end);
    return t;
}

void Scenario::validate() const {
    const int ns = network.n_sources();
    const int nl = network.n_loads();
    if (loads.size() != nl) throw ConfigError("load bank size does not match the network");
    if (params.C.size() != ns) throw ConfigError("controller weight vector C length mismatch");
    if (!(params.C.array() > 0.0).all()) throw ConfigError("controller weights C must be > 0");
    if (controller == ControllerKind::dapi) {
        if (params.D.size() != ns) throw ConfigError("DAPI weight vector D length mismatch");
        if (!(params.D.array() > 0.0).all()) throw ConfigError("DAPI weights D must be > 0");
    }
    if (initial_vs.size() != ns) throw ConfigError("initial source voltage length mismatch");
    if (!(initial_vs.array() > 0.0).all()) {
        throw ConfigError("initial source voltages must be positive");
    }
    if (initial_vl.size() != 0 && initial_vl.size() != nl) {
        throw ConfigError("initial load voltage length mismatch");
    }
    if (initial_vl.size() != 0 && !(initial_vl.array() > 0.0).all()) {
        throw ConfigError("initial load voltages must be positive");
    }
    if (!(t_end > 0.0)) throw ConfigError("t_end must be positive");
    if (mode == SimulationMode::capacitive) {
        if (controller == ControllerKind::constant_voltage) {
            throw ConfigError("capacitive mode is incompatible with frozen load voltages");
        }
        if (cl.size() != nl) throw ConfigError("load capacitance vector length mismatch");
        if (!(cl.array() > 0.0).all()) throw ConfigError("load capacitances must be positive");
    }
    if (!(integrator.rtol > 0.0) || !(integrator.atol > 0.0) || !(integrator.dt > 0.0)) {
        throw ConfigError("integrator tolerances and step size must be positive");
    }
    if (!(integrator.voltage_floor > 0.0) ||
        integrator.voltage_floor >= initial_vs.minCoeff()) {
        throw ConfigError("voltage floor must be positive and below the initial voltages");
    }

    std::vector<std::pair<double, double>> spans;
    for (const LoadEvent& ev : events) {
        if (ev.load_index < 0 || ev.load_index >= nl) {
            throw ConfigError("event load index out of range");
        }
        if (!(ev.t_start >= 0.0) || !(ev.t_end >= ev.t_start)) {
            throw ConfigError("event times must satisfy 0 <= t_start <= t_end");
        }
        if (ev.istar_target > 0.0 || ev.ystar_target < 0.0 || ev.pstar_target > 0.0) {
            throw ConfigError("event target violates load sign conventions");
        }
    }
    for (std::size_t a = 0; a < events.size(); ++a) {
        for (std::size_t b = a + 1; b < events.size(); ++b) {
            if (events[a].load_index != events[b].load_index) continue;
            const bool disjoint = events[a].t_end <= events[b].t_start ||
                                  events[b].t_end <= events[a].t_start;
            if (!disjoint) {
                throw ConfigError("overlapping events target the same load");
            }
        }
    }
    for (std::size_t a = 1; a < events.size(); ++a) {
        if (events[a].t_start < events[a - 1].t_start) {
            throw ConfigError("events must be sorted by start time");
        }
    }
}

namespace {

/// Derivative evaluator for one scenario; owns the algebraic warm-start
/// state, so a single instance must be used step-sequentially.
class ClosedLoop {
public:
    explicit ClosedLoop(const Scenario& scenario)
        : scenario_(scenario),
          blocks_(build_laplacian(scenario.network)),
          comm_lap_(comm_laplacian(scenario.network)),
          newton_{scenario.integrator.newton_tol, scenario.integrator.max_newton_iter,
                  scenario.integrator.voltage_floor},
          bank0_(scenario.bank_at(0.0)),
          bank_final_(scenario.final_bank()),
          bank_scratch_(bank0_) {
        first_kink_ = std::numeric_limits<double>::infinity();
        last_kink_ = std::numeric_limits<double>::infinity();
        if (!scenario.events.empty()) {
            first_kink_ = scenario.events.front().t_start;
            last_kink_ = 0.0;
            for (const LoadEvent& ev : scenario.events) {
                first_kink_ = std::min(first_kink_, ev.t_start);
                last_kink_ = std::max(last_kink_, ev.t_end);
            }
        }
    }

    [[nodiscard]] const ConductanceBlocks& blocks() const { return blocks_; }
    [[nodiscard]] const Eigen::MatrixXd& comm_lap() const { return comm_lap_; }

    /// Bank at time t; cached outside the event-ramp window (the bank is
    /// piecewise constant there), assembled fresh inside it.
    [[nodiscard]] const ZipLoadBank& bank_for(double t) {
        if (t <= first_kink_) return bank0_;
        if (t >= last_kink_) return bank_final_;
        bank_scratch_ = scenario_.bank_at(t);
        return bank_scratch_;
    }

    [[nodiscard]] int state_size() const {
        const int ns = scenario_.network.n_sources();
        const int nl = scenario_.network.n_loads();
        int n = ns;
        if (scenario_.controller == ControllerKind::dapi) n += ns;
        if (scenario_.mode == SimulationMode::capacitive) n += nl;
        return n;
    }

    /// Assembles the initial state; solves the algebraic constraint for the
    /// DAE mode's first load voltages (warm-started from the ZI closed form
    /// with the constant-power part zeroed, unless a guess is configured).
    [[nodiscard]] Eigen::VectorXd initial_state() {
        const int ns = scenario_.network.n_sources();
        const ZipLoadBank& bank = bank0_;
        const bool vl_given = scenario_.initial_vl.size() > 0;
        Eigen::VectorXd vl0;
        if (vl_given) {
            vl0 = scenario_.initial_vl;
        } else {
            const ZipLoadBank zi_part(bank.istar(), bank.ystar(),
                                      Eigen::VectorXd::Zero(bank.size()));
            vl0 = zi_load_voltages(blocks_, zi_part, scenario_.initial_vs);
        }
        // In DAE mode an explicit initial Vl is only a Newton guess; the run
        // starts on the constraint manifold. Frozen and capacitive runs also
        // default to the manifold when no explicit Vl is configured.
        const bool dae_free = scenario_.mode == SimulationMode::dae &&
                              scenario_.controller != ControllerKind::constant_voltage;
        if (dae_free || !vl_given) {
            vl0 = solve_load_voltages(blocks_, bank, scenario_.initial_vs, vl0, newton_,
                                      &newton_ws_);
        }
        warm_vl_ = vl0;
        frozen_vl_ = vl0;

        Eigen::VectorXd y(state_size());
        y.head(ns) = scenario_.initial_vs;
        if (scenario_.controller == ControllerKind::dapi) {
            y.segment(ns, ns) = source_currents(blocks_, scenario_.initial_vs, vl0);
        }
        if (scenario_.mode == SimulationMode::capacitive) {
            y.tail(scenario_.network.n_loads()) = vl0;
        }
        return y;
    }

    /// Load voltages consistent with the state at time t (state block in
    /// capacitive mode, frozen vector for the constant-voltage controller,
    /// fresh algebraic solve in DAE mode).
    [[nodiscard]] Eigen::VectorXd load_voltages(double t, const Eigen::VectorXd& y) {
        const int nl = scenario_.network.n_loads();
        if (scenario_.mode == SimulationMode::capacitive) return y.tail(nl);
        if (scenario_.controller == ControllerKind::constant_voltage) return frozen_vl_;
        const Eigen::VectorXd vs = y.head(scenario_.network.n_sources());
        try {
            Eigen::VectorXd vl =
                solve_load_voltages(blocks_, bank_for(t), vs, warm_vl_, newton_, &newton_ws_);
            warm_vl_ = vl;
            return vl;
        } catch (const AlgebraicSolveError& e) {
            throw AlgebraicSolveError(t, e.residual(),
                                      "algebraic load constraint unsolvable at t = " +
                                          std::to_string(t) + " s: " + e.what());
        } catch (const VoltageCollapseError& e) {
            throw VoltageCollapseError(t, scenario_.network.n_sources() + e.bus(), e.what());
        }
    }

    /// Warm-start snapshot/restore, so rejected trial steps cannot leak their
    /// iterates into the accepted path.
    [[nodiscard]] Eigen::VectorXd warm_start() const { return warm_vl_; }
    void restore_warm_start(const Eigen::VectorXd& vl) { warm_vl_ = vl; }

    [[nodiscard]] Eigen::VectorXd derivative(double t, const Eigen::VectorXd& y) {
        const int ns = scenario_.network.n_sources();
        const int nl = scenario_.network.n_loads();
        const Eigen::VectorXd vs = y.head(ns);
        for (int i = 0; i < ns; ++i) {
            if (!(vs[i] > scenario_.integrator.voltage_floor)) {
                throw VoltageCollapseError(t, i + 1,
                                           "source voltage " + std::to_string(vs[i]) +
                                               " V at bus " + std::to_string(i + 1) +
                                               " fell below the floor at t = " +
                                               std::to_string(t) + " s");
            }
        }
        if (scenario_.mode == SimulationMode::capacitive) {
            const Eigen::VectorXd vl = y.tail(nl);
            for (int i = 0; i < nl; ++i) {
                if (!(vl[i] > scenario_.integrator.voltage_floor)) {
                    throw VoltageCollapseError(t, ns + i + 1,
                                               "load voltage " + std::to_string(vl[i]) +
                                                   " V at bus " + std::to_string(ns + i + 1) +
                                                   " fell below the floor at t = " +
                                                   std::to_string(t) + " s");
                }
            }
        }

        const Eigen::VectorXd vl = load_voltages(t, y);
        Eigen::VectorXd dy(state_size());
        switch (scenario_.controller) {
            case ControllerKind::consensus:
                dy.head(ns) = consensus_rhs(blocks_, comm_lap_, scenario_.params, vs, vl);
                break;
            case ControllerKind::constant_voltage:
                dy.head(ns) =
                    constant_voltage_rhs(blocks_, comm_lap_, scenario_.params, vs, frozen_vl_);
                break;
            case ControllerKind::dapi: {
                const Eigen::VectorXd p = y.segment(ns, ns);
                auto [dvs, dp] = dapi_rhs(blocks_, comm_lap_, scenario_.params, vs, vl, p);
                dy.head(ns) = dvs;
                dy.segment(ns, ns) = dp;
                break;
            }
        }
        if (scenario_.mode == SimulationMode::capacitive) {
            dy.tail(nl) = capacitive_load_rhs(blocks_, bank_for(t), scenario_.cl, vs, vl);
        }
        return dy;
    }

private:
    const Scenario& scenario_;
    ConductanceBlocks blocks_;
    Eigen::MatrixXd comm_lap_;
    NewtonOptions newton_;
    ZipLoadBank bank0_;
    ZipLoadBank bank_final_;
    ZipLoadBank bank_scratch_;
    double first_kink_ = 0.0;
    double last_kink_ = 0.0;
    LoadSolveWorkspace newton_ws_;
    Eigen::VectorXd warm_vl_;
    Eigen::VectorXd frozen_vl_;
};

/// Classic fixed-coefficient RK4 step.
Eigen::VectorXd rk4_step(ClosedLoop& loop, double t, const Eigen::VectorXd& y, double h) {
    const Eigen::VectorXd k1 = loop.derivative(t, y);
    const Eigen::VectorXd k2 = loop.derivative(t + 0.5 * h, y + 0.5 * h * k1);
    const Eigen::VectorXd k3 = loop.derivative(t + 0.5 * h, y + 0.5 * h * k2);
    const Eigen::VectorXd k4 = loop.derivative(t + h, y + h * k3);
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Dormand-Prince 5(4) embedded pair; returns the 5th-order solution and the
/// scaled error norm of the embedded difference.
struct Dp45Result {
    Eigen::VectorXd y5;
    double error_norm = 0.0;
};

Dp45Result dp45_step(ClosedLoop& loop, double t, const Eigen::VectorXd& y, double h, double rtol,
                     double atol) {
    static constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
    static constexpr double a21 = 1.0 / 5.0;
    static constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
    static constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
    static constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                            a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
    static constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                            a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
    static constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                            b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;
    static constexpr double e1 = 5179.0 / 57600.0, e3 = 7571.0 / 16695.0, e4 = 393.0 / 640.0,
                            e5 = -92097.0 / 339200.0, e6 = 187.0 / 2100.0, e7 = 1.0 / 40.0;

    const Eigen::VectorXd k1 = loop.derivative(t, y);
    const Eigen::VectorXd k2 = loop.derivative(t + c2 * h, y + h * (a21 * k1));
    const Eigen::VectorXd k3 = loop.derivative(t + c3 * h, y + h * (a31 * k1 + a32 * k2));
    const Eigen::VectorXd k4 =
        loop.derivative(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const Eigen::VectorXd k5 =
        loop.derivative(t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Eigen::VectorXd k6 = loop.derivative(
        t + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));

    Dp45Result result;
    result.y5 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const Eigen::VectorXd k7 = loop.derivative(t + h, result.y5);
    const Eigen::VectorXd y4 =
        y + h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double sum = 0.0;
    for (int i = 0; i < y.size(); ++i) {
        const double scale = atol + rtol * std::max(std::abs(y[i]), std::abs(result.y5[i]));
        const double e = (result.y5[i] - y4[i]) / scale;
        sum += e * e;
    }
    result.error_norm = std::sqrt(sum / static_cast<double>(y.size()));
    return result;
}

/// Advances from t_from to t_to (one forced segment) with the configured
/// scheme; returns the state at t_to.
Eigen::VectorXd integrate_segment(ClosedLoop& loop, const IntegratorSettings& settings,
                                  double t_from, double t_to, Eigen::VectorXd y, double& h_next) {
    double t = t_from;
    if (settings.method == IntegrationMethod::rk4_fixed) {
        while (t < t_to) {
            const double h = std::min(settings.dt, t_to - t);
            y = rk4_step(loop, t, y, h);
            t += h;
        }
        return y;
    }

    while (t < t_to) {
        double h = std::min(h_next, t_to - t);
        if (!(h > 0.0)) h = t_to - t;
        for (;;) {
            if (h < 1e-14 * std::max(1.0, std::abs(t))) {
                throw StiffnessError(t, h,
                                     "adaptive step size underflowed at t = " +
                                         std::to_string(t) + " s (dt = " + std::to_string(h) +
                                         "); the problem is too stiff for the explicit pair");
            }
            const Eigen::VectorXd warm = loop.warm_start();
            try {
                const Dp45Result step = dp45_step(loop, t, y, h, settings.rtol, settings.atol);
                const double err = step.error_norm;
                if (err <= 1.0) {
                    t += h;
                    y = step.y5;
                    const double grow = err == 0.0 ? 5.0 : 0.9 * std::pow(err, -0.2);
                    h_next = h * std::clamp(grow, 0.2, 5.0);
                    break;
                }
                loop.restore_warm_start(warm);
                h *= std::clamp(0.9 * std::pow(err, -0.2), 0.2, 0.9);
            } catch (const NumericalError&) {
                // Collapse or an unsolvable constraint inside a trial stage:
                // reject the step as too large while the step size still has
                // room to shrink; at genuinely small steps the failure is
                // real and propagates.
                if (h < 1e-10 * std::max(1.0, std::abs(t_to))) throw;
                loop.restore_warm_start(warm);
                h *= 0.2;
            }
        }
    }
    return y;
}

}  // namespace

std::optional<LyapunovContext> reference_context(const Scenario& scenario) {
    const ConductanceBlocks blocks = build_laplacian(scenario.network);
    const Eigen::MatrixXd comm_lap = comm_laplacian(scenario.network);
    const ZipLoadBank bank = scenario.final_bank();
    const double target =
        (scenario.params.C.array() * scenario.initial_vs.array().log()).sum();
    try {
        Eigen::VectorXd vl_guess;
        if (scenario.initial_vl.size() > 0) {
            vl_guess = scenario.initial_vl;
        } else {
            const ZipLoadBank zi_part(bank.istar(), bank.ystar(),
                                      Eigen::VectorXd::Zero(bank.size()));
            vl_guess = zi_load_voltages(blocks, zi_part, scenario.initial_vs);
        }
        const EquilibriumReport eq = find_equilibrium(blocks, bank, scenario.params.C, target,
                                                      scenario.initial_vs, vl_guess);
        return LyapunovContext::at_equilibrium(blocks, bank, scenario.params.C, comm_lap, eq.vs,
                                               eq.vl);
    } catch (const NumericalError&) {
        return std::nullopt;
    }
}

Trajectory simulate(const Scenario& scenario) {
    scenario.validate();
    const int ns = scenario.network.n_sources();
    const int nl = scenario.network.n_loads();

    const std::optional<LyapunovContext> ctx = reference_context(scenario);

    ClosedLoop loop(scenario);
    Eigen::VectorXd y = loop.initial_state();

    const double sample_interval = scenario.outputs.sample_interval > 0.0
                                       ? scenario.outputs.sample_interval
                                       : scenario.t_end / 2000.0;

    // Forced boundaries: sample times (exact multiples of the interval),
    // event ramp kinks, t_end. Near-coincident boundaries are merged so the
    // integrator never faces a degenerate segment.
    std::set<double> raw_boundaries;
    const auto n_intervals = static_cast<long>(std::ceil(scenario.t_end / sample_interval - 1e-9));
    for (long k = 1; k < n_intervals; ++k) {
        raw_boundaries.insert(static_cast<double>(k) * sample_interval);
    }
    raw_boundaries.insert(scenario.t_end);
    for (const LoadEvent& ev : scenario.events) {
        if (ev.t_start > 0.0 && ev.t_start < scenario.t_end) raw_boundaries.insert(ev.t_start);
        if (ev.t_end > 0.0 && ev.t_end < scenario.t_end) raw_boundaries.insert(ev.t_end);
    }
    std::vector<double> boundaries;
    for (double b : raw_boundaries) {
        if (!boundaries.empty() && b - boundaries.back() < 1e-12 * std::max(1.0, b)) continue;
        boundaries.push_back(b);
    }
    if (boundaries.empty() || boundaries.back() != scenario.t_end) {
        if (!boundaries.empty() &&
            scenario.t_end - boundaries.back() < 1e-12 * std::max(1.0, scenario.t_end)) {
            boundaries.back() = scenario.t_end;
        } else {
            boundaries.push_back(scenario.t_end);
        }
    }

    auto is_sample_time = [&](double t) {
        if (t == scenario.t_end) return true;
        const double k = std::round(t / sample_interval);
        return std::abs(t - k * sample_interval) <= 1e-9 * std::max(1.0, std::abs(t));
    };

    Trajectory traj;
    traj.n_sources = ns;
    traj.n_loads = nl;
    traj.has_p = scenario.controller == ControllerKind::dapi;

    auto record = [&](double t, const Eigen::VectorXd& state) {
        TrajectorySample s;
        s.t = t;
        s.vs = state.head(ns);
        s.vl = loop.load_voltages(t, state);
        if (traj.has_p) s.p = state.segment(ns, ns);
        s.source_power = source_powers(loop.blocks(), s.vs, s.vl);
        s.geomean_log = (scenario.params.C.array() * s.vs.array().log()).sum();
        s.energy = ctx ? bregman(*ctx, s.vs, s.vl)
                       : std::numeric_limits<double>::quiet_NaN();
        traj.samples.push_back(std::move(s));
    };

    record(0.0, y);
    double t = 0.0;
    double h_next = std::min(sample_interval, scenario.t_end) * 0.1;
    for (double boundary : boundaries) {
        if (boundary <= 0.0) continue;
        y = integrate_segment(loop, scenario.integrator, t, boundary, std::move(y), h_next);
        t = boundary;
        if (is_sample_time(t)) record(t, y);
    }
    return traj;
}

SteadyStateReport steady_state_check(const Trajectory& traj, const Eigen::VectorXd& C,
                                     double window, double tol) {
    if (traj.samples.size() < 2) throw ConfigError("trajectory too short for steady-state check");
    SteadyStateReport report;
    report.window = window;
    const double t_end = traj.back().t;

    for (std::size_t k = 1; k < traj.samples.size(); ++k) {
        const TrajectorySample& a = traj.samples[k - 1];
        const TrajectorySample& b = traj.samples[k];
        if (b.t < t_end - window) continue;
        const double slope =
            ((b.vs - a.vs) / (b.t - a.t)).lpNorm<Eigen::Infinity>();
        report.max_dvs_dt = std::max(report.max_dvs_dt, slope);
    }

    const Eigen::VectorXd per_weight = traj.back().source_power.cwiseQuotient(C);
    report.sharing_residual = per_weight.maxCoeff() - per_weight.minCoeff();
    report.sharing_mean = per_weight.mean();
    report.geomean_drift = std::abs(traj.back().geomean_log - traj.front().geomean_log);
    report.steady = report.sharing_residual < tol * std::abs(report.sharing_mean);
    return report;
}

}  // namespace dcgrid
