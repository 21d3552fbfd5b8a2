#include <doctest.h>

#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "dcgrid/errors.hpp"
#include "dcgrid/loads.hpp"
#include "dcgrid/simulator.hpp"
#include "dcgrid/trajectory.hpp"
#include "helpers.hpp"

using namespace dcgrid;
using namespace dcgrid::testing;

namespace {

/// Tee scenario matching the bundled one but with programmable horizon and
/// integration settings (tight tolerances for oracle comparisons).
Scenario tee_scenario(double t_end, double sample_interval) {
    Scenario s(make_tee(), tee_zip_bank());
    s.params.C = Eigen::VectorXd::Ones(2);
    s.params.D = Eigen::VectorXd::Constant(2, 1e-4);
    s.initial_vs = (Eigen::VectorXd(2) << 50.0, 46.08).finished();
    s.t_end = t_end;
    s.integrator.rtol = 1e-10;
    s.integrator.atol = 1e-12;
    s.outputs.sample_interval = sample_interval;
    s.name = "tee_test";
    return s;
}

const TrajectorySample& sample_at(const Trajectory& traj, double t) {
    for (const TrajectorySample& s : traj.samples) {
        if (std::abs(s.t - t) < 1e-12) return s;
    }
    REQUIRE_MESSAGE(false, "no sample at requested time");
    return traj.samples.front();
}

}  // namespace

TEST_CASE("consensus trajectory matches the implicit reference solver") {
    Scenario s = tee_scenario(0.01, 0.002);
    const Trajectory traj = simulate(s);

    // Initial condition is the first sample; the load starts on the manifold.
    CHECK(traj.front().t == 0.0);
    CHECK(traj.front().vs(0) == 50.0);
    CHECK(traj.front().vs(1) == 46.08);

    // Reference values from an implicit stiff solver at tolerance 1e-12.
    const TrajectorySample& early = sample_at(traj, 0.002);
    CHECK(early.vs(0) == doctest::Approx(48.00013775886809).epsilon(1e-8));
    CHECK(early.vs(1) == doctest::Approx(47.99986224152724).epsilon(1e-8));

    const TrajectorySample& late = sample_at(traj, 0.01);
    CHECK(late.vs(0) == doctest::Approx(48.0).epsilon(1e-8));
    CHECK(late.vs(1) == doctest::Approx(48.0).epsilon(1e-8));

    // The conserved quantity stays put at these tolerances.
    for (const TrajectorySample& smp : traj.samples) {
        CHECK(std::abs(smp.geomean_log - traj.front().geomean_log) < 1e-8);
    }
}

TEST_CASE("integral-controller trajectory matches the implicit reference solver") {
    Scenario s = tee_scenario(0.01, 0.002);
    s.controller = ControllerKind::dapi;
    const Trajectory traj = simulate(s);
    REQUIRE(traj.has_p);

    // The auxiliary currents start at the measured source currents.
    const ConductanceBlocks blocks = build_laplacian(s.network);
    const Eigen::VectorXd vl0 = solve_load_voltages(blocks, s.loads, s.initial_vs,
                                                    Eigen::VectorXd::Constant(1, 46.0));
    const Eigen::VectorXd is0 = source_currents(blocks, s.initial_vs, vl0);
    CHECK((traj.front().p - is0).cwiseAbs().maxCoeff() < 1e-12);

    const TrajectorySample& end = sample_at(traj, 0.01);
    CHECK(end.vs(0) == doctest::Approx(49.97997880261407).epsilon(1e-8));
    CHECK(end.vs(1) == doctest::Approx(46.10002119738593).epsilon(1e-8));
    CHECK(end.p(0) == doctest::Approx(1.7511367248248908).epsilon(1e-6));
    CHECK(end.p(1) == doctest::Approx(1.8553075529557481).epsilon(1e-6));
}

TEST_CASE("capacitive-mode trajectory matches the implicit reference solver") {
    Scenario s = tee_scenario(0.01, 0.002);
    s.mode = SimulationMode::capacitive;
    s.cl = Eigen::VectorXd::Constant(1, 1e-3);
    s.initial_vl = Eigen::VectorXd::Constant(1, 48.0);
    const Trajectory traj = simulate(s);

    CHECK(traj.front().vl(0) == 48.0);
    const TrajectorySample& end = sample_at(traj, 0.01);
    CHECK(end.vs(0) == doctest::Approx(48.00000000000231).epsilon(1e-9));
    CHECK(end.vs(1) == doctest::Approx(48.00000000000229).epsilon(1e-9));
    CHECK(end.vl(0) == doctest::Approx(46.19724463921946).epsilon(1e-9));
}

TEST_CASE("fixed-step integrator shows fourth-order error decay") {
    auto final_vs = [&](double dt) {
        Scenario s = tee_scenario(0.002, 0.002);
        s.integrator.method = IntegrationMethod::rk4_fixed;
        s.integrator.dt = dt;
        s.integrator.newton_tol = 1e-13;
        return simulate(s).back().vs;
    };
    const Eigen::VectorXd ref = final_vs(1e-7);
    const double err_coarse = (final_vs(2e-5) - ref).cwiseAbs().maxCoeff();
    const double err_fine = (final_vs(1e-5) - ref).cwiseAbs().maxCoeff();
    // Independently computed: 7.58e-8 and 4.59e-9, ratio 16.5.
    CHECK(err_coarse == doctest::Approx(7.576858251923113e-08).epsilon(0.05));
    CHECK(err_fine == doctest::Approx(4.58728521834928e-09).epsilon(0.05));
    CHECK(err_coarse / err_fine > 15.0);
}

TEST_CASE("identical runs produce byte-identical CSV output") {
    auto render = [&](IntegrationMethod method) {
        Scenario s = tee_scenario(0.005, 5e-4);
        s.integrator.method = method;
        s.integrator.dt = 1e-5;
        const Trajectory traj = simulate(s);
        std::ostringstream out;
        write_csv(traj, out);
        return out.str();
    };
    CHECK(render(IntegrationMethod::rk4_fixed) == render(IntegrationMethod::rk4_fixed));
    CHECK(render(IntegrationMethod::rk45_adaptive) ==
          render(IntegrationMethod::rk45_adaptive));
}

TEST_CASE("load events ramp the bank and shift the operating point") {
    Scenario s = tee_scenario(0.02, 1e-3);
    LoadEvent ev;
    ev.load_index = 0;
    ev.t_start = 0.005;
    ev.t_end = 0.006;
    ev.istar_target = -1.0;
    ev.ystar_target = 0.04;
    ev.pstar_target = -70.0;
    s.events = {ev};
    s.validate();

    CHECK(s.bank_at(0.0).pstar()(0) == -35.0);
    CHECK(s.bank_at(0.0055).pstar()(0) == doctest::Approx(-52.5).epsilon(1e-12));
    CHECK(s.final_bank().pstar()(0) == -70.0);
    CHECK(s.last_event_end() == 0.006);

    const Trajectory traj = simulate(s);
    const double power_before = sample_at(traj, 0.004).source_power.sum();
    const double power_after = sample_at(traj, 0.02).source_power.sum();
    CHECK(power_after > power_before + 30.0);  // ~35 W extra demand plus losses
    // Conservation holds through the event kinks.
    for (const TrajectorySample& smp : traj.samples) {
        CHECK(std::abs(smp.geomean_log - traj.front().geomean_log) < 1e-7);
    }
}

TEST_CASE("frozen-load controller holds the algebraic voltages constant") {
    Scenario s = tee_scenario(0.01, 1e-3);
    s.controller = ControllerKind::constant_voltage;
    const Trajectory traj = simulate(s);
    const double vl0 = traj.front().vl(0);
    for (const TrajectorySample& smp : traj.samples) {
        CHECK(smp.vl(0) == vl0);
    }
    // Sources still reach consensus on the frozen network.
    const SteadyStateReport steady =
        steady_state_check(traj, s.params.C, 0.001, 1e-6);
    CHECK(steady.steady);
}

TEST_CASE("steady-state diagnostics on a converged run") {
    Scenario s = tee_scenario(0.05, 1e-3);
    const Trajectory traj = simulate(s);
    const SteadyStateReport steady = steady_state_check(traj, s.params.C, 0.005, 1e-6);
    CHECK(steady.steady);
    CHECK(steady.sharing_residual < 1e-6 * std::abs(steady.sharing_mean));
    CHECK(steady.sharing_mean == doctest::Approx(86.5322574592658).epsilon(1e-8));
    CHECK(steady.geomean_drift < 1e-8);
    CHECK(steady.max_dvs_dt < 1e-3);
}

TEST_CASE("reference context centers the energy at the terminal equilibrium") {
    Scenario s = tee_scenario(0.05, 1e-3);
    const auto ctx = reference_context(s);
    REQUIRE(ctx.has_value());
    CHECK(ctx->vs_bar(0) == doctest::Approx(48.0).epsilon(1e-9));
    CHECK(ctx->vs_bar(1) == doctest::Approx(48.0).epsilon(1e-9));

    const Trajectory traj = simulate(s);
    CHECK(std::abs(traj.back().energy) < 1e-8);
    CHECK(traj.front().energy > 0.0);
    // Sampled energies are non-increasing along the consensus run.
    const DecreaseAuditReport audit = decrease_audit(*ctx, traj, 0.0, 3e-8);
    CHECK(audit.energy_nonincreasing);
    CHECK(audit.rate_nonpositive);
}

TEST_CASE("simulation reports numerical failure for infeasible demand") {
    Scenario s = tee_scenario(0.01, 1e-3);
    s.loads = ZipLoadBank(Eigen::VectorXd::Constant(1, -1.0),
                          Eigen::VectorXd::Constant(1, 0.04),
                          Eigen::VectorXd::Constant(1, -1200.0));
    CHECK_THROWS_AS((void)simulate(s), NumericalError);
}

TEST_CASE("single-source network simulates as a fixed point") {
    Scenario s(MicrogridNetwork(1, 1, {{1, 2, 1.0}}, {}),
               ZipLoadBank(Eigen::VectorXd::Constant(1, -1.0),
                           Eigen::VectorXd::Constant(1, 0.04),
                           Eigen::VectorXd::Constant(1, -35.0)));
    s.params.C = Eigen::VectorXd::Ones(1);
    s.initial_vs = Eigen::VectorXd::Constant(1, 48.0);
    s.t_end = 0.01;
    s.outputs.sample_interval = 1e-3;
    const Trajectory traj = simulate(s);
    // An isolated source has no peers to trade power with.
    CHECK(std::abs(traj.back().vs(0) - 48.0) < 1e-9);
}
