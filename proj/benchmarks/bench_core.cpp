// Microbenchmarks for the hot paths: Kron reduction, the algebraic load
// solve, controller right-hand sides, equilibrium solving, and a full
// short-horizon simulation.

#include <benchmark/benchmark.h>

#include <cmath>

#include "dcgrid/analysis.hpp"
#include "dcgrid/controllers.hpp"
#include "dcgrid/loads.hpp"
#include "dcgrid/network.hpp"
#include "dcgrid/simulator.hpp"

namespace {

using namespace dcgrid;

MicrogridNetwork t_network() {
    return MicrogridNetwork(2, 1, {{1, 3, 1.0}, {2, 3, 1.0}}, {{1, 2}});
}

ZipLoadBank t_bank() {
    Eigen::VectorXd istar(1), ystar(1), pstar(1);
    istar << -1.0;
    ystar << 0.04;
    pstar << -35.0;
    return ZipLoadBank(istar, ystar, pstar);
}

// Three sources in a line, seven loads hanging off them; every line 0.6 S.
MicrogridNetwork star10_network() {
    std::vector<Line> lines = {{1, 2, 0.6}, {2, 3, 0.6},  {1, 4, 0.6},
                               {1, 5, 0.6}, {2, 6, 0.6},  {3, 7, 0.6},
                               {3, 8, 0.6}, {3, 9, 0.6},  {3, 10, 0.6}};
    return MicrogridNetwork(3, 7, lines, {{1, 2}, {2, 3}});
}

ZipLoadBank star10_bank() {
    Eigen::VectorXd istar = Eigen::VectorXd::Zero(7);
    Eigen::VectorXd ystar = Eigen::VectorXd::Zero(7);
    Eigen::VectorXd pstar = Eigen::VectorXd::Constant(7, -35.0);
    return ZipLoadBank(istar, ystar, pstar);
}

void bm_kron_reduce(benchmark::State& state) {
    const ConductanceBlocks blocks = build_laplacian(star10_network());
    for (auto _ : state) {
        benchmark::DoNotOptimize(kron_reduce(blocks));
    }
}
BENCHMARK(bm_kron_reduce);

void bm_load_newton(benchmark::State& state) {
    const ConductanceBlocks blocks = build_laplacian(star10_network());
    const ZipLoadBank bank = star10_bank();
    const Eigen::VectorXd vs = Eigen::VectorXd::Constant(3, 48.0);
    const Eigen::VectorXd guess = Eigen::VectorXd::Constant(7, 47.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(solve_load_voltages(blocks, bank, vs, guess));
    }
}
BENCHMARK(bm_load_newton);

void bm_consensus_rhs(benchmark::State& state) {
    const MicrogridNetwork net = star10_network();
    const ConductanceBlocks blocks = build_laplacian(net);
    const Eigen::MatrixXd lap = comm_laplacian(net);
    ControllerParams params;
    params.C = Eigen::VectorXd::Constant(3, 0.05);
    const Eigen::VectorXd vs = Eigen::VectorXd::Constant(3, 48.0);
    const Eigen::VectorXd vl = Eigen::VectorXd::Constant(7, 47.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(consensus_rhs(blocks, lap, params, vs, vl));
    }
}
BENCHMARK(bm_consensus_rhs);

void bm_find_equilibrium(benchmark::State& state) {
    const ConductanceBlocks blocks = build_laplacian(star10_network());
    const ZipLoadBank bank = star10_bank();
    Eigen::VectorXd C(3);
    C << 0.04, 0.08, 0.04;
    const double target = C.sum() * std::log(48.0);
    const Eigen::VectorXd vs = Eigen::VectorXd::Constant(3, 48.0);
    const Eigen::VectorXd vl = Eigen::VectorXd::Constant(7, 47.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(find_equilibrium(blocks, bank, C, target, vs, vl));
    }
}
BENCHMARK(bm_find_equilibrium);

void bm_simulate_t_network(benchmark::State& state) {
    Scenario scenario(t_network(), t_bank());
    scenario.params.C = Eigen::VectorXd::Constant(2, 1.0);
    scenario.initial_vs = Eigen::VectorXd(2);
    scenario.initial_vs << 50.0, 46.08;
    scenario.t_end = 0.05;
    for (auto _ : state) {
        benchmark::DoNotOptimize(simulate(scenario));
    }
}
BENCHMARK(bm_simulate_t_network);

}  // namespace

BENCHMARK_MAIN();
