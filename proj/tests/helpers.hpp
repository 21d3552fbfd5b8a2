#pragma once

// Shared fixtures for the unit and acceptance tests: the two-source tee
// network used throughout, the ten-bus demonstration network, and seeded
// random generators for property-style checks.

#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dcgrid/loads.hpp"
#include "dcgrid/network.hpp"

namespace dcgrid::testing {

/// Two sources feeding one load through unit-conductance lines (a "tee").
inline MicrogridNetwork make_tee() {
    return MicrogridNetwork(2, 1, {{1, 3, 1.0}, {2, 3, 1.0}}, {{1, 2}});
}

/// The tee's utility bank: mixed constant-current / impedance / power load.
inline ZipLoadBank tee_zip_bank() {
    return ZipLoadBank(Eigen::VectorXd::Constant(1, -1.0), Eigen::VectorXd::Constant(1, 0.04),
                       Eigen::VectorXd::Constant(1, -35.0));
}

inline ZipLoadBank tee_pure_p_bank() {
    return ZipLoadBank(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1),
                       Eigen::VectorXd::Constant(1, -35.0));
}

inline ZipLoadBank tee_pure_i_bank() {
    return ZipLoadBank(Eigen::VectorXd::Constant(1, -1.0), Eigen::VectorXd::Zero(1),
                       Eigen::VectorXd::Zero(1));
}

/// Ten-bus demonstration network: three sources in a line, seven
/// constant-power load spurs, all lines 0.6 S, sources chained by the
/// communication graph.
inline MicrogridNetwork make_ten_bus() {
    std::vector<Line> lines = {{1, 2, 0.6}, {2, 3, 0.6},  {1, 4, 0.6},
                               {1, 5, 0.6}, {2, 6, 0.6},  {3, 7, 0.6},
                               {3, 8, 0.6}, {3, 9, 0.6},  {3, 10, 0.6}};
    return MicrogridNetwork(3, 7, std::move(lines), {{1, 2}, {2, 3}});
}

inline Eigen::VectorXd ten_bus_weights() {
    Eigen::VectorXd c(3);
    c << 0.04, 0.08, 0.04;
    return c;
}

/// Ten-bus bank with every load drawing 35 W constant power.
inline ZipLoadBank ten_bus_full_bank() {
    return ZipLoadBank(Eigen::VectorXd::Zero(7), Eigen::VectorXd::Zero(7),
                       Eigen::VectorXd::Constant(7, -35.0));
}

/// Random connected network: a spanning tree over shuffled nodes plus a few
/// extra edges, with conductances in [0.5, 2].
inline MicrogridNetwork random_network(std::mt19937& rng, int n_sources, int n_loads) {
    const int n = n_sources + n_loads;
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i + 1;
    std::shuffle(order.begin(), order.end(), rng);

    std::uniform_real_distribution<double> cond(0.5, 2.0);
    std::vector<Line> lines;
    for (int i = 1; i < n; ++i) {
        std::uniform_int_distribution<int> attach(0, i - 1);
        lines.push_back({order[attach(rng)], order[i], cond(rng)});
    }
    // A few chords, skipping duplicates of tree edges.
    std::uniform_int_distribution<int> node(1, n);
    for (int extra = 0; extra < n / 2; ++extra) {
        const int a = node(rng);
        const int b = node(rng);
        if (a == b) continue;
        bool dup = false;
        for (const Line& l : lines) {
            if ((l.from == a && l.to == b) || (l.from == b && l.to == a)) dup = true;
        }
        if (!dup) lines.push_back({a, b, cond(rng)});
    }

    std::vector<std::pair<int, int>> comm;
    for (int i = 1; i < n_sources; ++i) comm.emplace_back(i, i + 1);
    return MicrogridNetwork(n_sources, n_loads, std::move(lines), std::move(comm));
}

/// Consuming ZI bank (strictly negative total current draw, so the shared
/// power level is positive and the stability condition is strictly met).
inline ZipLoadBank random_zi_bank(std::mt19937& rng, int n_loads) {
    std::uniform_real_distribution<double> idraw(-2.0, -0.1);
    std::uniform_real_distribution<double> ydraw(0.0, 0.1);
    Eigen::VectorXd istar(n_loads);
    Eigen::VectorXd ystar(n_loads);
    for (int i = 0; i < n_loads; ++i) {
        istar[i] = idraw(rng);
        ystar[i] = ydraw(rng);
    }
    return ZipLoadBank(std::move(istar), std::move(ystar), Eigen::VectorXd::Zero(n_loads));
}

/// Consuming full ZIP bank (adds moderate constant-power draws).
inline ZipLoadBank random_zip_bank(std::mt19937& rng, int n_loads) {
    std::uniform_real_distribution<double> idraw(-2.0, -0.1);
    std::uniform_real_distribution<double> ydraw(0.0, 0.1);
    std::uniform_real_distribution<double> pdraw(-30.0, 0.0);
    Eigen::VectorXd istar(n_loads);
    Eigen::VectorXd ystar(n_loads);
    Eigen::VectorXd pstar(n_loads);
    for (int i = 0; i < n_loads; ++i) {
        istar[i] = idraw(rng);
        ystar[i] = ydraw(rng);
        pstar[i] = pdraw(rng);
    }
    return ZipLoadBank(std::move(istar), std::move(ystar), std::move(pstar));
}

inline Eigen::VectorXd random_voltages(std::mt19937& rng, int n, double lo = 40.0,
                                       double hi = 56.0) {
    std::uniform_real_distribution<double> draw(lo, hi);
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = draw(rng);
    return v;
}

inline Eigen::VectorXd random_weights(std::mt19937& rng, int n, double lo = 0.5,
                                      double hi = 2.0) {
    std::uniform_real_distribution<double> draw(lo, hi);
    Eigen::VectorXd c(n);
    for (int i = 0; i < n; ++i) c[i] = draw(rng);
    return c;
}

}  // namespace dcgrid::testing
