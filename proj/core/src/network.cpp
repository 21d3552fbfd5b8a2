#include "dcgrid/network.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace dcgrid {

namespace {

/// Connected-component labels for nodes 0..n-1 under an undirected edge list.
std::vector<int> component_labels(int n, const std::vector<std::pair<int, int>>& edges) {
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int a) {
        while (parent[a] != a) {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        return a;
    };
    for (const auto& [a, b] : edges) parent[find(a)] = find(b);
    std::vector<int> label(n);
    for (int i = 0; i < n; ++i) label[i] = find(i);
    return label;
}

std::string list_component(const std::vector<int>& label, int which, int offset) {
    std::ostringstream out;
    bool first = true;
    for (int i = 0; i < static_cast<int>(label.size()); ++i) {
        if (label[i] != which) continue;
        if (!first) out << ",";
        out << (i + offset);
        first = false;
    }
    return out.str();
}

}  // namespace

MicrogridNetwork::MicrogridNetwork(int n_sources, int n_loads, std::vector<Line> lines,
                                   std::vector<std::pair<int, int>> comm_edges)
    : n_sources_(n_sources),
      n_loads_(n_loads),
      lines_(std::move(lines)),
      comm_edges_(std::move(comm_edges)) {
    if (n_sources_ < 1) throw ConfigError("network must have at least one source bus");
    if (n_loads_ < 0) throw ConfigError("network cannot have a negative load count");
    const int n = n_nodes();

    std::set<std::pair<int, int>> seen;
    std::vector<std::pair<int, int>> undirected;
    undirected.reserve(lines_.size());
    for (const Line& line : lines_) {
        if (line.from < 1 || line.from > n || line.to < 1 || line.to > n) {
            throw ConfigError("line endpoint out of range: " + std::to_string(line.from) +
                              "-" + std::to_string(line.to));
        }
        if (line.from == line.to) {
            throw ConfigError("self-loop on node " + std::to_string(line.from));
        }
        if (!(line.conductance > 0.0)) {
            throw ConfigError("non-positive conductance on line " + std::to_string(line.from) +
                              "-" + std::to_string(line.to));
        }
        auto key = std::minmax(line.from, line.to);
        if (!seen.insert(key).second) {
            throw ConfigError("duplicate line " + std::to_string(key.first) + "-" +
                              std::to_string(key.second));
        }
        undirected.emplace_back(line.from - 1, line.to - 1);
    }

    const auto label = component_labels(n, undirected);
    for (int i = 1; i < n; ++i) {
        if (label[i] != label[0]) {
            throw ConfigError("electrical graph is disconnected: component {" +
                              list_component(label, label[0], 1) + "} vs component {" +
                              list_component(label, label[i], 1) + "}");
        }
    }

    std::set<std::pair<int, int>> comm_seen;
    std::vector<std::pair<int, int>> comm_undirected;
    comm_undirected.reserve(comm_edges_.size());
    for (const auto& [a, b] : comm_edges_) {
        if (a < 1 || a > n_sources_ || b < 1 || b > n_sources_) {
            throw ConfigError("communication edge endpoint is not a source node: " +
                              std::to_string(a) + "-" + std::to_string(b));
        }
        if (a == b) throw ConfigError("communication self-loop on source " + std::to_string(a));
        auto key = std::minmax(a, b);
        if (!comm_seen.insert(key).second) {
            throw ConfigError("duplicate communication edge " + std::to_string(key.first) + "-" +
                              std::to_string(key.second));
        }
        comm_undirected.emplace_back(a - 1, b - 1);
    }
    if (n_sources_ > 1) {
        const auto comm_label = component_labels(n_sources_, comm_undirected);
        for (int i = 1; i < n_sources_; ++i) {
            if (comm_label[i] != comm_label[0]) {
                throw ConfigError(
                    "communication graph is disconnected over the sources: component {" +
                    list_component(comm_label, comm_label[0], 1) + "} vs component {" +
                    list_component(comm_label, comm_label[i], 1) + "}");
            }
        }
    }
}

Eigen::MatrixXd ConductanceBlocks::full() const {
    const int ns = n_sources();
    const int nl = n_loads();
    Eigen::MatrixXd y(ns + nl, ns + nl);
    y.topLeftCorner(ns, ns) = Yss;
    y.topRightCorner(ns, nl) = Ysl;
    y.bottomLeftCorner(nl, ns) = Yls;
    y.bottomRightCorner(nl, nl) = Yll;
    return y;
}

ConductanceBlocks build_laplacian(const MicrogridNetwork& net) {
    const int n = net.n_nodes();
    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
    for (const Line& line : net.lines()) {
        const int a = line.from - 1;
        const int b = line.to - 1;
        lap(a, a) += line.conductance;
        lap(b, b) += line.conductance;
        lap(a, b) -= line.conductance;
        lap(b, a) -= line.conductance;
    }
    const int ns = net.n_sources();
    const int nl = net.n_loads();
    ConductanceBlocks blocks;
    blocks.Yss = lap.topLeftCorner(ns, ns);
    blocks.Ysl = lap.topRightCorner(ns, nl);
    blocks.Yls = lap.bottomLeftCorner(nl, ns);
    blocks.Yll = lap.bottomRightCorner(nl, nl);
    return blocks;
}

namespace {

/// Solves Yll * X = rhs, rejecting numerically singular Yll.
Eigen::MatrixXd solve_load_block(const Eigen::MatrixXd& yll, const Eigen::MatrixXd& rhs,
                                 const char* context) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(yll);
    if (!lu.isInvertible()) {
        throw NumericalError(std::string("singular load conductance block in ") + context);
    }
    return lu.solve(rhs);
}

}  // namespace

Eigen::MatrixXd kron_reduce(const ConductanceBlocks& blocks) {
    if (blocks.n_loads() == 0) return blocks.Yss;
    Eigen::MatrixXd reduced =
        blocks.Yss - blocks.Ysl * solve_load_block(blocks.Yll, blocks.Yls, "kron_reduce");
    return 0.5 * (reduced + reduced.transpose());
}

Eigen::MatrixXd kron_reduce_with_shunts(const ConductanceBlocks& blocks,
                                        const Eigen::VectorXd& Ystar) {
    if (blocks.n_loads() == 0) return blocks.Yss;
    if (Ystar.size() != blocks.n_loads()) {
        throw ConfigError("shunt conductance vector length does not match load count");
    }
    if ((Ystar.array() < 0.0).any()) {
        throw ConfigError("shunt conductances must be nonnegative");
    }
    Eigen::MatrixXd yll = blocks.Yll;
    yll.diagonal() += Ystar;
    Eigen::MatrixXd reduced =
        blocks.Yss - blocks.Ysl * solve_load_block(yll, blocks.Yls, "kron_reduce_with_shunts");
    return 0.5 * (reduced + reduced.transpose());
}

Eigen::MatrixXd comm_laplacian(const MicrogridNetwork& net) {
    const int ns = net.n_sources();
    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(ns, ns);
    for (const auto& [a, b] : net.comm_edges()) {
        lap(a - 1, a - 1) += 1.0;
        lap(b - 1, b - 1) += 1.0;
        lap(a - 1, b - 1) -= 1.0;
        lap(b - 1, a - 1) -= 1.0;
    }
    return lap;
}

}  // namespace dcgrid
