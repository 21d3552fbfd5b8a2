#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dcgrid/errors.hpp"

namespace dcgrid {

/// One resistive line between two buses, by 1-based node id in canonical
/// ordering (sources 1..n_s, loads n_s+1..n).
struct Line {
    int from = 0;
    int to = 0;
    double conductance = 0.0;  ///< siemens, > 0
};

/// The electrical graph of a DC microgrid: a node partition into sources and
/// loads, resistive lines, and the communication graph over the sources used
/// by the distributed controllers. Immutable after construction; all
/// invariants (connectivity, positivity, no duplicate edges) are checked in
/// the constructor.
class MicrogridNetwork {
public:
    MicrogridNetwork(int n_sources, int n_loads, std::vector<Line> lines,
                     std::vector<std::pair<int, int>> comm_edges);

    [[nodiscard]] int n_sources() const noexcept { return n_sources_; }
    [[nodiscard]] int n_loads() const noexcept { return n_loads_; }
    [[nodiscard]] int n_nodes() const noexcept { return n_sources_ + n_loads_; }
    [[nodiscard]] const std::vector<Line>& lines() const noexcept { return lines_; }
    [[nodiscard]] const std::vector<std::pair<int, int>>& comm_edges() const noexcept {
        return comm_edges_;
    }

private:
    int n_sources_;
    int n_loads_;
    std::vector<Line> lines_;
    std::vector<std::pair<int, int>> comm_edges_;
};

/// The four blocks of the bus conductance matrix (the weighted Laplacian of
/// the electrical graph) under source-first ordering.
struct ConductanceBlocks {
    Eigen::MatrixXd Yss;  ///< n_s x n_s
    Eigen::MatrixXd Ysl;  ///< n_s x n_l
    Eigen::MatrixXd Yls;  ///< n_l x n_s
    Eigen::MatrixXd Yll;  ///< n_l x n_l

    [[nodiscard]] int n_sources() const { return static_cast<int>(Yss.rows()); }
    [[nodiscard]] int n_loads() const { return static_cast<int>(Yll.rows()); }

    /// Assembles the full (n x n) Laplacian from the blocks.
    [[nodiscard]] Eigen::MatrixXd full() const;
};

/// Builds the weighted Laplacian of the electrical graph and returns its
/// source/load blocks.
[[nodiscard]] ConductanceBlocks build_laplacian(const MicrogridNetwork& net);

/// Eliminates the load buses: Y_red = Yss - Ysl * Yll^{-1} * Yls.
/// The result is a symmetric PSD Laplacian over the sources (zero row sums).
[[nodiscard]] Eigen::MatrixXd kron_reduce(const ConductanceBlocks& blocks);

/// Kron reduction with constant-impedance loads absorbed into the network:
/// Yhat_red = Yss - Ysl * (Yll + diag(Ystar))^{-1} * Yls. Positive definite
/// whenever some shunt conductance is strictly positive.
[[nodiscard]] Eigen::MatrixXd kron_reduce_with_shunts(const ConductanceBlocks& blocks,
                                                      const Eigen::VectorXd& Ystar);

/// Unweighted Laplacian of the communication graph over the source nodes.
[[nodiscard]] Eigen::MatrixXd comm_laplacian(const MicrogridNetwork& net);

}  // namespace dcgrid
