#pragma once

#include <utility>

#include <Eigen/Dense>

#include "dcgrid/loads.hpp"
#include "dcgrid/network.hpp"

namespace dcgrid {

/// Which source controller closes the loop.
enum class ControllerKind {
    consensus,         ///< voltage-scaled power consensus
    dapi,              ///< distributed-averaging proportional-integral
    constant_voltage,  ///< consensus with load voltages frozen
};

/// Per-source controller weights. C scales the source dynamics and sets the
/// sharing ratios (P_i/C_i equalize); D is the DAPI integral weight.
struct ControllerParams {
    Eigen::VectorXd C;  ///< > 0, length n_sources
    Eigen::VectorXd D;  ///< > 0 when DAPI is selected; may be empty otherwise
};

/// I_s = Yss V_s + Ysl V_l (amperes).
[[nodiscard]] Eigen::VectorXd source_currents(const ConductanceBlocks& blocks,
                                              const Eigen::VectorXd& vs,
                                              const Eigen::VectorXd& vl);

/// P_s = [V_s] I_s (watts).
[[nodiscard]] Eigen::VectorXd source_powers(const ConductanceBlocks& blocks,
                                            const Eigen::VectorXd& vs,
                                            const Eigen::VectorXd& vl);

/// Power-consensus source dynamics in reduced form:
///   dV_s/dt = C^{-1} ( -[V_s] L_c C^{-1} P_s ).
[[nodiscard]] Eigen::VectorXd consensus_rhs(const ConductanceBlocks& blocks,
                                            const Eigen::MatrixXd& comm_lap,
                                            const ControllerParams& params,
                                            const Eigen::VectorXd& vs,
                                            const Eigen::VectorXd& vl);

/// DAPI source and auxiliary-current dynamics:
///   dV_s/dt = C^{-1} (-I_s + p)
///   dp/dt   = D^{-1} ( I_s - p - L_c (C^{-1} [V_s] p) ).
[[nodiscard]] std::pair<Eigen::VectorXd, Eigen::VectorXd> dapi_rhs(
    const ConductanceBlocks& blocks, const Eigen::MatrixXd& comm_lap,
    const ControllerParams& params, const Eigen::VectorXd& vs, const Eigen::VectorXd& vl,
    const Eigen::VectorXd& p);

/// Consensus dynamics with the load voltages frozen at vl_bar.
[[nodiscard]] Eigen::VectorXd constant_voltage_rhs(const ConductanceBlocks& blocks,
                                                   const Eigen::MatrixXd& comm_lap,
                                                   const ControllerParams& params,
                                                   const Eigen::VectorXd& vs,
                                                   const Eigen::VectorXd& vl_bar);

/// Load dynamics when terminal capacitors replace the algebraic constraint:
///   dV_l/dt = Cl^{-1} I_ZIP(V)   (restoring toward the constraint manifold).
[[nodiscard]] Eigen::VectorXd capacitive_load_rhs(const ConductanceBlocks& blocks,
                                                  const ZipLoadBank& bank,
                                                  const Eigen::VectorXd& cl,
                                                  const Eigen::VectorXd& vs,
                                                  const Eigen::VectorXd& vl);

}  // namespace dcgrid
