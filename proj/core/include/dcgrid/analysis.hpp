#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dcgrid/loads.hpp"
#include "dcgrid/network.hpp"

namespace dcgrid {

/// Verdict of the equilibrium stability/regularity condition in both of its
/// equivalent formulations (load-side Schur complement, and positive
/// definiteness of the full equivalent conductance matrix).
struct ConditionReport {
    bool ok = false;            ///< Schur-complement formulation verdict
    double min_eig_schur = 0.0; ///< smallest eigenvalue of the symmetrized Schur matrix
    bool ok_full = false;       ///< full equivalent-conductance formulation verdict
    double min_eig_full = 0.0;  ///< smallest eigenvalue of the symmetrized full matrix
};

/// Solved equilibrium with residuals and the stability certificate.
struct EquilibriumReport {
    Eigen::VectorXd vs;            ///< equilibrium source voltages (volts)
    Eigen::VectorXd vl;            ///< equilibrium load voltages (volts)
    double p_star = 0.0;           ///< shared power level, watts per unit C
    Eigen::VectorXd source_power;  ///< P_s = C * p_star (watts)
    double power_residual = 0.0;   ///< |P_ZIP|_inf at the solution (watts)
    double current_residual = 0.0; ///< |I_ZIP|_inf at the solution (amperes)
    bool converged = false;
    int iterations = 0;
    ConditionReport condition;
};

/// Shared power level p* = -(1^T I_l(V_l)) / (1^T [V_s]^{-1} C 1): total load
/// current demand over the C-weighted reciprocal source voltages. Source
/// powers at equilibrium are P_s = C * p*.
[[nodiscard]] double shared_power_level(const ZipLoadBank& bank, const Eigen::VectorXd& C,
                                        const Eigen::VectorXd& vs, const Eigen::VectorXd& vl);

/// Equilibrium residual pair (P_ZIP, I_ZIP):
///   P_ZIP = [V_s] Y_red V_s + [V_s] Ysl Yll^{-1} I_l(V_l) - C p*,
///   I_ZIP = I_l(V_l) - Yll V_l - Yls V_s.
/// V is an equilibrium of the closed loop iff both vanish.
[[nodiscard]] std::pair<Eigen::VectorXd, Eigen::VectorXd> equilibrium_residuals(
    const ConductanceBlocks& blocks, const ZipLoadBank& bank, const Eigen::VectorXd& C,
    const Eigen::VectorXd& vs, const Eigen::VectorXd& vl);

struct EquilibriumOptions {
    double tol = 1e-10;           ///< infinity norm of the stacked residual
    int max_iter = 100;
    double voltage_floor = 1e-6;  ///< volts; Newton iterates stay above this
};

/// Damped-Newton solve of the square system {geometric-mean pin replacing the
/// first power-balance row, remaining power balances, current balances}. The
/// pin 1^T C ln V_s = geomean_log_target fixes the consensus direction of the
/// equilibrium manifold (the quantity the dynamics conserve). The replaced
/// power row is implied by current conservation. Throws ConvergenceError on
/// failure.
[[nodiscard]] EquilibriumReport find_equilibrium(const ConductanceBlocks& blocks,
                                                 const ZipLoadBank& bank,
                                                 const Eigen::VectorXd& C,
                                                 double geomean_log_target,
                                                 const Eigen::VectorXd& vs_guess,
                                                 const Eigen::VectorXd& vl_guess,
                                                 const EquilibriumOptions& options = {});

/// Independent closed-form pipeline for ZI banks (Pstar = 0): solves the
/// source-only power system built from the shunt-absorbed Kron reduction with
/// a finite-difference Newton, then recovers the load voltages explicitly.
/// Used as the dual-route oracle against find_equilibrium.
[[nodiscard]] EquilibriumReport find_equilibrium_zi(const ConductanceBlocks& blocks,
                                                    const ZipLoadBank& bank,
                                                    const Eigen::VectorXd& C,
                                                    double geomean_log_target,
                                                    const Eigen::VectorXd& vs_guess,
                                                    const EquilibriumOptions& options = {});

/// Shared power level for ZI banks by the closed-form expression
///   p* = -1^T [I* - Y* (Yll+Y*)^{-1} (I* - Yls V_s)] / (1^T [V_s]^{-1} C 1),
/// which must agree with shared_power_level after substituting the
/// closed-form load voltages (asserted in tests).
[[nodiscard]] double shared_power_level_zi(const ConductanceBlocks& blocks,
                                           const ZipLoadBank& bank, const Eigen::VectorXd& C,
                                           const Eigen::VectorXd& vs);

/// Evaluates the stability/regularity condition at an (approximate)
/// equilibrium: positive definiteness of
///   A = Yll + diag(Ystar) + diag(Pstar/Vl^2) - Yls (Yss + diag(Pbar_s/Vs^2))^{-1} Ysl
/// with Pbar_s = C p*(V). Also evaluates the equivalent full-matrix
/// formulation; the two verdicts agree by the Schur complement argument.
/// Matrices are symmetrized before the eigensolve; the positivity threshold
/// is 1e-10 * |matrix|.
[[nodiscard]] ConditionReport check_stability_condition(const ConductanceBlocks& blocks,
                                                        const ZipLoadBank& bank,
                                                        const Eigen::VectorXd& C,
                                                        const Eigen::VectorXd& vs_bar,
                                                        const Eigen::VectorXd& vl_bar);

/// The average-voltage inequality at an equilibrium with constant-power
/// loads: compares the Pstar-weighted mean reciprocal load voltage against
/// the C-weighted mean reciprocal source voltage.
struct VoltageInequalityReport {
    double load_side = 0.0;    ///< sum_i a_i / Vl_i with a = Pstar / sum(Pstar)
    double source_side = 0.0;  ///< sum_i b_i / Vs_i with b = C / sum(C)
    bool holds = false;        ///< load_side >= source_side
};

[[nodiscard]] VoltageInequalityReport voltage_inequality_check(const ZipLoadBank& bank,
                                                               const Eigen::VectorXd& C,
                                                               const Eigen::VectorXd& vs,
                                                               const Eigen::VectorXd& vl);

/// Real positive roots of the two source-voltage quartics of the two-source,
/// one-load T-network with a constant-current load:
///   V1^4 - r2 Il V1^3 + c r1 Il V1 - c^2 = 0   (and r1 <-> r2 for V2),
/// where r_i are the line resistances, c the conserved product V1 V2, and Il
/// the load current. Roots found via the companion matrix and polished by
/// Newton; for r1 = r2 the factorization (V^2 - c)(V^2 - r Il V + c) yields
/// the unique positive root sqrt(c).
struct TNetworkQuarticRoots {
    std::vector<double> v1;  ///< positive real roots for the first source
    std::vector<double> v2;  ///< positive real roots for the second source
};

[[nodiscard]] TNetworkQuarticRoots t_network_quartic_roots(double r1, double r2, double c,
                                                           double il);

}  // namespace dcgrid
