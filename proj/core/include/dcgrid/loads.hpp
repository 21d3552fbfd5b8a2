#pragma once

#include <Eigen/Dense>

#include "dcgrid/errors.hpp"
#include "dcgrid/network.hpp"

namespace dcgrid {

/// Per-load ZIP parameters defining the load current
///   I_l(V_l) = Istar - Ystar .* V_l + Pstar ./ V_l
/// with the consuming-load sign conventions Istar <= 0, Pstar <= 0,
/// Ystar >= 0 (zeros disable a component). Immutable after construction.
class ZipLoadBank {
public:
    ZipLoadBank(Eigen::VectorXd istar, Eigen::VectorXd ystar, Eigen::VectorXd pstar);

    /// Bank of n loads with every component disabled.
    [[nodiscard]] static ZipLoadBank zeros(int n);

    [[nodiscard]] const Eigen::VectorXd& istar() const noexcept { return istar_; }
    [[nodiscard]] const Eigen::VectorXd& ystar() const noexcept { return ystar_; }
    [[nodiscard]] const Eigen::VectorXd& pstar() const noexcept { return pstar_; }
    [[nodiscard]] int size() const noexcept { return static_cast<int>(istar_.size()); }

    /// True when every constant-power component is zero (ZI bank).
    [[nodiscard]] bool is_zi() const noexcept { return (pstar_.array() == 0.0).all(); }

private:
    Eigen::VectorXd istar_;  ///< amperes, each <= 0
    Eigen::VectorXd ystar_;  ///< siemens, each >= 0
    Eigen::VectorXd pstar_;  ///< watts,   each <= 0
};

/// Componentwise ZIP load current at load voltages `vl` (all > voltage_floor).
/// Throws VoltageCollapseError (with NaN time) on violation.
[[nodiscard]] Eigen::VectorXd load_current(const ZipLoadBank& bank, const Eigen::VectorXd& vl,
                                           double voltage_floor = 0.0);

/// Diagonal of d I_l / d V_l: entries -Ystar_i - Pstar_i / vl_i^2 (siemens).
[[nodiscard]] Eigen::VectorXd load_current_jacobian(const ZipLoadBank& bank,
                                                    const Eigen::VectorXd& vl);

/// Residual of the algebraic load constraint:
///   I_ZIP(V) = I_l(V_l) - Yll V_l - Yls V_s  (amperes; zero on the manifold).
[[nodiscard]] Eigen::VectorXd zip_current_residual(const ConductanceBlocks& blocks,
                                                   const ZipLoadBank& bank,
                                                   const Eigen::VectorXd& vs,
                                                   const Eigen::VectorXd& vl);

/// Options for the damped Newton solve of the algebraic constraint.
struct NewtonOptions {
    double tol = 1e-10;           ///< amperes, on the infinity norm of I_ZIP
    int max_iter = 50;
    double voltage_floor = 1e-3;  ///< volts; iterates must stay above this
};

/// Closed-form load voltages for ZI banks (Pstar = 0):
///   V_l = (Yll + diag(Ystar))^{-1} (Istar - Yls V_s).
[[nodiscard]] Eigen::VectorXd zi_load_voltages(const ConductanceBlocks& blocks,
                                               const ZipLoadBank& bank,
                                               const Eigen::VectorXd& vs);

/// Reusable state for step-sequential constraint solves: the Jacobian
/// factorization is kept between calls and reused as a chord iteration while
/// it contracts fast enough, so warm-started stage evaluations rarely pay for
/// a refactorization. Correctness never depends on its contents; a stale
/// factorization only costs extra iterations before it is refreshed.
class LoadSolveWorkspace {
public:
    LoadSolveWorkspace() = default;

private:
    friend Eigen::VectorXd solve_load_voltages(const ConductanceBlocks&, const ZipLoadBank&,
                                               const Eigen::VectorXd&, const Eigen::VectorXd&,
                                               const NewtonOptions&, LoadSolveWorkspace*);
    Eigen::MatrixXd jacobian;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu;
    bool valid = false;
};

/// Solves I_ZIP(V) = 0 for the load voltages at fixed source voltages by
/// damped Newton (step halved until the iterate stays in the positive orthant
/// and the residual norm decreases). ZI banks bypass Newton and return the
/// closed form. The returned voltages satisfy |I_ZIP|_inf < tol.
/// Throws AlgebraicSolveError on non-convergence.
[[nodiscard]] Eigen::VectorXd solve_load_voltages(const ConductanceBlocks& blocks,
                                                  const ZipLoadBank& bank,
                                                  const Eigen::VectorXd& vs,
                                                  const Eigen::VectorXd& guess,
                                                  const NewtonOptions& options = {},
                                                  LoadSolveWorkspace* workspace = nullptr);

}  // namespace dcgrid
