#include "dcgrid/loads.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <utility>

namespace dcgrid {

ZipLoadBank::ZipLoadBank(Eigen::VectorXd istar, Eigen::VectorXd ystar, Eigen::VectorXd pstar)
    : istar_(std::move(istar)), ystar_(std::move(ystar)), pstar_(std::move(pstar)) {
    if (istar_.size() != ystar_.size() || istar_.size() != pstar_.size()) {
        throw ConfigError("ZIP parameter vectors must have equal length");
    }
    if ((istar_.array() > 0.0).any()) {
        throw ConfigError("constant-current load parameters must be <= 0 (consuming)");
    }
    if ((ystar_.array() < 0.0).any()) {
        throw ConfigError("constant-impedance load conductances must be >= 0");
    }
    if ((pstar_.array() > 0.0).any()) {
        throw ConfigError("constant-power load parameters must be <= 0 (consuming)");
    }
}

ZipLoadBank ZipLoadBank::zeros(int n) {
    return ZipLoadBank(Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n),
                       Eigen::VectorXd::Zero(n));
}

namespace {

void check_above_floor(const Eigen::VectorXd& vl, double floor) {
    for (int i = 0; i < vl.size(); ++i) {
        if (!(vl[i] > floor)) {
            throw VoltageCollapseError(
                std::numeric_limits<double>::quiet_NaN(), i + 1,
                "load voltage " + std::to_string(vl[i]) + " V at load " + std::to_string(i + 1) +
                    " is at or below the floor " + std::to_string(floor) + " V");
        }
    }
}

/// I_ZIP evaluated into preallocated storage (the caller guarantees vl > 0).
void residual_into(Eigen::VectorXd& out, const ConductanceBlocks& blocks,
                   const ZipLoadBank& bank, const Eigen::VectorXd& vs,
                   const Eigen::VectorXd& vl) {
    out = bank.istar().array() - bank.ystar().array() * vl.array() +
          bank.pstar().array() / vl.array();
    out.noalias() -= blocks.Yll * vl;
    out.noalias() -= blocks.Yls * vs;
}

}  // namespace

Eigen::VectorXd load_current(const ZipLoadBank& bank, const Eigen::VectorXd& vl,
                             double voltage_floor) {
    if (vl.size() != bank.size()) {
        throw ConfigError("load voltage vector length does not match load bank");
    }
    check_above_floor(vl, voltage_floor);
    return bank.istar().array() - bank.ystar().array() * vl.array() +
           bank.pstar().array() / vl.array();
}

Eigen::VectorXd load_current_jacobian(const ZipLoadBank& bank, const Eigen::VectorXd& vl) {
    if (vl.size() != bank.size()) {
        throw ConfigError("load voltage vector length does not match load bank");
    }
    check_above_floor(vl, 0.0);
    return -bank.ystar().array() - bank.pstar().array() / vl.array().square();
}

Eigen::VectorXd zip_current_residual(const ConductanceBlocks& blocks, const ZipLoadBank& bank,
                                     const Eigen::VectorXd& vs, const Eigen::VectorXd& vl) {
    if (vl.size() != bank.size()) {
        throw ConfigError("load voltage vector length does not match load bank");
    }
    check_above_floor(vl, 0.0);
    Eigen::VectorXd out;
    residual_into(out, blocks, bank, vs, vl);
    return out;
}

Eigen::VectorXd zi_load_voltages(const ConductanceBlocks& blocks, const ZipLoadBank& bank,
                                 const Eigen::VectorXd& vs) {
    Eigen::MatrixXd yll = blocks.Yll;
    yll.diagonal() += bank.ystar();
    return yll.ldlt().solve(bank.istar() - blocks.Yls * vs);
}

Eigen::VectorXd solve_load_voltages(const ConductanceBlocks& blocks, const ZipLoadBank& bank,
                                    const Eigen::VectorXd& vs, const Eigen::VectorXd& guess,
                                    const NewtonOptions& options, LoadSolveWorkspace* workspace) {
    if (bank.size() == 0) return Eigen::VectorXd(0);
    if (bank.is_zi()) return zi_load_voltages(blocks, bank, vs);

    LoadSolveWorkspace local;
    LoadSolveWorkspace& ws = workspace ? *workspace : local;
    const auto n = static_cast<Eigen::Index>(bank.size());
    if (ws.jacobian.rows() != n || ws.jacobian.cols() != n) ws.valid = false;

    Eigen::VectorXd vl = guess;
    check_above_floor(vl, options.voltage_floor);
    Eigen::VectorXd residual;
    residual_into(residual, blocks, bank, vs, vl);
    double norm = residual.lpNorm<Eigen::Infinity>();

    // The Jacobian d I_ZIP / d V_l = -(Yll + diag(Ystar) + diag(Pstar/vl^2))
    // is refactored lazily: a retained factorization keeps being used as a
    // chord iteration while it contracts the residual quickly enough.
    const auto refresh = [&] {
        ws.jacobian = -blocks.Yll;
        ws.jacobian.diagonal() += load_current_jacobian(bank, vl);
        ws.lu.compute(ws.jacobian);
        ws.valid = true;
    };

    Eigen::VectorXd candidate(n), cand_res(n);
    for (int iter = 0; iter < options.max_iter; ++iter) {
        if (norm < options.tol) return vl;

        const bool was_fresh = !ws.valid;
        if (!ws.valid) refresh();
        const Eigen::VectorXd step = ws.lu.solve(-residual);

        double lambda = 1.0;
        bool accepted = false;
        for (int halving = 0; halving < 40; ++halving) {
            candidate = vl + lambda * step;
            if ((candidate.array() > options.voltage_floor).all()) {
                residual_into(cand_res, blocks, bank, vs, candidate);
                const double cand_norm = cand_res.lpNorm<Eigen::Infinity>();
                if (cand_norm < norm) {
                    vl.swap(candidate);
                    residual.swap(cand_res);
                    // Damping or slow contraction means the factorization no
                    // longer matches the iterate; rebuild it next pass.
                    if (lambda < 1.0 || cand_norm > 0.25 * norm) ws.valid = false;
                    norm = cand_norm;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if (!accepted) {
            if (!was_fresh) {
                ws.valid = false;  // stale chord direction; retry with a true Newton step
                continue;
            }
            throw AlgebraicSolveError(std::numeric_limits<double>::quiet_NaN(), norm,
                                      "damped Newton stalled solving the load constraint "
                                      "(residual " +
                                          std::to_string(norm) + " A)");
        }
    }
    if (norm < options.tol) return vl;
    throw AlgebraicSolveError(std::numeric_limits<double>::quiet_NaN(), norm,
                              "load constraint Newton did not converge in " +
                                  std::to_string(options.max_iter) + " iterations (residual " +
                                  std::to_string(norm) + " A)");
}

}  // namespace dcgrid
