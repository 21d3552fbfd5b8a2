#include "dcgrid/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <utility>

#include <Eigen/Eigenvalues>

namespace dcgrid {

double shared_power_level(const ZipLoadBank& bank, const Eigen::VectorXd& C,
                          const Eigen::VectorXd& vs, const Eigen::VectorXd& vl) {
    if (bank.size() == 0) return 0.0;
    const double demand = load_current(bank, vl).sum();
    const double weight = (C.array() / vs.array()).sum();
    return -demand / weight;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> equilibrium_residuals(const ConductanceBlocks& blocks,
                                                                  const ZipLoadBank& bank,
                                                                  const Eigen::VectorXd& C,
                                                                  const Eigen::VectorXd& vs,
                                                                  const Eigen::VectorXd& vl) {
    const Eigen::MatrixXd y_red = kron_reduce(blocks);
    const Eigen::VectorXd il = load_current(bank, vl);
    const double p_star = shared_power_level(bank, C, vs, vl);
    Eigen::VectorXd mapped = Eigen::VectorXd::Zero(blocks.n_sources());
    if (blocks.n_loads() > 0) {
        mapped = blocks.Ysl * blocks.Yll.ldlt().solve(il);
    }
    Eigen::VectorXd power = vs.cwiseProduct(y_red * vs + mapped) - C * p_star;
    Eigen::VectorXd current = il - blocks.Yll * vl - blocks.Yls * vs;
    return {std::move(power), std::move(current)};
}

namespace {

/// Stacked residual of the pinned equilibrium system:
///   row 0:            1^T C ln(V_s) - target
///   rows 1..ns-1:     P_ZIP components 2..ns
///   rows ns..ns+nl-1: I_ZIP
Eigen::VectorXd pinned_residual(const ConductanceBlocks& blocks, const ZipLoadBank& bank,
                                const Eigen::VectorXd& C, double target,
                                const Eigen::MatrixXd& y_red, const Eigen::VectorXd& vs,
                                const Eigen::VectorXd& vl) {
    const int ns = blocks.n_sources();
    const int nl = blocks.n_loads();
    Eigen::VectorXd residual(ns + nl);
    residual[0] = (C.array() * vs.array().log()).sum() - target;

    const Eigen::VectorXd il = nl > 0 ? load_current(bank, vl) : Eigen::VectorXd(0);
    const double p_star = shared_power_level(bank, C, vs, vl);
    Eigen::VectorXd mapped = Eigen::VectorXd::Zero(ns);
    if (nl > 0) mapped = blocks.Ysl * blocks.Yll.ldlt().solve(il);
    const Eigen::VectorXd power = vs.cwiseProduct(y_red * vs + mapped) - C * p_star;
    residual.segment(1, ns - 1) = power.tail(ns - 1);
    if (nl > 0) {
        residual.tail(nl) = il - blocks.Yll * vl - blocks.Yls * vs;
    }
    return residual;
}

/// Analytic Jacobian of pinned_residual with respect to (V_s, V_l).
Eigen::MatrixXd pinned_jacobian(const ConductanceBlocks& blocks, const ZipLoadBank& bank,
                                const Eigen::VectorXd& C, const Eigen::MatrixXd& y_red,
                                const Eigen::VectorXd& vs, const Eigen::VectorXd& vl) {
    const int ns = blocks.n_sources();
    const int nl = blocks.n_loads();
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(ns + nl, ns + nl);

    jac.block(0, 0, 1, ns) = (C.array() / vs.array()).matrix().transpose();

    Eigen::VectorXd il = Eigen::VectorXd::Zero(nl);
    Eigen::VectorXd il_prime = Eigen::VectorXd::Zero(nl);
    Eigen::MatrixXd mapped_load_jac = Eigen::MatrixXd::Zero(ns, nl);
    if (nl > 0) {
        il = load_current(bank, vl);
        il_prime = load_current_jacobian(bank, vl);
        mapped_load_jac = blocks.Ysl * blocks.Yll.ldlt().solve(
                              Eigen::MatrixXd(il_prime.asDiagonal()));
    }

    // p* = -s / w with s = 1^T I_l(V_l), w = sum_i C_i / Vs_i.
    const double w = (C.array() / vs.array()).sum();
    const double p_star = nl > 0 ? -il.sum() / w : 0.0;
    // d p*/d Vs_i = (p*/w) C_i / Vs_i^2; d p*/d Vl_j = -I_l'_j / w.
    const Eigen::VectorXd dp_dvs =
        (p_star / w) * (C.array() / vs.array().square()).matrix();
    const Eigen::VectorXd dp_dvl = nl > 0 ? Eigen::VectorXd(-il_prime / w) : Eigen::VectorXd(0);

    Eigen::VectorXd mapped = Eigen::VectorXd::Zero(ns);
    if (nl > 0) mapped = blocks.Ysl * blocks.Yll.ldlt().solve(il);
    const Eigen::VectorXd g = y_red * vs + mapped;
    Eigen::MatrixXd dpower_dvs = Eigen::MatrixXd(g.asDiagonal()) +
                                 vs.asDiagonal() * y_red - C * dp_dvs.transpose();
    jac.block(1, 0, ns - 1, ns) = dpower_dvs.bottomRows(ns - 1);
    if (nl > 0) {
        Eigen::MatrixXd dpower_dvl =
            vs.asDiagonal() * mapped_load_jac - C * dp_dvl.transpose();
        jac.block(1, ns, ns - 1, nl) = dpower_dvl.bottomRows(ns - 1);
        jac.block(ns, 0, nl, ns) = -blocks.Yls;
        Eigen::MatrixXd dcurrent_dvl = -blocks.Yll;
        dcurrent_dvl.diagonal() += il_prime;
        jac.block(ns, ns, nl, nl) = dcurrent_dvl;
    }
    return jac;
}

}  // namespace

EquilibriumReport find_equilibrium(const ConductanceBlocks& blocks, const ZipLoadBank& bank,
                                   const Eigen::VectorXd& C, double geomean_log_target,
                                   const Eigen::VectorXd& vs_guess,
                                   const Eigen::VectorXd& vl_guess,
                                   const EquilibriumOptions& options) {
    const int ns = blocks.n_sources();
    const int nl = blocks.n_loads();
    if (C.size() != ns) throw ConfigError("controller weight vector length mismatch");
    if (vs_guess.size() != ns || vl_guess.size() != nl) {
        throw ConfigError("equilibrium guess dimensions do not match the network");
    }

    const Eigen::MatrixXd y_red = kron_reduce(blocks);
    Eigen::VectorXd vs = vs_guess;
    Eigen::VectorXd vl = vl_guess;
    Eigen::VectorXd residual = pinned_residual(blocks, bank, C, geomean_log_target, y_red, vs, vl);
    double norm = residual.lpNorm<Eigen::Infinity>();

    EquilibriumReport report;
    int iter = 0;
    for (; iter < options.max_iter && norm >= options.tol; ++iter) {
        const Eigen::MatrixXd jac = pinned_jacobian(blocks, bank, C, y_red, vs, vl);
        const Eigen::VectorXd step = jac.partialPivLu().solve(-residual);

        double lambda = 1.0;
        bool accepted = false;
        for (int halving = 0; halving < 40; ++halving) {
            Eigen::VectorXd vs_new = vs + lambda * step.head(ns);
            Eigen::VectorXd vl_new = vl + lambda * step.tail(nl);
            if ((vs_new.array() > options.voltage_floor).all() &&
                (vl_new.array() > options.voltage_floor).all()) {
                Eigen::VectorXd res_new =
                    pinned_residual(blocks, bank, C, geomean_log_target, y_red, vs_new, vl_new);
                const double norm_new = res_new.lpNorm<Eigen::Infinity>();
                if (norm_new < norm) {
                    vs = std::move(vs_new);
                    vl = std::move(vl_new);
                    residual = std::move(res_new);
                    norm = norm_new;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if (!accepted) break;
    }

    report.vs = vs;
    report.vl = vl;
    report.iterations = iter;
    report.converged = norm < options.tol;
    report.p_star = shared_power_level(bank, C, vs, vl);
    report.source_power = C * report.p_star;
    auto [power, current] = equilibrium_residuals(blocks, bank, C, vs, vl);
    report.power_residual = power.lpNorm<Eigen::Infinity>();
    report.current_residual = nl > 0 ? current.lpNorm<Eigen::Infinity>() : 0.0;
    if (!report.converged) {
        throw ConvergenceError(norm, "equilibrium Newton did not converge (residual " +
                                         std::to_string(norm) + " after " +
                                         std::to_string(iter) + " iterations)");
    }
    report.condition = check_stability_condition(blocks, bank, C, vs, vl);
    return report;
}

double shared_power_level_zi(const ConductanceBlocks& blocks, const ZipLoadBank& bank,
                             const Eigen::VectorXd& C, const Eigen::VectorXd& vs) {
    if (bank.size() == 0) return 0.0;
    Eigen::MatrixXd yll_shunted = blocks.Yll;
    yll_shunted.diagonal() += bank.ystar();
    const Eigen::VectorXd inner =
        yll_shunted.ldlt().solve(bank.istar() - blocks.Yls * vs);
    const Eigen::VectorXd effective =
        bank.istar() - bank.ystar().cwiseProduct(inner);
    const double weight = (C.array() / vs.array()).sum();
    return -effective.sum() / weight;
}

EquilibriumReport find_equilibrium_zi(const ConductanceBlocks& blocks, const ZipLoadBank& bank,
                                      const Eigen::VectorXd& C, double geomean_log_target,
                                      const Eigen::VectorXd& vs_guess,
                                      const EquilibriumOptions& options) {
    if (!bank.is_zi()) {
        throw ConfigError("closed-form equilibrium pipeline requires a ZI load bank");
    }
    const int ns = blocks.n_sources();
    const Eigen::MatrixXd y_hat = kron_reduce_with_shunts(blocks, bank.ystar());
    Eigen::MatrixXd yll_shunted = blocks.Yll;
    yll_shunted.diagonal() += bank.ystar();
    const Eigen::VectorXd mapped_current =
        blocks.n_loads() > 0
            ? Eigen::VectorXd(blocks.Ysl * yll_shunted.ldlt().solve(bank.istar()))
            : Eigen::VectorXd::Zero(ns);

    // Residual of the source-only system: geomean pin + power rows 2..ns.
    auto residual_at = [&](const Eigen::VectorXd& vs) {
        Eigen::VectorXd r(ns);
        r[0] = (C.array() * vs.array().log()).sum() - geomean_log_target;
        const double p_star = shared_power_level_zi(blocks, bank, C, vs);
        const Eigen::VectorXd power =
            vs.cwiseProduct(y_hat * vs + mapped_current) - C * p_star;
        r.tail(ns - 1) = power.tail(ns - 1);
        return r;
    };

    Eigen::VectorXd vs = vs_guess;
    Eigen::VectorXd residual = residual_at(vs);
    double norm = residual.lpNorm<Eigen::Infinity>();

    int iter = 0;
    for (; iter < options.max_iter && norm >= options.tol; ++iter) {
        // Finite-difference Jacobian keeps this pipeline independent of the
        // analytic derivatives used by the general solver.
        Eigen::MatrixXd jac(ns, ns);
        for (int j = 0; j < ns; ++j) {
            const double h = 1e-7 * std::max(1.0, std::abs(vs[j]));
            Eigen::VectorXd vp = vs;
            Eigen::VectorXd vm = vs;
            vp[j] += h;
            vm[j] -= h;
            jac.col(j) = (residual_at(vp) - residual_at(vm)) / (2.0 * h);
        }
        const Eigen::VectorXd step = jac.partialPivLu().solve(-residual);

        double lambda = 1.0;
        bool accepted = false;
        for (int halving = 0; halving < 40; ++halving) {
            Eigen::VectorXd vs_new = vs + lambda * step;
            if ((vs_new.array() > options.voltage_floor).all()) {
                Eigen::VectorXd res_new = residual_at(vs_new);
                const double norm_new = res_new.lpNorm<Eigen::Infinity>();
                if (norm_new < norm) {
                    vs = std::move(vs_new);
                    residual = std::move(res_new);
                    norm = norm_new;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if (!accepted) break;
    }
    if (norm >= options.tol) {
        throw ConvergenceError(norm, "ZI equilibrium Newton did not converge (residual " +
                                         std::to_string(norm) + ")");
    }

    EquilibriumReport report;
    report.vs = vs;
    report.vl = zi_load_voltages(blocks, bank, vs);
    report.iterations = iter;
    report.converged = true;
    report.p_star = shared_power_level_zi(blocks, bank, C, vs);
    report.source_power = C * report.p_star;
    auto [power, current] = equilibrium_residuals(blocks, bank, C, report.vs, report.vl);
    report.power_residual = power.lpNorm<Eigen::Infinity>();
    report.current_residual =
        blocks.n_loads() > 0 ? current.lpNorm<Eigen::Infinity>() : 0.0;
    report.condition = check_stability_condition(blocks, bank, C, report.vs, report.vl);
    return report;
}

ConditionReport check_stability_condition(const ConductanceBlocks& blocks,
                                          const ZipLoadBank& bank, const Eigen::VectorXd& C,
                                          const Eigen::VectorXd& vs_bar,
                                          const Eigen::VectorXd& vl_bar) {
    const int ns = blocks.n_sources();
    const int nl = blocks.n_loads();
    if (nl == 0) {
        // No algebraic load constraint: nothing to regularize in either
        // formulation.
        ConditionReport vacuous;
        vacuous.ok = true;
        vacuous.ok_full = true;
        return vacuous;
    }
    const double p_star = shared_power_level(bank, C, vs_bar, vl_bar);
    const Eigen::VectorXd pbar_s = C * p_star;

    Eigen::MatrixXd source_block = blocks.Yss;
    source_block.diagonal() += (pbar_s.array() / vs_bar.array().square()).matrix();

    Eigen::FullPivLU<Eigen::MatrixXd> lu(source_block);
    if (!lu.isInvertible()) {
        throw NumericalError(
            "singular source block while evaluating the stability condition");
    }

    Eigen::MatrixXd load_block = blocks.Yll;
    load_block.diagonal() += bank.ystar();
    load_block.diagonal() += (bank.pstar().array() / vl_bar.array().square()).matrix();

    Eigen::MatrixXd schur = load_block - blocks.Yls * lu.solve(blocks.Ysl);
    schur = 0.5 * (schur + schur.transpose());

    ConditionReport report;
    {
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(schur);
        report.min_eig_schur = eig.eigenvalues().minCoeff();
        const double scale = schur.cwiseAbs().maxCoeff();
        report.ok = report.min_eig_schur > 1e-10 * std::max(scale, 1e-300);
    }

    // Full equivalent-conductance formulation: the Laplacian plus the
    // equivalent-impedance diagonal of sources and loads.
    Eigen::MatrixXd full(ns + nl, ns + nl);
    full.topLeftCorner(ns, ns) = source_block;
    full.topRightCorner(ns, nl) = blocks.Ysl;
    full.bottomLeftCorner(nl, ns) = blocks.Yls;
    full.bottomRightCorner(nl, nl) = load_block;
    full = 0.5 * (full + full.transpose());
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_full(full);
    report.min_eig_full = eig_full.eigenvalues().minCoeff();
    const double scale_full = full.cwiseAbs().maxCoeff();
    report.ok_full = report.min_eig_full > 1e-10 * std::max(scale_full, 1e-300);
    return report;
}

VoltageInequalityReport voltage_inequality_check(const ZipLoadBank& bank,
                                                 const Eigen::VectorXd& C,
                                                 const Eigen::VectorXd& vs,
                                                 const Eigen::VectorXd& vl) {
    const double total_power = bank.pstar().sum();
    if (total_power == 0.0) {
        throw ConfigError(
            "average-voltage inequality is undefined without constant-power loads");
    }
    VoltageInequalityReport report;
    const Eigen::VectorXd a = bank.pstar() / total_power;  // convex weights
    report.load_side = (a.array() / vl.array()).sum();
    const Eigen::VectorXd b = C / C.sum();
    report.source_side = (b.array() / vs.array()).sum();
    report.holds = report.load_side >= report.source_side;
    return report;
}

namespace {

/// Real roots of x^4 + a3 x^3 + a2 x^2 + a1 x + a0 via the companion matrix,
/// polished with a few Newton steps.
std::vector<double> quartic_real_roots(double a3, double a2, double a1, double a0) {
    Eigen::Matrix4d companion = Eigen::Matrix4d::Zero();
    companion(0, 3) = -a0;
    companion(1, 3) = -a1;
    companion(2, 3) = -a2;
    companion(3, 3) = -a3;
    companion(1, 0) = companion(2, 1) = companion(3, 2) = 1.0;

    const Eigen::EigenSolver<Eigen::Matrix4d> solver(companion);
    auto value = [&](double x) { return (((x + a3) * x + a2) * x + a1) * x + a0; };
    auto slope = [&](double x) { return ((4.0 * x + 3.0 * a3) * x + 2.0 * a2) * x + a1; };

    std::vector<double> roots;
    const double magnitude =
        std::max({std::abs(a0), std::abs(a1), std::abs(a2), std::abs(a3), 1.0});
    for (int i = 0; i < 4; ++i) {
        const std::complex<double> z = solver.eigenvalues()[i];
        if (std::abs(z.imag()) > 1e-8 * (1.0 + std::abs(z.real()))) continue;
        double x = z.real();
        for (int polish = 0; polish < 8; ++polish) {
            const double f = value(x);
            const double df = slope(x);
            if (df == 0.0) break;
            const double next = x - f / df;
            if (!std::isfinite(next)) break;
            x = next;
        }
        if (std::abs(value(x)) < 1e-6 * magnitude) roots.push_back(x);
    }
    std::sort(roots.begin(), roots.end());
    roots.erase(std::unique(roots.begin(), roots.end(),
                            [](double a, double b) { return std::abs(a - b) < 1e-9; }),
                roots.end());
    return roots;
}

std::vector<double> positive_roots(std::vector<double> roots) {
    std::vector<double> out;
    for (double r : roots) {
        if (r > 0.0) out.push_back(r);
    }
    return out;
}

}  // namespace

TNetworkQuarticRoots t_network_quartic_roots(double r1, double r2, double c, double il) {
    if (!(r1 > 0.0) || !(r2 > 0.0) || !(c > 0.0)) {
        throw ConfigError("T-network quartic requires positive resistances and product c");
    }
    TNetworkQuarticRoots roots;
    // V1^4 - r2 Il V1^3 + 0 V1^2 + c r1 Il V1 - c^2 = 0
    roots.v1 = positive_roots(quartic_real_roots(-r2 * il, 0.0, c * r1 * il, -c * c));
    roots.v2 = positive_roots(quartic_real_roots(-r1 * il, 0.0, c * r2 * il, -c * c));
    return roots;
}

}  // namespace dcgrid
