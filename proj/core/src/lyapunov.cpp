#include "dcgrid/lyapunov.hpp"

#include <cmath>
#include <utility>

#include "dcgrid/analysis.hpp"
#include "dcgrid/controllers.hpp"
#include "dcgrid/errors.hpp"

namespace dcgrid {

LyapunovContext LyapunovContext::at_equilibrium(ConductanceBlocks blocks, ZipLoadBank bank,
                                                Eigen::VectorXd C, Eigen::MatrixXd comm_lap,
                                                Eigen::VectorXd vs_bar, Eigen::VectorXd vl_bar) {
    LyapunovContext ctx{std::move(blocks), std::move(bank), std::move(C), std::move(comm_lap),
                        std::move(vs_bar), std::move(vl_bar), {}};
    const double p_star = shared_power_level(ctx.bank, ctx.C, ctx.vs_bar, ctx.vl_bar);
    ctx.source_power_bar = ctx.C * p_star;
    return ctx;
}

namespace {

void check_positive(const Eigen::VectorXd& vs, const Eigen::VectorXd& vl) {
    if (!(vs.array() > 0.0).all() || !(vl.array() > 0.0).all()) {
        throw NumericalError("energy function evaluated outside the positive orthant");
    }
}

/// Quadratic part 1/2 V^T (B Gamma B^T + diag(0, Ystar)) V.
double quadratic_part(const LyapunovContext& ctx, const Eigen::VectorXd& vs,
                      const Eigen::VectorXd& vl) {
    const double network = vs.dot(ctx.blocks.Yss * vs) + 2.0 * vs.dot(ctx.blocks.Ysl * vl) +
                           vl.dot(ctx.blocks.Yll * vl);
    const double shunts = (ctx.bank.ystar().array() * vl.array().square()).sum();
    return 0.5 * (network + shunts);
}

/// Gradient of the raw energy M (not the Bregman shift).
std::pair<Eigen::VectorXd, Eigen::VectorXd> raw_gradient(const LyapunovContext& ctx,
                                                         const Eigen::VectorXd& vs,
                                                         const Eigen::VectorXd& vl) {
    Eigen::VectorXd gs = ctx.blocks.Yss * vs + ctx.blocks.Ysl * vl -
                         (ctx.source_power_bar.array() / vs.array()).matrix();
    Eigen::VectorXd gl = ctx.blocks.Yls * vs + ctx.blocks.Yll * vl +
                         ctx.bank.ystar().cwiseProduct(vl) -
                         (ctx.bank.pstar().array() / vl.array()).matrix();
    return {std::move(gs), std::move(gl)};
}

}  // namespace

double energy(const LyapunovContext& ctx, const Eigen::VectorXd& vs, const Eigen::VectorXd& vl) {
    check_positive(vs, vl);
    return quadratic_part(ctx, vs, vl) -
           (ctx.source_power_bar.array() * vs.array().log()).sum() -
           (ctx.bank.pstar().array() * vl.array().log()).sum();
}

double bregman(const LyapunovContext& ctx, const Eigen::VectorXd& vs, const Eigen::VectorXd& vl) {
    check_positive(vs, vl);
    const auto [gs_bar, gl_bar] = raw_gradient(ctx, ctx.vs_bar, ctx.vl_bar);
    return energy(ctx, vs, vl) - energy(ctx, ctx.vs_bar, ctx.vl_bar) -
           gs_bar.dot(vs - ctx.vs_bar) - gl_bar.dot(vl - ctx.vl_bar);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> bregman_gradient(const LyapunovContext& ctx,
                                                             const Eigen::VectorXd& vs,
                                                             const Eigen::VectorXd& vl) {
    check_positive(vs, vl);
    const Eigen::VectorXd power = source_powers(ctx.blocks, vs, vl);
    Eigen::VectorXd gs = ((power - ctx.source_power_bar).array() / vs.array()).matrix();
    Eigen::VectorXd gl = ctx.blocks.Yls * vs + ctx.blocks.Yll * vl - load_current(ctx.bank, vl);
    return {std::move(gs), std::move(gl)};
}

Eigen::MatrixXd energy_hessian(const LyapunovContext& ctx, const Eigen::VectorXd& vs,
                               const Eigen::VectorXd& vl) {
    check_positive(vs, vl);
    const int ns = ctx.blocks.n_sources();
    const int nl = ctx.blocks.n_loads();
    Eigen::MatrixXd hess = ctx.blocks.full();
    hess.diagonal().head(ns) += (ctx.source_power_bar.array() / vs.array().square()).matrix();
    hess.diagonal().tail(nl) += ctx.bank.ystar();
    hess.diagonal().tail(nl) += (ctx.bank.pstar().array() / vl.array().square()).matrix();
    return hess;
}

double gradient_flow_residual(const LyapunovContext& ctx, const Eigen::VectorXd& vs,
                              const Eigen::VectorXd& vl) {
    const ControllerParams params{ctx.C, Eigen::VectorXd()};
    const Eigen::VectorXd rhs = consensus_rhs(ctx.blocks, ctx.comm_lap, params, vs, vl);
    const auto [gs, gl] = bregman_gradient(ctx, vs, vl);
    const Eigen::VectorXd defect =
        ctx.C.cwiseProduct(rhs) +
        vs.cwiseProduct(ctx.comm_lap * vs.cwiseProduct(gs).cwiseQuotient(ctx.C));
    return defect.lpNorm<Eigen::Infinity>();
}

double dissipation_rate(const LyapunovContext& ctx, const Eigen::VectorXd& source_power) {
    const Eigen::VectorXd per_weight = source_power.cwiseQuotient(ctx.C);
    return -per_weight.dot(ctx.comm_lap * per_weight);
}

DecreaseAuditReport decrease_audit(const LyapunovContext& ctx, const Trajectory& traj,
                                   double t_from, double drift_tolerance) {
    DecreaseAuditReport report;
    report.drift_tolerance = drift_tolerance;

    double prev_energy = 0.0;
    double prev_rate = 0.0;
    double prev_t = 0.0;
    bool have_prev = false;
    double rate_scale = 0.0;

    for (const TrajectorySample& s : traj.samples) {
        if (s.t < t_from) continue;
        const double value = bregman(ctx, s.vs, s.vl);
        const double rate = dissipation_rate(ctx, s.source_power);
        rate_scale = std::max(rate_scale, std::abs(rate));
        report.max_rate = report.samples_audited == 0 ? rate : std::max(report.max_rate, rate);
        if (have_prev) {
            report.max_energy_increase =
                std::max(report.max_energy_increase, value - prev_energy);
            const double fd = (value - prev_energy) / (s.t - prev_t);
            const double mid_rate = 0.5 * (rate + prev_rate);
            report.max_fd_rate_gap = std::max(report.max_fd_rate_gap, std::abs(fd - mid_rate));
        }
        prev_energy = value;
        prev_rate = rate;
        prev_t = s.t;
        have_prev = true;
        ++report.samples_audited;
    }

    report.rate_margin = 1e-12 * std::max(1.0, rate_scale);
    report.energy_nonincreasing = report.max_energy_increase <= drift_tolerance;
    report.rate_nonpositive = report.max_rate <= report.rate_margin;
    return report;
}

bool inside_positive_sublevel(const LyapunovContext& ctx, const Eigen::VectorXd& vs,
                              const Eigen::VectorXd& vl, int n_samples) {
    check_positive(vs, vl);
    const double level = bregman(ctx, vs, vl);
    for (int k = 1; k < n_samples; ++k) {
        const double theta = static_cast<double>(k) / n_samples;
        const Eigen::VectorXd vs_mid = ctx.vs_bar + theta * (vs - ctx.vs_bar);
        const Eigen::VectorXd vl_mid = ctx.vl_bar + theta * (vl - ctx.vl_bar);
        if (!(vs_mid.array() > 0.0).all() || !(vl_mid.array() > 0.0).all()) return false;
        if (bregman(ctx, vs_mid, vl_mid) > level + 1e-12 * std::max(1.0, std::abs(level))) {
            return false;
        }
    }
    return true;
}

}  // namespace dcgrid
