#include "dcgrid/controllers.hpp"

namespace dcgrid {

Eigen::VectorXd source_currents(const ConductanceBlocks& blocks, const Eigen::VectorXd& vs,
                                const Eigen::VectorXd& vl) {
    return blocks.Yss * vs + blocks.Ysl * vl;
}

Eigen::VectorXd source_powers(const ConductanceBlocks& blocks, const Eigen::VectorXd& vs,
                              const Eigen::VectorXd& vl) {
    return vs.cwiseProduct(source_currents(blocks, vs, vl));
}

Eigen::VectorXd consensus_rhs(const ConductanceBlocks& blocks, const Eigen::MatrixXd& comm_lap,
                              const ControllerParams& params, const Eigen::VectorXd& vs,
                              const Eigen::VectorXd& vl) {
    const Eigen::VectorXd power_per_weight =
        source_powers(blocks, vs, vl).cwiseQuotient(params.C);
    return -vs.cwiseProduct(comm_lap * power_per_weight).cwiseQuotient(params.C);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> dapi_rhs(const ConductanceBlocks& blocks,
                                                     const Eigen::MatrixXd& comm_lap,
                                                     const ControllerParams& params,
                                                     const Eigen::VectorXd& vs,
                                                     const Eigen::VectorXd& vl,
                                                     const Eigen::VectorXd& p) {
    const Eigen::VectorXd is = source_currents(blocks, vs, vl);
    Eigen::VectorXd dvs = (p - is).cwiseQuotient(params.C);
    const Eigen::VectorXd averaged = comm_lap * vs.cwiseProduct(p).cwiseQuotient(params.C);
    Eigen::VectorXd dp = (is - p - averaged).cwiseQuotient(params.D);
    return {std::move(dvs), std::move(dp)};
}

Eigen::VectorXd constant_voltage_rhs(const ConductanceBlocks& blocks,
                                     const Eigen::MatrixXd& comm_lap,
                                     const ControllerParams& params, const Eigen::VectorXd& vs,
                                     const Eigen::VectorXd& vl_bar) {
    return consensus_rhs(blocks, comm_lap, params, vs, vl_bar);
}

Eigen::VectorXd capacitive_load_rhs(const ConductanceBlocks& blocks, const ZipLoadBank& bank,
                                    const Eigen::VectorXd& cl, const Eigen::VectorXd& vs,
                                    const Eigen::VectorXd& vl) {
    return zip_current_residual(blocks, bank, vs, vl).cwiseQuotient(cl);
}

}  // namespace dcgrid
