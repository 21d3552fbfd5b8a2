#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dcgrid {

/// One recorded observation of the closed-loop state and derived signals.
struct TrajectorySample {
    double t = 0.0;                  ///< seconds
    Eigen::VectorXd vs;              ///< source voltages (volts)
    Eigen::VectorXd vl;              ///< load voltages (volts)
    Eigen::VectorXd p;               ///< DAPI auxiliary currents (amperes); empty otherwise
    Eigen::VectorXd source_power;    ///< P_s (watts)
    double energy = 0.0;             ///< centered energy vs the reference equilibrium; NaN if unavailable
    double geomean_log = 0.0;        ///< 1^T C ln(V_s), the conserved quantity
};

/// Time-stamped record of a simulation, with strictly increasing sample
/// times; the first sample is the initial condition.
struct Trajectory {
    int n_sources = 0;
    int n_loads = 0;
    bool has_p = false;  ///< whether DAPI auxiliary currents are recorded
    std::vector<TrajectorySample> samples;

    [[nodiscard]] const TrajectorySample& front() const { return samples.front(); }
    [[nodiscard]] const TrajectorySample& back() const { return samples.back(); }
    [[nodiscard]] bool empty() const noexcept { return samples.empty(); }
    [[nodiscard]] std::size_t size() const noexcept { return samples.size(); }
};

/// Writes the CSV form: header
///   t,Vs_1..Vs_ns,Vl_1..Vl_nl,P_1..P_ns[,p_1..p_ns],M,geomean_log
/// with every value printed to 17 significant digits for bit-stable
/// re-parsing.
void write_csv(const Trajectory& traj, std::ostream& out);
void write_csv(const Trajectory& traj, const std::string& path);

/// Parses a CSV produced by write_csv (dimensions recovered from the header).
[[nodiscard]] Trajectory read_csv(std::istream& in);
[[nodiscard]] Trajectory read_csv(const std::string& path);

}  // namespace dcgrid
