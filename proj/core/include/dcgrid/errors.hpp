#pragma once

#include <stdexcept>
#include <string>

namespace dcgrid {

/// Base class for every error thrown by the toolkit.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid scenario files, malformed parameters, inconsistent dimensions.
/// Maps to CLI exit code 2.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

/// Any failure of the numerical pipeline (collapse, non-convergence,
/// stiffness). Maps to CLI exit code 1.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(what) {}
};

/// A bus voltage fell to or below the voltage floor during evaluation or
/// integration. `bus` is the 1-based node id in source-then-load ordering;
/// `time` is the simulation time (NaN when thrown outside a simulation).
class VoltageCollapseError : public NumericalError {
public:
    VoltageCollapseError(double time, int bus, const std::string& what)
        : NumericalError(what), time_(time), bus_(bus) {}

    [[nodiscard]] double time() const noexcept { return time_; }
    [[nodiscard]] int bus() const noexcept { return bus_; }

private:
    double time_;
    int bus_;
};

/// The damped Newton solve of the algebraic load-voltage constraint failed
/// to converge; carries the last residual norm (amperes).
class AlgebraicSolveError : public NumericalError {
public:
    AlgebraicSolveError(double time, double residual, const std::string& what)
        : NumericalError(what), time_(time), residual_(residual) {}

    [[nodiscard]] double time() const noexcept { return time_; }
    [[nodiscard]] double residual() const noexcept { return residual_; }

private:
    double time_;
    double residual_;
};

/// Adaptive step size underflowed; the problem is too stiff for the
/// explicit integrator at the requested tolerances.
class StiffnessError : public NumericalError {
public:
    StiffnessError(double time, double dt, const std::string& what)
        : NumericalError(what), time_(time), dt_(dt) {}

    [[nodiscard]] double time() const noexcept { return time_; }
    [[nodiscard]] double dt() const noexcept { return dt_; }

private:
    double time_;
    double dt_;
};

/// An equilibrium Newton solve failed; carries the final residual norm.
class ConvergenceError : public NumericalError {
public:
    ConvergenceError(double residual, const std::string& what)
        : NumericalError(what), residual_(residual) {}

    [[nodiscard]] double residual() const noexcept { return residual_; }

private:
    double residual_;
};

}  // namespace dcgrid
