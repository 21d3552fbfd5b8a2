#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "dcgrid/errors.hpp"
#include "dcgrid/trajectory.hpp"

using namespace dcgrid;

namespace {

Trajectory sample_trajectory(bool with_p) {
    Trajectory traj;
    traj.n_sources = 2;
    traj.n_loads = 1;
    traj.has_p = with_p;
    double t = 0.0;
    for (int k = 0; k < 4; ++k) {
        TrajectorySample s;
        s.t = t;
        s.vs = (Eigen::VectorXd(2) << 50.0 - 0.1 * k, 46.08 + 0.07 * k).finished();
        s.vl = Eigen::VectorXd::Constant(1, 46.0 + 1e-3 * k);
        if (with_p) s.p = (Eigen::VectorXd(2) << 1.0 / 3.0 + k, 2.0 - k).finished();
        s.source_power = (Eigen::VectorXd(2) << 90.0 + k, 83.0 - k).finished();
        s.energy = std::exp(-static_cast<double>(k)) / 7.0;
        s.geomean_log = 2.0 * std::log(48.0);
        traj.samples.push_back(s);
        t += 0.125;  // exactly representable
    }
    return traj;
}

}  // namespace

TEST_CASE("CSV round trip is bit exact") {
    for (bool with_p : {false, true}) {
        const Trajectory traj = sample_trajectory(with_p);
        std::ostringstream out;
        write_csv(traj, out);
        std::istringstream in(out.str());
        const Trajectory back = read_csv(in);

        REQUIRE(back.n_sources == traj.n_sources);
        REQUIRE(back.n_loads == traj.n_loads);
        REQUIRE(back.has_p == with_p);
        REQUIRE(back.size() == traj.size());
        for (std::size_t i = 0; i < traj.size(); ++i) {
            const TrajectorySample& a = traj.samples[i];
            const TrajectorySample& b = back.samples[i];
            CHECK(a.t == b.t);
            CHECK((a.vs - b.vs).cwiseAbs().maxCoeff() == 0.0);
            CHECK((a.vl - b.vl).cwiseAbs().maxCoeff() == 0.0);
            if (with_p) CHECK((a.p - b.p).cwiseAbs().maxCoeff() == 0.0);
            CHECK((a.source_power - b.source_power).cwiseAbs().maxCoeff() == 0.0);
            CHECK(a.energy == b.energy);
            CHECK(a.geomean_log == b.geomean_log);
        }
    }
}

TEST_CASE("CSV header names the columns by role") {
    const Trajectory traj = sample_trajectory(true);
    std::ostringstream out;
    write_csv(traj, out);
    const std::string text = out.str();
    const std::string header = text.substr(0, text.find('\n'));
    CHECK(header == "t,Vs_1,Vs_2,Vl_1,P_1,P_2,p_1,p_2,M,geomean_log");
}

TEST_CASE("non-finite energies survive the round trip") {
    Trajectory traj = sample_trajectory(false);
    traj.samples[0].energy = std::numeric_limits<double>::quiet_NaN();
    traj.samples[1].energy = std::numeric_limits<double>::infinity();
    std::ostringstream out;
    write_csv(traj, out);
    std::istringstream in(out.str());
    const Trajectory back = read_csv(in);
    CHECK(std::isnan(back.samples[0].energy));
    CHECK(std::isinf(back.samples[1].energy));
}

TEST_CASE("reader rejects malformed documents") {
    SUBCASE("empty input") {
        std::istringstream in("");
        CHECK_THROWS_AS((void)read_csv(in), ConfigError);
    }
    SUBCASE("foreign header") {
        std::istringstream in("time,Vs_1\n0,48\n");
        CHECK_THROWS_AS((void)read_csv(in), ConfigError);
    }
    SUBCASE("header without samples") {
        std::istringstream in("t,Vs_1,Vl_1,P_1,M,geomean_log\n");
        CHECK_THROWS_AS((void)read_csv(in), ConfigError);
    }
    SUBCASE("wrong field count") {
        std::istringstream in("t,Vs_1,Vl_1,P_1,M,geomean_log\n0,48,46\n");
        try {
            (void)read_csv(in);
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("expected") != std::string::npos);
        }
    }
    SUBCASE("unparseable number") {
        std::istringstream in("t,Vs_1,Vl_1,P_1,M,geomean_log\n0,48,forty,90,0,7.7\n");
        CHECK_THROWS_AS((void)read_csv(in), ConfigError);
    }
    SUBCASE("non-increasing times") {
        std::istringstream in(
            "t,Vs_1,Vl_1,P_1,M,geomean_log\n"
            "0,48,46,90,0,7.7\n"
            "0,48,46,90,0,7.7\n");
        CHECK_THROWS_AS((void)read_csv(in), ConfigError);
    }
}
