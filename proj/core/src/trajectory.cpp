#include "dcgrid/trajectory.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "dcgrid/errors.hpp"

namespace dcgrid {

namespace {

void append_number(std::string& line, double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    line += buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream stream(line);
    while (std::getline(stream, field, ',')) fields.push_back(field);
    return fields;
}

double parse_number(const std::string& field, std::size_t line_no) {
    try {
        return std::stod(field);
    } catch (const std::exception&) {
        throw ConfigError("trajectory CSV line " + std::to_string(line_no) +
                          ": cannot parse number '" + field + "'");
    }
}

}  // namespace

void write_csv(const Trajectory& traj, std::ostream& out) {
    std::string line = "t";
    for (int i = 1; i <= traj.n_sources; ++i) line += ",Vs_" + std::to_string(i);
    for (int i = 1; i <= traj.n_loads; ++i) line += ",Vl_" + std::to_string(i);
    for (int i = 1; i <= traj.n_sources; ++i) line += ",P_" + std::to_string(i);
    if (traj.has_p) {
        for (int i = 1; i <= traj.n_sources; ++i) line += ",p_" + std::to_string(i);
    }
    line += ",M,geomean_log\n";
    out << line;

    for (const TrajectorySample& s : traj.samples) {
        line.clear();
        append_number(line, s.t);
        auto append_vector = [&line](const Eigen::VectorXd& v) {
            for (int i = 0; i < v.size(); ++i) {
                line += ',';
                append_number(line, v[i]);
            }
        };
        append_vector(s.vs);
        append_vector(s.vl);
        append_vector(s.source_power);
        if (traj.has_p) append_vector(s.p);
        line += ',';
        append_number(line, s.energy);
        line += ',';
        append_number(line, s.geomean_log);
        line += '\n';
        out << line;
    }
}

void write_csv(const Trajectory& traj, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open trajectory file for writing: " + path);
    write_csv(traj, out);
}

Trajectory read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("trajectory CSV is empty");
    const auto header = split_csv_line(line);
    if (header.empty() || header.front() != "t") {
        throw ConfigError("trajectory CSV header must start with 't'");
    }

    Trajectory traj;
    std::size_t idx = 1;
    auto count_prefixed = [&](const std::string& prefix) {
        int count = 0;
        while (idx < header.size() && header[idx].rfind(prefix, 0) == 0) {
            ++count;
            ++idx;
        }
        return count;
    };
    traj.n_sources = count_prefixed("Vs_");
    traj.n_loads = count_prefixed("Vl_");
    const int n_powers = count_prefixed("P_");
    const int n_aux = count_prefixed("p_");
    traj.has_p = n_aux > 0;
    if (n_powers != traj.n_sources || (traj.has_p && n_aux != traj.n_sources) ||
        idx + 2 != header.size() || header[idx] != "M" || header[idx + 1] != "geomean_log") {
        throw ConfigError("trajectory CSV header is not in the expected layout");
    }

    const std::size_t expected =
        1 + 2 * static_cast<std::size_t>(traj.n_sources) + traj.n_loads +
        (traj.has_p ? traj.n_sources : 0) + 2;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != expected) {
            throw ConfigError("trajectory CSV line " + std::to_string(line_no) + " has " +
                              std::to_string(fields.size()) + " fields, expected " +
                              std::to_string(expected));
        }
        TrajectorySample s;
        std::size_t f = 0;
        s.t = parse_number(fields[f++], line_no);
        auto read_vector = [&](int n) {
            Eigen::VectorXd v(n);
            for (int i = 0; i < n; ++i) v[i] = parse_number(fields[f++], line_no);
            return v;
        };
        s.vs = read_vector(traj.n_sources);
        s.vl = read_vector(traj.n_loads);
        s.source_power = read_vector(traj.n_sources);
        if (traj.has_p) s.p = read_vector(traj.n_sources);
        s.energy = parse_number(fields[f++], line_no);
        s.geomean_log = parse_number(fields[f++], line_no);
        traj.samples.push_back(std::move(s));
    }
    if (traj.samples.empty()) throw ConfigError("trajectory CSV has no samples");
    for (std::size_t k = 1; k < traj.samples.size(); ++k) {
        if (!(traj.samples[k].t > traj.samples[k - 1].t)) {
            throw ConfigError("trajectory CSV sample times are not strictly increasing");
        }
    }
    return traj;
}

Trajectory read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open trajectory file for reading: " + path);
    return read_csv(in);
}

}  // namespace dcgrid
