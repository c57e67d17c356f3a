#pragma once

// Run configuration: the structured key-value file behind every CLI command,
// its parser, and its canonical serializer.
//
// Format: INI-style sections with one key per line.
//
//     # comment (';' full-line comments also work)
//     [model]
//     mu    = affine(0.09, 0.21)
//     sigma = constant(0.3)
//     bound = affine(0.3, 0.3)
//     q     = 0.33
//
//     [numerics]   x_hi, tol, grid_dx
//     [sim]        dt, n_paths, t_max, seed, x0
//     [sweep]      f0_range = lo, hi; f1_range = lo, hi; resolution
//     [output]     directory, formats = csv, json
//
// Every section is optional and defaults match the library defaults.
// Parse errors carry the 1-based line number.  serialize_run_config() emits
// a canonical form whose doubles round-trip exactly, so
// parse(serialize(cfg)) == cfg holds field for field.

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "refract/error.hpp"
#include "refract/model.hpp"
#include "refract/simulate.hpp"

namespace refract {

/// Numerical knobs shared by the solve pipeline.
struct NumericsConfig {
    double x_hi = 50.0;     ///< right end of the working domain
    double tol = 1e-11;     ///< ODE relative tolerance
    double grid_dx = 1e-2;  ///< tabulation node spacing
};

/// Rectangle and resolution of the (F0, F1) barrier sweep.
struct SweepConfig {
    double f0_lo = 0.0, f0_hi = 1.0;
    double f1_lo = 0.0, f1_hi = 1.0;
    int resolution = 20;
};

/// Where and in which formats command outputs land.
struct OutputConfig {
    std::string directory = ".";
    bool csv = true;
    bool json = true;
};

struct RunConfig {
    ModelSpec model;
    NumericsConfig numerics;
    SimConfig sim;
    SweepConfig sweep;
    OutputConfig output;
};

inline bool operator==(const NumericsConfig& a, const NumericsConfig& b) {
    return a.x_hi == b.x_hi && a.tol == b.tol && a.grid_dx == b.grid_dx;
}
inline bool operator==(const SweepConfig& a, const SweepConfig& b) {
    return a.f0_lo == b.f0_lo && a.f0_hi == b.f0_hi && a.f1_lo == b.f1_lo &&
           a.f1_hi == b.f1_hi && a.resolution == b.resolution;
}
inline bool operator==(const OutputConfig& a, const OutputConfig& b) {
    return a.directory == b.directory && a.csv == b.csv && a.json == b.json;
}
inline bool operator==(const SimConfig& a, const SimConfig& b) {
    return a.dt == b.dt && a.n_paths == b.n_paths && a.t_max == b.t_max && a.seed == b.seed &&
           a.x0 == b.x0;
}
inline bool operator==(const ModelSpec& a, const ModelSpec& b) {
    return a.mu == b.mu && a.sigma == b.sigma && a.bound == b.bound && a.q == b.q;
}
inline bool operator==(const RunConfig& a, const RunConfig& b) {
    return a.model == b.model && a.numerics == b.numerics && a.sim == b.sim &&
           a.sweep == b.sweep && a.output == b.output;
}

namespace detail_cfg {

[[noreturn]] inline void fail(int line, const std::string& what) {
    raise(Errc::validation, "config line " + std::to_string(line) + ": " + what);
}

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, ',')) out.push_back(trim(cur));
    if (!s.empty() && s.back() == ',') out.emplace_back();
    return out;
}

inline double parse_double(const std::string& s, int line, const char* what) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size())
        fail(line, std::string(what) + " is not a number: '" + s + "'");
    return v;
}

inline long long parse_int(const std::string& s, int line, const char* what) {
    char* end = nullptr;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (s.empty() || end != s.c_str() + s.size())
        fail(line, std::string(what) + " is not an integer: '" + s + "'");
    return v;
}

inline std::uint64_t parse_uint(const std::string& s, int line, const char* what) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (s.empty() || end != s.c_str() + s.size() || s.front() == '-')
        fail(line, std::string(what) + " is not a nonnegative integer: '" + s + "'");
    return v;
}

inline CoefficientSpec parse_coefficient(const std::string& s, int line, const char* key) {
    const auto open = s.find('(');
    if (open == std::string::npos || s.back() != ')')
        fail(line, std::string(key) + " must look like kind(p0, p1, ...), got '" + s + "'");
    const std::string kind = trim(s.substr(0, open));
    const std::vector<std::string> args = split_commas(s.substr(open + 1, s.size() - open - 2));
    std::vector<double> p;
    p.reserve(args.size());
    for (const auto& a : args) p.push_back(parse_double(a, line, key));
    const auto want = [&](std::size_t n) {
        if (p.size() != n)
            fail(line, std::string(key) + ": " + kind + " takes " + std::to_string(n) +
                           " parameters, got " + std::to_string(p.size()));
    };
    if (kind == "affine") {
        want(2);
        return CoefficientSpec::affine(p[0], p[1]);
    }
    if (kind == "logistic") {
        want(3);
        return CoefficientSpec::logistic(p[0], p[1], p[2]);
    }
    if (kind == "sqrt_affine") {
        want(2);
        return CoefficientSpec::sqrt_affine(p[0], p[1]);
    }
    if (kind == "constant") {
        want(1);
        return CoefficientSpec::constant(p[0]);
    }
    fail(line, std::string(key) + ": unknown coefficient kind '" + kind +
                   "' (expected affine, logistic, sqrt_affine, or constant)");
}

/// Shortest decimal form that parses back to exactly the same double.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.15g", v);
    if (std::strtod(buf, nullptr) != v) std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string format_coefficient(const CoefficientSpec& c) {
    switch (c.kind) {
        case CoeffKind::affine:
            return "affine(" + format_double(c.p0) + ", " + format_double(c.p1) + ")";
        case CoeffKind::logistic:
            return "logistic(" + format_double(c.p0) + ", " + format_double(c.p1) + ", " +
                   format_double(c.p2) + ")";
        case CoeffKind::sqrt_affine:
            return "sqrt_affine(" + format_double(c.p0) + ", " + format_double(c.p1) + ")";
        case CoeffKind::constant:
            return "constant(" + format_double(c.p0) + ")";
        case CoeffKind::custom:
            break;
    }
    raise(Errc::validation, "custom coefficient tables cannot be written to a config file");
}

inline void parse_range(const std::string& v, int line, const char* key, double& lo, double& hi) {
    const auto parts = split_commas(v);
    if (parts.size() != 2) fail(line, std::string(key) + " must be 'lo, hi'");
    lo = parse_double(parts[0], line, key);
    hi = parse_double(parts[1], line, key);
    if (!(lo <= hi)) fail(line, std::string(key) + " is empty: lo must not exceed hi");
}

}  // namespace detail_cfg

/// Parse a configuration from text.  Errors carry 1-based line numbers.
inline RunConfig parse_run_config(const std::string& text) {
    using namespace detail_cfg;
    RunConfig cfg;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line = 0;
    bool formats_seen_csv = false, formats_seen_json = false;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        const std::string s = trim(raw);
        if (s.empty() || s.front() == ';') continue;
        if (s.front() == '[') {
            if (s.back() != ']') fail(line, "unterminated section header");
            section = trim(s.substr(1, s.size() - 2));
            if (section != "model" && section != "numerics" && section != "sim" &&
                section != "sweep" && section != "output")
                fail(line, "unknown section [" + section + "]");
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) fail(line, "expected 'key = value', got '" + s + "'");
        const std::string key = trim(s.substr(0, eq));
        const std::string val = trim(s.substr(eq + 1));
        if (section.empty()) fail(line, "key '" + key + "' appears before any [section]");
        if (val.empty()) fail(line, "key '" + key + "' has no value");

        if (section == "model") {
            if (key == "mu")
                cfg.model.mu = parse_coefficient(val, line, "mu");
            else if (key == "sigma")
                cfg.model.sigma = parse_coefficient(val, line, "sigma");
            else if (key == "bound")
                cfg.model.bound = parse_coefficient(val, line, "bound");
            else if (key == "q")
                cfg.model.q = parse_double(val, line, "q");
            else
                fail(line, "unknown key '" + key + "' in [model]");
        } else if (section == "numerics") {
            if (key == "x_hi")
                cfg.numerics.x_hi = parse_double(val, line, "x_hi");
            else if (key == "tol")
                cfg.numerics.tol = parse_double(val, line, "tol");
            else if (key == "grid_dx")
                cfg.numerics.grid_dx = parse_double(val, line, "grid_dx");
            else
                fail(line, "unknown key '" + key + "' in [numerics]");
        } else if (section == "sim") {
            if (key == "dt")
                cfg.sim.dt = parse_double(val, line, "dt");
            else if (key == "n_paths")
                cfg.sim.n_paths = parse_int(val, line, "n_paths");
            else if (key == "t_max")
                cfg.sim.t_max = parse_double(val, line, "t_max");
            else if (key == "seed")
                cfg.sim.seed = parse_uint(val, line, "seed");
            else if (key == "x0")
                cfg.sim.x0 = parse_double(val, line, "x0");
            else
                fail(line, "unknown key '" + key + "' in [sim]");
        } else if (section == "sweep") {
            if (key == "f0_range")
                parse_range(val, line, "f0_range", cfg.sweep.f0_lo, cfg.sweep.f0_hi);
            else if (key == "f1_range")
                parse_range(val, line, "f1_range", cfg.sweep.f1_lo, cfg.sweep.f1_hi);
            else if (key == "resolution") {
                cfg.sweep.resolution = static_cast<int>(parse_int(val, line, "resolution"));
                if (cfg.sweep.resolution < 2) fail(line, "resolution must be at least 2");
            } else
                fail(line, "unknown key '" + key + "' in [sweep]");
        } else {  // output
            if (key == "directory")
                cfg.output.directory = val;
            else if (key == "formats") {
                cfg.output.csv = cfg.output.json = false;
                for (const auto& f : split_commas(val)) {
                    if (f == "csv")
                        cfg.output.csv = formats_seen_csv = true;
                    else if (f == "json")
                        cfg.output.json = formats_seen_json = true;
                    else
                        fail(line, "unknown format '" + f + "' (expected csv and/or json)");
                }
                if (!formats_seen_csv && !formats_seen_json)
                    fail(line, "formats must list csv and/or json");
            } else
                fail(line, "unknown key '" + key + "' in [output]");
        }
    }
    return cfg;
}

/// Parse a configuration file from disk.
inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(Errc::validation, "cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str());
}

/// Canonical text form: parse(serialize(cfg)) == cfg.
inline std::string serialize_run_config(const RunConfig& cfg) {
    using detail_cfg::format_coefficient;
    using detail_cfg::format_double;
    std::ostringstream out;
    out << "[model]\n";
    out << "mu = " << format_coefficient(cfg.model.mu) << "\n";
    out << "sigma = " << format_coefficient(cfg.model.sigma) << "\n";
    out << "bound = " << format_coefficient(cfg.model.bound) << "\n";
    out << "q = " << format_double(cfg.model.q) << "\n";
    out << "\n[numerics]\n";
    out << "x_hi = " << format_double(cfg.numerics.x_hi) << "\n";
    out << "tol = " << format_double(cfg.numerics.tol) << "\n";
    out << "grid_dx = " << format_double(cfg.numerics.grid_dx) << "\n";
    out << "\n[sim]\n";
    out << "dt = " << format_double(cfg.sim.dt) << "\n";
    out << "n_paths = " << cfg.sim.n_paths << "\n";
    out << "t_max = " << format_double(cfg.sim.t_max) << "\n";
    out << "seed = " << cfg.sim.seed << "\n";
    out << "x0 = " << format_double(cfg.sim.x0) << "\n";
    out << "\n[sweep]\n";
    out << "f0_range = " << format_double(cfg.sweep.f0_lo) << ", "
        << format_double(cfg.sweep.f0_hi) << "\n";
    out << "f1_range = " << format_double(cfg.sweep.f1_lo) << ", "
        << format_double(cfg.sweep.f1_hi) << "\n";
    out << "resolution = " << cfg.sweep.resolution << "\n";
    out << "\n[output]\n";
    out << "directory = " << cfg.output.directory << "\n";
    out << "formats = ";
    if (cfg.output.csv && cfg.output.json)
        out << "csv, json";
    else if (cfg.output.csv)
        out << "csv";
    else
        out << "json";
    out << "\n";
    return out.str();
}

}  // namespace refract
