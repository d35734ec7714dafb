#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"
#include "model.hpp"
#include "parametric.hpp"

namespace reflmfg {

/**
 * One experiment description: which model, which grids, and the run knobs.
 * Parsed from a flat key=value file with [model] and [run] sections.  Scalars
 * accept plain decimals or integer fractions such as 1/25, so grid steps can
 * be written exactly.
 */
struct RunConfig {
    std::string preset;                   ///< "section5", or empty with tables
    std::optional<ParametricSpec> tables; ///< coefficient family when no preset

    double L = 1.0;
    double T = 1.0;
    double sigma = 1.0;
    std::vector<double> controls;

    std::vector<double> h_list;
    double x0 = 0.0;
    int max_iters = 15;
    double stop_factor = 4.0;
    std::uint64_t seed = 1;
    long mc_samples = 10000;
    std::string output_dir = "out";

    MfgModel make_model() const {
        if (preset == "section5") {
            MfgModel m = preset_section5();
            m.sigma = sigma;
            m.controls = controls;
            return m;
        }
        ParametricSpec spec = *tables;
        spec.sigma = sigma;
        spec.controls = controls;
        return build_parametric_model(spec);
    }

    void validate() const {
        auto fail = [](const std::string& field, const std::string& msg) {
            throw ConfigError("config field '" + field + "': " + msg);
        };
        if (preset.empty() && !tables) fail("preset", "no model given");
        if (h_list.empty()) fail("h", "at least one grid step is required");
        for (double h : h_list) {
            try {
                build_discretization(h, L, T, sigma);
            } catch (const Error& e) {
                fail("h", "step " + fmt_g(h) + " is unusable: " + e.what());
            }
        }
        if (!(x0 >= 0.0 && x0 <= L)) fail("x0", "must lie in [0, L]");
        if (controls.empty()) fail("controls", "must not be empty");
        if (max_iters < 1) fail("max_iters", "must be >= 1");
        if (!(stop_factor > 0.0)) fail("stop_factor", "must be positive");
        if (mc_samples < 1) fail("mc_samples", "must be >= 1");
        if (output_dir.empty()) fail("output_dir", "must not be empty");
    }

    static std::string fmt_g(double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    }
};

/// Parses "0.25", "1/4", "2.5e-1"; ConfigError on anything else.
inline double parse_scalar(const std::string& text, const std::string& where) {
    const char* s = text.c_str();
    char* end = nullptr;
    const double num = std::strtod(s, &end);
    if (end == s) throw ConfigError(where + ": expected a number, got '" + text + "'");
    while (*end == ' ') ++end;
    if (*end == '/') {
        const char* den_s = end + 1;
        while (*den_s == ' ') ++den_s;
        char* den_end = nullptr;
        const double den = std::strtod(den_s, &den_end);
        if (den_end == den_s || den == 0.0)
            throw ConfigError(where + ": bad fraction '" + text + "'");
        end = den_end;
        while (*end == ' ') ++end;
        if (*end != '\0') throw ConfigError(where + ": trailing text in '" + text + "'");
        return num / den;
    }
    if (*end != '\0') throw ConfigError(where + ": trailing text in '" + text + "'");
    return num;
}

namespace detail {

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
    return out;
}

} // namespace detail

/**
 * Parses config text.  `name` labels error messages, normally the file path.
 * Unknown keys, duplicate keys, and malformed values raise ConfigError with
 * the offending line; cross-field constraints are checked by validate().
 */
inline RunConfig parse_config_text(const std::string& text, const std::string& name) {
    RunConfig cfg;
    cfg.controls.clear();
    ParametricSpec tables;
    bool any_table_key = false;
    bool x0_set = false, l_set = false, t_set = false, sigma_set = false,
         controls_set = false, moments_set = false;

    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    std::set<std::string> seen;

    auto err = [&](const std::string& msg) {
        throw ConfigError(name + ":" + std::to_string(lineno) + ": " + msg);
    };

    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find_first_of("#;");
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') err("unterminated section header");
            section = detail::trim(line.substr(1, line.size() - 2));
            if (section != "model" && section != "run") err("unknown section '" + section + "'");
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos) err("expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty()) err("empty key");
        if (section.empty()) err("key '" + key + "' outside any section");
        if (!seen.insert(section + "." + key).second) err("duplicate key '" + key + "'");
        const std::string where = name + ":" + std::to_string(lineno) + ": " + key;

        auto poly = [&](Polynomial& dst) {
            try {
                dst = Polynomial::parse(value);
            } catch (const SpecError& e) {
                err(std::string("key '") + key + "': " + e.what());
            }
            any_table_key = true;
        };

        if (section == "model") {
            if (key == "preset") {
                if (value != "section5") err("unknown preset '" + value + "'");
                cfg.preset = value;
            } else if (key == "L") {
                cfg.L = parse_scalar(value, where);
                l_set = true;
            } else if (key == "T") {
                cfg.T = parse_scalar(value, where);
                t_set = true;
            } else if (key == "sigma") {
                cfg.sigma = parse_scalar(value, where);
                sigma_set = true;
            } else if (key == "controls") {
                for (const auto& item : detail::split_list(value))
                    cfg.controls.push_back(parse_scalar(item, where));
                controls_set = true;
            } else if (key == "b1") {
                poly(tables.b1);
            } else if (key == "b2") {
                poly(tables.b2);
            } else if (key == "a1") {
                poly(tables.a1);
            } else if (key == "a2") {
                poly(tables.a2);
            } else if (key == "a3") {
                poly(tables.a3);
            } else if (key == "a4") {
                poly(tables.a4);
            } else if (key == "a5") {
                poly(tables.a5);
            } else if (key == "a6") {
                poly(tables.a6);
            } else if (key == "a7") {
                poly(tables.a7);
            } else if (key == "g0") {
                poly(tables.g0);
            } else if (key == "k") {
                poly(tables.k);
            } else if (key == "c1") {
                tables.c1 = parse_scalar(value, where);
                any_table_key = true;
            } else if (key == "c2") {
                tables.c2 = parse_scalar(value, where);
                any_table_key = true;
            } else if (key == "moments") {
                for (const auto& item : detail::split_list(value)) {
                    try {
                        tables.moment_bases.push_back(Polynomial::parse(item));
                    } catch (const SpecError& e) {
                        err(std::string("key 'moments': ") + e.what());
                    }
                }
                any_table_key = true;
                moments_set = true;
            } else {
                err("unknown key '" + key + "' in [model]");
            }
        } else { // run
            if (key == "h") {
                for (const auto& item : detail::split_list(value))
                    cfg.h_list.push_back(parse_scalar(item, where));
            } else if (key == "x0") {
                cfg.x0 = parse_scalar(value, where);
                x0_set = true;
            } else if (key == "max_iters") {
                cfg.max_iters = static_cast<int>(parse_scalar(value, where));
            } else if (key == "stop_factor") {
                cfg.stop_factor = parse_scalar(value, where);
            } else if (key == "seed") {
                cfg.seed = static_cast<std::uint64_t>(parse_scalar(value, where));
            } else if (key == "mc_samples") {
                cfg.mc_samples = static_cast<long>(parse_scalar(value, where));
            } else if (key == "output_dir") {
                cfg.output_dir = value;
            } else {
                err("unknown key '" + key + "' in [run]");
            }
        }
    }

    if (cfg.preset == "section5") {
        if (any_table_key)
            throw ConfigError(name + ": preset and coefficient tables are mutually exclusive");
        Section5Domain dom;
        if (!l_set) cfg.L = dom.L;
        if (!t_set) cfg.T = dom.T;
        if (!sigma_set) cfg.sigma = dom.sigma;
        if (!controls_set) cfg.controls = preset_section5().controls;
        if (!x0_set) cfg.x0 = dom.x0;
    } else if (any_table_key) {
        if (!moments_set) {
            // default moment bases: powers of x up to the largest symbol used
            const int K = std::max(tables.a1.max_moment(), tables.g0.max_moment());
            for (int j = 1; j <= K; ++j) {
                Polynomial p;
                p = Polynomial::parse(j == 1 ? "x" : "x^" + std::to_string(j));
                tables.moment_bases.push_back(p);
            }
        }
        cfg.tables = std::move(tables);
    }
    return cfg;
}

inline RunConfig parse_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path.string());
}

/// Canonical text form; reparsing yields a semantically identical config.
inline std::string serialize_config(const RunConfig& cfg) {
    std::ostringstream out;
    auto num = [](double v) { return RunConfig::fmt_g(v); };
    auto list = [&](const std::vector<double>& xs) {
        std::string s;
        for (size_t i = 0; i < xs.size(); ++i) {
            if (i) s += ", ";
            s += num(xs[i]);
        }
        return s;
    };
    out << "[model]\n";
    if (!cfg.preset.empty()) out << "preset = " << cfg.preset << "\n";
    out << "L = " << num(cfg.L) << "\n";
    out << "T = " << num(cfg.T) << "\n";
    out << "sigma = " << num(cfg.sigma) << "\n";
    out << "controls = " << list(cfg.controls) << "\n";
    if (cfg.tables) {
        const ParametricSpec& t = *cfg.tables;
        out << "b1 = " << t.b1.str() << "\n";
        out << "b2 = " << t.b2.str() << "\n";
        out << "a1 = " << t.a1.str() << "\n";
        out << "a2 = " << t.a2.str() << "\n";
        out << "a3 = " << t.a3.str() << "\n";
        out << "a4 = " << t.a4.str() << "\n";
        out << "a5 = " << t.a5.str() << "\n";
        out << "a6 = " << t.a6.str() << "\n";
        out << "a7 = " << t.a7.str() << "\n";
        out << "g0 = " << t.g0.str() << "\n";
        out << "k = " << t.k.str() << "\n";
        out << "c1 = " << num(t.c1) << "\n";
        out << "c2 = " << num(t.c2) << "\n";
        std::string ms;
        for (size_t i = 0; i < t.moment_bases.size(); ++i) {
            if (i) ms += ", ";
            ms += t.moment_bases[i].str();
        }
        out << "moments = " << ms << "\n";
    }
    out << "\n[run]\n";
    out << "h = " << list(cfg.h_list) << "\n";
    out << "x0 = " << num(cfg.x0) << "\n";
    out << "max_iters = " << cfg.max_iters << "\n";
    out << "stop_factor = " << num(cfg.stop_factor) << "\n";
    out << "seed = " << cfg.seed << "\n";
    out << "mc_samples = " << cfg.mc_samples << "\n";
    out << "output_dir = " << cfg.output_dir << "\n";
    return out.str();
}

} // namespace reflmfg
