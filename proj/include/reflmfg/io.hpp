#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "errors.hpp"

namespace reflmfg {

/// Shortest decimal form that reloads to the same double.
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/**
 * Writes a header line and rows of doubles, comma separated, every number
 * with 17 significant digits so a reload is bit-faithful.
 */
inline void write_csv(const std::filesystem::path& path, const std::string& header,
                      const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
    out << header << '\n';
    for (const auto& row : rows) {
        for (size_t c = 0; c < row.size(); ++c) {
            if (c) out << ',';
            out << fmt17(row[c]);
        }
        out << '\n';
    }
    if (!out) throw ConfigError("write failed for " + path.string());
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

/// Reads a file written by write_csv.  Cells parse as doubles ("nan" included).
inline CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw ConfigError(path.string() + ": empty file");
    size_t pos = 0;
    while (true) {
        const size_t comma = line.find(',', pos);
        table.header.push_back(line.substr(pos, comma - pos));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        const char* s = line.c_str();
        char* end = nullptr;
        while (true) {
            const double v = std::strtod(s, &end);
            if (end == s)
                throw ConfigError(path.string() + ": bad number in row " +
                                  std::to_string(table.rows.size() + 2));
            row.push_back(v);
            s = end;
            if (*s == ',') {
                ++s;
                continue;
            }
            break;
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

} // namespace reflmfg
