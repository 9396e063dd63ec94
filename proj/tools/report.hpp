#pragma once

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "uqkit/errors.hpp"

namespace uqkit::cli {

using nlohmann::ordered_json;

// Every subcommand emits one report with this shape:
//   {subcommand, principle, formula, params, results}
// params echoes the invoked parameters (a nested "tolerances" object lists
// the numerical tolerances in effect); results carries the computed output.
inline ordered_json make_report(const std::string& subcommand, const std::string& principle,
                                const std::string& formula) {
    ordered_json j;
    j["subcommand"] = subcommand;
    j["principle"] = principle;
    j["formula"] = formula;
    j["params"] = ordered_json::object();
    j["results"] = ordered_json::object();
    return j;
}

namespace detail {

inline std::string scalar_cell(const ordered_json& v) {
    if (v.is_null()) return "NA";
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

inline bool all_scalars(const ordered_json& arr) {
    for (const auto& e : arr)
        if (e.is_object() || e.is_array()) return false;
    return true;
}

inline bool all_objects(const ordered_json& arr) {
    if (arr.empty()) return false;
    for (const auto& e : arr)
        if (!e.is_object()) return false;
    return true;
}

inline std::string joined_row(const ordered_json& arr) {
    std::string out;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        if (i) out += ";";
        out += scalar_cell(arr[i]);
    }
    return out;
}

inline void flatten_csv(const ordered_json& v, const std::string& path,
                        std::vector<std::string>& lines) {
    if (v.is_object()) {
        for (const auto& [key, value] : v.items()) {
            const std::string sub = path.empty() ? key : path + "." + key;
            flatten_csv(value, sub, lines);
        }
        return;
    }
    if (v.is_array()) {
        if (all_objects(v)) {
            // Table section: union of keys in first-seen order.
            std::vector<std::string> cols;
            for (const auto& row : v)
                for (const auto& [key, value] : row.items()) {
                    bool seen = false;
                    for (const std::string& c : cols)
                        if (c == key) { seen = true; break; }
                    if (!seen) cols.push_back(key);
                }
            lines.push_back("# " + path);
            std::string header;
            for (std::size_t i = 0; i < cols.size(); ++i) {
                if (i) header += ",";
                header += csv_escape(cols[i]);
            }
            lines.push_back(header);
            for (const auto& row : v) {
                std::string line;
                for (std::size_t i = 0; i < cols.size(); ++i) {
                    if (i) line += ",";
                    line += csv_escape(row.contains(cols[i]) ? scalar_cell(row[cols[i]]) : "NA");
                }
                lines.push_back(line);
            }
            return;
        }
        if (all_scalars(v)) {
            lines.push_back(csv_escape(path) + "," + csv_escape(joined_row(v)));
            return;
        }
        // Row-major matrix or mixed array: one entry per element.
        for (std::size_t i = 0; i < v.size(); ++i) {
            const ordered_json& e = v[i];
            const std::string sub = path + "." + std::to_string(i);
            if (e.is_array() && all_scalars(e))
                lines.push_back(csv_escape(sub) + "," + csv_escape(joined_row(e)));
            else
                flatten_csv(e, sub, lines);
        }
        return;
    }
    lines.push_back(csv_escape(path) + "," + csv_escape(scalar_cell(v)));
}

} // namespace detail

inline std::string render_report(const ordered_json& report, const std::string& format) {
    if (format == "json") return report.dump(2) + "\n";
    if (format == "csv") {
        std::vector<std::string> lines;
        detail::flatten_csv(report, "", lines);
        std::string out;
        for (const std::string& l : lines) out += l + "\n";
        return out;
    }
    throw InputError("unknown output format '" + format + "'");
}

inline void write_report(const ordered_json& report, const std::string& format,
                         const std::string& out_path) {
    const std::string text = render_report(report, format);
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out)
        throw InputError("cannot open '" + out_path + "' for writing");
    out << text;
    if (!out)
        throw InputError("failed writing '" + out_path + "'");
}

} // namespace uqkit::cli
