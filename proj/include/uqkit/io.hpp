#pragma once

#include <Eigen/Dense>

#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "uqkit/chains.hpp"
#include "uqkit/confounding.hpp"
#include "uqkit/errors.hpp"
#include "uqkit/hierarchy.hpp"
#include "uqkit/spatial.hpp"
#include "uqkit/variability.hpp"

namespace uqkit::io {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;
using nlohmann::ordered_json;

// Comma-separated table with a header row. Cells are kept as raw strings;
// quoting is not supported. Trailing carriage returns and blank lines are
// dropped.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    Eigen::Index column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<Eigen::Index>(i);
        return -1;
    }
};

namespace detail {

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cell);
            cell.clear();
        } else if (c != '\r') {
            cell += c;
        }
    }
    cells.push_back(cell);
    for (std::string& s : cells) {
        const std::size_t a = s.find_first_not_of(" \t");
        const std::size_t b = s.find_last_not_of(" \t");
        s = (a == std::string::npos) ? "" : s.substr(a, b - a + 1);
    }
    return cells;
}

inline double parse_double(const std::string& cell, const std::string& context) {
    try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used != cell.size())
            throw InputError("");
        return v;
    } catch (const std::exception&) {
        throw InputError(context + ": cannot parse '" + cell + "' as a number");
    }
}

inline long long parse_count(const std::string& cell, const std::string& context) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(cell, &used);
        if (used != cell.size())
            throw InputError("");
        return v;
    } catch (const std::exception&) {
        throw InputError(context + ": cannot parse '" + cell + "' as an integer count");
    }
}

} // namespace detail

inline CsvTable read_csv(std::istream& in, const std::string& context) {
    CsvTable t;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::vector<std::string> cells = detail::split_line(line);
        if (!have_header) {
            t.header = std::move(cells);
            have_header = true;
            continue;
        }
        if (cells.size() != t.header.size())
            throw InputError(context + ": row " + std::to_string(t.rows.size() + 1) +
                             " has " + std::to_string(cells.size()) + " cells, header has " +
                             std::to_string(t.header.size()));
        t.rows.push_back(std::move(cells));
    }
    if (!have_header)
        throw InputError(context + ": file is empty");
    return t;
}

inline CsvTable read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open '" + path + "'");
    return read_csv(in, path);
}

// Regression CSV: header row, one covariate per column, the response column
// named by the caller. Remaining columns become the design matrix in file
// order, with an optional leading intercept column of ones.
inline variability::RegressionDataset load_regression_csv(const std::string& path,
                                                          const std::string& response,
                                                          double meas_var, bool intercept) {
    const CsvTable t = read_csv_file(path);
    const Eigen::Index resp_col = t.column(response);
    if (resp_col < 0)
        throw InputError(path + ": no column named '" + response + "'");
    const Eigen::Index n = static_cast<Eigen::Index>(t.rows.size());
    const Eigen::Index n_cov = static_cast<Eigen::Index>(t.header.size()) - 1;
    const Eigen::Index p = n_cov + (intercept ? 1 : 0);
    if (p < 1)
        throw InputError(path + ": no covariate columns and no intercept requested");
    MatrixXd x(n, p);
    VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = t.rows[static_cast<std::size_t>(i)];
        Eigen::Index col = 0;
        if (intercept) x(i, col++) = 1.0;
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (static_cast<Eigen::Index>(j) == resp_col) continue;
            x(i, col++) = detail::parse_double(row[j], path);
        }
        z(i) = detail::parse_double(row[static_cast<std::size_t>(resp_col)], path);
    }
    return variability::RegressionDataset(std::move(x), std::move(z), meas_var);
}

namespace detail {

// Coordinate columns are x1..xd, consecutive from x1; returns their indices.
inline std::vector<Eigen::Index> coordinate_columns(const CsvTable& t,
                                                    const std::string& context) {
    std::vector<Eigen::Index> cols;
    for (int d = 1;; ++d) {
        const Eigen::Index c = t.column("x" + std::to_string(d));
        if (c < 0) break;
        cols.push_back(c);
    }
    if (cols.empty())
        throw InputError(context + ": no coordinate column 'x1'");
    return cols;
}

} // namespace detail

// Spatial CSV: columns x1..xd, value, optional support_id; the coordinate
// count d is inferred from the header.
inline spatial::SpatialDataset load_spatial_csv(const std::string& path, double meas_var) {
    const CsvTable t = read_csv_file(path);
    const std::vector<Eigen::Index> coord = detail::coordinate_columns(t, path);
    const Eigen::Index value_col = t.column("value");
    if (value_col < 0)
        throw InputError(path + ": no column named 'value'");
    const Eigen::Index support_col = t.column("support_id");
    const std::size_t expected = coord.size() + 1 + (support_col >= 0 ? 1 : 0);
    if (t.header.size() != expected)
        throw InputError(path + ": unexpected columns; allowed are x1..xd, value, support_id");
    const Eigen::Index n = static_cast<Eigen::Index>(t.rows.size());
    if (n < 1)
        throw InputError(path + ": no data rows");
    MatrixXd locs(n, static_cast<Eigen::Index>(coord.size()));
    VectorXd vals(n);
    std::vector<std::string> supports;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = t.rows[static_cast<std::size_t>(i)];
        for (std::size_t k = 0; k < coord.size(); ++k)
            locs(i, static_cast<Eigen::Index>(k)) =
                detail::parse_double(row[static_cast<std::size_t>(coord[k])], path);
        vals(i) = detail::parse_double(row[static_cast<std::size_t>(value_col)], path);
        if (support_col >= 0) supports.push_back(row[static_cast<std::size_t>(support_col)]);
    }
    return spatial::SpatialDataset(std::move(locs), std::move(vals), meas_var,
                                   std::move(supports));
}

// Targets CSV: coordinate columns x1..xd only.
inline MatrixXd load_targets_csv(const std::string& path, Eigen::Index expected_dim) {
    const CsvTable t = read_csv_file(path);
    const std::vector<Eigen::Index> coord = detail::coordinate_columns(t, path);
    if (static_cast<Eigen::Index>(coord.size()) != expected_dim)
        throw InputError(path + ": targets have dimension " + std::to_string(coord.size()) +
                         " but the data have dimension " + std::to_string(expected_dim));
    if (t.header.size() != coord.size())
        throw InputError(path + ": unexpected columns; allowed are x1..xd");
    const Eigen::Index n = static_cast<Eigen::Index>(t.rows.size());
    if (n < 1)
        throw InputError(path + ": no target rows");
    MatrixXd out(n, expected_dim);
    for (Eigen::Index i = 0; i < n; ++i)
        for (std::size_t k = 0; k < coord.size(); ++k)
            out(i, static_cast<Eigen::Index>(k)) = detail::parse_double(
                t.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(coord[k])], path);
    return out;
}

// Point records: columns x1..xd, x, y (locations plus two attributes).
struct PointRecords {
    MatrixXd locations;
    VectorXd x;
    VectorXd y;
};

inline PointRecords load_point_records_csv(const std::string& path) {
    const CsvTable t = read_csv_file(path);
    const std::vector<Eigen::Index> coord = detail::coordinate_columns(t, path);
    const Eigen::Index x_col = t.column("x");
    const Eigen::Index y_col = t.column("y");
    if (x_col < 0 || y_col < 0)
        throw InputError(path + ": need attribute columns 'x' and 'y'");
    if (t.header.size() != coord.size() + 2)
        throw InputError(path + ": unexpected columns; allowed are x1..xd, x, y");
    const Eigen::Index n = static_cast<Eigen::Index>(t.rows.size());
    if (n < 1)
        throw InputError(path + ": no data rows");
    PointRecords out;
    out.locations.resize(n, static_cast<Eigen::Index>(coord.size()));
    out.x.resize(n);
    out.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = t.rows[static_cast<std::size_t>(i)];
        for (std::size_t k = 0; k < coord.size(); ++k)
            out.locations(i, static_cast<Eigen::Index>(k)) =
                detail::parse_double(row[static_cast<std::size_t>(coord[k])], path);
        out.x(i) = detail::parse_double(row[static_cast<std::size_t>(x_col)], path);
        out.y(i) = detail::parse_double(row[static_cast<std::size_t>(y_col)], path);
    }
    return out;
}

// Headerless CSV matrix of non-negative integer counts.
inline confounding::Table2D load_count_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open '" + path + "'");
    std::vector<std::vector<long long>> counts;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::vector<std::string> cells = detail::split_line(line);
        std::vector<long long> row;
        row.reserve(cells.size());
        for (const std::string& c : cells) row.push_back(detail::parse_count(c, path));
        counts.push_back(std::move(row));
    }
    if (counts.empty())
        throw InputError(path + ": file is empty");
    const std::size_t width = counts.front().size();
    for (const auto& row : counts)
        if (row.size() != width)
            throw InputError(path + ": ragged rows");
    return confounding::Table2D{std::move(counts)};
}

namespace detail {

inline VectorXd json_vector(const json& j, const std::string& key) {
    if (!j.contains(key) || !j[key].is_array())
        throw InputError("model JSON: missing numeric array '" + key + "'");
    VectorXd v(static_cast<Eigen::Index>(j[key].size()));
    Eigen::Index i = 0;
    for (const auto& e : j[key]) {
        if (!e.is_number())
            throw InputError("model JSON: '" + key + "' holds a non-numeric entry");
        v(i++) = e.get<double>();
    }
    return v;
}

inline MatrixXd json_matrix(const json& j, const std::string& key) {
    if (!j.contains(key) || !j[key].is_array() || j[key].empty())
        throw InputError("model JSON: missing matrix '" + key + "'");
    const auto& rows = j[key];
    if (!rows.front().is_array())
        throw InputError("model JSON: '" + key + "' must be an array of row arrays");
    const Eigen::Index r = static_cast<Eigen::Index>(rows.size());
    const Eigen::Index c = static_cast<Eigen::Index>(rows.front().size());
    MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
        const auto& row = rows[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != c)
            throw InputError("model JSON: '" + key + "' rows differ in length");
        for (Eigen::Index k = 0; k < c; ++k) {
            const auto& e = row[static_cast<std::size_t>(k)];
            if (!e.is_number())
                throw InputError("model JSON: '" + key + "' holds a non-numeric entry");
            m(i, k) = e.get<double>();
        }
    }
    return m;
}

inline json vector_json(const VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

inline json matrix_json(const MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace detail

// Model JSON fields: c, prior_mean as flat arrays; K, noise_cov, prior_cov
// as arrays of row arrays (row-major).
inline hierarchy::LinearHM linear_hm_from_json(const json& j) {
    if (!j.is_object())
        throw InputError("model JSON: top level must be an object");
    return hierarchy::LinearHM(detail::json_vector(j, "c"), detail::json_matrix(j, "K"),
                               gaussian::SpdMatrix(detail::json_matrix(j, "noise_cov")),
                               detail::json_vector(j, "prior_mean"),
                               gaussian::SpdMatrix(detail::json_matrix(j, "prior_cov")));
}

inline ordered_json linear_hm_to_json(const hierarchy::LinearHM& hm) {
    ordered_json j;
    j["c"] = detail::vector_json(hm.offset());
    j["K"] = detail::matrix_json(hm.forward());
    j["noise_cov"] = detail::matrix_json(hm.noise_cov().matrix());
    j["prior_mean"] = detail::vector_json(hm.prior_mean());
    j["prior_cov"] = detail::matrix_json(hm.prior_cov().matrix());
    return j;
}

inline json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw InputError(path + ": " + e.what());
    }
}

inline hierarchy::LinearHM load_linear_hm(const std::string& path) {
    return linear_hm_from_json(load_json(path));
}

// Chain JSON:
//   {"events": ["e1", ...],
//    "factors": [
//      {"outcomes": ["a","b"], "probs": {"": [...]}}            first event
//      {"outcomes": [...], "probs": {"a": [...], "b": [...]}}   keyed by the
//          comma-joined outcome labels of all predecessors
//      {"outcomes": [...], "fallback": true, "marginal": [...]} history-free
//   ]}
// A first-event factor may use "marginal" without the fallback flag.
inline chains::EventChain chain_from_json(const json& j) {
    if (!j.is_object() || !j.contains("events") || !j.contains("factors"))
        throw InputError("chain JSON: need 'events' and 'factors'");
    std::vector<std::string> events;
    for (const auto& e : j["events"]) {
        if (!e.is_string())
            throw InputError("chain JSON: event labels must be strings");
        events.push_back(e.get<std::string>());
    }
    if (!j["factors"].is_array() || j["factors"].size() != events.size())
        throw InputError("chain JSON: need one factor per event");

    std::vector<chains::ChainFactor> factors;
    std::vector<std::vector<std::string>> outcome_sets;
    for (std::size_t k = 0; k < events.size(); ++k) {
        const auto& jf = j["factors"][k];
        if (!jf.is_object() || !jf.contains("outcomes") || !jf["outcomes"].is_array())
            throw InputError("chain JSON: factor " + std::to_string(k) +
                             " needs an 'outcomes' array");
        chains::ChainFactor f;
        for (const auto& o : jf["outcomes"]) {
            if (!o.is_string())
                throw InputError("chain JSON: outcome labels must be strings");
            f.outcomes.push_back(o.get<std::string>());
        }
        auto read_row = [&](const json& arr, const std::string& where) {
            if (!arr.is_array() || arr.size() != f.outcomes.size())
                throw InputError("chain JSON: " + where + " must list one probability "
                                 "per outcome of event '" + events[k] + "'");
            std::vector<double> row;
            for (const auto& p : arr) {
                if (!p.is_number())
                    throw InputError("chain JSON: non-numeric probability in " + where);
                row.push_back(p.get<double>());
            }
            return row;
        };
        const bool fallback = jf.value("fallback", false);
        if (fallback || (k == 0 && jf.contains("marginal"))) {
            if (!jf.contains("marginal"))
                throw InputError("chain JSON: fallback factor " + std::to_string(k) +
                                 " needs a 'marginal' array");
            f.fallback = fallback;
            f.table.push_back(read_row(jf["marginal"], "'marginal'"));
            if (!fallback && k > 0)
                throw InputError("chain JSON: only the first factor may use 'marginal' "
                                 "without 'fallback'");
        } else {
            if (!jf.contains("probs") || !jf["probs"].is_object())
                throw InputError("chain JSON: factor " + std::to_string(k) +
                                 " needs a 'probs' object keyed by history");
            // Enumerate histories in mixed-radix order, first predecessor
            // most significant, and look each key up.
            std::size_t n_hist = 1;
            for (std::size_t p = 0; p < k; ++p) n_hist *= outcome_sets[p].size();
            std::vector<std::size_t> idx(k, 0);
            for (std::size_t h = 0; h < n_hist; ++h) {
                std::string key;
                for (std::size_t p = 0; p < k; ++p) {
                    if (p) key += ",";
                    key += outcome_sets[p][idx[p]];
                }
                if (!jf["probs"].contains(key))
                    throw InputError("chain JSON: factor " + std::to_string(k) +
                                     " is missing history '" + key + "'");
                f.table.push_back(read_row(jf["probs"][key], "history '" + key + "'"));
                for (std::size_t p = k; p-- > 0;) {
                    if (++idx[p] < outcome_sets[p].size()) break;
                    idx[p] = 0;
                }
            }
            if (jf["probs"].size() != n_hist)
                throw InputError("chain JSON: factor " + std::to_string(k) + " has " +
                                 std::to_string(jf["probs"].size()) +
                                 " histories but needs " + std::to_string(n_hist));
        }
        outcome_sets.push_back(f.outcomes);
        factors.push_back(std::move(f));
    }
    return chains::EventChain(std::move(events), std::move(factors));
}

inline chains::EventChain load_chain(const std::string& path) {
    return chain_from_json(load_json(path));
}

inline ordered_json chain_to_json(const chains::EventChain& chain) {
    ordered_json j;
    j["events"] = chain.events();
    ordered_json factors = ordered_json::array();
    for (std::size_t k = 0; k < chain.n_events(); ++k) {
        const chains::ChainFactor& f = chain.factor(k);
        ordered_json jf;
        jf["outcomes"] = f.outcomes;
        if (f.fallback) {
            jf["fallback"] = true;
            jf["marginal"] = f.table.front();
        } else {
            ordered_json probs = ordered_json::object();
            std::vector<std::size_t> idx(k, 0);
            for (const auto& row : f.table) {
                std::string key;
                for (std::size_t p = 0; p < k; ++p) {
                    if (p) key += ",";
                    key += chain.factor(p).outcomes[idx[p]];
                }
                probs[key] = row;
                for (std::size_t p = k; p-- > 0;) {
                    if (++idx[p] < chain.factor(p).outcomes.size()) break;
                    idx[p] = 0;
                }
            }
            jf["probs"] = std::move(probs);
        }
        factors.push_back(std::move(jf));
    }
    j["factors"] = std::move(factors);
    return j;
}

} // namespace uqkit::io
