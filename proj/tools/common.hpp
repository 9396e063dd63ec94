#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "report.hpp"
#include "uqkit/errors.hpp"

namespace uqkit::cli {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::ordered_json;

struct GlobalOpts {
    std::uint64_t seed = 0;
    std::string format = "json";
    std::string out;
    CLI::Option* seed_opt = nullptr;
};

inline void emit(const GlobalOpts& g, const ordered_json& report) {
    write_report(report, g.format, g.out);
}

inline void require_seed(const GlobalOpts& g, const std::string& who) {
    if (g.seed_opt == nullptr || g.seed_opt->count() == 0)
        throw InputError(who + ": --seed is required for a stochastic run");
}

inline ordered_json vec_json(const VectorXd& v) {
    ordered_json a = ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

inline ordered_json mat_json(const MatrixXd& m) {
    ordered_json rows = ordered_json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        ordered_json row = ordered_json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline VectorXd to_vector(const std::vector<double>& v) {
    VectorXd out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
    return out;
}

void register_core(CLI::App& app, GlobalOpts& g);
void register_spatial(CLI::App& app, GlobalOpts& g);
void register_assoc(CLI::App& app, GlobalOpts& g);

} // namespace uqkit::cli
