#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "common.hpp"
#include "uqkit/chains.hpp"
#include "uqkit/confounding.hpp"
#include "uqkit/expression.hpp"
#include "uqkit/io.hpp"

namespace uqkit::cli {

namespace {

int sign_of(double v) { return v > 0.0 ? 1 : (v < 0.0 ? -1 : 0); }

void add_simpson(CLI::App& app, GlobalOpts& g) {
    auto* sub = app.add_subcommand("simpson",
                                   "association before and after accounting for a lurking "
                                   "stratifier; the sign can flip either way");
    sub->fallthrough();
    struct Opts {
        double rho_xy = 0.0;
        double rho_wy = 0.0;
        double rho_xw = 0.0;
        std::vector<std::string> slices;
    };
    auto o = std::make_shared<Opts>();
    auto* rxy = sub->add_option("--rho-xy", o->rho_xy, "raw correlation of x and y");
    auto* rwy = sub->add_option("--rho-wy", o->rho_wy, "correlation of the stratifier with y");
    auto* rxw = sub->add_option("--rho-xw", o->rho_xw, "correlation of x with the stratifier");
    rxy->needs(rwy)->needs(rxw);
    rwy->needs(rxy)->needs(rxw);
    rxw->needs(rxy)->needs(rwy);
    auto* slices_opt =
        sub->add_option("--slices", o->slices,
                        "per-stratum count-matrix CSVs (headerless), comma separated");
    slices_opt->excludes(rxy)->excludes(rwy)->excludes(rxw);
    slices_opt->delimiter(',');
    sub->callback([&g, o, rxy, slices_opt] {
        ordered_json rep = make_report(
            "simpson",
            "an association measured over pooled data can differ in sign from the same "
            "association measured inside every stratum",
            "rho_xy|w = (rho_xy - rho_wy rho_xw) / sqrt((1-rho_xw^2)(1-rho_wy^2)); "
            "gamma = (C-D)/(C+D) per stratum vs pooled");
        if (slices_opt->count() > 0) {
            if (o->slices.size() < 2)
                throw InputError("simpson: need at least two strata");
            std::vector<confounding::Table2D> tables;
            for (const std::string& path : o->slices)
                tables.push_back(io::load_count_matrix_csv(path));
            const std::size_t rows = tables.front().counts.size();
            const std::size_t cols = tables.front().counts.front().size();
            for (const auto& t : tables)
                if (t.counts.size() != rows || t.counts.front().size() != cols)
                    throw InputError("simpson: strata tables differ in shape");
            confounding::Table2D pooled;
            pooled.counts.assign(rows, std::vector<long long>(cols, 0));
            ordered_json per = ordered_json::array();
            bool all_same_sign = true;
            int slice_sign = 0;
            for (std::size_t s = 0; s < tables.size(); ++s) {
                const double gamma = confounding::goodman_kruskal_gamma(tables[s]);
                per.push_back({{"stratum", o->slices[s]}, {"gamma", gamma}});
                if (s == 0)
                    slice_sign = sign_of(gamma);
                else if (sign_of(gamma) != slice_sign)
                    all_same_sign = false;
                for (std::size_t i = 0; i < rows; ++i)
                    for (std::size_t j = 0; j < cols; ++j)
                        pooled.counts[i][j] += tables[s].counts[i][j];
            }
            const double marginal = confounding::goodman_kruskal_gamma(pooled);
            rep["params"]["slices"] = o->slices;
            rep["params"]["tolerances"] = ordered_json::object();
            rep["results"]["per_stratum"] = std::move(per);
            rep["results"]["marginal_gamma"] = marginal;
            rep["results"]["sign_reversal"] =
                all_same_sign && slice_sign != 0 && sign_of(marginal) != slice_sign;
        } else if (rxy->count() > 0) {
            const confounding::TriCorrelation tri(o->rho_xy, o->rho_wy, o->rho_xw);
            const double cond = confounding::conditional_correlation(tri);
            const confounding::PartialRegression pr = confounding::partial_regression(tri);
            rep["params"]["rho_xy"] = o->rho_xy;
            rep["params"]["rho_wy"] = o->rho_wy;
            rep["params"]["rho_xw"] = o->rho_xw;
            rep["params"]["tolerances"] = ordered_json::object();
            rep["results"]["raw_correlation"] = o->rho_xy;
            rep["results"]["conditional_correlation"] = cond;
            rep["results"]["sign_flip"] = sign_of(cond) != sign_of(o->rho_xy);
            rep["results"]["partial_coef_w"] = pr.coef_w;
            rep["results"]["partial_coef_x"] = pr.coef_x;
        } else {
            throw InputError("simpson: give --rho-xy/--rho-wy/--rho-xw or --slices");
        }
        emit(g, rep);
    });
}

void add_gamma(CLI::App& app, GlobalOpts& g) {
    auto* sub = app.add_subcommand("gamma",
                                   "ordinal association of a cross-classified count table "
                                   "from concordant vs discordant pairs");
    sub->fallthrough();
    struct Opts {
        std::string table;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--table", o->table, "headerless CSV of non-negative counts")->required();
    sub->callback([&g, o] {
        const confounding::Table2D t = io::load_count_matrix_csv(o->table);
        const double gamma = confounding::goodman_kruskal_gamma(t);
        ordered_json rep = make_report(
            "gamma",
            "pairs ordered the same way on both axes vote for positive association, "
            "oppositely ordered pairs against; ties abstain",
            "gamma = (C - D) / (C + D)");
        rep["params"]["table"] = o->table;
        rep["params"]["rows"] = t.counts.size();
        rep["params"]["cols"] = t.counts.front().size();
        rep["params"]["tolerances"] = ordered_json::object();
        rep["results"]["gamma"] = gamma;
        emit(g, rep);
    });
}

void add_maup(CLI::App& app, GlobalOpts& g) {
    auto* sub = app.add_subcommand("maup",
                                   "correlation of two point attributes after averaging "
                                   "over coarser and coarser grid cells");
    sub->fallthrough();
    struct Opts {
        std::string data;
        std::vector<int> levels{2, 4, 8, 16};
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--data", o->data, "points CSV: x1..xd, x, y")->required();
    sub->add_option("--levels", o->levels, "grid cells per axis, comma separated")
        ->delimiter(',')
        ->capture_default_str();
    sub->callback([&g, o] {
        const io::PointRecords pts = io::load_point_records_csv(o->data);
        const std::vector<confounding::MaupRow> scan =
            confounding::maup_scan(pts.locations, pts.x, pts.y, o->levels);

        double point_corr = 0.0;
        bool have_point_corr = false;
        {
            const Eigen::Index n = pts.x.size();
            const double mx = pts.x.mean(), my = pts.y.mean();
            double sxx = 0.0, syy = 0.0, sxy = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                sxx += (pts.x(i) - mx) * (pts.x(i) - mx);
                syy += (pts.y(i) - my) * (pts.y(i) - my);
                sxy += (pts.x(i) - mx) * (pts.y(i) - my);
            }
            if (sxx > 0.0 && syy > 0.0) {
                point_corr = sxy / std::sqrt(sxx * syy);
                have_point_corr = true;
            }
        }

        ordered_json rep = make_report(
            "maup",
            "a correlation between averaged quantities is a property of the aggregation "
            "units as much as of the quantities; regridding can move or flip it",
            "corr of cell means across level-by-level grids over the bounding box");
        rep["params"]["data"] = o->data;
        rep["params"]["levels"] = o->levels;
        rep["params"]["n_points"] = pts.x.size();
        rep["params"]["tolerances"] = ordered_json::object();
        if (have_point_corr)
            rep["results"]["point_correlation"] = point_corr;
        else
            rep["results"]["point_correlation"] = nullptr;
        ordered_json rows = ordered_json::array();
        for (const auto& r : scan) {
            ordered_json row = {{"level", r.level}, {"blocks", r.blocks}};
            if (r.correlation)
                row["correlation"] = *r.correlation;
            else
                row["correlation"] = nullptr;
            rows.push_back(std::move(row));
        }
        rep["results"]["scan"] = std::move(rows);
        emit(g, rep);
    });
}

std::vector<std::string> split_labels(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

void add_chain(CLI::App& app, GlobalOpts& g) {
    auto* sub = app.add_subcommand("chain",
                                   "joint probabilities along an event chain: path products, "
                                   "zero-entry audit, fallback substitution, expected loss");
    sub->fallthrough();
    struct Opts {
        std::string chain;
        std::string path;
        bool audit = false;
        int fallback_at = -1;
        std::vector<double> fallback_marginal;
        std::string loss;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--chain", o->chain, "chain JSON: events, per-event conditional tables")
        ->required();
    sub->add_option("--path", o->path, "one outcome label per event, comma separated");
    sub->add_flag("--audit", o->audit, "list every exactly-zero conditional entry");
    auto* fb_at = sub->add_option("--fallback-at", o->fallback_at,
                                  "replace the factor at this event index by a history-free "
                                  "marginal");
    auto* fb_marg = sub->add_option("--fallback-marginal", o->fallback_marginal,
                                    "marginal probabilities for --fallback-at, comma separated")
        ->delimiter(',');
    fb_at->needs(fb_marg);
    fb_marg->needs(fb_at);
    sub->add_option("--loss", o->loss,
                    "losses for the final event's outcomes as label=value pairs, comma "
                    "separated");
    sub->callback([&g, o] {
        const chains::EventChain chain = io::load_chain(o->chain);

        auto total_probability = [](const chains::EventChain& c) {
            double total = 0.0;
            chains::for_each_path(c, [&](const std::vector<std::size_t>&, double p) {
                total += p;
            });
            return total;
        };
        auto zeros_json = [](const chains::EventChain& c) {
            ordered_json out = ordered_json::array();
            for (const chains::ZeroEntry& z : chains::zero_probability_audit(c)) {
                ordered_json row;
                row["event_index"] = z.event_index;
                row["event"] = c.events()[z.event_index];
                row["outcome"] = z.outcome;
                std::string hist;
                for (std::size_t i = 0; i < z.history.size(); ++i) {
                    if (i) hist += ",";
                    hist += z.history[i];
                }
                row["history"] = hist;
                out.push_back(std::move(row));
            }
            return out;
        };

        ordered_json rep = make_report(
            "chain",
            "a path's probability is the product of its conditionals, so one hard zero "
            "anywhere silences every path through it; a fallback marginal keeps rare "
            "outcomes strictly positive",
            "P(path) = prod_k P(outcome_k | outcomes_0..k-1); sum over all paths = 1");
        rep["params"]["chain"] = o->chain;
        rep["params"]["tolerances"]["path_sum"] = 1e-12;
        rep["results"]["n_events"] = chain.n_events();
        rep["results"]["total_path_probability"] = total_probability(chain);

        std::vector<std::string> path_labels;
        if (!o->path.empty()) {
            path_labels = split_labels(o->path);
            rep["params"]["path"] = o->path;
            rep["results"]["joint_probability"] = chains::joint_probability(chain, path_labels);
        }
        if (o->audit) rep["results"]["zeros"] = zeros_json(chain);

        const chains::EventChain* effective = &chain;
        std::optional<chains::EventChain> modified;
        if (o->fallback_at >= 0) {
            modified = chains::max_entropy_fallback(
                chain, static_cast<std::size_t>(o->fallback_at), o->fallback_marginal);
            effective = &*modified;
            rep["params"]["fallback_at"] = o->fallback_at;
            rep["params"]["fallback_marginal"] = o->fallback_marginal;
            ordered_json fb;
            fb["total_path_probability"] = total_probability(*modified);
            if (!path_labels.empty())
                fb["joint_probability"] = chains::joint_probability(*modified, path_labels);
            if (o->audit) fb["zeros"] = zeros_json(*modified);
            rep["results"]["fallback"] = std::move(fb);
        }
        if (!o->loss.empty()) {
            chains::LossSpec spec;
            for (const std::string& pair : split_labels(o->loss)) {
                const std::size_t eq = pair.find('=');
                if (eq == std::string::npos)
                    throw InputError("chain: loss entry '" + pair + "' is not label=value");
                spec.outcomes.push_back(pair.substr(0, eq));
                try {
                    spec.losses.push_back(std::stod(pair.substr(eq + 1)));
                } catch (const std::exception&) {
                    throw InputError("chain: cannot parse loss value in '" + pair + "'");
                }
            }
            rep["params"]["loss"] = o->loss;
            rep["results"]["expected_loss"] = chains::expected_loss(*effective, spec);
        }
        emit(g, rep);
    });
}

void add_units(CLI::App& app, GlobalOpts& g) {
    auto* sub = app.add_subcommand("units",
                                   "evaluate an arithmetic expression whose operands carry "
                                   "units, rejecting dimension mismatches");
    sub->fallthrough();
    struct Opts {
        std::string expression;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("expression", o->expression,
                    "e.g. \"2 Pg/yr * 3 yr\" or \"log(5)\"; units attach to numbers, "
                    "^ takes integer or (p/q) exponents")
        ->required();
    sub->callback([&g, o] {
        const units::Quantity q = units::evaluate_expression(o->expression);
        ordered_json rep = make_report(
            "units",
            "quantities carry dimensions: sums need matching dimensions and "
            "transcendental functions accept only dimensionless arguments",
            "dimension algebra over rational exponents; canonical form sorts base names");
        rep["params"]["expression"] = o->expression;
        rep["params"]["tolerances"] = ordered_json::object();
        rep["results"]["value"] = q.value();
        rep["results"]["unit"] = q.dim().str();
        rep["results"]["dimensionless"] = q.dim().is_dimensionless();
        emit(g, rep);
    });
}

} // namespace

void register_assoc(CLI::App& app, GlobalOpts& g) {
    add_simpson(app, g);
    add_gamma(app, g);
    add_maup(app, g);
    add_chain(app, g);
    add_units(app, g);
}

} // namespace uqkit::cli
