#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "common.hpp"
#include "uqkit/io.hpp"
#include "uqkit/spatial.hpp"

namespace uqkit::cli {

namespace {

spatial::TrendModel trend_from_name(const std::string& name) {
    if (name == "constant") return spatial::TrendModel::constant;
    if (name == "linear") return spatial::TrendModel::linear;
    if (name == "quadratic") return spatial::TrendModel::quadratic;
    throw InputError("unknown trend '" + name + "'");
}

std::string percent_label(double level) {
    if (level == std::floor(level))
        return std::to_string(static_cast<long long>(level));
    return ordered_json(level).dump();
}

// Grid spec: one "lo:hi:count" segment per axis, comma separated. Points are
// evenly spaced including both endpoints (count 1 sits at lo); axes combine
// as a full product with the first axis slowest.
MatrixXd parse_grid(const std::string& spec) {
    std::vector<std::vector<double>> axes;
    std::size_t start = 0;
    while (start <= spec.size()) {
        const std::size_t end = spec.find(',', start);
        const std::string seg =
            spec.substr(start, end == std::string::npos ? std::string::npos : end - start);
        const std::size_t c1 = seg.find(':');
        const std::size_t c2 = c1 == std::string::npos ? std::string::npos : seg.find(':', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw InputError("grid: segment '" + seg + "' is not lo:hi:count");
        double lo = 0.0, hi = 0.0;
        long long count = 0;
        try {
            lo = std::stod(seg.substr(0, c1));
            hi = std::stod(seg.substr(c1 + 1, c2 - c1 - 1));
            count = std::stoll(seg.substr(c2 + 1));
        } catch (const std::exception&) {
            throw InputError("grid: cannot parse segment '" + seg + "'");
        }
        if (count < 1)
            throw InputError("grid: count must be >= 1 in '" + seg + "'");
        if (count > 1 && !(hi > lo))
            throw InputError("grid: hi must exceed lo in '" + seg + "'");
        std::vector<double> pts;
        for (long long i = 0; i < count; ++i)
            pts.push_back(count == 1 ? lo
                                     : lo + (hi - lo) * static_cast<double>(i) /
                                               static_cast<double>(count - 1));
        axes.push_back(std::move(pts));
        if (end == std::string::npos) break;
        start = end + 1;
    }
    Eigen::Index total = 1;
    for (const auto& a : axes) total *= static_cast<Eigen::Index>(a.size());
    MatrixXd out(total, static_cast<Eigen::Index>(axes.size()));
    std::vector<std::size_t> idx(axes.size(), 0);
    for (Eigen::Index row = 0; row < total; ++row) {
        for (std::size_t k = 0; k < axes.size(); ++k)
            out(row, static_cast<Eigen::Index>(k)) = axes[k][idx[k]];
        for (std::size_t k = axes.size(); k-- > 0;) {
            if (++idx[k] < axes[k].size()) break;
            idx[k] = 0;
        }
    }
    return out;
}

void add_krige(CLI::App& app, GlobalOpts& g) {
    auto* sub = app.add_subcommand("krige",
                                   "spatial prediction of the latent field or of a new "
                                   "measurement, with percentile bands on request");
    sub->fallthrough();
    struct Opts {
        std::string data;
        double meas_var = 0.0;
        double sill = 1.0;
        double scale = 0.0;
        std::string trend = "constant";
        std::vector<double> trend_coef;
        std::string target = "process";
        std::string targets_path;
        std::string grid;
        bool bands = false;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--data", o->data, "spatial CSV: x1..xd, value, optional support_id")
        ->required();
    sub->add_option("--meas-var", o->meas_var, "measurement-error variance of the values")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    sub->add_option("--sill", o->sill, "covariance at distance zero")->required();
    sub->add_option("--scale", o->scale, "covariance decay length (0 = no spatial correlation)")
        ->required()
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--trend", o->trend, "mean surface: constant, linear or quadratic")
        ->check(CLI::IsMember({"constant", "linear", "quadratic"}))
        ->capture_default_str();
    sub->add_option("--trend-coef", o->trend_coef,
                    "known trend coefficients, comma separated; omitted = fit by least squares")
        ->delimiter(',');
    sub->add_option("--target", o->target,
                    "predict the latent process or a new observable measurement")
        ->check(CLI::IsMember({"process", "observable"}))
        ->capture_default_str();
    auto* targets_opt =
        sub->add_option("--targets", o->targets_path, "CSV of prediction locations: x1..xd");
    auto* grid_opt = sub->add_option("--grid", o->grid,
                                     "prediction grid, one lo:hi:count segment per axis, "
                                     "comma separated");
    targets_opt->excludes(grid_opt);
    grid_opt->excludes(targets_opt);
    sub->add_flag("--bands", o->bands, "add 2.5/25/50/75/97.5 percentile bands");
    sub->callback([&g, o] {
        const spatial::SpatialDataset ds = io::load_spatial_csv(o->data, o->meas_var);
        const spatial::CovarianceFunction cf(spatial::CovarianceFamily::exponential, o->sill,
                                             o->scale);
        spatial::TrendSpec trend;
        trend.model = trend_from_name(o->trend);
        if (!o->trend_coef.empty()) trend.known_coefficients = to_vector(o->trend_coef);
        MatrixXd targets;
        if (!o->targets_path.empty())
            targets = io::load_targets_csv(o->targets_path, ds.dim());
        else if (!o->grid.empty())
            targets = parse_grid(o->grid);
        else
            throw InputError("krige: give prediction locations via --targets or --grid");
        if (targets.cols() != ds.dim())
            throw InputError("krige: grid dimension " + std::to_string(targets.cols()) +
                             " does not match the data dimension " + std::to_string(ds.dim()));
        const spatial::TargetKind kind = o->target == "process"
                                             ? spatial::TargetKind::process
                                             : spatial::TargetKind::observable;
        const spatial::KrigingResult res = spatial::krige(ds, cf, trend, targets, kind, o->bands);

        ordered_json rep = make_report(
            "krige",
            "the latent field and a fresh measurement of it are different prediction "
            "targets: the measurement carries the measurement-error variance on top",
            "var_observable(s0) = var_process(s0) + meas_var away from the data; "
            "at a datum the observable target returns the datum with zero variance");
        rep["params"]["data"] = o->data;
        rep["params"]["meas_var"] = o->meas_var;
        rep["params"]["sill"] = o->sill;
        rep["params"]["scale"] = o->scale;
        rep["params"]["trend"] = o->trend;
        if (!o->trend_coef.empty()) rep["params"]["trend_coef"] = o->trend_coef;
        rep["params"]["target"] = o->target;
        if (!o->targets_path.empty()) rep["params"]["targets"] = o->targets_path;
        if (!o->grid.empty()) rep["params"]["grid"] = o->grid;
        rep["params"]["n_data"] = ds.n();
        rep["params"]["n_targets"] = targets.rows();
        rep["params"]["tolerances"]["variance_clamp"] = gaussian::kVarianceClampTol;
        rep["params"]["tolerances"]["location_match"] = spatial::kLocationTol;
        rep["results"]["trend_coefficients"] = vec_json(res.trend_coefficients);
        ordered_json rows = ordered_json::array();
        for (Eigen::Index i = 0; i < targets.rows(); ++i) {
            ordered_json row = ordered_json::object();
            for (Eigen::Index k = 0; k < targets.cols(); ++k)
                row["x" + std::to_string(k + 1)] = targets(i, k);
            row["mean"] = res.means(i);
            row["variance"] = res.variances(i);
            row["sd"] = std::sqrt(res.variances(i));
            if (res.bands) {
                for (std::size_t l = 0; l < res.bands->levels.size(); ++l)
                    row["p" + percent_label(res.bands->levels[l])] =
                        res.bands->values(i, static_cast<Eigen::Index>(l));
            }
            rows.push_back(std::move(row));
        }
        rep["results"]["targets"] = std::move(rows);
        emit(g, rep);
    });
}

void add_neff(CLI::App& app, GlobalOpts& g) {
    auto* sub = app.add_subcommand("neff",
                                   "equivalent number of independent observations in a "
                                   "positively correlated sample");
    sub->fallthrough();
    struct Opts {
        std::string data;
        double sill = 1.0;
        double scale = 0.0;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--data", o->data, "spatial CSV: x1..xd, value")->required();
    sub->add_option("--sill", o->sill, "covariance at distance zero")->capture_default_str();
    sub->add_option("--scale", o->scale, "covariance decay length (0 = independent data)")
        ->required()
        ->check(CLI::NonNegativeNumber);
    sub->callback([&g, o] {
        const spatial::SpatialDataset ds = io::load_spatial_csv(o->data, 0.0);
        const spatial::CovarianceFunction cf(spatial::CovarianceFamily::exponential, o->sill,
                                             o->scale);
        const double mv = spatial::mean_variance(ds.locations(), cf);
        const double neff = spatial::effective_sample_size(ds.locations(), cf);

        ordered_json rep = make_report(
            "neff",
            "positively correlated observations repeat part of each other's information, "
            "so they count for fewer than their number",
            "n_eff = sill / var(sample mean)");
        rep["params"]["data"] = o->data;
        rep["params"]["sill"] = o->sill;
        rep["params"]["scale"] = o->scale;
        rep["params"]["tolerances"] = ordered_json::object();
        rep["results"]["n"] = ds.n();
        rep["results"]["mean_variance"] = mv;
        rep["results"]["n_eff"] = neff;
        rep["results"]["ratio"] = neff / static_cast<double>(ds.n());
        emit(g, rep);
    });
}

void add_decomp_audit(CLI::App& app, GlobalOpts& g) {
    auto* sub = app.add_subcommand("decomp-audit",
                                   "how candidate mean surfaces split the data variance "
                                   "into surface plus residual while the total stays put");
    sub->fallthrough();
    struct Opts {
        std::string data;
        double meas_var = 0.0;
        std::vector<std::string> trends{"constant", "linear", "quadratic"};
        int bins = 15;
        double constancy_tol = 0.15;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--data", o->data, "spatial CSV: x1..xd, value")->required();
    sub->add_option("--meas-var", o->meas_var, "measurement-error variance of the values")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    sub->add_option("--trends", o->trends, "mean surfaces to audit, comma separated")
        ->delimiter(',')
        ->capture_default_str();
    sub->add_option("--bins", o->bins, "distance bins for the residual covariance")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->add_option("--constancy-tol", o->constancy_tol,
                    "relative spread of the totals accepted as conserved")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    sub->callback([&g, o] {
        const spatial::SpatialDataset ds = io::load_spatial_csv(o->data, o->meas_var);
        std::vector<spatial::TrendSpec> trends;
        for (const std::string& name : o->trends)
            trends.push_back(spatial::TrendSpec{trend_from_name(name), std::nullopt});
        const std::vector<spatial::DecompositionEntry> entries = spatial::decomposition_audit(
            ds, trends, spatial::CovarianceFamily::exponential, o->bins);

        double tmin = entries.front().total, tmax = entries.front().total, tsum = 0.0;
        for (const auto& e : entries) {
            tmin = std::min(tmin, e.total);
            tmax = std::max(tmax, e.total);
            tsum += e.total;
        }
        const double tmean = tsum / static_cast<double>(entries.size());
        const double spread = tmean > 0.0 ? (tmax - tmin) / tmean : 0.0;

        ordered_json rep = make_report(
            "decomp-audit",
            "choosing a richer mean surface moves variability from the residual share to "
            "the surface share; the sum of the shares must not drift",
            "surface_var + residual_var = total, compared across candidate surfaces");
        rep["params"]["data"] = o->data;
        rep["params"]["meas_var"] = o->meas_var;
        rep["params"]["trends"] = o->trends;
        rep["params"]["bins"] = o->bins;
        rep["params"]["tolerances"]["constancy_tol"] = o->constancy_tol;
        ordered_json rows = ordered_json::array();
        for (const auto& e : entries)
            rows.push_back({{"trend", e.trend_label},
                            {"surface_var", e.regional_var},
                            {"residual_var", e.residual_var},
                            {"total", e.total}});
        rep["results"]["decomposition"] = std::move(rows);
        rep["results"]["total_spread_rel"] = spread;
        rep["results"]["totals_conserved"] = spread <= o->constancy_tol;
        ordered_json cov = ordered_json::object();
        for (const auto& e : entries) {
            ordered_json bins = ordered_json::array();
            for (const auto& b : e.residual_covariance)
                bins.push_back(
                    {{"lag", b.lag}, {"covariance", b.covariance}, {"pairs", b.pairs}});
            cov[e.trend_label] = std::move(bins);
        }
        rep["results"]["residual_covariance"] = std::move(cov);
        emit(g, rep);
    });
}

void add_cos(CLI::App& app, GlobalOpts& g) {
    auto* sub = app.add_subcommand("cos",
                                   "variance of a block average as the block grows: the "
                                   "small-scale part dies out, the shared offset stays");
    sub->fallthrough();
    struct Opts {
        double sill = 1.0;
        double scale = 1.0;
        double sigma0_sq = 0.0;
        int dim = 2;
        std::vector<double> sides;
        double cell = 0.0;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--sill", o->sill, "small-scale covariance at distance zero")
        ->capture_default_str();
    sub->add_option("--scale", o->scale, "covariance decay length")
        ->required()
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--sigma0-sq", o->sigma0_sq, "variance of the shared offset")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    sub->add_option("--dim", o->dim, "spatial dimension of the blocks")
        ->check(CLI::Range(1, 3))
        ->capture_default_str();
    sub->add_option("--sides", o->sides, "block side lengths to sweep, comma separated")
        ->required()
        ->delimiter(',');
    sub->add_option("--cell", o->cell, "discretization cell width")
        ->required()
        ->check(CLI::PositiveNumber);
    sub->callback([&g, o] {
        const spatial::CovarianceFunction cf(spatial::CovarianceFamily::exponential, o->sill,
                                             o->scale);
        ordered_json rows = ordered_json::array();
        for (double side : o->sides) {
            if (!(side > 0.0)) throw InputError("cos: sides must be > 0");
            const int count =
                std::max(1, static_cast<int>(std::ceil(side / o->cell - 1e-9)));
            const VectorXd lower = VectorXd::Zero(o->dim);
            const VectorXd upper = VectorXd::Constant(o->dim, side);
            const spatial::BlockRegion region = spatial::BlockRegion::regular_grid(
                lower, upper, std::vector<int>(static_cast<std::size_t>(o->dim), count));
            const double v = spatial::block_average_variance(cf, o->sigma0_sq, region);
            rows.push_back({{"side", side},
                            {"cells_per_axis", count},
                            {"variance", v},
                            {"excess_over_offset", v - o->sigma0_sq}});
        }

        ordered_json rep = make_report(
            "cos",
            "averaging over a growing block removes small-scale variability but cannot "
            "remove an offset shared by the whole block",
            "var(block mean) = sigma0_sq + mean of the pairwise covariance over the block");
        rep["params"]["sill"] = o->sill;
        rep["params"]["scale"] = o->scale;
        rep["params"]["sigma0_sq"] = o->sigma0_sq;
        rep["params"]["dim"] = o->dim;
        rep["params"]["sides"] = o->sides;
        rep["params"]["cell"] = o->cell;
        rep["params"]["tolerances"] = ordered_json::object();
        rep["results"]["point_variance"] = o->sigma0_sq + o->sill;
        rep["results"]["floor"] = o->sigma0_sq;
        rep["results"]["curve"] = std::move(rows);
        emit(g, rep);
    });
}

void add_error_scaling(CLI::App& app, GlobalOpts& g) {
    auto* sub = app.add_subcommand("error-scaling",
                                   "how the variance of an average falls with n for "
                                   "independent errors and plateaus for shared ones");
    sub->fallthrough();
    struct Opts {
        std::string kind = "random";
        double sigma0_sq = 0.0;
        double sigma_delta_sq = 1.0;
        std::vector<long long> n_grid{100, 1000, 10000, 100000};
        int reps = 1000;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--kind", o->kind, "error structure: random or systematic")
        ->check(CLI::IsMember({"random", "systematic"}))
        ->capture_default_str();
    sub->add_option("--sigma0-sq", o->sigma0_sq, "variance of the shared (systematic) part")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    sub->add_option("--sigma-delta-sq", o->sigma_delta_sq,
                    "variance of the independent (random) part")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    sub->add_option("--n-grid", o->n_grid, "sample sizes to sweep, comma separated, increasing")
        ->delimiter(',')
        ->capture_default_str();
    sub->add_option("--reps", o->reps, "replications per sample size")
        ->capture_default_str();
    sub->callback([&g, o] {
        require_seed(g, "error-scaling");
        const spatial::ErrorKind kind = o->kind == "random" ? spatial::ErrorKind::random
                                                            : spatial::ErrorKind::systematic;
        const std::vector<spatial::ErrorScalingRow> table =
            spatial::error_scaling_sim(kind, o->sigma0_sq, o->sigma_delta_sq, o->n_grid,
                                       o->reps, g.seed);

        // Least-squares slope of log10(empirical variance) on log10(n).
        double slope = 0.0;
        bool have_slope = false;
        {
            std::vector<double> lx, ly;
            for (const auto& r : table)
                if (r.empirical_var > 0.0) {
                    lx.push_back(std::log10(static_cast<double>(r.n)));
                    ly.push_back(std::log10(r.empirical_var));
                }
            if (lx.size() >= 2) {
                double mx = 0.0, my = 0.0;
                for (std::size_t i = 0; i < lx.size(); ++i) { mx += lx[i]; my += ly[i]; }
                mx /= static_cast<double>(lx.size());
                my /= static_cast<double>(lx.size());
                double sxx = 0.0, sxy = 0.0;
                for (std::size_t i = 0; i < lx.size(); ++i) {
                    sxx += (lx[i] - mx) * (lx[i] - mx);
                    sxy += (lx[i] - mx) * (ly[i] - my);
                }
                if (sxx > 0.0) {
                    slope = sxy / sxx;
                    have_slope = true;
                }
            }
        }

        ordered_json rep = make_report(
            "error-scaling",
            "averaging n independent errors shrinks their variance like 1/n; a shared "
            "error survives averaging and sets a floor",
            "var(mean) = sigma0_sq + sigma_delta_sq / n");
        rep["params"]["kind"] = o->kind;
        rep["params"]["sigma0_sq"] = o->sigma0_sq;
        rep["params"]["sigma_delta_sq"] = o->sigma_delta_sq;
        rep["params"]["n_grid"] = o->n_grid;
        rep["params"]["reps"] = o->reps;
        rep["params"]["seed"] = g.seed;
        rep["params"]["tolerances"] = ordered_json::object();
        ordered_json rows = ordered_json::array();
        for (const auto& r : table)
            rows.push_back({{"n", r.n},
                            {"empirical_var", r.empirical_var},
                            {"analytic_var", r.analytic_var}});
        rep["results"]["curve"] = std::move(rows);
        if (have_slope)
            rep["results"]["loglog_slope"] = slope;
        else
            rep["results"]["loglog_slope"] = nullptr;
        rep["results"]["floor"] = o->sigma0_sq;
        rep["results"]["plateau_var"] = table.back().empirical_var;
        emit(g, rep);
    });
}

} // namespace

void register_spatial(CLI::App& app, GlobalOpts& g) {
    add_krige(app, g);
    add_neff(app, g);
    add_decomp_audit(app, g);
    add_cos(app, g);
    add_error_scaling(app, g);
}

} // namespace uqkit::cli
