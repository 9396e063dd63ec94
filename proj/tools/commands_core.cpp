#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "common.hpp"
#include "uqkit/hierarchy.hpp"
#include "uqkit/io.hpp"
#include "uqkit/variability.hpp"

namespace uqkit::cli {

namespace {

void add_hm_retrieve(CLI::App& app, GlobalOpts& g) {
    auto* sub = app.add_subcommand("hm-retrieve",
                                   "posterior state estimate from a linear-Gaussian "
                                   "observation model and one data vector");
    sub->fallthrough();
    struct Opts {
        std::string model;
        std::vector<double> z;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--model", o->model, "model JSON: c, K, noise_cov, prior_mean, prior_cov")
        ->required();
    sub->add_option("--z", o->z, "observed data vector, comma separated")
        ->required()
        ->delimiter(',');
    sub->callback([&g, o] {
        const hierarchy::LinearHM hm = io::load_linear_hm(o->model);
        const VectorXd z = to_vector(o->z);
        const hierarchy::Retrieval r = hierarchy::predictive_distribution(hm, z);
        const double residual = hierarchy::precision_decomposition_residual(hm);
        const MatrixXd precision = hierarchy::detail::posterior_precision(hm).first;

        ordered_json rep = make_report(
            "hm-retrieve",
            "a layered observation model turns data uncertainty into state uncertainty",
            "cov=(prior_cov^-1+K' noise_cov^-1 K)^-1; gain=cov K' noise_cov^-1; "
            "mean=prior_mean+gain (z-c-K prior_mean)");
        rep["params"]["model"] = o->model;
        rep["params"]["z"] = o->z;
        rep["params"]["state_dim"] = hm.state_dim();
        rep["params"]["data_dim"] = hm.data_dim();
        rep["params"]["tolerances"]["symmetry_rel_tol"] = gaussian::kSymmetryRelTol;
        rep["results"]["predictive_mean"] = vec_json(r.predictive_mean);
        rep["results"]["predictive_cov"] = mat_json(r.predictive_cov.matrix());
        rep["results"]["gain"] = mat_json(r.gain);
        rep["results"]["precision_residual"] = residual;
        rep["results"]["precision_residual_rel"] = residual / precision.norm();
        emit(g, rep);
    });
}

void add_wm_tm(CLI::App& app, GlobalOpts& g) {
    auto* sub = app.add_subcommand("wm-tm",
                                   "bias and spread of a working model's estimator under "
                                   "the model that actually generated the data");
    sub->fallthrough();
    struct Opts {
        std::string working;
        std::string truth;
        long long mc_draws = 0;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--working", o->working, "working model JSON (used to build the estimator)")
        ->required();
    sub->add_option("--truth", o->truth, "generating model JSON (used to judge the estimator)")
        ->required();
    sub->add_option("--mc-draws", o->mc_draws,
                    "Monte Carlo draws cross-checking the closed-form bias (0 = skip)")
        ->check(CLI::NonNegativeNumber);
    sub->callback([&g, o] {
        const hierarchy::LinearHM wm = io::load_linear_hm(o->working);
        const hierarchy::LinearHM tm = io::load_linear_hm(o->truth);
        const hierarchy::TMDiagnostics diag = hierarchy::wm_tm_diagnostics(wm, tm);
        const hierarchy::TMDiagnostics naive = hierarchy::naive_wm_moments(wm);

        ordered_json rep = make_report(
            "wm-tm",
            "an estimator tuned to one model keeps its own error report; judged under the "
            "generating model it can be biased and mis-sized",
            "bias=E[yhat-y]; uncertainty=Cov[yhat-y], both under the generating model");
        rep["params"]["working"] = o->working;
        rep["params"]["truth"] = o->truth;
        rep["params"]["mc_draws"] = o->mc_draws;
        rep["params"]["tolerances"]["symmetry_rel_tol"] = gaussian::kSymmetryRelTol;
        rep["results"]["true_bias"] = vec_json(diag.true_bias);
        rep["results"]["true_uncertainty"] = mat_json(diag.true_uncertainty);
        rep["results"]["naive_bias"] = vec_json(naive.true_bias);
        rep["results"]["naive_uncertainty"] = mat_json(naive.true_uncertainty);
        if (o->mc_draws > 0) {
            require_seed(g, "wm-tm");
            const hierarchy::McBias mc = hierarchy::wm_tm_mc_bias(wm, tm, o->mc_draws, g.seed);
            rep["params"]["seed"] = g.seed;
            rep["results"]["mc_bias"] = vec_json(mc.bias);
            rep["results"]["mc_std_error"] = vec_json(mc.std_error);
        }
        emit(g, rep);
    });
}

struct RegressionOpts {
    std::string data;
    std::string response = "z";
    double meas_var = 0.0;
    bool no_intercept = false;
};

void add_regression_flags(CLI::App* sub, RegressionOpts& o) {
    sub->add_option("--data", o.data, "regression CSV: header row, covariate columns plus "
                                      "the response column")
        ->required();
    sub->add_option("--response", o.response, "name of the response column")
        ->capture_default_str();
    sub->add_option("--meas-var", o.meas_var, "measurement-error variance of the response")
        ->required()
        ->check(CLI::NonNegativeNumber);
    sub->add_flag("--no-intercept", o.no_intercept, "do not prepend an intercept column");
}

void ledger_to_json(ordered_json& rep, const variability::VarianceLedger& ledger) {
    rep["results"]["s_xi2"] = ledger.s_xi2;
    rep["results"]["s_eps2"] = ledger.s_eps2;
    rep["results"]["s_delta2"] = ledger.s_delta2;
    rep["results"]["conserved"] = ledger.conserved;
    rep["results"]["identity_residual"] = ledger.s_xi2 - (ledger.s_delta2 + ledger.s_eps2);
}

void add_conserve(CLI::App& app, GlobalOpts& g) {
    auto* sub = app.add_subcommand("conserve",
                                   "split the residual variance of a regression into "
                                   "natural variability plus measurement error");
    sub->fallthrough();
    auto o = std::make_shared<RegressionOpts>();
    add_regression_flags(sub, *o);
    sub->callback([&g, o] {
        const variability::RegressionDataset ds =
            io::load_regression_csv(o->data, o->response, o->meas_var, !o->no_intercept);
        const variability::VarianceLedger ledger = variability::conserve(ds);
        const variability::ScaleDecomposition scales = variability::decompose_scales(ds);

        ordered_json rep = make_report(
            "conserve",
            "total residual variance splits exactly into natural variability plus "
            "measurement-error variance; a negative split flags inconsistent calibration",
            "s_xi2 = s_delta2 + s_eps2");
        rep["params"]["data"] = o->data;
        rep["params"]["response"] = o->response;
        rep["params"]["meas_var"] = o->meas_var;
        rep["params"]["intercept"] = !o->no_intercept;
        rep["params"]["n"] = ds.n();
        rep["params"]["p"] = ds.p();
        rep["params"]["tolerances"]["identity"] = "exact (bitwise)";
        ledger_to_json(rep, ledger);
        ordered_json terms = ordered_json::array();
        for (const auto& [name, value] : scales.large_scale)
            terms.push_back({{"term", name}, {"value", value}});
        rep["results"]["large_scale"] = std::move(terms);
        rep["results"]["large_scale_total"] = scales.expected_value();
        rep["results"]["small_scale_var"] = scales.small_scale_var;
        emit(g, rep);
    });
}

void add_predict(CLI::App& app, GlobalOpts& g) {
    auto* sub = app.add_subcommand("predict",
                                   "point prediction and its mean squared error, with the "
                                   "natural-variability share made explicit");
    sub->fallthrough();
    struct Opts : RegressionOpts {
        std::vector<double> x_new;
    };
    auto o = std::make_shared<Opts>();
    add_regression_flags(sub, *o);
    sub->add_option("--x-new", o->x_new,
                    "covariate vector of the new case, comma separated; include the leading "
                    "1 only with --no-intercept; empty means intercept only")
        ->delimiter(',');
    sub->callback([&g, o] {
        const variability::RegressionDataset ds =
            io::load_regression_csv(o->data, o->response, o->meas_var, !o->no_intercept);
        VectorXd x_new;
        if (o->no_intercept) {
            x_new = to_vector(o->x_new);
        } else {
            x_new.resize(static_cast<Eigen::Index>(o->x_new.size()) + 1);
            x_new(0) = 1.0;
            for (std::size_t i = 0; i < o->x_new.size(); ++i)
                x_new(static_cast<Eigen::Index>(i) + 1) = o->x_new[i];
        }
        const variability::VarianceLedger ledger = variability::conserve(ds);
        const variability::PredictionMoments pm =
            variability::prediction_moments(ds, x_new, ledger);

        ordered_json rep = make_report(
            "predict",
            "prediction error adds the natural variability of a new draw to the estimation "
            "variance of the fitted mean; dropping the former understates the error",
            "mse = s_xi2 x0'(X'X)^-1 x0 + s_delta2");
        rep["params"]["data"] = o->data;
        rep["params"]["response"] = o->response;
        rep["params"]["meas_var"] = o->meas_var;
        rep["params"]["intercept"] = !o->no_intercept;
        rep["params"]["x_new"] = o->x_new;
        rep["params"]["tolerances"]["identity"] = "exact (bitwise)";
        ledger_to_json(rep, ledger);
        rep["results"]["predicted"] = pm.predicted;
        rep["results"]["mse"] = pm.mse;
        rep["results"]["rmse"] = std::sqrt(pm.mse);
        rep["results"]["mse_without_natural_variability"] = pm.mse - ledger.s_delta2;
        emit(g, rep);
    });
}

void add_additivity(CLI::App& app, GlobalOpts& g) {
    auto* sub = app.add_subcommand("additivity",
                                   "score power transforms of a response for linear mean, "
                                   "even spread and symmetric residuals");
    sub->fallthrough();
    struct Opts {
        std::string data;
        std::string x_col = "x";
        std::string z_col = "z";
        std::vector<double> lambdas{0.0, 0.25, 0.5, 0.75, 1.0};
        double w_linearity = 1.0;
        double w_homoskedasticity = 1.0;
        double w_symmetry = 1.0;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--data", o->data, "CSV with the covariate and response columns")->required();
    sub->add_option("--x-col", o->x_col, "covariate column name")->capture_default_str();
    sub->add_option("--z-col", o->z_col, "response column name")->capture_default_str();
    sub->add_option("--lambdas", o->lambdas, "transform exponents to score, comma separated")
        ->delimiter(',')
        ->capture_default_str();
    sub->add_option("--w-linearity", o->w_linearity, "weight of the linearity score")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    sub->add_option("--w-homoskedasticity", o->w_homoskedasticity,
                    "weight of the even-spread score")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    sub->add_option("--w-symmetry", o->w_symmetry, "weight of the symmetry score")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    sub->callback([&g, o] {
        const io::CsvTable t = io::read_csv_file(o->data);
        const Eigen::Index cx = t.column(o->x_col);
        const Eigen::Index cz = t.column(o->z_col);
        if (cx < 0) throw InputError(o->data + ": no column named '" + o->x_col + "'");
        if (cz < 0) throw InputError(o->data + ": no column named '" + o->z_col + "'");
        std::vector<double> x, z;
        for (const auto& row : t.rows) {
            x.push_back(io::detail::parse_double(row[static_cast<std::size_t>(cx)], o->data));
            z.push_back(io::detail::parse_double(row[static_cast<std::size_t>(cz)], o->data));
        }
        const std::vector<variability::AdditivityScore> scores = variability::additivity_scan(
            x, z, o->lambdas, o->w_linearity, o->w_homoskedasticity, o->w_symmetry);

        ordered_json rep = make_report(
            "additivity",
            "a power transform can move a response toward an additive description: "
            "straight mean, level spread, symmetric residuals",
            "g_lambda(z)=(z^lambda-1)/lambda (log z at 0); "
            "overall=linearity^w1 homoskedasticity^w2 symmetry^w3");
        rep["params"]["data"] = o->data;
        rep["params"]["x_col"] = o->x_col;
        rep["params"]["z_col"] = o->z_col;
        rep["params"]["lambdas"] = o->lambdas;
        rep["params"]["w_linearity"] = o->w_linearity;
        rep["params"]["w_homoskedasticity"] = o->w_homoskedasticity;
        rep["params"]["w_symmetry"] = o->w_symmetry;
        rep["params"]["n"] = x.size();
        rep["params"]["tolerances"]["score_range"] = "[0,1] clamped";
        ordered_json rows = ordered_json::array();
        for (const auto& s : scores)
            rows.push_back({{"lambda", s.lambda},
                            {"linearity", s.linearity},
                            {"homoskedasticity", s.homoskedasticity},
                            {"symmetry", s.symmetry},
                            {"overall", s.overall}});
        rep["results"]["ranking"] = std::move(rows);
        rep["results"]["best_lambda"] = scores.front().lambda;
        emit(g, rep);
    });
}

} // namespace

void register_core(CLI::App& app, GlobalOpts& g) {
    add_hm_retrieve(app, g);
    add_wm_tm(app, g);
    add_conserve(app, g);
    add_predict(app, g);
    add_additivity(app, g);
}

} // namespace uqkit::cli
