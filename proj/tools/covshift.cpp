// covshift: spectral-filter kernel regression under covariate shift.
//
// Subcommands: ratio (density-ratio estimation), fit (importance-weighted
// regularized least squares), aggregate (linear aggregation of a lambda grid),
// sweep (synthetic experiments), rates (log-log slope fits), report (summary
// tables and plot scripts).

#include <CLI11.hpp>
#include <json.hpp>

#include "covshift/aggregation.hpp"
#include "covshift/harness.hpp"
#include "covshift/io.hpp"
#include "covshift/ratio.hpp"
#include "covshift/schedules.hpp"
#include "covshift/synthetic.hpp"
#include "covshift/weighted_fit.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace covshift;

void write_eval_csv(const std::string& path, const std::string& value_column,
                    const SampleSet& grid, const Vector& values) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write '" + path + "'");
    out << "x," << value_column << "\n";
    for (Index i = 0; i < grid.size(); ++i) {
        out << format_double(grid.points(i, 0)) << ',' << format_double(values(i)) << '\n';
    }
}

/// Model files: kernel spec line, anchor count, then one row per anchor with
/// the coordinates and the plain expansion coefficient (f = sum_i a_i K(., x_i)).
void write_model(const std::string& path, const RepresenterFunction& f) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write '" + path + "'");
    out << kernel_name(f.kernel) << '\n';
    const Index n = f.source_anchors.rows();
    out << n << '\n';
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < f.source_anchors.cols(); ++j) {
            out << format_double(f.source_anchors(i, j)) << ' ';
        }
        out << format_double(f.source_coeffs(i) / static_cast<double>(n)) << '\n';
    }
}

struct RatioArgs {
    std::string kernel = "gaussian:1.0";
    std::string filter = "tikhonov";
    std::string lambda = "schedule";
    std::string source_path;
    std::string target_path;
    std::string eval_grid;
    std::string out = "-";
    std::string phi_beta = "power:1.0";
    std::string xi = "power:0.5";
};

int run_ratio(const RatioArgs& a) {
    const KernelSpec kernel = parse_kernel(a.kernel);
    const FilterSpec filter = parse_filter(a.filter);
    const SampleSet source = read_points_csv(a.source_path);
    const SampleSet target = read_points_csv(a.target_path);
    double lambda = 0.0;
    if (a.lambda == "schedule") {
        const double c = kernel.kappa0() * kernel.kappa0();
        lambda = lambda_MN(parse_index(a.phi_beta).with_domain(c), parse_index(a.xi).with_domain(c),
                           static_cast<double>(target.size()), static_cast<double>(source.size()));
    } else {
        lambda = parse_double(a.lambda);
    }
    const RatioEstimate est = estimate_beta(source, target, kernel, filter, lambda);
    const SampleSet grid = grid_sample(parse_range(a.eval_grid));
    const Vector values = evaluate(est.function, grid.points);
    if (a.out == "-") {
        std::cout << "x,beta_hat\n";
        for (Index i = 0; i < grid.size(); ++i) {
            std::cout << format_double(grid.points(i, 0)) << ',' << format_double(values(i))
                      << '\n';
        }
    } else {
        write_eval_csv(a.out, "beta_hat", grid, values);
    }
    return 0;
}

struct FitArgs {
    std::string train_path;
    std::string weights = "embedded";
    std::string rn_source_path;
    std::string rn_target_path;
    std::string kernel = "gaussian:1.0";
    std::string filter = "tikhonov";
    double lambda = 0.1;
    std::string rn_filter = "tikhonov";
    std::string rn_lambda = "schedule";
    std::string out_model;
    std::string eval_grid;
    std::string eval_out;
};

WeightVector resolve_weights(const FitArgs& a, const SampleSet& train, const KernelSpec& kernel,
                             Vector* beta_values_out = nullptr) {
    if (a.weights.rfind("exact:", 0) == 0) {
        const SampleSet wfile = read_points_csv(a.weights.substr(6));
        if (wfile.size() != train.size()) {
            throw data_error("weights file row count does not match training size");
        }
        Vector w = wfile.points.col(wfile.points.cols() - 1);
        if ((w.array() < 0).any()) throw data_error("weights file contains negative values");
        if (beta_values_out) *beta_values_out = w;
        return WeightVector::exact(w);
    }
    if (a.weights != "embedded") {
        throw config_error("--weights must be exact:<csv> or embedded");
    }
    if (a.rn_source_path.empty() || a.rn_target_path.empty()) {
        throw config_error("embedded weights need --rn-source and --rn-target");
    }
    const SampleSet rn_source = read_points_csv(a.rn_source_path);
    const SampleSet rn_target = read_points_csv(a.rn_target_path);
    const FilterSpec rn_filter = parse_filter(a.rn_filter);
    double rn_lambda = 0.0;
    if (a.rn_lambda == "schedule") {
        const double c = kernel.kappa0() * kernel.kappa0();
        rn_lambda = lambda_MN(IndexFunction::power(1.0, c), IndexFunction::power(0.5, c),
                              static_cast<double>(rn_target.size()),
                              static_cast<double>(rn_source.size()));
    } else {
        rn_lambda = parse_double(a.rn_lambda);
    }
    const RatioEstimate est = estimate_beta(rn_source, rn_target, kernel, rn_filter, rn_lambda);
    const Vector values = clipped_values(est, train);
    if (beta_values_out) *beta_values_out = values;
    return WeightVector::estimated(values, rn_lambda, rn_filter);
}

int run_fit(const FitArgs& a) {
    const KernelSpec kernel = parse_kernel(a.kernel);
    const FilterSpec filter = parse_filter(a.filter);
    const SampleSet train = read_points_csv(a.train_path, /*with_labels=*/true);
    const WeightVector w = resolve_weights(a, train, kernel);
    const FitResult fr = fit(train, w, kernel, filter, a.lambda);
    if (!a.out_model.empty()) write_model(a.out_model, fr.function);
    if (!a.eval_grid.empty()) {
        const SampleSet grid = grid_sample(parse_range(a.eval_grid));
        const Vector values = evaluate(fr.function, grid.points);
        if (a.eval_out.empty()) throw config_error("--eval-grid needs --eval-out");
        write_eval_csv(a.eval_out, "f_hat", grid, values);
    }
    std::cerr << "fit: n=" << train.size() << " lambda=" << format_double(a.lambda)
              << " rkhs_norm=" << format_double(fr.rkhs_norm) << "\n";
    return 0;
}

struct AggregateArgs {
    FitArgs fit;
    std::string lambda_grid = "1e-3:1:12";
    std::string gamma_l = "auto";
    std::string target_unlabeled_path;
    std::string diagnostics;
};

int run_aggregate(const AggregateArgs& a) {
    const KernelSpec kernel = parse_kernel(a.fit.kernel);
    const FilterSpec filter = parse_filter(a.fit.filter);
    const SampleSet train = read_points_csv(a.fit.train_path, /*with_labels=*/true);
    const SampleSet unlabeled = read_points_csv(a.target_unlabeled_path);
    Vector beta_values;
    const WeightVector w = resolve_weights(a.fit, train, kernel, &beta_values);

    const RangeSpec r = parse_range(a.lambda_grid);
    const auto grid = geomspace(r.lo, r.hi, r.count);
    FitContext ctx(train, w, kernel);
    double gamma = 0.0;
    if (a.gamma_l == "auto") {
        std::vector<double> descending = grid;
        std::sort(descending.rbegin(), descending.rend());
        std::vector<double> norms;
        for (std::size_t i = 0; i < descending.size() && i < 3; ++i) {
            norms.push_back(ctx.fit(filter, descending[i]).rkhs_norm);
        }
        gamma = default_gamma_l(norms);
    } else {
        gamma = parse_double(a.gamma_l);
    }
    const CandidateSet cands = build_candidates(ctx, filter, grid, gamma);
    const AggregateResult agg = aggregate(cands, unlabeled, train, beta_values);
    if (!a.fit.out_model.empty()) write_model(a.fit.out_model, agg.function);
    if (!a.fit.eval_grid.empty()) {
        if (a.fit.eval_out.empty()) throw config_error("--eval-grid needs --eval-out");
        const SampleSet egrid = grid_sample(parse_range(a.fit.eval_grid));
        write_eval_csv(a.fit.eval_out, "f_hat", egrid, evaluate(agg.function, egrid.points));
    }
    if (!a.diagnostics.empty()) {
        std::ofstream out(a.diagnostics, std::ios::binary);
        if (!out) throw data_error("cannot write '" + a.diagnostics + "'");
        std::size_t kept_idx = 0;
        for (std::size_t k = 0; k < cands.all_lambdas.size(); ++k) {
            const bool kept = std::find(cands.discarded.begin(), cands.discarded.end(),
                                        static_cast<Index>(k)) == cands.discarded.end();
            nlohmann::json rec;
            rec["lambda_k"] = cands.all_lambdas[k];
            rec["norm_k"] = cands.all_norms[k];
            rec["kept"] = kept;
            if (kept) {
                rec["c_k"] = agg.coefficients(static_cast<Index>(kept_idx));
                ++kept_idx;
            } else {
                rec["c_k"] = nullptr;
            }
            rec["solver_note"] = solver_note_name(agg.solver_note);
            out << rec.dump() << '\n';
        }
    }
    return 0;
}

int run_sweep_cmd(const std::string& config_path, const std::string& out_path, int threads) {
    ExperimentConfig cfg = load_experiment_config(config_path);
    if (threads > 0) cfg.threads = threads;
    const auto rows = run_sweep(cfg);
    write_csv(rows, out_path);
    std::cerr << "sweep: wrote " << rows.size() << " rows to " << out_path << "\n";
    return 0;
}

int run_rates(const std::string& csv_path, const std::string& measure,
              const std::string& independent, double r, double eta, double varsigma) {
    const auto rows = read_result_csv(csv_path);
    const IndependentSize ind = independent == "mn" ? IndependentSize::mn : IndependentSize::MN;
    RateReport rep = fit_rate(rows, measure, ind);
    if (measure == "beta_rkhs") {
        rep.theoretical_exponent =
            rate_exponent(RateSetting::beta_rkhs, {.eta = eta, .varsigma = varsigma});
    } else if (measure == "beta_pointwise") {
        rep.theoretical_exponent =
            rate_exponent(RateSetting::beta_pointwise, {.eta = eta, .varsigma = varsigma});
    } else if (measure == "f_rkhs") {
        rep.theoretical_exponent = rate_exponent(RateSetting::regression_rkhs, {.r = r});
    } else {
        rep.theoretical_exponent = rate_exponent(RateSetting::regression_l2, {.r = r});
    }
    std::cout << "measure " << measure << "\n";
    std::cout << "points " << rep.points.size() << "\n";
    for (const auto& pt : rep.points) {
        std::cout << "  sizes (" << pt.size.m << "," << pt.size.n << "," << pt.size.M << ","
                  << pt.size.N << ") s=" << format_double(pt.size_functional)
                  << " median=" << format_double(pt.median_value) << " trials=" << pt.trials
                  << "\n";
    }
    std::cout << "fitted_slope " << format_double(rep.fitted_slope) << "\n";
    std::cout << "slope_stderr " << format_double(rep.slope_stderr) << "\n";
    std::cout << "theoretical_exponent " << format_double(rep.theoretical_exponent) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"general-regularization covariate-shift adaptation"};
    app.require_subcommand(1);

    RatioArgs ratio_args;
    auto* ratio_cmd = app.add_subcommand("ratio", "estimate a density ratio from two samples");
    ratio_cmd->add_option("--kernel", ratio_args.kernel, "gaussian:<sigma> | cgaussian:<sigma>");
    ratio_cmd->add_option("--filter", ratio_args.filter, "tikhonov | itik:<nu> | cutoff");
    ratio_cmd->add_option("--lambda", ratio_args.lambda, "positive value or 'schedule'");
    ratio_cmd->add_option("--source", ratio_args.source_path, "source points CSV")->required();
    ratio_cmd->add_option("--target", ratio_args.target_path, "target points CSV")->required();
    ratio_cmd->add_option("--eval-grid", ratio_args.eval_grid, "a:b:k evaluation grid")
        ->required();
    ratio_cmd->add_option("--out", ratio_args.out, "output CSV path, '-' for stdout");
    ratio_cmd->add_option("--phi-beta", ratio_args.phi_beta, "index function for the schedule");
    ratio_cmd->add_option("--xi", ratio_args.xi, "kernel index function for the schedule");

    FitArgs fit_args;
    auto* fit_cmd = app.add_subcommand("fit", "importance-weighted regularized least squares");
    fit_cmd->add_option("--train", fit_args.train_path, "labeled CSV (x...,y)")->required();
    fit_cmd->add_option("--weights", fit_args.weights, "exact:<csv> | embedded");
    fit_cmd->add_option("--rn-source", fit_args.rn_source_path, "source points CSV");
    fit_cmd->add_option("--rn-target", fit_args.rn_target_path, "target points CSV");
    fit_cmd->add_option("--kernel", fit_args.kernel, "gaussian:<sigma> | cgaussian:<sigma>");
    fit_cmd->add_option("--filter", fit_args.filter, "tikhonov | itik:<nu> | cutoff");
    fit_cmd->add_option("--lambda", fit_args.lambda, "regularization parameter")->required();
    fit_cmd->add_option("--rn-filter", fit_args.rn_filter, "filter for the ratio step");
    fit_cmd->add_option("--rn-lambda", fit_args.rn_lambda, "ratio lambda or 'schedule'");
    fit_cmd->add_option("--out-model", fit_args.out_model, "model file path");
    fit_cmd->add_option("--eval-grid", fit_args.eval_grid, "a:b:k evaluation grid");
    fit_cmd->add_option("--eval-out", fit_args.eval_out, "evaluation CSV path");

    AggregateArgs agg_args;
    auto* agg_cmd = app.add_subcommand("aggregate", "aggregate fits across a lambda grid");
    agg_cmd->add_option("--train", agg_args.fit.train_path, "labeled CSV (x...,y)")->required();
    agg_cmd->add_option("--weights", agg_args.fit.weights, "exact:<csv> | embedded");
    agg_cmd->add_option("--rn-source", agg_args.fit.rn_source_path, "source points CSV");
    agg_cmd->add_option("--rn-target", agg_args.fit.rn_target_path, "target points CSV");
    agg_cmd->add_option("--kernel", agg_args.fit.kernel, "gaussian:<sigma> | cgaussian:<sigma>");
    agg_cmd->add_option("--filter", agg_args.fit.filter, "tikhonov | itik:<nu> | cutoff");
    agg_cmd->add_option("--rn-filter", agg_args.fit.rn_filter, "filter for the ratio step");
    agg_cmd->add_option("--rn-lambda", agg_args.fit.rn_lambda, "ratio lambda or 'schedule'");
    agg_cmd->add_option("--lambda-grid", agg_args.lambda_grid, "a:b:k geometric grid");
    agg_cmd->add_option("--gamma-l", agg_args.gamma_l, "norm threshold or 'auto'");
    agg_cmd->add_option("--target-unlabeled", agg_args.target_unlabeled_path,
                        "unlabeled target CSV")
        ->required();
    agg_cmd->add_option("--out-model", agg_args.fit.out_model, "model file path");
    agg_cmd->add_option("--eval-grid", agg_args.fit.eval_grid, "a:b:k evaluation grid");
    agg_cmd->add_option("--eval-out", agg_args.fit.eval_out, "evaluation CSV path");
    agg_cmd->add_option("--diagnostics", agg_args.diagnostics, "JSON-lines diagnostics path");

    std::string sweep_config, sweep_out = "results.csv";
    int sweep_threads = 0;
    auto* sweep_cmd = app.add_subcommand("sweep", "run a configured experiment sweep");
    sweep_cmd->add_option("--config", sweep_config, "config file")->required();
    sweep_cmd->add_option("--out", sweep_out, "output CSV");
    sweep_cmd->add_option("--threads", sweep_threads, "worker threads (default: COVSHIFT_THREADS or 1)");

    std::string rates_csv, rates_measure = "beta_rkhs", rates_independent = "MN";
    double rates_r = 1.0, rates_eta = 1.0, rates_varsigma = 0.5;
    auto* rates_cmd = app.add_subcommand("rates", "fit log-log convergence slopes");
    rates_cmd->add_option("--csv", rates_csv, "sweep results CSV")->required();
    rates_cmd->add_option("--measure", rates_measure, "measure column value");
    rates_cmd->add_option("--independent", rates_independent, "mn | MN")
        ->check(CLI::IsMember({"mn", "MN"}));
    rates_cmd->add_option("--r", rates_r, "regression smoothness for the reference exponent");
    rates_cmd->add_option("--eta", rates_eta, "ratio smoothness for the reference exponent");
    rates_cmd->add_option("--varsigma", rates_varsigma, "kernel exponent for the reference");

    std::string report_csv, report_dir = "reports";
    auto* report_cmd = app.add_subcommand("report", "write summary tables and plot scripts");
    report_cmd->add_option("--csv", report_csv, "sweep results CSV")->required();
    report_cmd->add_option("--out-dir", report_dir, "output directory");

    try {
        app.parse(argc, argv);
        if (ratio_cmd->parsed()) return run_ratio(ratio_args);
        if (fit_cmd->parsed()) return run_fit(fit_args);
        if (agg_cmd->parsed()) return run_aggregate(agg_args);
        if (sweep_cmd->parsed()) return run_sweep_cmd(sweep_config, sweep_out, sweep_threads);
        if (rates_cmd->parsed()) {
            return run_rates(rates_csv, rates_measure, rates_independent, rates_r, rates_eta,
                             rates_varsigma);
        }
        if (report_cmd->parsed()) {
            report(read_result_csv(report_csv), report_dir);
            return 0;
        }
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const config_error& e) {
        std::cerr << "covshift: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "covshift: " << e.what() << "\n";
        return 2;
    } catch (const data_error& e) {
        std::cerr << "covshift: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "covshift: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
