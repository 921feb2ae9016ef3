#pragma once

#include "covshift/aggregation.hpp"
#include "covshift/io.hpp"
#include "covshift/numerics.hpp"
#include "covshift/ratio.hpp"
#include "covshift/schedules.hpp"
#include "covshift/synthetic.hpp"
#include "covshift/types.hpp"
#include "covshift/weighted_fit.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace covshift {

struct SizeTuple {
    long m = 1;
    long n = 1;
    long M = 1;
    long N = 1;
};

enum class Measure {
    beta_rkhs,
    beta_pointwise,
    risk_l2_mc,
    f_rkhs,
    aggregate_vs_best,
};

inline std::string measure_name(Measure m) {
    switch (m) {
        case Measure::beta_rkhs:
            return "beta_rkhs";
        case Measure::beta_pointwise:
            return "beta_pointwise";
        case Measure::risk_l2_mc:
            return "risk_L2_mc";
        case Measure::f_rkhs:
            return "f_rkhs";
        case Measure::aggregate_vs_best:
            return "aggregate_vs_best";
    }
    return "?";
}

inline Measure parse_measure(const std::string& s) {
    if (s == "beta_rkhs") return Measure::beta_rkhs;
    if (s == "beta_pointwise") return Measure::beta_pointwise;
    if (s == "risk_L2_mc") return Measure::risk_l2_mc;
    if (s == "f_rkhs") return Measure::f_rkhs;
    if (s == "aggregate_vs_best") return Measure::aggregate_vs_best;
    throw config_error("unknown measure '" + s + "'");
}

enum class ScheduleKind { fixed, lambda_mn, lambda_MN, lambda_delta };

/// Declarative description of one sweep: a problem, a list of size tuples
/// (m, n, M, N), a trial count, the filters, the lambda rule, and what to
/// measure. The ratio lambda always follows the lambda_MN rule with the
/// declared (phi_beta, xi) except under a fixed schedule, which pins both.
struct ExperimentConfig {
    std::string problem;
    std::vector<SizeTuple> sizes;
    int trials = 1;
    std::uint64_t base_seed = 1;
    FilterSpec filter_reg = FilterSpec::tikhonov();
    FilterSpec filter_rn = FilterSpec::tikhonov();
    ScheduleKind schedule = ScheduleKind::lambda_mn;
    double fixed_lambda = 0.1;
    IndexFunction phi = IndexFunction::power(1.0);
    IndexFunction phi_beta = IndexFunction::power(1.0);
    IndexFunction xi = IndexFunction::power(0.5);
    std::vector<Measure> measures;
    int n_mc = 2000;
    RangeSpec probe_grid{-1.0, 1.0, 201};
    RangeSpec lambda_grid{1e-4, 1.0, 12};  // geometric, for aggregation
    double gamma_l = -1.0;                  // <= 0 means the automatic threshold
    bool exact_weights = false;             // use true ratio values instead of estimates
    int threads = 1;
};

/// One CSV record; the `lambda` column always equals the schedule value that
/// the measure used, recomputable from the sizes and the declared index
/// functions.
struct ResultRow {
    std::string problem;
    std::string measure;
    long m = 0, n = 0, M = 0, N = 0;
    double lambda = 0.0;
    int trial = 0;
    std::uint64_t seed = 0;
    double value = 0.0;
};

inline void validate_config(const ExperimentConfig& cfg) {
    if (cfg.problem.empty()) throw config_error("config: problem is required");
    if (cfg.sizes.empty()) throw config_error("config: at least one size tuple is required");
    if (cfg.trials < 1) throw config_error("config: trials must be >= 1");
    const bool wants_risk =
        std::find(cfg.measures.begin(), cfg.measures.end(), Measure::risk_l2_mc) !=
        cfg.measures.end();
    if (wants_risk && cfg.n_mc < 1000) {
        throw config_error("config: n_mc must be >= 1000 when risk_L2_mc is measured");
    }
    if (cfg.n_mc < 1) throw config_error("config: n_mc must be >= 1");
    const bool wants_beta =
        std::count(cfg.measures.begin(), cfg.measures.end(), Measure::beta_rkhs) ||
        std::count(cfg.measures.begin(), cfg.measures.end(), Measure::beta_pointwise);
    if (wants_beta && cfg.exact_weights) {
        throw config_error("config: beta measures require estimated weights");
    }
}

namespace detail {

struct SeedPurpose {
    static constexpr std::uint64_t rn_source = 1;
    static constexpr std::uint64_t rn_target = 2;
    static constexpr std::uint64_t train_x = 3;
    static constexpr std::uint64_t train_y = 4;
    static constexpr std::uint64_t unlabeled = 5;
    static constexpr std::uint64_t mc = 6;
};

}  // namespace detail

/// The lambda used for ratio estimation at sizes (M, N).
inline double schedule_lambda_rn(const ExperimentConfig& cfg, const SizeTuple& s, double c) {
    if (cfg.schedule == ScheduleKind::fixed) return cfg.fixed_lambda;
    return lambda_MN(cfg.phi_beta.with_domain(c), cfg.xi.with_domain(c),
                     static_cast<double>(s.M), static_cast<double>(s.N));
}

/// The lambda used for the regression fit at sizes (m, n, M, N).
inline double schedule_lambda_reg(const ExperimentConfig& cfg, const SizeTuple& s, double c) {
    switch (cfg.schedule) {
        case ScheduleKind::fixed:
            return cfg.fixed_lambda;
        case ScheduleKind::lambda_mn:
        case ScheduleKind::lambda_MN:
            return lambda_mn(cfg.phi.with_domain(c), static_cast<double>(s.m),
                             static_cast<double>(s.n));
        case ScheduleKind::lambda_delta:
            return lambda_delta(cfg.phi.with_domain(c), cfg.phi_beta.with_domain(c),
                                cfg.xi.with_domain(c), static_cast<double>(s.m),
                                static_cast<double>(s.n), static_cast<double>(s.M),
                                static_cast<double>(s.N));
    }
    throw std::logic_error("schedule_lambda_reg: unknown schedule");
}

namespace detail {

struct TrialOutput {
    std::vector<ResultRow> rows;
};

inline TrialOutput run_trial(const ExperimentConfig& cfg, const ProblemSpec& prob,
                             std::size_t size_idx, int trial) {
    const SizeTuple s = cfg.sizes[size_idx];
    const std::uint64_t master = cfg.base_seed + static_cast<std::uint64_t>(trial);
    const double c = prob.kernel.kappa0() * prob.kernel.kappa0();
    TrialOutput out;

    auto emit = [&](const std::string& name, double lambda, double value) {
        out.rows.push_back(ResultRow{prob.name, name, s.m, s.n, s.M, s.N, lambda, trial, master,
                                     value});
    };

    const bool wants_beta =
        std::count(cfg.measures.begin(), cfg.measures.end(), Measure::beta_rkhs) ||
        std::count(cfg.measures.begin(), cfg.measures.end(), Measure::beta_pointwise);
    const bool wants_fit =
        std::count(cfg.measures.begin(), cfg.measures.end(), Measure::risk_l2_mc) ||
        std::count(cfg.measures.begin(), cfg.measures.end(), Measure::f_rkhs);
    const bool wants_agg =
        std::count(cfg.measures.begin(), cfg.measures.end(), Measure::aggregate_vs_best) > 0;

    std::optional<RatioEstimate> beta_hat;
    std::optional<SampleSet> rn_source, rn_target;
    const double lambda_rn = schedule_lambda_rn(cfg, s, c);
    if ((wants_beta || wants_fit || wants_agg) && !cfg.exact_weights) {
        rn_source = sample_source(prob, s.N, derive_seed(master, SeedPurpose::rn_source, size_idx));
        rn_target = sample_target(prob, s.M, derive_seed(master, SeedPurpose::rn_target, size_idx));
        beta_hat = estimate_beta(*rn_source, *rn_target, prob.kernel, cfg.filter_rn, lambda_rn);
    }

    for (Measure m : cfg.measures) {
        switch (m) {
            case Measure::beta_rkhs: {
                if (!beta_hat) throw config_error("beta measures require estimated weights");
                emit(measure_name(m), lambda_rn, rkhs_error(prob.beta, beta_hat->function));
                break;
            }
            case Measure::beta_pointwise: {
                if (!beta_hat) throw config_error("beta measures require estimated weights");
                const SampleSet probes = grid_sample(cfg.probe_grid);
                const Vector diff = evaluate(prob.beta, probes.points) -
                                    evaluate(beta_hat->function, probes.points);
                emit(measure_name(m), lambda_rn, diff.cwiseAbs().maxCoeff());
                break;
            }
            case Measure::risk_l2_mc:
            case Measure::f_rkhs: {
                const double lambda_reg = schedule_lambda_reg(cfg, s, c);
                SampleSet train =
                    sample_train(prob, s.n, derive_seed(master, SeedPurpose::train_x, size_idx),
                                 derive_seed(master, SeedPurpose::train_y, size_idx));
                WeightVector w = WeightVector::unit(train.size());
                if (cfg.exact_weights) {
                    w = WeightVector::exact(evaluate(prob.beta, train.points).cwiseMax(0.0));
                } else {
                    w = WeightVector::estimated(clipped_values(*beta_hat, train), lambda_rn,
                                                cfg.filter_rn);
                }
                const FitResult fr = fit(train, w, prob.kernel, cfg.filter_reg, lambda_reg);
                if (m == Measure::risk_l2_mc) {
                    emit(measure_name(m), lambda_reg,
                         mc_l2_error(fr.function, prob, cfg.n_mc,
                                     derive_seed(master, SeedPurpose::mc, size_idx)));
                } else {
                    emit(measure_name(m), lambda_reg, rkhs_error(prob.f_q, fr.function));
                }
                break;
            }
            case Measure::aggregate_vs_best: {
                SampleSet train =
                    sample_train(prob, s.n, derive_seed(master, SeedPurpose::train_x, size_idx),
                                 derive_seed(master, SeedPurpose::train_y, size_idx));
                const SampleSet unlabeled = sample_target(
                    prob, s.m, derive_seed(master, SeedPurpose::unlabeled, size_idx));
                Vector wvals;
                if (cfg.exact_weights) {
                    wvals = evaluate(prob.beta, train.points).cwiseMax(0.0);
                } else {
                    wvals = clipped_values(*beta_hat, train);
                }
                const WeightVector w = cfg.exact_weights
                                           ? WeightVector::exact(wvals)
                                           : WeightVector::estimated(wvals, lambda_rn, cfg.filter_rn);
                const auto grid = geomspace(cfg.lambda_grid.lo, cfg.lambda_grid.hi,
                                            cfg.lambda_grid.count);
                FitContext ctx(train, w, prob.kernel);
                double gamma = cfg.gamma_l;
                if (gamma <= 0) {
                    std::vector<double> norms;
                    std::vector<double> descending = grid;
                    std::sort(descending.rbegin(), descending.rend());
                    for (std::size_t i = 0; i < descending.size() && i < 3; ++i) {
                        norms.push_back(ctx.fit(cfg.filter_reg, descending[i]).rkhs_norm);
                    }
                    gamma = default_gamma_l(norms);
                }
                const CandidateSet cands = build_candidates(ctx, cfg.filter_reg, grid, gamma);
                const AggregateResult agg = aggregate(cands, unlabeled, train, wvals);
                const std::uint64_t mc_seed = derive_seed(master, SeedPurpose::mc, size_idx);
                emit("aggregate_l2", lambda_rn,
                     mc_l2_error(agg.function, prob, cfg.n_mc, mc_seed));
                double best = std::numeric_limits<double>::infinity();
                for (const FitResult& cand : cands.candidates) {
                    best = std::min(best, mc_l2_error(cand.function, prob, cfg.n_mc, mc_seed));
                }
                emit("best_single_l2", lambda_rn, best);
                break;
            }
        }
    }
    return out;
}

}  // namespace detail

inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("COVSHIFT_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    return 1;
}

/// Run every (size, trial) cell of the sweep and emit rows ordered by
/// (measure order as configured, size index, trial), so rerunning a config
/// yields a byte-identical file regardless of the worker pool.
inline std::vector<ResultRow> run_sweep(const ExperimentConfig& cfg) {
    validate_config(cfg);
    const ProblemSpec prob = resolve_problem(cfg.problem);

    struct Task {
        std::size_t size_idx;
        int trial;
    };
    std::vector<Task> tasks;
    for (std::size_t si = 0; si < cfg.sizes.size(); ++si) {
        for (int t = 0; t < cfg.trials; ++t) tasks.push_back({si, t});
    }
    std::vector<detail::TrialOutput> outputs(tasks.size());
    std::vector<std::string> errors(tasks.size());

    const int threads = std::min<int>(resolve_threads(cfg.threads), static_cast<int>(tasks.size()));
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            try {
                outputs[i] = detail::run_trial(cfg, prob, tasks[i].size_idx, tasks[i].trial);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (!errors[i].empty()) {
            std::cerr << "covshift: size " << tasks[i].size_idx << " trial " << tasks[i].trial
                      << " skipped: " << errors[i] << "\n";
        }
    }

    // Stable output order: configured measure order, then size index, then trial.
    std::vector<ResultRow> rows;
    for (Measure m : cfg.measures) {
        const bool agg = m == Measure::aggregate_vs_best;
        std::vector<std::string> names =
            agg ? std::vector<std::string>{"aggregate_l2", "best_single_l2"}
                : std::vector<std::string>{measure_name(m)};
        for (const std::string& name : names) {
            for (std::size_t si = 0; si < cfg.sizes.size(); ++si) {
                for (int t = 0; t < cfg.trials; ++t) {
                    const std::size_t task = si * static_cast<std::size_t>(cfg.trials) +
                                             static_cast<std::size_t>(t);
                    for (const ResultRow& r : outputs[task].rows) {
                        if (r.measure == name) rows.push_back(r);
                    }
                }
            }
        }
    }
    return rows;
}

inline void write_csv(const std::vector<ResultRow>& rows, std::ostream& os) {
    os << "problem,measure,m,n,M,N,lambda,trial,seed,value\n";
    for (const ResultRow& r : rows) {
        os << r.problem << ',' << r.measure << ',' << r.m << ',' << r.n << ',' << r.M << ','
           << r.N << ',' << format_double(r.lambda) << ',' << r.trial << ',' << r.seed << ','
           << format_double(r.value) << '\n';
    }
}

inline void write_csv(const std::vector<ResultRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write '" + path + "'");
    write_csv(rows, out);
}

inline std::vector<ResultRow> read_result_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw data_error("'" + path + "': empty file");
    if (trim(line) != "problem,measure,m,n,M,N,lambda,trial,seed,value") {
        throw data_error("'" + path + "': unexpected header");
    }
    std::vector<ResultRow> rows;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto cells = split(t, ',');
        if (cells.size() != 10) throw data_error("'" + path + "': malformed row");
        ResultRow r;
        r.problem = cells[0];
        r.measure = cells[1];
        r.m = static_cast<long>(parse_double(cells[2]));
        r.n = static_cast<long>(parse_double(cells[3]));
        r.M = static_cast<long>(parse_double(cells[4]));
        r.N = static_cast<long>(parse_double(cells[5]));
        r.lambda = parse_double(cells[6]);
        r.trial = static_cast<int>(parse_double(cells[7]));
        r.seed = static_cast<std::uint64_t>(parse_double(cells[8]));
        r.value = parse_double(cells[9]);
        rows.push_back(std::move(r));
    }
    return rows;
}

enum class IndependentSize { mn, MN };

struct RateReport {
    struct Point {
        SizeTuple size;
        double size_functional = 0.0;
        double median_value = 0.0;
        int trials = 0;
    };
    std::vector<Point> points;
    double fitted_slope = 0.0;
    double slope_stderr = 0.0;
    double theoretical_exponent = 0.0;
};

/// Least-squares slope of log(median value) against log(m^-1/2 + n^-1/2) or
/// log(M^-1/2 + N^-1/2), per measure.
inline RateReport fit_rate(const std::vector<ResultRow>& rows, const std::string& measure,
                           IndependentSize independent) {
    std::map<std::array<long, 4>, std::vector<double>> groups;
    for (const ResultRow& r : rows) {
        if (r.measure != measure) continue;
        groups[{r.m, r.n, r.M, r.N}].push_back(r.value);
    }
    if (groups.size() < 3) {
        throw std::invalid_argument("fit_rate: need >= 3 distinct size points for '" + measure +
                                    "'");
    }
    RateReport rep;
    std::vector<double> xs, ys;
    for (const auto& [key, values] : groups) {
        RateReport::Point p;
        p.size = SizeTuple{key[0], key[1], key[2], key[3]};
        const double s = independent == IndependentSize::mn
                             ? 1.0 / std::sqrt(static_cast<double>(key[0])) +
                                   1.0 / std::sqrt(static_cast<double>(key[1]))
                             : 1.0 / std::sqrt(static_cast<double>(key[2])) +
                                   1.0 / std::sqrt(static_cast<double>(key[3]));
        p.size_functional = s;
        p.median_value = median(values);
        p.trials = static_cast<int>(values.size());
        rep.points.push_back(p);
        xs.push_back(std::log(s));
        ys.push_back(std::log(p.median_value));
    }
    const LineFit lf = fit_line(xs, ys);
    rep.fitted_slope = lf.slope;
    rep.slope_stderr = lf.slope_stderr;
    return rep;
}

/// Sweep config files are flat key = value text. Keys:
///   problem      = shift1d-mild | shift1d-strong | noshift | <path to problem file>
///   sizes        = m,n,M,N; m,n,M,N; ...
///   trials       = <int>           base_seed = <int>
///   filter_reg   = tikhonov | itik:<nu> | cutoff     (likewise filter_rn)
///   schedule     = fixed:<lambda> | lambda_mn | lambda_MN | lambda_delta
///   phi, phi_beta, xi = power:<rho> | powerlog:<r>:<nu>
///   measures     = beta_rkhs, beta_pointwise, risk_L2_mc, f_rkhs, aggregate_vs_best
///   n_mc         = <int>           probe_grid = a:b:k
///   lambda_grid  = a:b:k (geometric, aggregation only)
///   gamma_l      = auto | <float>  weights = embedded | exact
///   threads      = <int>
inline ExperimentConfig parse_experiment_config(const std::map<std::string, std::string>& kv) {
    ExperimentConfig cfg;
    auto get = [&](const std::string& key) -> std::optional<std::string> {
        const auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        return it->second;
    };
    for (const auto& [key, value] : kv) {
        static const std::vector<std::string> known = {
            "problem", "sizes",      "trials",     "base_seed",  "filter_reg", "filter_rn",
            "schedule", "phi",       "phi_beta",   "xi",         "measures",   "n_mc",
            "probe_grid", "lambda_grid", "gamma_l", "weights",   "threads"};
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw config_error("config: unknown key '" + key + "'");
        }
        (void)value;
    }
    if (auto v = get("problem")) cfg.problem = *v;
    if (auto v = get("sizes")) {
        for (const std::string& tuple : split(*v, ';')) {
            const std::string t = trim(tuple);
            if (t.empty()) continue;
            const auto nums = parse_number_list(t);
            if (nums.size() != 4) throw config_error("config: size tuple needs m,n,M,N");
            cfg.sizes.push_back(SizeTuple{static_cast<long>(nums[0]), static_cast<long>(nums[1]),
                                          static_cast<long>(nums[2]), static_cast<long>(nums[3])});
        }
    }
    if (auto v = get("trials")) cfg.trials = static_cast<int>(parse_double(*v));
    if (auto v = get("base_seed")) cfg.base_seed = static_cast<std::uint64_t>(parse_double(*v));
    if (auto v = get("filter_reg")) cfg.filter_reg = parse_filter(*v);
    if (auto v = get("filter_rn")) cfg.filter_rn = parse_filter(*v);
    if (auto v = get("schedule")) {
        const std::string s = *v;
        if (s == "lambda_mn") {
            cfg.schedule = ScheduleKind::lambda_mn;
        } else if (s == "lambda_MN") {
            cfg.schedule = ScheduleKind::lambda_MN;
        } else if (s == "lambda_delta") {
            cfg.schedule = ScheduleKind::lambda_delta;
        } else if (s.rfind("fixed:", 0) == 0) {
            cfg.schedule = ScheduleKind::fixed;
            cfg.fixed_lambda = parse_double(s.substr(6));
            if (!(cfg.fixed_lambda > 0)) throw config_error("config: fixed lambda must be > 0");
        } else {
            throw config_error("config: unknown schedule '" + s + "'");
        }
    }
    if (auto v = get("phi")) cfg.phi = parse_index(*v);
    if (auto v = get("phi_beta")) cfg.phi_beta = parse_index(*v);
    if (auto v = get("xi")) cfg.xi = parse_index(*v);
    if (auto v = get("measures")) {
        for (const std::string& mstr : split(*v, ',')) {
            const std::string t = trim(mstr);
            if (!t.empty()) cfg.measures.push_back(parse_measure(t));
        }
    }
    if (auto v = get("n_mc")) cfg.n_mc = static_cast<int>(parse_double(*v));
    if (auto v = get("probe_grid")) cfg.probe_grid = parse_range(*v);
    if (auto v = get("lambda_grid")) cfg.lambda_grid = parse_range(*v);
    if (auto v = get("gamma_l")) {
        cfg.gamma_l = (*v == "auto") ? -1.0 : parse_double(*v);
    }
    if (auto v = get("weights")) {
        if (*v == "exact") {
            cfg.exact_weights = true;
        } else if (*v == "embedded") {
            cfg.exact_weights = false;
        } else {
            throw config_error("config: weights must be 'embedded' or 'exact'");
        }
    }
    if (auto v = get("threads")) cfg.threads = static_cast<int>(parse_double(*v));
    validate_config(cfg);
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    try {
        return parse_experiment_config(read_key_values(path));
    } catch (const data_error& e) {
        throw config_error(std::string("config: ") + e.what());
    }
}

/// Write a per-measure summary table and a gnuplot script that regenerates the
/// log-log figures from median files derived from the CSV.
inline void report(const std::vector<ResultRow>& rows, const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw data_error("cannot create directory '" + out_dir + "'");

    std::vector<std::string> measures;
    for (const ResultRow& r : rows) {
        if (std::find(measures.begin(), measures.end(), r.measure) == measures.end()) {
            measures.push_back(r.measure);
        }
    }

    std::ofstream summary(out_dir + "/summary.txt");
    if (!summary) throw data_error("cannot write '" + out_dir + "/summary.txt'");
    summary << "measure points slope slope_stderr\n";

    std::ostringstream plots;
    plots << "set logscale xy\nset xlabel 'size functional'\nset ylabel 'median error'\n"
          << "set datafile separator ','\nset key left top\n";
    bool any_plot = false;

    for (const std::string& m : measures) {
        const bool is_mn = m == "risk_L2_mc" || m == "f_rkhs" || m == "aggregate_l2" ||
                           m == "best_single_l2";
        RateReport rep;
        bool have_slope = false;
        try {
            rep = fit_rate(rows, m, is_mn ? IndependentSize::mn : IndependentSize::MN);
            have_slope = true;
        } catch (const std::invalid_argument&) {
            // fewer than three sizes: medians only
            std::map<std::array<long, 4>, std::vector<double>> groups;
            for (const ResultRow& r : rows) {
                if (r.measure == m) groups[{r.m, r.n, r.M, r.N}].push_back(r.value);
            }
            for (const auto& [key, values] : groups) {
                RateReport::Point p;
                p.size = SizeTuple{key[0], key[1], key[2], key[3]};
                p.size_functional = is_mn ? 1.0 / std::sqrt(static_cast<double>(key[0])) +
                                                1.0 / std::sqrt(static_cast<double>(key[1]))
                                          : 1.0 / std::sqrt(static_cast<double>(key[2])) +
                                                1.0 / std::sqrt(static_cast<double>(key[3]));
                p.median_value = median(values);
                p.trials = static_cast<int>(values.size());
                rep.points.push_back(p);
            }
        }
        const std::string med_path = out_dir + "/" + m + "_medians.csv";
        std::ofstream med(med_path);
        med << "size_functional,median\n";
        for (const auto& p : rep.points) {
            med << format_double(p.size_functional) << ',' << format_double(p.median_value)
                << '\n';
        }
        summary << m << ' ' << rep.points.size() << ' ';
        if (have_slope) {
            summary << format_double(rep.fitted_slope) << ' ' << format_double(rep.slope_stderr);
        } else {
            summary << "- -";
        }
        summary << '\n';
        plots << "plot '" << m << "_medians.csv' using 1:2 skip 1 with linespoints title '" << m
              << "'\npause -1\n";
        any_plot = true;
    }
    if (any_plot) {
        std::ofstream gp(out_dir + "/plots.gp");
        gp << plots.str();
    }
}

}  // namespace covshift
