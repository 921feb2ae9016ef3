#pragma once

#include "covshift/io.hpp"
#include "covshift/kernels.hpp"
#include "covshift/numerics.hpp"
#include "covshift/representer.hpp"
#include "covshift/types.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

namespace covshift {

struct SourceLaw {
    enum class Kind { uniform, gaussian };

    Kind kind = Kind::uniform;
    double a = -1.0;  // lower bound (uniform) or mean (gaussian)
    double b = 1.0;   // upper bound (uniform) or standard deviation (gaussian)

    static SourceLaw uniform(double lo, double hi) {
        if (!(hi > lo)) throw config_error("source law: uniform needs a < b");
        return {Kind::uniform, lo, hi};
    }
    static SourceLaw gaussian(double mu, double sigma) {
        if (!(sigma > 0)) throw config_error("source law: gaussian needs sigma > 0");
        return {Kind::gaussian, mu, sigma};
    }

    [[nodiscard]] double density(double x) const {
        if (kind == Kind::uniform) return (x >= a && x <= b) ? 1.0 / (b - a) : 0.0;
        const double z = (x - a) / b;
        return std::exp(-0.5 * z * z) / (b * std::sqrt(2.0 * M_PI));
    }

    /// Interval carrying the law's mass, used for quadrature and probe grids.
    [[nodiscard]] std::pair<double, double> support() const {
        if (kind == Kind::uniform) return {a, b};
        return {a - 8.0 * b, a + 8.0 * b};
    }
};

/// A fully specified one-dimensional covariate-shift problem: a source input
/// law, a kernel, a nonnegative density ratio beta with integral one against
/// the source law and a declared upper bound b0, a regression function f_q in
/// the kernel space, and the label noise level.
struct ProblemSpec {
    std::string name;
    SourceLaw source;
    KernelSpec kernel = KernelSpec::gaussian(1.0);
    RepresenterFunction beta;     // normalized: integral against the source law is 1
    double beta_norm_const = 1.0; // the factor applied by normalize_beta
    double b0 = 1.0;
    RepresenterFunction f_q;
    double noise_sigma = 0.1;
};

/// Rescale the ratio coefficients so that the quadrature of beta against the
/// source density equals one, then check nonnegativity and the b0 bound on a
/// 2001-point grid over the support.
inline ProblemSpec normalize_beta(ProblemSpec draft) {
    const auto [lo, hi] = draft.source.support();
    auto raw = [&](double x) {
        Vector p(1);
        p(0) = x;
        return evaluate(draft.beta, p);
    };
    const double mass = integrate([&](double x) { return raw(x) * draft.source.density(x); }, lo,
                                  hi, 1e-13);
    if (!(mass > 1e-12)) throw config_error("normalize_beta: ratio integrates to zero");
    const double scale = 1.0 / mass;
    draft.beta.source_coeffs *= scale;
    draft.beta.target_block_scale *= scale;
    draft.beta.constant_offset *= scale;
    draft.beta_norm_const = scale;

    const auto xs = linspace(lo, hi, 2001);
    for (double x : xs) {
        const double v = raw(x);
        if (v < -1e-12) throw config_error("normalize_beta: ratio is negative on the support");
        if (v > draft.b0 * (1.0 + 1e-9)) {
            throw config_error("normalize_beta: ratio exceeds the declared bound b0");
        }
    }
    const double check = integrate([&](double x) { return raw(x) * draft.source.density(x); }, lo,
                                   hi, 1e-13);
    if (std::abs(check - 1.0) > 1e-8) {
        throw config_error("normalize_beta: normalization check failed");
    }
    return draft;
}

inline SampleSet sample_source(const ProblemSpec& spec, Index n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    SampleSet s;
    s.points.resize(n, 1);
    s.seed = seed;
    if (spec.source.kind == SourceLaw::Kind::uniform) {
        std::uniform_real_distribution<double> dist(spec.source.a, spec.source.b);
        for (Index i = 0; i < n; ++i) s.points(i, 0) = dist(rng);
    } else {
        std::normal_distribution<double> dist(spec.source.a, spec.source.b);
        for (Index i = 0; i < n; ++i) s.points(i, 0) = dist(rng);
    }
    return s;
}

struct RejectionStats {
    std::int64_t attempts = 0;
};

/// Draw from the target law by rejection: propose x from the source law and
/// accept with probability beta(x)/b0.
inline SampleSet sample_target(const ProblemSpec& spec, Index m, std::uint64_t seed,
                               RejectionStats* stats = nullptr) {
    if (!(spec.b0 > 0)) throw config_error("sample_target: b0 must be declared positive");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    SampleSet s;
    s.points.resize(m, 1);
    s.seed = seed;
    Vector p(1);
    Index accepted = 0;
    std::int64_t attempts = 0;
    while (accepted < m) {
        double x = 0.0;
        if (spec.source.kind == SourceLaw::Kind::uniform) {
            x = spec.source.a + (spec.source.b - spec.source.a) * unit(rng);
        } else {
            std::normal_distribution<double> dist(spec.source.a, spec.source.b);
            x = dist(rng);
        }
        ++attempts;
        p(0) = x;
        const double accept = evaluate(spec.beta, p) / spec.b0;
        if (unit(rng) <= accept) {
            s.points(accepted, 0) = x;
            ++accepted;
        }
    }
    if (stats) stats->attempts = attempts;
    return s;
}

/// Labels y_i = f_q(x_i) + eps_i, eps_i ~ N(0, noise_sigma^2).
inline Vector sample_labels(const ProblemSpec& spec, const SampleSet& xs, std::uint64_t seed) {
    Vector y = evaluate(spec.f_q, xs.points);
    if (spec.noise_sigma > 0) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> noise(0.0, spec.noise_sigma);
        for (Index i = 0; i < y.size(); ++i) y(i) += noise(rng);
    }
    return y;
}

inline SampleSet sample_train(const ProblemSpec& spec, Index n, std::uint64_t seed_x,
                              std::uint64_t seed_y) {
    SampleSet s = sample_source(spec, n, seed_x);
    s.labels = sample_labels(spec, s, seed_y);
    return s;
}

/// Monte-Carlo excess risk: mean of (f - f_q)^2 over fresh target draws.
/// The square root of this quantity is the target L2 error.
inline double mc_excess_risk(const RepresenterFunction& f, const ProblemSpec& spec, Index n_mc,
                             std::uint64_t seed) {
    if (n_mc < 1) throw std::invalid_argument("mc_excess_risk: need n_mc >= 1");
    const SampleSet fresh = sample_target(spec, n_mc, seed);
    const Vector diff = evaluate(f, fresh.points) - evaluate(spec.f_q, fresh.points);
    return diff.squaredNorm() / static_cast<double>(n_mc);
}

inline double mc_l2_error(const RepresenterFunction& f, const ProblemSpec& spec, Index n_mc,
                          std::uint64_t seed) {
    return std::sqrt(mc_excess_risk(f, spec, n_mc, seed));
}

namespace detail {

inline Matrix column_matrix(const std::vector<double>& xs) {
    Matrix m(static_cast<Index>(xs.size()), 1);
    for (std::size_t i = 0; i < xs.size(); ++i) m(static_cast<Index>(i), 0) = xs[i];
    return m;
}

inline RepresenterFunction expansion(const KernelSpec& k, const std::vector<double>& anchors,
                                     const std::vector<double>& plain_coeffs, double offset = 0.0) {
    if (anchors.size() != plain_coeffs.size()) {
        throw config_error("problem: anchor and coefficient counts differ");
    }
    RepresenterFunction f;
    f.kernel = k;
    f.source_anchors = column_matrix(anchors);
    f.source_coeffs.resize(static_cast<Index>(plain_coeffs.size()));
    for (std::size_t i = 0; i < plain_coeffs.size(); ++i) {
        // Stored convention divides by the anchor count.
        f.source_coeffs(static_cast<Index>(i)) =
            plain_coeffs[i] * static_cast<double>(plain_coeffs.size());
    }
    f.constant_offset = offset;
    return f;
}

}  // namespace detail

/// Apply the source covariance to an expansion: u -> integral K(., y) u(y)
/// drho_S(y), realized on a composite-Simpson anchor grid over the support as
/// a finite kernel expansion. Each application raises the order of the source
/// condition satisfied by the constructed function by one, so ground truths
/// built this way genuinely carry the smoothness the schedules declare.
inline RepresenterFunction smooth_by_covariance(const RepresenterFunction& u,
                                                const SourceLaw& source, int grid_points = 257) {
    if (grid_points < 3 || grid_points % 2 == 0) {
        throw std::invalid_argument("smooth_by_covariance: grid_points must be odd and >= 3");
    }
    const auto [lo, hi] = source.support();
    const auto ys = linspace(lo, hi, grid_points);
    const double h = (hi - lo) / static_cast<double>(grid_points - 1);
    Matrix anchors(grid_points, 1);
    for (int j = 0; j < grid_points; ++j) anchors(j, 0) = ys[static_cast<std::size_t>(j)];
    const Vector values = evaluate(u, anchors);
    Vector plain(grid_points);
    for (int j = 0; j < grid_points; ++j) {
        double w = (j == 0 || j == grid_points - 1) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
        w *= h / 3.0;
        plain(j) = w * source.density(ys[static_cast<std::size_t>(j)]) * values(j);
    }
    RepresenterFunction out;
    out.kernel = u.kernel;
    out.source_anchors = anchors;
    out.source_coeffs = plain * static_cast<double>(grid_points);
    return out;
}

/// Problems shipped with the harness. "shift1d-mild" concentrates the target
/// mildly around the origin, "shift1d-strong" pushes the mass to the right
/// edge, and "noshift" keeps the ratio identically one (which requires the
/// constant-augmented kernel). The mild and strong ratios are covariance
/// images of single bumps, so they satisfy a power source condition of order
/// at least one by construction.
inline ProblemSpec named_problem(const std::string& name) {
    ProblemSpec p;
    p.name = name;
    p.source = SourceLaw::uniform(-1.0, 1.0);
    p.noise_sigma = 0.1;
    if (name == "shift1d-mild") {
        p.kernel = KernelSpec::gaussian(0.4);
        p.beta = smooth_by_covariance(detail::expansion(p.kernel, {0.0}, {1.0}), p.source);
        p.b0 = 1.6;
        p.f_q = detail::expansion(p.kernel, {-0.5, 0.4}, {1.0, -0.7});
    } else if (name == "shift1d-strong") {
        p.kernel = KernelSpec::gaussian(0.2);
        p.beta = smooth_by_covariance(detail::expansion(p.kernel, {0.8}, {1.0}), p.source);
        p.b0 = 4.0;
        p.f_q = detail::expansion(p.kernel, {0.85, -0.3}, {1.0, -0.5});
    } else if (name == "noshift") {
        p.kernel = KernelSpec::constant_augmented(KernelSpec::gaussian(0.5));
        p.beta = detail::expansion(p.kernel, {}, {}, 1.0);
        p.b0 = 1.0;
        p.f_q = detail::expansion(p.kernel, {-0.3, 0.5}, {0.8, -0.6});
    } else {
        throw config_error("unknown problem '" + name + "'");
    }
    return normalize_beta(std::move(p));
}

/// Problem files: flat key = value text with keys
///   source = uniform:<a>:<b> | gaussian:<mu>:<sigma>
///   kernel = gaussian:<sigma> | cgaussian:<sigma>
///   beta.anchors / beta.coeffs / beta.offset, b0
///   fq.anchors / fq.coeffs / fq.offset
///   noise = <sigma>
/// Coefficients are plain expansion weights: f(x) = offset + sum_i c_i K(x, t_i).
inline ProblemSpec load_problem_file(const std::string& path) {
    const auto kv = read_key_values(path);
    auto need = [&](const std::string& key) {
        const auto it = kv.find(key);
        if (it == kv.end()) throw config_error("'" + path + "': missing key '" + key + "'");
        return it->second;
    };
    auto optional_list = [&](const std::string& key) {
        const auto it = kv.find(key);
        return it == kv.end() ? std::vector<double>{} : parse_number_list(it->second);
    };
    auto optional_number = [&](const std::string& key, double fallback) {
        const auto it = kv.find(key);
        return it == kv.end() ? fallback : parse_double(it->second);
    };

    ProblemSpec p;
    p.name = kv.count("name") ? kv.at("name") : path;
    const auto src = split(need("source"), ':');
    if (src.size() != 3) throw config_error("'" + path + "': source needs <kind>:<a>:<b>");
    if (src[0] == "uniform") {
        p.source = SourceLaw::uniform(parse_double(src[1]), parse_double(src[2]));
    } else if (src[0] == "gaussian") {
        p.source = SourceLaw::gaussian(parse_double(src[1]), parse_double(src[2]));
    } else {
        throw config_error("'" + path + "': unknown source kind '" + src[0] + "'");
    }
    p.kernel = parse_kernel(need("kernel"));
    p.beta = detail::expansion(p.kernel, optional_list("beta.anchors"),
                               optional_list("beta.coeffs"), optional_number("beta.offset", 0.0));
    p.b0 = parse_double(need("b0"));
    p.f_q = detail::expansion(p.kernel, optional_list("fq.anchors"), optional_list("fq.coeffs"),
                              optional_number("fq.offset", 0.0));
    p.noise_sigma = optional_number("noise", 0.1);
    if (p.noise_sigma < 0) throw config_error("'" + path + "': noise must be >= 0");
    try {
        validate_representer(p.beta);
        validate_representer(p.f_q);
    } catch (const std::invalid_argument& e) {
        throw config_error("'" + path + "': " + e.what());
    }
    return normalize_beta(std::move(p));
}

/// Resolve a problem reference: a shipped name or a path to a problem file.
inline ProblemSpec resolve_problem(const std::string& ref) {
    if (ref == "shift1d-mild" || ref == "shift1d-strong" || ref == "noshift") {
        return named_problem(ref);
    }
    return load_problem_file(ref);
}

}  // namespace covshift
