#pragma once

#include "covshift/filters.hpp"
#include "covshift/kernels.hpp"
#include "covshift/representer.hpp"
#include "covshift/types.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

namespace covshift {

/// A regularized estimate of the density ratio between the target and source
/// input laws, with optional clipping bounds applied when the estimate feeds
/// importance weights.
struct RatioEstimate {
    RepresenterFunction function;
    double lambda = 0.0;
    FilterSpec filter = FilterSpec::tikhonov();
    double clip_floor = 0.0;
    std::optional<double> clip_cap;
};

namespace detail {

inline void check_ratio_inputs(const SampleSet& source, const SampleSet& target, double lambda) {
    if (source.size() < 1 || target.size() < 1) {
        throw std::invalid_argument("ratio estimation: source and target must be non-empty");
    }
    if (source.dim() != target.dim()) {
        throw std::invalid_argument("ratio estimation: source/target dimensions differ");
    }
    if (!(lambda > 0)) throw std::invalid_argument("ratio estimation: lambda must be > 0");
}

/// h_N(i) = (1/M) sum_j K(x_i, x'_j): the target mean embedding sampled at the
/// source points.
inline Vector target_mean_at_source(const KernelSpec& k, const SampleSet& source,
                                    const SampleSet& target) {
    const double minv = 1.0 / static_cast<double>(target.size());
    return minv * gram_times(k, source.points, target.points, Vector::Ones(target.size()));
}

}  // namespace detail

/// Spectral-filter estimate of the density ratio from unlabeled samples:
/// the regularized solution of the empirical ratio equation, realized through
/// the representer reduction
///   g(T) h = g(0) h + S* psi(S S*) S h,
/// which is exact in finite dimensions for every analytic filter in scope.
/// The result has target_block_scale = g_lambda(0) over the target anchors and
/// source coefficients psi_lambda(K_NN / N) h_N.
inline RatioEstimate estimate_beta(const SampleSet& source, const SampleSet& target,
                                   const KernelSpec& kernel, const FilterSpec& filter,
                                   double lambda) {
    detail::check_ratio_inputs(source, target, lambda);
    const Index n = source.size();
    const Matrix t_hat = gram(kernel, source) / static_cast<double>(n);
    const SpectralDecomposition dec = sym_eig(t_hat);
    const Vector h_n = detail::target_mean_at_source(kernel, source, target);
    const Vector q = apply_spectral(dec, filter, lambda, SpectralMode::shifted_quotient, h_n);

    RatioEstimate est;
    est.function.kernel = kernel;
    est.function.source_anchors = source.points;
    est.function.source_coeffs = q;
    est.function.target_anchors = target.points;
    est.function.target_block_scale = filter_eval(filter, lambda, 0.0);
    est.lambda = lambda;
    est.filter = filter;
    return est;
}

/// Closed-form Tikhonov-regularized ratio estimate:
///   beta(x) = (1/lambda) [ (1/M) sum_j K(x, x'_j) - (1/N) sum_i c_i K(x, x_i) ],
///   c = (K_NN / N + lambda I)^{-1} h_N.
/// Serves as an independent check of estimate_beta for the Tikhonov filter:
/// it goes through a dense symmetric solve, not the spectral path.
inline RatioEstimate kulsif_closed_form(const SampleSet& source, const SampleSet& target,
                                        const KernelSpec& kernel, double lambda) {
    detail::check_ratio_inputs(source, target, lambda);
    const Index n = source.size();
    Matrix shifted = gram(kernel, source) / static_cast<double>(n);
    shifted.diagonal().array() += lambda;
    const Vector h_n = detail::target_mean_at_source(kernel, source, target);
    const Vector c = shifted.ldlt().solve(h_n);

    RatioEstimate est;
    est.function.kernel = kernel;
    est.function.source_anchors = source.points;
    est.function.source_coeffs = -c / lambda;
    est.function.target_anchors = target.points;
    est.function.target_block_scale = 1.0 / lambda;
    est.lambda = lambda;
    est.filter = FilterSpec::tikhonov();
    return est;
}

/// Ratio values at the given points, clamped to [clip_floor, clip_cap].
inline Vector clipped_values(const RatioEstimate& est, const SampleSet& points) {
    if (est.clip_cap && *est.clip_cap < est.clip_floor) {
        throw std::invalid_argument("clipped_values: cap below floor");
    }
    if (points.size() == 0) return Vector(0);
    Vector v = evaluate(est.function, points.points);
    v = v.cwiseMax(est.clip_floor);
    if (est.clip_cap) v = v.cwiseMin(*est.clip_cap);
    return v;
}

/// Empirical regularized Christoffel function
///   C_lambda(x) = (1/lambda) [ K(x,x) - k_x^T (lambda I + K_NN/N)^{-1} k_x / N ].
inline double christoffel(const SampleSet& source, const KernelSpec& kernel, double lambda,
                          const Vector& x) {
    if (!(lambda > 0)) throw std::invalid_argument("christoffel: lambda must be > 0");
    if (source.size() < 1) throw std::invalid_argument("christoffel: empty source sample");
    const Index n = source.size();
    Matrix shifted = gram(kernel, source) / static_cast<double>(n);
    shifted.diagonal().array() += lambda;
    Matrix xr(1, x.size());
    xr.row(0) = x.transpose();
    const Vector k_x = gram(kernel, source.points, xr).col(0);
    const double kxx = eval_kernel(kernel, x, x);
    const double quad = k_x.dot(shifted.ldlt().solve(k_x)) / static_cast<double>(n);
    return (kxx - quad) / lambda;
}

/// Empirical effective dimension trace[(lambda I + K_NN/N)^{-1} K_NN/N].
inline double effective_dimension(const SampleSet& source, const KernelSpec& kernel,
                                  double lambda) {
    if (!(lambda > 0)) throw std::invalid_argument("effective_dimension: lambda must be > 0");
    if (source.size() < 1) throw std::invalid_argument("effective_dimension: empty source sample");
    const Matrix t_hat = gram(kernel, source) / static_cast<double>(source.size());
    const SpectralDecomposition dec = sym_eig(t_hat);
    double acc = 0.0;
    for (Index i = 0; i < dec.rank(); ++i) {
        const double t = std::max(0.0, dec.eigenvalues(i));
        acc += t / (lambda + t);
    }
    return acc;
}

/// Largest empirical Christoffel value over a probe grid; a lower bound for
/// the supremum over the domain, reported as such.
inline double n_infinity(const SampleSet& source, const KernelSpec& kernel, double lambda,
                         const SampleSet& probe_points) {
    if (probe_points.size() == 0) throw std::invalid_argument("n_infinity: empty probe set");
    if (!(lambda > 0)) throw std::invalid_argument("n_infinity: lambda must be > 0");
    const Index n = source.size();
    Matrix shifted = gram(kernel, source) / static_cast<double>(n);
    shifted.diagonal().array() += lambda;
    const auto solver = shifted.ldlt();
    const Matrix k_probe = gram(kernel, source.points, probe_points.points);  // n x p
    double best = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < probe_points.size(); ++j) {
        const Vector x = probe_points.point(j);
        const double kxx = eval_kernel(kernel, x, x);
        const double quad = k_probe.col(j).dot(solver.solve(k_probe.col(j))) / static_cast<double>(n);
        best = std::max(best, (kxx - quad) / lambda);
    }
    return best;
}

}  // namespace covshift
