#pragma once

#include "covshift/filters.hpp"
#include "covshift/kernels.hpp"
#include "covshift/ratio.hpp"
#include "covshift/representer.hpp"
#include "covshift/types.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace covshift {

/// Importance weights for the labeled training points: the diagonal of B.
/// Negative values are rejected here; clipping decisions stay upstream.
struct WeightVector {
    enum class Source { exact, estimated };

    Vector values;
    Source source = Source::exact;
    double lambda_rn = 0.0;               // only meaningful for estimated weights
    FilterSpec filter_rn = FilterSpec::tikhonov();

    static WeightVector exact(Vector v) { return {std::move(v), Source::exact, 0.0, {}}; }
    static WeightVector unit(Index n) { return exact(Vector::Ones(n)); }
    static WeightVector estimated(Vector v, double lambda_rn, FilterSpec filter_rn) {
        return {std::move(v), Source::estimated, lambda_rn, filter_rn};
    }
};

struct FitResult {
    RepresenterFunction function;  // source-anchor block only
    double lambda = 0.0;
    FilterSpec filter = FilterSpec::tikhonov();
    double rkhs_norm = 0.0;
    WeightVector weights;

    /// Plain expansion coefficients a with f = sum_i a_i K(., x_i).
    [[nodiscard]] Vector coefficients() const {
        return function.source_coeffs / static_cast<double>(function.source_anchors.rows());
    }
};

/// Shared state for refitting over a lambda grid: the training Gram, the
/// symmetrized weighted operator T = B^{1/2} K B^{1/2} / n and its
/// decomposition are computed once and reused for every filter application.
class FitContext {
public:
    FitContext(const SampleSet& train, WeightVector weights, KernelSpec kernel)
        : train_(train), weights_(std::move(weights)), kernel_(std::move(kernel)) {
        validate_sample_set(train_, "training set");
        if (!train_.labels) throw std::invalid_argument("fit: training set has no labels");
        const Index n = train_.size();
        if (n < 1) throw std::invalid_argument("fit: need at least one labeled point");
        if (weights_.values.size() != n) {
            throw std::invalid_argument("fit: weight count does not match training size");
        }
        if ((weights_.values.array() < 0).any() || !weights_.values.allFinite()) {
            throw std::invalid_argument("fit: weights must be nonnegative and finite");
        }
        gram_ = gram(kernel_, train_);
        sqrt_w_ = weights_.values.cwiseSqrt();
        Matrix weighted =
            sqrt_w_.asDiagonal() * gram_ * sqrt_w_.asDiagonal() / static_cast<double>(n);
        decomposition_ = sym_eig(weighted);
        weighted_labels_ = sqrt_w_.cwiseProduct(*train_.labels);
    }

    [[nodiscard]] FitResult fit(const FilterSpec& filter, double lambda) const {
        if (!(lambda > 0)) throw std::invalid_argument("fit: lambda must be > 0");
        const Index n = train_.size();
        const Vector filtered =
            apply_spectral(decomposition_, filter, lambda, SpectralMode::filter, weighted_labels_);
        const Vector coeffs = sqrt_w_.cwiseProduct(filtered);  // n * a_i

        FitResult res;
        res.function.kernel = kernel_;
        res.function.source_anchors = train_.points;
        res.function.source_coeffs = coeffs;
        res.lambda = lambda;
        res.filter = filter;
        res.weights = weights_;
        const Vector a = coeffs / static_cast<double>(n);
        res.rkhs_norm = std::sqrt(std::max(0.0, a.dot(gram_ * a)));
        return res;
    }

    [[nodiscard]] const Matrix& training_gram() const { return gram_; }
    [[nodiscard]] const SampleSet& train() const { return train_; }

private:
    SampleSet train_;
    WeightVector weights_;
    KernelSpec kernel_;
    Matrix gram_;
    Vector sqrt_w_;
    Vector weighted_labels_;
    SpectralDecomposition decomposition_;
};

/// Importance-weighted regularized least squares with a general spectral
/// filter. Coefficients follow the symmetrized reduction
///   a = (1/n) B^{1/2} g_lambda(B^{1/2} K B^{1/2} / n) B^{1/2} y,
/// which equals g_lambda(S* B S) S* B y by the push-through identity.
inline FitResult fit(const SampleSet& train, const WeightVector& weights, const KernelSpec& kernel,
                     const FilterSpec& filter, double lambda) {
    return FitContext(train, weights, kernel).fit(filter, lambda);
}

/// Embedded variant: estimate the density ratio from unlabeled samples, clip
/// the values at the training inputs at zero, and use them as weights.
inline FitResult fit_embedded(const SampleSet& train, const SampleSet& rn_source,
                              const SampleSet& rn_target, const KernelSpec& kernel,
                              const FilterSpec& filter_reg, double lambda_reg,
                              const FilterSpec& filter_rn, double lambda_rn) {
    const RatioEstimate est = estimate_beta(rn_source, rn_target, kernel, filter_rn, lambda_rn);
    const Vector values = clipped_values(est, train);
    return fit(train, WeightVector::estimated(values, lambda_rn, filter_rn), kernel, filter_reg,
               lambda_reg);
}

}  // namespace covshift
