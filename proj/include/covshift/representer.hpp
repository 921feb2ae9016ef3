#pragma once

#include "covshift/kernels.hpp"
#include "covshift/types.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace covshift {

/// An RKHS element stored as kernel expansions over up to two anchor sets:
///
///   f(x) = constant_offset
///        + target_block_scale * (1/M) sum_j K(x, target_anchors_j)
///        + (1/N) sum_i source_coeffs_i * K(x, source_anchors_i)
///
/// The 1/N and 1/M normalizations are part of the contract. A nonzero
/// constant_offset is only meaningful for kernels whose space contains the
/// constants (constant-augmented kernels); norm computations enforce that.
struct RepresenterFunction {
    KernelSpec kernel = KernelSpec::gaussian(1.0);
    Matrix source_anchors;  // N x d
    Vector source_coeffs;   // N
    Matrix target_anchors;  // M x d, may be empty
    double target_block_scale = 0.0;
    double constant_offset = 0.0;
};

inline RepresenterFunction make_source_expansion(KernelSpec kernel, Matrix anchors, Vector coeffs,
                                                 double constant_offset = 0.0) {
    if (anchors.rows() != coeffs.size()) {
        throw std::invalid_argument("representer: coefficient count does not match anchor count");
    }
    RepresenterFunction f;
    f.kernel = std::move(kernel);
    f.source_anchors = std::move(anchors);
    f.source_coeffs = std::move(coeffs);
    f.constant_offset = constant_offset;
    return f;
}

inline void validate_representer(const RepresenterFunction& f) {
    if (f.source_anchors.rows() != f.source_coeffs.size()) {
        throw std::invalid_argument("representer: coefficient count does not match anchor count");
    }
    if (f.target_block_scale != 0.0 && f.target_anchors.rows() == 0) {
        throw std::invalid_argument("representer: target block scale without target anchors");
    }
    if (f.constant_offset != 0.0 && !f.kernel.contains_constants()) {
        throw std::invalid_argument(
            "representer: constant offset requires a constant-augmented kernel");
    }
}

/// Values of f at a batch of points (rows of pts).
inline Vector evaluate(const RepresenterFunction& f, const Matrix& pts) {
    Vector out = Vector::Constant(pts.rows(), f.constant_offset);
    if (f.target_anchors.rows() > 0 && f.target_block_scale != 0.0) {
        const double scale = f.target_block_scale / static_cast<double>(f.target_anchors.rows());
        out += scale * gram_times(f.kernel, pts, f.target_anchors,
                                  Vector::Ones(f.target_anchors.rows()));
    }
    if (f.source_anchors.rows() > 0) {
        const Vector w = f.source_coeffs / static_cast<double>(f.source_anchors.rows());
        out += gram_times(f.kernel, pts, f.source_anchors, w);
    }
    return out;
}

inline double evaluate(const RepresenterFunction& f, const Vector& x) {
    if ((f.source_anchors.rows() > 0 && f.source_anchors.cols() != x.size()) ||
        (f.target_anchors.rows() > 0 && f.target_anchors.cols() != x.size())) {
        throw std::invalid_argument("evaluate: point dimension does not match anchors");
    }
    Matrix pts(1, x.size());
    pts.row(0) = x.transpose();
    return evaluate(f, pts)(0);
}

namespace detail {

/// Anchors and plain expansion weights of the kernel blocks, i.e. f minus its
/// constant part written as sum_i w_i K(., a_i).
inline std::pair<Matrix, Vector> plain_expansion(const RepresenterFunction& f) {
    const Index n = f.source_anchors.rows();
    const Index m = (f.target_block_scale != 0.0) ? f.target_anchors.rows() : 0;
    Index d = 0;
    if (n > 0) d = f.source_anchors.cols();
    if (m > 0) d = f.target_anchors.cols();
    Matrix anchors(n + m, d);
    Vector weights(n + m);
    if (n > 0) {
        anchors.topRows(n) = f.source_anchors;
        weights.head(n) = f.source_coeffs / static_cast<double>(n);
    }
    if (m > 0) {
        anchors.bottomRows(m) = f.target_anchors;
        weights.tail(m).setConstant(f.target_block_scale / static_cast<double>(m));
    }
    return {std::move(anchors), std::move(weights)};
}

inline double block_inner(const KernelSpec& k, const Matrix& a, const Vector& wa, const Matrix& b,
                          const Vector& wb) {
    if (a.rows() == 0 || b.rows() == 0) return 0.0;
    double acc = 0.0;
    const Index chunk = 1024;
    for (Index i0 = 0; i0 < a.rows(); i0 += chunk) {
        const Index h = std::min(chunk, a.rows() - i0);
        acc += wa.segment(i0, h).dot(gram(k, Matrix(a.middleRows(i0, h)), b) * wb);
    }
    return acc;
}

}  // namespace detail

/// <f, g> in the RKHS, via the reproducing property. With a constant-augmented
/// kernel, <1, K(., a)> = 1 and <1, 1> = 1, so the offset contributes
/// offset_f * offset_g + offset_f * sum(w_g) + offset_g * sum(w_f).
inline double rkhs_inner(const RepresenterFunction& f, const RepresenterFunction& g) {
    if (f.kernel != g.kernel) throw std::invalid_argument("rkhs_inner: kernel specs differ");
    validate_representer(f);
    validate_representer(g);
    auto [af, wf] = detail::plain_expansion(f);
    auto [ag, wg] = detail::plain_expansion(g);
    double acc = detail::block_inner(f.kernel, af, wf, ag, wg);
    if (f.constant_offset != 0.0 || g.constant_offset != 0.0) {
        acc += f.constant_offset * g.constant_offset;
        acc += f.constant_offset * wg.sum();
        acc += g.constant_offset * wf.sum();
    }
    return acc;
}

inline double rkhs_norm(const RepresenterFunction& f) {
    return std::sqrt(std::max(0.0, rkhs_inner(f, f)));
}

/// || f - g ||_{H_K}, expanded as <f,f> - 2<f,g> + <g,g> over the anchor blocks.
inline double rkhs_error(const RepresenterFunction& f, const RepresenterFunction& g) {
    if (f.kernel != g.kernel) throw std::invalid_argument("rkhs_error: kernel specs differ");
    const double sq = rkhs_inner(f, f) - 2.0 * rkhs_inner(f, g) + rkhs_inner(g, g);
    return std::sqrt(std::max(0.0, sq));
}

}  // namespace covshift
