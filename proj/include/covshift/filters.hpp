#pragma once

#include "covshift/numerics.hpp"
#include "covshift/types.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace covshift {

/// A spectral regularization family g_lambda: [0,c] -> R together with the
/// constants (gamma_0, gamma_{-1/2}, gamma_{-1}) bounding |1 - t g|, sqrt(t)|g|
/// and |g|, and the qualification nu bounding t^nu |1 - t g| by gamma_nu lambda^nu.
struct FilterSpec {
    enum class Kind { tikhonov, iterated_tikhonov, spectral_cutoff };

    Kind kind = Kind::tikhonov;
    int order = 1;  // nu for iterated_tikhonov, ignored otherwise

    static FilterSpec tikhonov() { return {Kind::tikhonov, 1}; }
    static FilterSpec iterated_tikhonov(int nu) {
        if (nu < 1) throw std::invalid_argument("iterated_tikhonov: order must be >= 1");
        return {Kind::iterated_tikhonov, nu};
    }
    static FilterSpec spectral_cutoff() { return {Kind::spectral_cutoff, 1}; }

    friend bool operator==(const FilterSpec& a, const FilterSpec& b) {
        return a.kind == b.kind && (a.kind != Kind::iterated_tikhonov || a.order == b.order);
    }
};

struct FilterConstants {
    double gamma0;
    double gamma_minus_half;
    double gamma_minus_one;
};

inline FilterConstants filter_constants(const FilterSpec& f) {
    switch (f.kind) {
        case FilterSpec::Kind::tikhonov:
            return {1.0, 0.5, 1.0};
        case FilterSpec::Kind::iterated_tikhonov: {
            const double nu = f.order;
            return {1.0, std::sqrt(nu), nu};
        }
        case FilterSpec::Kind::spectral_cutoff:
            return {1.0, 1.0, 1.0};
    }
    throw std::logic_error("filter_constants: unknown kind");
}

inline double qualification(const FilterSpec& f) {
    switch (f.kind) {
        case FilterSpec::Kind::tikhonov:
            return 1.0;
        case FilterSpec::Kind::iterated_tikhonov:
            return f.order;
        case FilterSpec::Kind::spectral_cutoff:
            return std::numeric_limits<double>::infinity();
    }
    throw std::logic_error("qualification: unknown kind");
}

/// Constant in t^nu |1 - t g_lambda(t)| <= gamma_nu lambda^nu; equals one for
/// every family in scope at any nu up to the qualification.
inline double gamma_nu(const FilterSpec&, double) { return 1.0; }

namespace detail {

inline void check_filter_args(double lambda, double t) {
    if (!(lambda > 0) || !std::isfinite(lambda)) {
        throw std::invalid_argument("filter: lambda must be positive and finite");
    }
    if (!(t >= 0) || !std::isfinite(t)) {
        throw std::invalid_argument("filter: t must be nonnegative and finite");
    }
}

// 1 - (1+u)^(-nu), evaluated without cancellation for small u.
inline double one_minus_resolvent_pow(double nu, double u) {
    return -std::expm1(-nu * std::log1p(u));
}

}  // namespace detail

/// g_lambda(t).
inline double filter_eval(const FilterSpec& f, double lambda, double t) {
    detail::check_filter_args(lambda, t);
    switch (f.kind) {
        case FilterSpec::Kind::tikhonov:
            return 1.0 / (lambda + t);
        case FilterSpec::Kind::iterated_tikhonov: {
            const double nu = f.order;
            if (t == 0.0) return nu / lambda;
            return detail::one_minus_resolvent_pow(nu, t / lambda) / t;
        }
        case FilterSpec::Kind::spectral_cutoff:
            return t >= lambda ? 1.0 / t : 0.0;
    }
    throw std::logic_error("filter_eval: unknown kind");
}

/// r_lambda(t) = 1 - t g_lambda(t).
inline double residual_eval(const FilterSpec& f, double lambda, double t) {
    detail::check_filter_args(lambda, t);
    switch (f.kind) {
        case FilterSpec::Kind::tikhonov:
            return lambda / (lambda + t);
        case FilterSpec::Kind::iterated_tikhonov:
            return std::pow(lambda / (lambda + t), static_cast<double>(f.order));
        case FilterSpec::Kind::spectral_cutoff:
            return t < lambda ? 1.0 : 0.0;
    }
    throw std::logic_error("residual_eval: unknown kind");
}

/// psi_lambda(t) = (g_lambda(t) - g_lambda(0)) / t, extended by its limit at t = 0.
/// Applying psi to the Gram operator lets g act on elements outside the
/// operator's range: g(T) h = g(0) h + T psi(T) h.
inline double shifted_quotient_eval(const FilterSpec& f, double lambda, double t) {
    detail::check_filter_args(lambda, t);
    switch (f.kind) {
        case FilterSpec::Kind::tikhonov:
            return -1.0 / (lambda * (lambda + t));
        case FilterSpec::Kind::iterated_tikhonov: {
            const double nu = f.order;
            const double u = t / lambda;
            if (u < 1e-3) {
                // Series of (E - nu*u)/u^2 with E = 1-(1+u)^(-nu); direct evaluation cancels.
                const double c2 = nu * (nu + 1.0) / 2.0;
                const double c3 = nu * (nu + 1.0) * (nu + 2.0) / 6.0;
                const double c4 = nu * (nu + 1.0) * (nu + 2.0) * (nu + 3.0) / 24.0;
                const double c5 = c4 * (nu + 4.0) / 5.0;
                return (-c2 + u * (c3 + u * (-c4 + u * c5))) / (lambda * lambda);
            }
            const double e = detail::one_minus_resolvent_pow(nu, u);
            return (e - nu * u) / (lambda * lambda * u * u);
        }
        case FilterSpec::Kind::spectral_cutoff:
            return t >= lambda ? 1.0 / (t * t) : 0.0;
    }
    throw std::logic_error("shifted_quotient_eval: unknown kind");
}

enum class SpectralMode { filter, residual, shifted_quotient };

inline double spectral_scalar(const FilterSpec& f, double lambda, double t, SpectralMode mode) {
    switch (mode) {
        case SpectralMode::filter:
            return filter_eval(f, lambda, t);
        case SpectralMode::residual:
            return residual_eval(f, lambda, t);
        case SpectralMode::shifted_quotient:
            return shifted_quotient_eval(f, lambda, t);
    }
    throw std::logic_error("spectral_scalar: unknown mode");
}

/// Eigendecomposition of a symmetric PSD matrix, possibly truncated: V holds r
/// orthonormal columns for the numerically nonzero eigenspace and the
/// complementary eigenspace is treated as eigenvalue zero. Reconstruction
/// V diag(L) V^T matches the input to roundoff of the truncation threshold.
struct SpectralDecomposition {
    Vector eigenvalues;  // nonincreasing, >= 0
    Matrix eigenvectors; // n x r, orthonormal columns
    Index n = 0;

    [[nodiscard]] Index rank() const { return eigenvalues.size(); }
};

namespace detail {

/// Diagonally pivoted Cholesky of a PSD matrix, stopped once every remaining
/// pivot falls below tol_rel * max(diag). Returns L (n x r) with A ~= L L^T.
/// Storage grows with the discovered rank, so matrices with fast-decaying
/// spectra (Gaussian Grams) cost O(n r^2) time and O(n r) memory.
inline Matrix pivoted_cholesky(const Matrix& a, double tol_rel) {
    const Index n = a.rows();
    if (n == 0) return Matrix(0, 0);
    Vector d = a.diagonal();
    const double d0 = d.maxCoeff();
    const double threshold = tol_rel * d0;
    std::vector<Index> order(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;

    Index cap = std::min<Index>(n, 64);
    Matrix l = Matrix::Zero(n, cap);
    Index r = 0;
    if (d0 > 0) {
        for (; r < n; ++r) {
            Index best = r;
            for (Index j = r + 1; j < n; ++j) {
                if (d(order[static_cast<std::size_t>(j)]) > d(order[static_cast<std::size_t>(best)])) best = j;
            }
            std::swap(order[static_cast<std::size_t>(r)], order[static_cast<std::size_t>(best)]);
            const Index p = order[static_cast<std::size_t>(r)];
            const double pivot = d(p);
            if (!(pivot > threshold)) break;
            if (r == cap) {
                const Index grown = std::min<Index>(n, cap * 2);
                l.conservativeResize(Eigen::NoChange, grown);
                l.rightCols(grown - cap).setZero();
                cap = grown;
            }
            const double root = std::sqrt(pivot);
            l(p, r) = root;
            for (Index j = r + 1; j < n; ++j) {
                const Index i = order[static_cast<std::size_t>(j)];
                double v = a(i, p);
                if (r > 0) v -= l.row(i).head(r).dot(l.row(p).head(r));
                v /= root;
                l(i, r) = v;
                d(i) -= v * v;
            }
        }
    }
    return l.leftCols(r);
}

}  // namespace detail

/// Decompose a symmetric PSD matrix; tolerates (and reports) symmetric input
/// only. Modes of size below ~1e-15 of the largest diagonal are truncated and
/// treated as exact zeros by every downstream filter application.
inline SpectralDecomposition sym_eig(const Matrix& a, double tol_rel = 1e-15) {
    if (a.rows() != a.cols()) throw std::invalid_argument("sym_eig: matrix must be square");
    if (a.rows() == 0) return SpectralDecomposition{Vector(0), Matrix(0, 0), 0};
    const double amax = a.cwiseAbs().maxCoeff();
    const double scale = amax > 0 ? amax : 1.0;
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
        throw std::invalid_argument("sym_eig: matrix is not symmetric");
    }
    const Matrix sym = 0.5 * (a + a.transpose());
    const Matrix l = detail::pivoted_cholesky(sym, tol_rel);

    SpectralDecomposition dec;
    dec.n = a.rows();
    if (l.cols() == 0) {
        dec.eigenvalues.resize(0);
        dec.eigenvectors.resize(a.rows(), 0);
        return dec;
    }
    Eigen::BDCSVD<Matrix> svd(l, Eigen::ComputeThinU);
    dec.eigenvalues = svd.singularValues().array().square();
    dec.eigenvectors = svd.matrixU();
    return dec;
}

/// h(A) v through a decomposition: h(0) v + V ((h(L) - h(0)) .* (V^T v)).
inline Vector apply_spectral(const SpectralDecomposition& dec, const FilterSpec& f, double lambda,
                             SpectralMode mode, const Vector& v) {
    if (v.size() != dec.n) throw std::invalid_argument("apply_spectral: size mismatch");
    const double h0 = spectral_scalar(f, lambda, 0.0, mode);
    Vector ht(dec.rank());
    for (Index i = 0; i < dec.rank(); ++i) {
        ht(i) = spectral_scalar(f, lambda, std::max(0.0, dec.eigenvalues(i)), mode) - h0;
    }
    if (dec.rank() == 0) return h0 * v;
    return h0 * v + dec.eigenvectors * ht.cwiseProduct(dec.eigenvectors.transpose() * v);
}

/// Dense h(A) for a symmetric PSD matrix A.
inline Matrix apply_spectral(const FilterSpec& f, double lambda, const Matrix& a,
                             SpectralMode mode) {
    const SpectralDecomposition dec = sym_eig(a);
    const double h0 = spectral_scalar(f, lambda, 0.0, mode);
    Vector ht(dec.rank());
    for (Index i = 0; i < dec.rank(); ++i) {
        ht(i) = spectral_scalar(f, lambda, std::max(0.0, dec.eigenvalues(i)), mode) - h0;
    }
    Matrix out = Matrix::Zero(dec.n, dec.n);
    out.diagonal().array() += h0;
    if (dec.rank() > 0) {
        out.noalias() += dec.eigenvectors * ht.asDiagonal() * dec.eigenvectors.transpose();
    }
    return out;
}

/// Check t^nu |r_lambda(t)| <= gamma_nu(f, nu) lambda^nu over the grid product.
inline bool verify_qualification(const FilterSpec& f, double nu,
                                 const std::vector<double>& lambda_grid,
                                 const std::vector<double>& t_grid) {
    const double g = gamma_nu(f, nu);
    for (double lambda : lambda_grid) {
        const double bound = g * std::pow(lambda, nu) * (1.0 + 1e-12);
        for (double t : t_grid) {
            const double lhs = std::pow(t, nu) * std::abs(residual_eval(f, lambda, t));
            if (lhs > bound) return false;
        }
    }
    return true;
}

inline std::string filter_name(const FilterSpec& f) {
    switch (f.kind) {
        case FilterSpec::Kind::tikhonov:
            return "tikhonov";
        case FilterSpec::Kind::iterated_tikhonov:
            return "itik:" + std::to_string(f.order);
        case FilterSpec::Kind::spectral_cutoff:
            return "cutoff";
    }
    throw std::logic_error("filter_name: unknown kind");
}

/// Filter names: "tikhonov", "itik:<nu>", "cutoff".
inline FilterSpec parse_filter(const std::string& text) {
    if (text == "tikhonov") return FilterSpec::tikhonov();
    if (text == "cutoff") return FilterSpec::spectral_cutoff();
    if (text.rfind("itik:", 0) == 0) {
        int nu = 0;
        try {
            nu = static_cast<int>(parse_double(text.substr(5)));
        } catch (const data_error&) {
            throw config_error("filter spec '" + text + "': order is not a number");
        }
        if (nu < 1) throw config_error("filter spec '" + text + "': order must be >= 1");
        return FilterSpec::iterated_tikhonov(nu);
    }
    throw config_error("filter spec '" + text + "': expected tikhonov | itik:<nu> | cutoff");
}

}  // namespace covshift
