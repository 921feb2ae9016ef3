#pragma once

#include "covshift/numerics.hpp"
#include "covshift/types.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>

namespace covshift {

/// Positive-definite kernels on R^d. Two kinds are supported: the Gaussian
/// K(x,y) = exp(-|x-y|^2 / (2 sigma^2)) and the constant-augmented wrapper
/// 1 + K_inner(x,y), whose space contains all constant functions.
class KernelSpec {
public:
    enum class Kind { gaussian, constant_augmented };

    static KernelSpec gaussian(double sigma) {
        if (!(sigma > 0) || !std::isfinite(sigma)) {
            throw std::invalid_argument("gaussian kernel: bandwidth must be positive and finite");
        }
        KernelSpec k;
        k.kind_ = Kind::gaussian;
        k.sigma_ = sigma;
        k.kappa0_ = 1.0;
        return k;
    }

    static KernelSpec constant_augmented(const KernelSpec& inner) {
        KernelSpec k;
        k.kind_ = Kind::constant_augmented;
        k.inner_ = std::make_shared<KernelSpec>(inner);
        k.kappa0_ = std::sqrt(1.0 + inner.kappa0() * inner.kappa0());
        return k;
    }

    [[nodiscard]] Kind kind() const { return kind_; }
    [[nodiscard]] double sigma() const { return sigma_; }
    [[nodiscard]] const KernelSpec& inner() const { return *inner_; }

    /// Uniform bound: sqrt(K(x,x)) <= kappa0 everywhere.
    [[nodiscard]] double kappa0() const { return kappa0_; }

    /// True when the constant function 1 belongs to the induced space.
    [[nodiscard]] bool contains_constants() const { return kind_ == Kind::constant_augmented; }

    friend bool operator==(const KernelSpec& a, const KernelSpec& b) {
        if (a.kind_ != b.kind_) return false;
        if (a.kind_ == Kind::gaussian) return a.sigma_ == b.sigma_;
        return *a.inner_ == *b.inner_;
    }
    friend bool operator!=(const KernelSpec& a, const KernelSpec& b) { return !(a == b); }

private:
    KernelSpec() = default;
    Kind kind_ = Kind::gaussian;
    double sigma_ = 1.0;
    double kappa0_ = 1.0;
    std::shared_ptr<const KernelSpec> inner_;
};

inline double eval_kernel(const KernelSpec& k, const Vector& x, const Vector& y) {
    if (x.size() != y.size()) {
        throw std::invalid_argument("eval_kernel: point dimensions differ");
    }
    switch (k.kind()) {
        case KernelSpec::Kind::gaussian: {
            const double d2 = (x - y).squaredNorm();
            return std::exp(-d2 / (2.0 * k.sigma() * k.sigma()));
        }
        case KernelSpec::Kind::constant_augmented:
            return 1.0 + eval_kernel(k.inner(), x, y);
    }
    throw std::logic_error("eval_kernel: unknown kind");
}

/// Gram block K(rows_i, cols_j) with rows and cols given as point matrices (n x d).
/// The (i,j) and (j,i) entries of a square Gram are computed by the same
/// symmetric expression, so gram(X, X) equals its transpose exactly.
inline Matrix gram(const KernelSpec& k, const Matrix& rows, const Matrix& cols) {
    if (rows.rows() == 0 || cols.rows() == 0) return Matrix(rows.rows(), cols.rows());
    if (rows.cols() != cols.cols()) {
        throw std::invalid_argument("gram: point dimensions differ");
    }
    switch (k.kind()) {
        case KernelSpec::Kind::gaussian: {
            const Vector rn = rows.rowwise().squaredNorm();
            const Vector cn = cols.rowwise().squaredNorm();
            Matrix d2 = rn.replicate(1, cols.rows()) + cn.transpose().replicate(rows.rows(), 1) -
                        2.0 * rows * cols.transpose();
            d2 = d2.cwiseMax(0.0);
            return (-d2 / (2.0 * k.sigma() * k.sigma())).array().exp().matrix();
        }
        case KernelSpec::Kind::constant_augmented: {
            Matrix g = gram(k.inner(), rows, cols);
            g.array() += 1.0;
            return g;
        }
    }
    throw std::logic_error("gram: unknown kind");
}

inline Matrix gram(const KernelSpec& k, const SampleSet& rows, const SampleSet& cols) {
    return gram(k, rows.points, cols.points);
}

inline Matrix gram(const KernelSpec& k, const SampleSet& s) { return gram(k, s.points, s.points); }

/// K(X, Y) * w without materializing the full block; chunked over rows of X.
inline Vector gram_times(const KernelSpec& k, const Matrix& rows, const Matrix& cols,
                         const Vector& w, Index chunk = 1024) {
    Vector out(rows.rows());
    for (Index i0 = 0; i0 < rows.rows(); i0 += chunk) {
        const Index h = std::min(chunk, rows.rows() - i0);
        out.segment(i0, h) = gram(k, Matrix(rows.middleRows(i0, h)), cols) * w;
    }
    if (rows.rows() == 0) out.resize(0);
    return out;
}

inline std::string kernel_name(const KernelSpec& k) {
    if (k.kind() == KernelSpec::Kind::gaussian) return "gaussian:" + format_double(k.sigma());
    return "cgaussian:" + format_double(k.inner().sigma());
}

/// Kernel spec strings: "gaussian:<sigma>" or "cgaussian:<sigma>" (constant-augmented Gaussian).
inline KernelSpec parse_kernel(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) {
        throw config_error("kernel spec '" + text + "': expected <kind>:<sigma>");
    }
    const std::string kind = text.substr(0, colon);
    double sigma = 0.0;
    try {
        sigma = parse_double(text.substr(colon + 1));
    } catch (const data_error&) {
        throw config_error("kernel spec '" + text + "': bandwidth is not a number");
    }
    if (!(sigma > 0)) throw config_error("kernel spec '" + text + "': bandwidth must be > 0");
    if (kind == "gaussian") return KernelSpec::gaussian(sigma);
    if (kind == "cgaussian") return KernelSpec::constant_augmented(KernelSpec::gaussian(sigma));
    throw config_error("kernel spec '" + text + "': unknown kind '" + kind + "'");
}

}  // namespace covshift
