#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "covshift/weighted_fit.hpp"

#include <cmath>
#include <random>

using namespace covshift;

namespace {

SampleSet labeled(std::initializer_list<double> xs, std::initializer_list<double> ys) {
    SampleSet s;
    s.points.resize(static_cast<Index>(xs.size()), 1);
    Vector y(static_cast<Index>(ys.size()));
    Index i = 0;
    for (double x : xs) s.points(i++, 0) = x;
    i = 0;
    for (double v : ys) y(i++) = v;
    s.labels = y;
    return s;
}

SampleSet random_labeled(int n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(-1.0, 1.0);
    std::normal_distribution<double> uy(0.0, 1.0);
    SampleSet s;
    s.points.resize(n, 1);
    Vector y(n);
    for (int i = 0; i < n; ++i) {
        s.points(i, 0) = ux(rng);
        y(i) = uy(rng);
    }
    s.labels = y;
    return s;
}

Vector random_weights(Index n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uw(0.0, 3.0);
    Vector w(n);
    for (Index i = 0; i < n; ++i) w(i) = uw(rng);
    return w;
}

/// Independent route to the same minimizer: solve (B K / n + lambda I) a = B y / n.
Vector dense_weighted_ridge(const Matrix& k, const Vector& w, const Vector& y, double lambda) {
    const Index n = k.rows();
    Matrix sys = w.asDiagonal() * k / static_cast<double>(n);
    sys.diagonal().array() += lambda;
    return sys.partialPivLu().solve(w.cwiseProduct(y) / static_cast<double>(n));
}

/// Literal iterated ridge re-fitting: each pass solves the weighted problem
/// penalized around the previous fit.
Vector iterated_ridge_literal(const Matrix& k, const Vector& w, const Vector& y, double lambda,
                              int passes) {
    const Index n = k.rows();
    Vector a = Vector::Zero(n);
    for (int p = 0; p < passes; ++p) {
        const Vector resid = y - k * a;
        a += dense_weighted_ridge(k, w, resid, lambda);
    }
    return a;
}

}  // namespace

TEST_CASE("scalar case") {
    const KernelSpec kern = KernelSpec::gaussian(1.0);
    const SampleSet train = labeled({0.0}, {2.0});
    const FitResult r =
        fit(train, WeightVector::unit(1), kern, FilterSpec::tikhonov(), 1.0);
    Vector x(1);
    x << 0.0;
    CHECK(evaluate(r.function, x) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(r.rkhs_norm == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("all-zero weights produce the zero function") {
    const KernelSpec kern = KernelSpec::gaussian(0.5);
    const SampleSet train = random_labeled(9, 3);
    const FitResult r = fit(train, WeightVector::exact(Vector::Zero(9)), kern,
                            FilterSpec::tikhonov(), 0.1);
    CHECK(r.coefficients().cwiseAbs().maxCoeff() == 0.0);
    CHECK(r.rkhs_norm == 0.0);
}

TEST_CASE("negative weights are a hard error") {
    const KernelSpec kern = KernelSpec::gaussian(0.5);
    const SampleSet train = random_labeled(4, 5);
    Vector w = Vector::Ones(4);
    w(2) = -1e-9;
    CHECK_THROWS_AS(fit(train, WeightVector::exact(w), kern, FilterSpec::tikhonov(), 0.1),
                    std::invalid_argument);
    CHECK_THROWS_AS(fit(train, WeightVector::unit(4), kern, FilterSpec::tikhonov(), 0.0),
                    std::invalid_argument);
}

TEST_CASE("unweighted tikhonov equals the dense kernel ridge solve") {
    const KernelSpec kern = KernelSpec::gaussian(0.5);
    const SampleSet train = random_labeled(25, 7);
    const double lambda = 0.05;
    const FitResult r = fit(train, WeightVector::unit(25), kern, FilterSpec::tikhonov(), lambda);
    const Matrix k = gram(kern, train);
    Matrix sys = k / 25.0;
    sys.diagonal().array() += lambda;
    const Vector dense = sys.ldlt().solve(*train.labels / 25.0);
    CHECK((r.coefficients() - dense).cwiseAbs().maxCoeff() <= 1e-10 * dense.cwiseAbs().maxCoeff());
}

TEST_CASE("weighted tikhonov equals the dense normal-equation solve") {
    const KernelSpec kern = KernelSpec::gaussian(0.5);
    for (unsigned inst = 0; inst < 20; ++inst) {
        std::mt19937_64 rng(500 + inst);
        std::uniform_int_distribution<int> nn(2, 50);
        const int n = nn(rng);
        const SampleSet train = random_labeled(n, 600 + inst);
        const Vector w = random_weights(n, 700 + inst);
        const double lambda = std::pow(10.0, -3.0 * (inst % 4) / 3.0);
        const FitResult r =
            fit(train, WeightVector::exact(w), kern, FilterSpec::tikhonov(), lambda);
        const Vector dense = dense_weighted_ridge(gram(kern, train), w, *train.labels, lambda);
        const double scale = std::max(1e-30, dense.cwiseAbs().maxCoeff());
        CHECK((r.coefficients() - dense).cwiseAbs().maxCoeff() <= 1e-8 * scale);
    }
}

TEST_CASE("filter machinery matches the literal iterated re-fitting") {
    const KernelSpec kern = KernelSpec::gaussian(0.6);
    for (int nu : {1, 2, 3}) {
        for (unsigned inst = 0; inst < 5; ++inst) {
            const int n = 12 + static_cast<int>(inst) * 7;
            const SampleSet train = random_labeled(n, 900 + inst);
            const Vector w = random_weights(n, 950 + inst);
            const double lambda = 0.2 / (1.0 + inst);
            const FitResult r = fit(train, WeightVector::exact(w), kern,
                                    FilterSpec::iterated_tikhonov(nu), lambda);
            const Vector lit =
                iterated_ridge_literal(gram(kern, train), w, *train.labels, lambda, nu);
            const double scale = std::max(1e-30, lit.cwiseAbs().maxCoeff());
            CHECK((r.coefficients() - lit).cwiseAbs().maxCoeff() <= 1e-8 * scale);
        }
    }
}

TEST_CASE("iterated tikhonov of order one reproduces tikhonov") {
    const KernelSpec kern = KernelSpec::gaussian(0.5);
    const SampleSet train = random_labeled(20, 13);
    const Vector w = random_weights(20, 14);
    const FitResult a = fit(train, WeightVector::exact(w), kern, FilterSpec::tikhonov(), 0.07);
    const FitResult b =
        fit(train, WeightVector::exact(w), kern, FilterSpec::iterated_tikhonov(1), 0.07);
    CHECK((a.coefficients() - b.coefficients()).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("scaling weights and lambda together leaves the tikhonov fit unchanged") {
    const KernelSpec kern = KernelSpec::gaussian(0.5);
    const SampleSet train = random_labeled(15, 19);
    const Vector w = random_weights(15, 20);
    const double lambda = 0.03;
    const FitResult base = fit(train, WeightVector::exact(w), kern, FilterSpec::tikhonov(), lambda);
    for (double s : {0.5, 2.0}) {
        const FitResult scaled =
            fit(train, WeightVector::exact(s * w), kern, FilterSpec::tikhonov(), s * lambda);
        CHECK((base.coefficients() - scaled.coefficients()).cwiseAbs().maxCoeff() <= 1e-11);
    }
}

TEST_CASE("noiseless training residual decreases as lambda shrinks") {
    const KernelSpec kern = KernelSpec::gaussian(0.5);
    // labels given exactly by a function in the space
    SampleSet train = random_labeled(30, 23);
    const RepresenterFunction truth =
        make_source_expansion(kern, Matrix::Constant(1, 1, 0.2), Vector::Constant(1, 1.0));
    train.labels = evaluate(truth, train.points);
    const Matrix k = gram(kern, train);
    double prev = std::numeric_limits<double>::infinity();
    for (double lambda : {1.0, 0.3, 0.1, 0.03, 0.01, 0.003, 0.001}) {
        const FitResult r = fit(train, WeightVector::unit(30), kern, FilterSpec::tikhonov(), lambda);
        const double resid = (k * r.coefficients() - *train.labels).norm();
        CHECK(resid < prev);
        prev = resid;
    }
}

TEST_CASE("fit result norm matches the gram quadratic form") {
    const KernelSpec kern = KernelSpec::gaussian(0.5);
    const SampleSet train = random_labeled(18, 27);
    const Vector w = random_weights(18, 28);
    const FitResult r = fit(train, WeightVector::exact(w), kern, FilterSpec::tikhonov(), 0.05);
    const Vector a = r.coefficients();
    const double quad = std::sqrt(a.dot(gram(kern, train) * a));
    CHECK(r.rkhs_norm == doctest::Approx(quad).epsilon(1e-8));
    CHECK(r.rkhs_norm == doctest::Approx(rkhs_norm(r.function)).epsilon(1e-8));
}

TEST_CASE("embedded fit composes estimate, clip and fit exactly") {
    const KernelSpec kern = KernelSpec::gaussian(0.5);
    const SampleSet train = random_labeled(20, 31);
    const SampleSet rn_source = random_labeled(35, 32);
    const SampleSet rn_target = random_labeled(25, 33);
    const double l_reg = 0.05, l_rn = 0.1;
    const FitResult emb = fit_embedded(train, rn_source, rn_target, kern, FilterSpec::tikhonov(),
                                       l_reg, FilterSpec::iterated_tikhonov(2), l_rn);
    const RatioEstimate est =
        estimate_beta(rn_source, rn_target, kern, FilterSpec::iterated_tikhonov(2), l_rn);
    const Vector clipped = clipped_values(est, train);
    const FitResult manual = fit(train, WeightVector::estimated(clipped, l_rn,
                                                                FilterSpec::iterated_tikhonov(2)),
                                 kern, FilterSpec::tikhonov(), l_reg);
    CHECK((emb.coefficients() - manual.coefficients()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(emb.weights.source == WeightVector::Source::estimated);
}

TEST_CASE("embedded fit with an all-zero ratio estimate is the zero function") {
    const KernelSpec kern = KernelSpec::gaussian(0.5);
    const SampleSet train = random_labeled(10, 41);
    const SampleSet rn_source = random_labeled(12, 42);
    const SampleSet rn_target = random_labeled(12, 43);
    // cutoff with lambda above the top eigenvalue zeroes the whole estimate
    const FitResult emb = fit_embedded(train, rn_source, rn_target, kern, FilterSpec::tikhonov(),
                                       0.1, FilterSpec::spectral_cutoff(), 1e6);
    CHECK(emb.coefficients().cwiseAbs().maxCoeff() == 0.0);
    CHECK(emb.rkhs_norm == 0.0);
}

TEST_CASE("weights identical to clipped estimates give the same fit") {
    // When the estimate happens to match the exact ratio at the training
    // points, embedded and exact-weight fits coincide by construction.
    const KernelSpec kern = KernelSpec::gaussian(0.5);
    const SampleSet train = random_labeled(14, 47);
    const SampleSet rn_source = random_labeled(20, 48);
    const SampleSet rn_target = random_labeled(20, 49);
    const RatioEstimate est =
        estimate_beta(rn_source, rn_target, kern, FilterSpec::tikhonov(), 0.2);
    const Vector vals = clipped_values(est, train);
    const FitResult via_exact =
        fit(train, WeightVector::exact(vals), kern, FilterSpec::tikhonov(), 0.05);
    const FitResult via_embedded = fit_embedded(train, rn_source, rn_target, kern,
                                                FilterSpec::tikhonov(), 0.05,
                                                FilterSpec::tikhonov(), 0.2);
    CHECK((via_exact.coefficients() - via_embedded.coefficients()).cwiseAbs().maxCoeff() <= 1e-12);
}
