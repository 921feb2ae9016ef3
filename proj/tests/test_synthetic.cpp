#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "covshift/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace covshift;

namespace {

double beta_at(const ProblemSpec& p, double x) {
    Vector v(1);
    v(0) = x;
    return evaluate(p.beta, v);
}

/// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j]) {
            ++i;
        } else {
            ++j;
        }
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

ProblemSpec mild_draft_with_unit_sigma() {
    ProblemSpec p;
    p.name = "draft";
    p.source = SourceLaw::uniform(-1.0, 1.0);
    p.kernel = KernelSpec::gaussian(1.0);
    p.beta = detail::expansion(p.kernel, {0.0}, {1.0});
    p.b0 = 1.2;
    p.f_q = detail::expansion(p.kernel, {0.3}, {1.0});
    p.noise_sigma = 0.1;
    return p;
}

}  // namespace

TEST_CASE("normalization constant matches the quadrature oracle") {
    // raw ratio K(., 0) against the uniform(-1,1) source with a unit-bandwidth
    // gaussian: the rescale factor is 1 / ((1/2) * int_{-1}^{1} e^{-x^2/2} dx).
    const ProblemSpec p = normalize_beta(mild_draft_with_unit_sigma());
    const double denom =
        0.5 * integrate([](double x) { return std::exp(-0.5 * x * x); }, -1.0, 1.0, 1e-13);
    CHECK(p.beta_norm_const == doctest::Approx(1.0 / denom).epsilon(1e-8));
    CHECK(p.beta_norm_const == doctest::Approx(1.16875).epsilon(1e-4));
    // fresh quadrature of the normalized ratio is one
    const double mass = integrate([&](double x) { return beta_at(p, x) * p.source.density(x); },
                                  -1.0, 1.0, 1e-13);
    CHECK(std::abs(mass - 1.0) <= 1e-8);
}

TEST_CASE("doubling the raw coefficients does not change the normalized ratio") {
    ProblemSpec a = mild_draft_with_unit_sigma();
    ProblemSpec b = mild_draft_with_unit_sigma();
    b.beta.source_coeffs *= 2.0;
    const ProblemSpec na = normalize_beta(std::move(a));
    const ProblemSpec nb = normalize_beta(std::move(b));
    for (double x : linspace(-1.0, 1.0, 41)) {
        CHECK(beta_at(na, x) == doctest::Approx(beta_at(nb, x)).epsilon(1e-12));
    }
}

TEST_CASE("a constant raw ratio normalizes to one") {
    const ProblemSpec p = named_problem("noshift");
    for (double x : linspace(-1.0, 1.0, 21)) {
        CHECK(beta_at(p, x) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("an identically zero ratio is rejected") {
    ProblemSpec p = mild_draft_with_unit_sigma();
    p.beta.source_coeffs.setZero();
    CHECK_THROWS_AS(normalize_beta(std::move(p)), config_error);
}

TEST_CASE("shipped problems satisfy their declared bounds") {
    for (const char* name : {"shift1d-mild", "shift1d-strong", "noshift"}) {
        const ProblemSpec p = named_problem(name);
        double sup = 0.0;
        for (double x : linspace(-1.0, 1.0, 2001)) {
            const double v = beta_at(p, x);
            CHECK(v >= -1e-12);
            sup = std::max(sup, v);
        }
        CHECK(sup <= p.b0 * (1 + 1e-9));
        const double mass = integrate(
            [&](double x) { return beta_at(p, x) * p.source.density(x); }, -1.0, 1.0, 1e-12);
        CHECK(std::abs(mass - 1.0) <= 1e-8);
    }
    CHECK_THROWS_AS(named_problem("unknown"), config_error);
}

TEST_CASE("problem files load to the same ground truth as the built-ins") {
    for (const char* name : {"shift1d-mild", "shift1d-strong", "noshift"}) {
        const ProblemSpec built = named_problem(name);
        const ProblemSpec loaded =
            load_problem_file(std::string(SOURCE_DIR) + "/problems/" + name + ".problem");
        CHECK(loaded.name == built.name);
        CHECK(loaded.b0 == doctest::Approx(built.b0));
        CHECK(loaded.noise_sigma == doctest::Approx(built.noise_sigma));
        for (double x : linspace(-1.0, 1.0, 31)) {
            Vector p(1);
            p(0) = x;
            CHECK(beta_at(loaded, x) == doctest::Approx(beta_at(built, x)).epsilon(1e-12));
            CHECK(evaluate(loaded.f_q, p) ==
                  doctest::Approx(evaluate(built.f_q, p)).epsilon(1e-12));
        }
    }
}

TEST_CASE("source sampling basics") {
    const ProblemSpec p = named_problem("shift1d-mild");
    CHECK(sample_source(p, 0, 1).size() == 0);
    const SampleSet a = sample_source(p, 100, 42);
    const SampleSet b = sample_source(p, 100, 42);
    CHECK(a.points == b.points);
    CHECK(a.seed == 42);
    const SampleSet c = sample_source(p, 100, 43);
    CHECK(a.points != c.points);
}

TEST_CASE("source sample mean obeys the CLT bound") {
    const ProblemSpec p = named_problem("shift1d-mild");
    const Index n = 100000;
    const SampleSet s = sample_source(p, n, 777);
    const double mean = s.points.col(0).mean();
    const double bound = 3.0 * 2.0 / std::sqrt(12.0 * static_cast<double>(n));
    CHECK(std::abs(mean) <= bound);
    CHECK(s.points.col(0).minCoeff() >= -1.0);
    CHECK(s.points.col(0).maxCoeff() <= 1.0);
}

TEST_CASE("rejection sampling identities") {
    const ProblemSpec noshift = named_problem("noshift");
    RejectionStats st;
    const SampleSet t = sample_target(noshift, 5000, 11, &st);
    // ratio one and b0 = 1: every proposal is accepted
    CHECK(st.attempts == 5000);

    const ProblemSpec strong = named_problem("shift1d-strong");
    RejectionStats st2;
    const Index m = 20000;
    sample_target(strong, m, 13, &st2);
    const double per_accept = static_cast<double>(st2.attempts) / static_cast<double>(m);
    // expected proposals per accepted draw equal b0
    CHECK(per_accept == doctest::Approx(strong.b0).epsilon(0.05));
}

TEST_CASE("target sample mean of beta matches the quadrature of beta^2") {
    const ProblemSpec p = named_problem("shift1d-mild");
    const Index m = 100000;
    const SampleSet t = sample_target(p, m, 99);
    const Vector vals = evaluate(p.beta, t.points);
    const double mean = vals.mean();
    const double expected = integrate(
        [&](double x) { return beta_at(p, x) * beta_at(p, x) * p.source.density(x); }, -1.0, 1.0,
        1e-12);
    const double sd = std::sqrt((vals.array() - mean).square().sum() / (m - 1));
    CHECK(std::abs(mean - expected) <= 3.0 * sd / std::sqrt(static_cast<double>(m)));
}

TEST_CASE("rejection sample matches the inverse-cdf construction (KS test)") {
    const ProblemSpec p = named_problem("shift1d-strong");
    // cumulative of the target density on a fine grid (composite Simpson panels)
    const int grid_n = 4001;
    const auto xs = linspace(-1.0, 1.0, grid_n);
    std::vector<double> cdf(xs.size(), 0.0);
    for (std::size_t i = 1; i < xs.size(); ++i) {
        const double a = xs[i - 1], b = xs[i];
        const double fa = beta_at(p, a) * p.source.density(a);
        const double fb = beta_at(p, b) * p.source.density(b);
        const double fm = beta_at(p, 0.5 * (a + b)) * p.source.density(0.5 * (a + b));
        cdf[i] = cdf[i - 1] + (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    }
    for (auto& c : cdf) c /= cdf.back();

    const Index m = 5000;
    const double critical = 1.628 * std::sqrt(2.0 / static_cast<double>(m));
    int ok = 0;
    for (int rep = 0; rep < 20; ++rep) {
        const SampleSet rej = sample_target(p, m, 1000 + static_cast<std::uint64_t>(rep));
        std::mt19937_64 rng(5000 + static_cast<std::uint64_t>(rep));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::vector<double> icdf(static_cast<std::size_t>(m));
        for (auto& v : icdf) {
            const double u = unit(rng);
            const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
            const std::size_t hi = std::min(cdf.size() - 1, static_cast<std::size_t>(it - cdf.begin()));
            const std::size_t lo = hi == 0 ? 0 : hi - 1;
            const double span = cdf[hi] - cdf[lo];
            const double w = span > 0 ? (u - cdf[lo]) / span : 0.0;
            v = xs[lo] + w * (xs[hi] - xs[lo]);
        }
        std::vector<double> rvec(rej.points.data(), rej.points.data() + m);
        if (ks_statistic(rvec, icdf) < critical) ++ok;
    }
    CHECK(ok >= 18);
}

TEST_CASE("labels") {
    const ProblemSpec base = named_problem("shift1d-mild");
    ProblemSpec noiseless = base;
    noiseless.noise_sigma = 0.0;
    const SampleSet xs = sample_source(base, 50, 3);
    const Vector clean = sample_labels(noiseless, xs, 4);
    CHECK((clean - evaluate(base.f_q, xs.points)).cwiseAbs().maxCoeff() == 0.0);

    const Vector y1 = sample_labels(base, xs, 4);
    const Vector y2 = sample_labels(base, xs, 4);
    CHECK(y1 == y2);

    const SampleSet big = sample_source(base, 100000, 5);
    const Vector noisy = sample_labels(base, big, 6);
    const Vector resid = noisy - evaluate(base.f_q, big.points);
    const double sd = std::sqrt(resid.squaredNorm() / (resid.size() - 1));
    CHECK(sd == doctest::Approx(base.noise_sigma).epsilon(0.05));
}

TEST_CASE("monte-carlo excess risk") {
    const ProblemSpec p = named_problem("noshift");
    CHECK(mc_excess_risk(p.f_q, p, 500, 77) == 0.0);

    // constant offset through the augmented kernel: exactly c^2 for any sample
    RepresenterFunction shifted = p.f_q;
    shifted.constant_offset += 0.3;
    CHECK(mc_excess_risk(shifted, p, 333, 78) == doctest::Approx(0.09).epsilon(1e-12));

    // naive loop oracle
    const ProblemSpec mild = named_problem("shift1d-mild");
    RepresenterFunction f = mild.f_q;
    f.source_coeffs *= 0.8;
    const Index n_mc = 400;
    const std::uint64_t seed = 79;
    const double got = mc_excess_risk(f, mild, n_mc, seed);
    const SampleSet fresh = sample_target(mild, n_mc, seed);
    double acc = 0.0;
    for (Index i = 0; i < n_mc; ++i) {
        const Vector x = fresh.point(i);
        const double d = evaluate(f, x) - evaluate(mild.f_q, x);
        acc += d * d;
    }
    acc /= static_cast<double>(n_mc);
    CHECK(got == doctest::Approx(acc).epsilon(1e-12));
    CHECK(mc_l2_error(f, mild, n_mc, seed) == doctest::Approx(std::sqrt(acc)).epsilon(1e-12));
}

TEST_CASE("with no shift the target risk agrees with the source risk") {
    const ProblemSpec p = named_problem("noshift");
    RepresenterFunction f = p.f_q;
    f.source_coeffs *= 0.5;
    const Index n = 40000;
    const double target_risk = mc_excess_risk(f, p, n, 101);
    const SampleSet src = sample_source(p, n, 202);
    const Vector diff = evaluate(f, src.points) - evaluate(p.f_q, src.points);
    const double source_risk = diff.squaredNorm() / static_cast<double>(n);
    const double var = (diff.array().square() - source_risk).square().sum() / (n - 1);
    const double bound = 3.0 * std::sqrt(2.0 * var / static_cast<double>(n));
    CHECK(std::abs(target_risk - source_risk) <= bound);
}
