#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "covshift/schedules.hpp"

#include <cmath>
#include <random>

using namespace covshift;

TEST_CASE("index function evaluation") {
    CHECK(eval_index(IndexFunction::power(0.5), 0.25) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(eval_index(IndexFunction::power(1.0), 0.3) == doctest::Approx(0.3).epsilon(1e-14));
    const double e_inv = std::exp(-1.0);
    CHECK(eval_index(IndexFunction::power_log(2.0, 1.0), e_inv) ==
          doctest::Approx(std::exp(-2.0)).epsilon(1e-13));
    CHECK(eval_index(IndexFunction::power(2.0), 0.0) == 0.0);
    CHECK_THROWS_AS(eval_index(IndexFunction::power(1.0), -0.1), std::invalid_argument);
    CHECK_THROWS_AS(eval_index(IndexFunction::power(1.0), 1.5), std::invalid_argument);
}

TEST_CASE("power-log is continuous and increasing through the knee") {
    const IndexFunction f = IndexFunction::power_log(1.5, 0.5);
    double prev = 0.0;
    for (double t : linspace(1e-6, 1.0, 400)) {
        const double v = eval_index(f, t);
        CHECK(v > prev);
        prev = v;
    }
    const double knee = std::exp(-1.0);
    CHECK(eval_index(f, knee * (1 - 1e-9)) ==
          doctest::Approx(eval_index(f, knee * (1 + 1e-9))).epsilon(1e-6));
}

TEST_CASE("monotone inversion by bisection") {
    CHECK(invert_monotone([](double t) { return std::pow(t, 1.5); }, 0.125, 0.0, 1.0) ==
          doctest::Approx(0.25).epsilon(1e-9));
    CHECK(invert_monotone([](double t) { return t; }, 0.7, 0.0, 1.0) ==
          doctest::Approx(0.7).epsilon(1e-9));
    CHECK(invert_monotone([](double t) { return t * t; }, 0.02, 0.0, 1.0) ==
          doctest::Approx(std::sqrt(0.02)).epsilon(1e-9));
    CHECK_THROWS_AS(invert_monotone([](double t) { return t; }, 2.0, 0.0, 1.0),
                    std::range_error);
}

TEST_CASE("inversion composed with evaluation is the identity") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::vector<IndexFunction> fams = {IndexFunction::power(0.5), IndexFunction::power(2.0),
                                             IndexFunction::power_log(2.0, 1.0)};
    for (const auto& f : fams) {
        for (int k = 0; k < 30; ++k) {
            const double t = 0.01 + 0.98 * u(rng);
            const double y = eval_index(f, t);
            const double back =
                invert_monotone([&](double s) { return eval_index(f, s); }, y, 0.0, 1.0);
            CHECK(eval_index(f, back) == doctest::Approx(y).epsilon(1e-10));
        }
    }
}

TEST_CASE("lambda_mn examples") {
    const IndexFunction phi = IndexFunction::power(1.0);
    CHECK(lambda_mn(phi, 1e4, 1e4) == doctest::Approx(std::sqrt(0.02)).epsilon(1e-9));
    // bisection against the analytic power inverse
    const IndexFunction half = IndexFunction::power(0.5);
    CHECK(lambda_mn(half, 4096, 4096) ==
          doctest::Approx(std::pow(1.0 / 32.0, 2.0 / 3.0)).epsilon(1e-9));
    // degenerate sizes saturate at the domain cap rather than failing
    CHECK(lambda_mn(phi, 1, 1) == doctest::Approx(phi.domain_upper));
    CHECK_THROWS_AS(lambda_mn(phi, 0, 10), std::invalid_argument);
}

TEST_CASE("lambda_mn shrinks as sizes grow") {
    const IndexFunction phi = IndexFunction::power(1.0);
    double prev = 10.0;
    for (double s : {1e2, 1e3, 1e4, 1e5, 1e6}) {
        const double lam = lambda_mn(phi, s, s);
        CHECK(lam < prev);
        prev = lam;
    }
}

TEST_CASE("lambda_MN examples") {
    const IndexFunction phi1 = IndexFunction::power(1.0);
    const IndexFunction xi_half = IndexFunction::power(0.5);
    CHECK(lambda_MN(phi1, xi_half, 4096, 4096) ==
          doctest::Approx(std::pow(1.0 / 32.0, 2.0 / 3.0)).epsilon(1e-9));
    const IndexFunction phi_half = IndexFunction::power(0.5);
    CHECK(lambda_MN(phi_half, xi_half, 100, 100) == doctest::Approx(0.2).epsilon(1e-9));
    // a nearly constant xi reduces to the theta(t) = phi(t) t inversion
    const IndexFunction xi_tiny = IndexFunction::power(1e-9);
    CHECK(lambda_MN(phi1, xi_tiny, 4096, 4096) ==
          doctest::Approx(lambda_mn(phi1, 4096, 4096)).epsilon(1e-5));
    double prev = 10.0;
    for (double s : {1e2, 1e3, 1e4, 1e5}) {
        const double lam = lambda_MN(phi1, xi_half, s, s);
        CHECK(lam < prev);
        prev = lam;
    }
}

TEST_CASE("lambda_MN rejects a non-increasing combined exponent") {
    // phi(t) t / xi(t) = t^{0.5 + 1 - 2} decreases
    CHECK_THROWS_AS(lambda_MN(IndexFunction::power(0.5), IndexFunction::power(2.0), 100, 100),
                    config_error);
}

TEST_CASE("lambda_delta examples") {
    const IndexFunction p1 = IndexFunction::power(1.0);
    const IndexFunction xi = IndexFunction::power(0.5);
    // nested analytic inversions at m=n=M=N=1e4
    const double inner = std::pow(0.02, 2.0 / 3.0);
    CHECK(lambda_MN(p1, xi, 1e4, 1e4) == doctest::Approx(inner).epsilon(1e-9));
    CHECK(lambda_delta(p1, p1, xi, 1e4, 1e4, 1e4, 1e4) == doctest::Approx(0.2).epsilon(1e-8));
    // huge unlabeled samples reduce to lambda_mn
    CHECK(lambda_delta(p1, p1, xi, 1e4, 1e4, 1e14, 1e14) ==
          doctest::Approx(lambda_mn(p1, 1e4, 1e4)).epsilon(1e-6));
    // degenerate labeled sizes dominate
    CHECK(lambda_delta(p1, p1, xi, 1, 1, 100, 100) >= lambda_mn(p1, 1, 1) - 1e-12);
}

TEST_CASE("rate exponents from the reference formulas") {
    CHECK(rate_exponent(RateSetting::regression_l2, {.r = 1.0}) ==
          doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(rate_exponent(RateSetting::regression_rkhs, {.r = 1.0}) ==
          doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(rate_exponent(RateSetting::beta_rkhs, {.eta = 1.0, .varsigma = 0.0}) ==
          doctest::Approx(0.5).epsilon(1e-14));
    CHECK(rate_exponent(RateSetting::beta_rkhs, {.eta = 1.0, .varsigma = 0.5}) ==
          doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(rate_exponent(RateSetting::beta_pointwise, {.eta = 1.0, .varsigma = 0.5}) ==
          doctest::Approx(1.0).epsilon(1e-14));
    CHECK_THROWS_AS(rate_exponent(RateSetting::regression_l2, {.r = 0.25}),
                    std::invalid_argument);
    CHECK_THROWS_AS(rate_exponent(RateSetting::beta_rkhs, {.eta = 1.0, .varsigma = 0.9}),
                    std::invalid_argument);
}

TEST_CASE("pointwise exponent dominates the norm exponent") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> ueta(0.05, 3.0);
    std::uniform_real_distribution<double> us(0.0, 0.5);
    for (int k = 0; k < 200; ++k) {
        const double eta = ueta(rng);
        const double vs = us(rng);
        const double pw = rate_exponent(RateSetting::beta_pointwise, {.eta = eta, .varsigma = vs});
        const double nh = rate_exponent(RateSetting::beta_rkhs, {.eta = eta, .varsigma = vs});
        CHECK(pw >= nh);
    }
    CHECK(rate_exponent(RateSetting::beta_pointwise, {.eta = 1.0, .varsigma = 0.0}) ==
          doctest::Approx(rate_exponent(RateSetting::beta_rkhs, {.eta = 1.0, .varsigma = 0.0})));
}

TEST_CASE("with varsigma = 1/2 the composite schedule tracks lambda_mn") {
    // M of order m and N of order n: the extra term equals the size functional,
    // so the two schedule values stay within a bounded ratio.
    const IndexFunction p1 = IndexFunction::power(1.0);
    const IndexFunction xi = IndexFunction::power(0.5);
    for (double eta : {0.25, 1.0, 2.5}) {
        const IndexFunction phi_beta = IndexFunction::power(eta);
        for (double s : {1e2, 1e3, 1e4, 1e5}) {
            const double composite = lambda_delta(p1, phi_beta, xi, s, s, s, s);
            const double plain = lambda_mn(p1, s, s);
            const double ratio = composite / plain;
            CHECK(ratio >= 1.0 - 1e-9);
            CHECK(ratio <= 3.0);
        }
    }
}

TEST_CASE("index function parsing") {
    const IndexFunction p = parse_index("power:1.5");
    CHECK(p.kind == IndexFunction::Kind::power);
    CHECK(p.exponent == doctest::Approx(1.5));
    const IndexFunction pl = parse_index("powerlog:2:1");
    CHECK(pl.kind == IndexFunction::Kind::power_log);
    CHECK(index_name(pl) == "powerlog:2:1");
    CHECK_THROWS_AS(parse_index("exp:1"), config_error);
    CHECK_THROWS_AS(parse_index("power:-2"), config_error);
    CHECK_THROWS_AS(parse_index("powerlog:0.5:1"), config_error);
}
