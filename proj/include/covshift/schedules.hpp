#pragma once

#include "covshift/numerics.hpp"
#include "covshift/types.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace covshift {

/// Monotone index function phi with phi(0) = 0, used to express smoothness
/// assumptions and to build the regularization schedules theta^{-1}(...).
/// Two families: power t^rho and power-log t^r log^{-nu}(1/t), the latter
/// continued as t^r past t = 1/e where the log factor would stop helping.
struct IndexFunction {
    enum class Kind { power, power_log };

    Kind kind = Kind::power;
    double exponent = 1.0;      // rho (power) or r (power_log)
    double log_exponent = 1.0;  // nu, only for power_log
    double domain_upper = 1.0;  // c

    static IndexFunction power(double rho, double c = 1.0) {
        if (!(rho > 0)) throw std::invalid_argument("index function: power exponent must be > 0");
        if (!(c > 0)) throw std::invalid_argument("index function: domain upper bound must be > 0");
        return {Kind::power, rho, 1.0, c};
    }

    static IndexFunction power_log(double r, double nu, double c = 1.0) {
        if (!(r > 1)) throw std::invalid_argument("index function: power_log requires r > 1");
        if (!(nu > 0 && nu <= 1)) {
            throw std::invalid_argument("index function: power_log requires nu in (0,1]");
        }
        if (!(c > 0)) throw std::invalid_argument("index function: domain upper bound must be > 0");
        return {Kind::power_log, r, nu, c};
    }

    [[nodiscard]] IndexFunction with_domain(double c) const {
        IndexFunction f = *this;
        if (!(c > 0)) throw std::invalid_argument("index function: domain upper bound must be > 0");
        f.domain_upper = c;
        return f;
    }
};

inline double eval_index(const IndexFunction& f, double t) {
    if (!(t >= 0) || t > f.domain_upper * (1.0 + 1e-12)) {
        throw std::invalid_argument("eval_index: t outside [0, c]");
    }
    if (t == 0.0) return 0.0;
    switch (f.kind) {
        case IndexFunction::Kind::power:
            return std::pow(t, f.exponent);
        case IndexFunction::Kind::power_log: {
            constexpr double knee = 0.36787944117144233;  // 1/e
            if (t <= knee) return std::pow(t, f.exponent) * std::pow(std::log(1.0 / t), -f.log_exponent);
            return std::pow(t, f.exponent);
        }
    }
    throw std::logic_error("eval_index: unknown kind");
}

/// Invert a strictly increasing function on [0, c] by bisection.
/// Requires f(0) < y <= f(c); the result t satisfies |f(t) - y| <= tol.
template <typename F>
double invert_monotone(F&& f, double y, double lo, double hi, double tol = -1.0) {
    if (tol < 0) tol = 1e-12 * std::max(1.0, std::abs(y));
    double flo = f(lo);
    double fhi = f(hi);
    if (!(y > flo) || y > fhi * (1.0 + 1e-12)) {
        throw std::range_error("invert_monotone: value outside function range");
    }
    double mid = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (std::abs(fm - y) <= tol) return mid;
        if (fm < y) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return mid;
}

namespace detail {

/// theta^{-1}(y) for a monotone schedule function theta on [0, c], clamped to
/// the endpoints: y <= 0 maps to 0 and y >= theta(c) maps to c (the schedule
/// saturates at the largest admissible regularization for degenerate sizes).
template <typename F>
double invert_schedule(F&& theta, double y, double c) {
    if (!(y > 0)) return 0.0;
    if (y >= theta(c)) return c;
    return invert_monotone(theta, y, 0.0, c);
}

}  // namespace detail

/// lambda_{m,n} = theta^{-1}(m^{-1/2} + n^{-1/2}) with theta(t) = phi(t) t.
inline double lambda_mn(const IndexFunction& phi, double m, double n) {
    if (!(m >= 1) || !(n >= 1)) throw std::invalid_argument("lambda_mn: sizes must be >= 1");
    const double y = 1.0 / std::sqrt(m) + 1.0 / std::sqrt(n);
    const double c = phi.domain_upper;
    return detail::invert_schedule([&](double t) { return eval_index(phi, t) * t; }, y, c);
}

/// lambda_{M,N} = theta_{phi,xi}^{-1}(M^{-1/2} + N^{-1/2}) with
/// theta_{phi,xi}(t) = phi_beta(t) t / xi(t).
inline double lambda_MN(const IndexFunction& phi_beta, const IndexFunction& xi, double M,
                        double N) {
    if (!(M >= 1) || !(N >= 1)) throw std::invalid_argument("lambda_MN: sizes must be >= 1");
    const double c = std::min(phi_beta.domain_upper, xi.domain_upper);
    auto theta = [&](double t) {
        if (t == 0.0) return 0.0;
        return eval_index(phi_beta, t) * t / eval_index(xi, t);
    };
    // The combined exponent can turn non-monotone when xi grows too fast.
    double prev = 0.0;
    for (int k = 1; k <= 64; ++k) {
        const double t = c * std::pow(10.0, -12.0 * (1.0 - k / 64.0));
        const double v = theta(t);
        if (v < prev * (1.0 - 1e-9)) {
            throw config_error("lambda_MN: theta_{phi,xi} is not increasing on (0,c]");
        }
        prev = v;
    }
    const double y = 1.0 / std::sqrt(M) + 1.0 / std::sqrt(N);
    return detail::invert_schedule(theta, y, c);
}

/// Composite schedule of the embedded pipeline:
/// theta^{-1}(m^{-1/2} + n^{-1/2} + xi(lambda_MN) phi_beta(lambda_MN)).
inline double lambda_delta(const IndexFunction& phi, const IndexFunction& phi_beta,
                           const IndexFunction& xi, double m, double n, double M, double N) {
    if (!(m >= 1) || !(n >= 1)) throw std::invalid_argument("lambda_delta: sizes must be >= 1");
    const double inner = lambda_MN(phi_beta, xi, M, N);
    const double extra = eval_index(xi, inner) * eval_index(phi_beta, inner);
    const double y = 1.0 / std::sqrt(m) + 1.0 / std::sqrt(n) + extra;
    const double c = phi.domain_upper;
    return detail::invert_schedule([&](double t) { return eval_index(phi, t) * t; }, y, c);
}

enum class RateSetting { regression_l2, regression_rkhs, beta_rkhs, beta_pointwise };

struct RateParams {
    double r = 1.0;         // Hoelder order of the regression source condition, r > 1/2
    double eta = 1.0;       // exponent of the ratio source condition, eta > 0
    double varsigma = 0.0;  // kernel source-condition exponent, 0 <= varsigma <= 1/2
};

/// Exponent rho in the bound O((size functional)^rho) for the chosen error.
inline double rate_exponent(RateSetting setting, const RateParams& p) {
    switch (setting) {
        case RateSetting::regression_l2:
            if (!(p.r > 0.5)) throw std::invalid_argument("rate_exponent: requires r > 1/2");
            return 2.0 * p.r / (2.0 * p.r + 1.0);
        case RateSetting::regression_rkhs:
            if (!(p.r > 0.5)) throw std::invalid_argument("rate_exponent: requires r > 1/2");
            return (2.0 * p.r - 1.0) / (2.0 * p.r + 1.0);
        case RateSetting::beta_rkhs:
            if (!(p.eta > 0) || !(p.varsigma >= 0 && p.varsigma <= 0.5)) {
                throw std::invalid_argument("rate_exponent: requires eta > 0, varsigma in [0,1/2]");
            }
            return p.eta / (p.eta + 1.0 - p.varsigma);
        case RateSetting::beta_pointwise:
            if (!(p.eta > 0) || !(p.varsigma >= 0 && p.varsigma <= 0.5)) {
                throw std::invalid_argument("rate_exponent: requires eta > 0, varsigma in [0,1/2]");
            }
            return (p.eta + p.varsigma) / (p.eta + 1.0 - p.varsigma);
    }
    throw std::logic_error("rate_exponent: unknown setting");
}

/// Index function strings: "power:<rho>" or "powerlog:<r>:<nu>".
inline IndexFunction parse_index(const std::string& text) {
    const auto c1 = text.find(':');
    if (c1 == std::string::npos) {
        throw config_error("index function '" + text + "': expected power:<rho> or powerlog:<r>:<nu>");
    }
    const std::string kind = text.substr(0, c1);
    try {
        if (kind == "power") return IndexFunction::power(parse_double(text.substr(c1 + 1)));
        if (kind == "powerlog") {
            const auto c2 = text.find(':', c1 + 1);
            if (c2 == std::string::npos) {
                throw config_error("index function '" + text + "': powerlog needs two parameters");
            }
            return IndexFunction::power_log(parse_double(text.substr(c1 + 1, c2 - c1 - 1)),
                                            parse_double(text.substr(c2 + 1)));
        }
    } catch (const data_error&) {
        throw config_error("index function '" + text + "': parameter is not a number");
    } catch (const std::invalid_argument& e) {
        throw config_error("index function '" + text + "': " + e.what());
    }
    throw config_error("index function '" + text + "': unknown kind '" + kind + "'");
}

inline std::string index_name(const IndexFunction& f) {
    if (f.kind == IndexFunction::Kind::power) return "power:" + format_double(f.exponent);
    return "powerlog:" + format_double(f.exponent) + ":" + format_double(f.log_exponent);
}

}  // namespace covshift
