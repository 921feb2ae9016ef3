#pragma once

#include "covshift/types.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

namespace covshift {

/// Shortest decimal representation that round-trips to the same double.
inline std::string format_double(double x) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    if (ec != std::errc()) throw std::runtime_error("format_double: to_chars failed");
    return std::string(buf, ptr);
}

inline double parse_double(const std::string& s) {
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end > begin && (*(end - 1) == ' ' || *(end - 1) == '\t' || *(end - 1) == '\r')) --end;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) {
        throw data_error("not a number: '" + s + "'");
    }
    return value;
}

/// splitmix64; used to derive independent sub-streams from one master seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t purpose, std::uint64_t salt = 0) {
    return mix_seed(master ^ mix_seed(purpose + 0x100) ^ mix_seed(salt + 0x10000));
}

inline double median(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median of empty set");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
};

/// Ordinary least squares y ~ a + b x with the textbook slope standard error.
inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n != y.size() || n < 2) throw std::invalid_argument("fit_line: need >= 2 paired points");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx <= 0) throw std::invalid_argument("fit_line: degenerate abscissae");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    if (n > 2) {
        double rss = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = y[i] - (f.intercept + f.slope * x[i]);
            rss += r * r;
        }
        f.slope_stderr = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
    }
    return f;
}

namespace detail {

inline double simpson(const std::function<double(double)>& f, double a, double b, double fa,
                      double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double b,
                                   double fa, double fm, double fb, double whole, double tol,
                                   int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = simpson(f, a, m, fa, flm, fm);
    const double right = simpson(f, m, b, fm, frm, fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
        return left + right + delta / 15.0;
    }
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson quadrature of f over [a,b] to absolute tolerance tol.
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-12, int max_depth = 48) {
    if (!(b > a)) {
        if (a == b) return 0.0;
        throw std::invalid_argument("integrate: requires a < b");
    }
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    const double whole = detail::simpson(f, a, b, fa, fm, fb);
    // Seed with a few panels so narrow features are not missed by the first estimate.
    const int panels = 8;
    double total = 0.0;
    double lo = a;
    double flo = fa;
    for (int k = 1; k <= panels; ++k) {
        const double hi = a + (b - a) * static_cast<double>(k) / panels;
        const double fhi = (k == panels) ? fb : f(hi);
        const double mid = 0.5 * (lo + hi);
        const double fmid = f(mid);
        const double est = detail::simpson(f, lo, hi, flo, fmid, fhi);
        total += detail::adaptive_simpson_rec(f, lo, hi, flo, fmid, fhi, est, tol / panels,
                                              max_depth);
        lo = hi;
        flo = fhi;
    }
    (void)whole;
    return total;
}

inline std::vector<double> linspace(double a, double b, int k) {
    if (k < 1) throw std::invalid_argument("linspace: k >= 1 required");
    std::vector<double> v(static_cast<std::size_t>(k));
    if (k == 1) {
        v[0] = a;
        return v;
    }
    for (int i = 0; i < k; ++i) v[static_cast<std::size_t>(i)] = a + (b - a) * i / (k - 1);
    return v;
}

inline std::vector<double> geomspace(double a, double b, int k) {
    if (k < 1) throw std::invalid_argument("geomspace: k >= 1 required");
    if (!(a > 0) || !(b > 0)) throw std::invalid_argument("geomspace: endpoints must be positive");
    std::vector<double> v(static_cast<std::size_t>(k));
    if (k == 1) {
        v[0] = a;
        return v;
    }
    const double la = std::log(a);
    const double lb = std::log(b);
    for (int i = 0; i < k; ++i) v[static_cast<std::size_t>(i)] = std::exp(la + (lb - la) * i / (k - 1));
    return v;
}

}  // namespace covshift
