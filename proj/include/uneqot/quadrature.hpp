#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "uneqot/common.hpp"

namespace uneqot {

// 64-point Gauss-Legendre rule on [-1,1].  Nodes are the roots of P_64 found
// by Newton iteration from the Chebyshev initial guess; accurate to ~1e-15.
struct GaussLegendre64 {
    std::array<double, 64> node{};
    std::array<double, 64> weight{};

    GaussLegendre64() {
        constexpr int n = 64;
        for (int i = 0; i < (n + 1) / 2; ++i) {
            double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
            double pp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = x;
                for (int j = 2; j <= n; ++j) {
                    double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
                    p0 = p1;
                    p1 = p2;
                }
                pp = n * (x * p1 - p0) / (x * x - 1.0);
                double dx = p1 / pp;
                x -= dx;
                if (std::abs(dx) < 1e-16) break;
            }
            node[i] = -x;
            node[n - 1 - i] = x;
            double w = 2.0 / ((1.0 - x * x) * pp * pp);
            weight[i] = w;
            weight[n - 1 - i] = w;
        }
    }

    static const GaussLegendre64& instance() {
        static const GaussLegendre64 rule;
        return rule;
    }
};

// Integrate f over [a,b] with the fixed 64-point rule.
template <typename F>
double gauss64(F&& f, double a, double b) {
    const auto& r = GaussLegendre64::instance();
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double s = 0.0;
    for (int i = 0; i < 64; ++i) s += r.weight[i] * f(c + h * r.node[i]);
    return s * h;
}

namespace detail {

template <typename F>
double adaptive_simpson_rec(F& f, double a, double b, double fa, double fm, double fb,
                            double whole, double tol, int depth) {
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

} // namespace detail

// Adaptive Simpson with absolute tolerance.
template <typename F>
double adaptive_simpson(F&& f, double a, double b, double tol = 1e-10, int max_depth = 40) {
    if (a == b) return 0.0;
    double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return detail::adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

// Cumulative trapezoid of nodal values on a uniform grid; out[0] = 0.
inline std::vector<double> cumtrapz(const std::vector<double>& v, double h) {
    std::vector<double> out(v.size(), 0.0);
    for (std::size_t i = 1; i < v.size(); ++i)
        out[i] = out[i - 1] + 0.5 * h * (v[i - 1] + v[i]);
    return out;
}

// Find a root of a monotone (either direction) continuous f on [lo,hi] by
// bisection; assumes f(lo) and f(hi) bracket zero.
template <typename F>
double bisect(F&& f, double lo, double hi, double xtol = 1e-14, int max_iter = 200) {
    double flo = f(lo);
    if (flo == 0.0) return lo;
    double fhi = f(hi);
    if (fhi == 0.0) return hi;
    if ((flo > 0) == (fhi > 0))
        throw numeric_error("bisect: endpoints do not bracket a root (f(" +
                            std::to_string(lo) + ")=" + std::to_string(flo) + ", f(" +
                            std::to_string(hi) + ")=" + std::to_string(fhi) + ")");
    for (int i = 0; i < max_iter && hi - lo > xtol; ++i) {
        double mid = 0.5 * (lo + hi);
        double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm > 0) == (flo > 0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

} // namespace uneqot
