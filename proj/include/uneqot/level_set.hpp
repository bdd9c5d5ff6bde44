#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "uneqot/common.hpp"
#include "uneqot/cost.hpp"
#include "uneqot/measure.hpp"
#include "uneqot/quadrature.hpp"
#include "uneqot/region.hpp"

namespace uneqot {

// Traced level set X_=(y,k): for the builtin families it is the straight
// chord {D_yc(.,y) = k} through the domain, carried as Gauss-Legendre nodes
// with arclength weights (a single point with unit weight when m = 1).
struct LevelCurve {
    double y = 0, k = 0;
    std::vector<Vec2> nodes;
    std::vector<double> weights; // arclength quadrature weights
    bool empty() const { return nodes.empty(); }
    double length() const {
        double s = 0;
        for (double w : weights) s += w;
        return s;
    }
};

inline void require_compatible(const CostModel& cost, const SourceMeasure& mu) {
    if (cost.dim() != mu.dim())
        throw config_error(std::string("cost family ") + to_string(cost.family()) +
                           " has source dimension " + std::to_string(cost.dim()) +
                           " but domain " + to_string(mu.domain()) + " has dimension " +
                           std::to_string(mu.dim()));
}

// Exact range of D_yc(.,y) over the closed domain.
inline std::pair<double, double> dyc_range(const CostModel& cost, const SourceMeasure& mu,
                                           double y) {
    return mu.affine_range(cost.dyc_grad(y), cost.dyc_shift(y));
}

// Half-plane normal form of {x : D_yc(x,y) >= k}.
inline HalfPlane superlevel_halfplane(const CostModel& cost, double y, double k) {
    Vec2 g = cost.dyc_grad(y);
    double gn = g.norm();
    return {g * (1.0 / gn), (k - cost.dyc_shift(y)) / gn};
}

namespace detail {

// Closed-form quarter-disk mass for the bilinear arc cost.  Both branches
// reduce to a wedge plus a triangle with the chord; the k > 0 branch replaces
// tan y by cot y because the chord then leaves through the x1 axis.
inline double quarter_disk_bilinear_mass(double y, double k) {
    double kmin = -std::cos(y), kmax = std::sin(y);
    if (k <= kmin) return 1.0;
    if (k >= kmax) return 0.0;
    if (k == 0.0) return (4.0 / kPi) * (0.5 * y);
    double root = std::sqrt(std::max(0.0, 1.0 - k * k));
    double chord = k < 0 ? root + k * std::tan(y) : root - k / std::tan(y);
    return (4.0 / kPi) * (0.5 * (y - std::asin(k)) - 0.5 * k * chord);
}

} // namespace detail

// mu(X_>=(y,k)).  Uses the quarter-disk closed form when applicable and exact
// half-plane clipping otherwise; both agree to machine precision.
inline double superlevel_mass(const CostModel& cost, const SourceMeasure& mu, double y,
                              double k) {
    require_compatible(cost, mu);
    auto [kmin, kmax] = dyc_range(cost, mu, y);
    if (k <= kmin) return 1.0;
    if (k >= kmax) return 0.0;
    if (cost.family() == CostFamily::bilinear_arc &&
        mu.domain() == DomainKind::quarter_disk && !mu.gridded() && y >= 0 && y <= kPi / 2)
        return detail::quarter_disk_bilinear_mass(y, k);
    return mu.mass_clipped(superlevel_halfplane(cost, y, k));
}

// Invert M = mu(X_>=(y,k)) for k.  The profile is nonincreasing in k;
// bisection stops at 1e-12 in k or 1e-9 in mass, whichever first.  M = 0 and
// M = 1 return the exact extrema of D_yc over the closed domain.
inline double mass_to_k(const CostModel& cost, const SourceMeasure& mu, double y, double M) {
    require_compatible(cost, mu);
    if (M < -1e-12 || M > 1 + 1e-12)
        throw config_error("mass_to_k: M=" + std::to_string(M) + " outside [0,1]");
    auto [kmin, kmax] = dyc_range(cost, mu, y);
    if (M <= 0) return kmax;
    if (M >= 1) return kmin;
    double mlo = superlevel_mass(cost, mu, y, kmin);
    double mhi = superlevel_mass(cost, mu, y, kmax);
    if (mlo < M - 1e-9 || mhi > M + 1e-9)
        throw numeric_error("mass_to_k: mass profile fails to bracket M=" + std::to_string(M) +
                            " on [" + std::to_string(kmin) + "," + std::to_string(kmax) +
                            "]: mass(kmin)=" + std::to_string(mlo) +
                            ", mass(kmax)=" + std::to_string(mhi));
    double lo = kmin, hi = kmax;
    while (hi - lo > 1e-12) {
        double mid = 0.5 * (lo + hi);
        double m = superlevel_mass(cost, mu, y, mid);
        if (std::abs(m - M) <= 1e-9) {
            // Mass already matched; tighten k a little further for stability.
            if (m > M)
                lo = mid;
            else
                hi = mid;
            if (hi - lo < 1e-10) return 0.5 * (lo + hi);
            continue;
        }
        if (m > M)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

inline LevelCurve trace_level_curve(const CostModel& cost, const SourceMeasure& mu, double y,
                                    double k) {
    require_compatible(cost, mu);
    LevelCurve lc;
    lc.y = y;
    lc.k = k;
    Vec2 g = cost.dyc_grad(y);
    double gn = g.norm();
    double h = cost.dyc_shift(y);
    if (mu.dim() == 1) {
        Vec2 xstar = mu.snap_to_domain({(k - h) / g.x, 0});
        if (xstar.x >= 0 && xstar.x <= 1) {
            lc.nodes.push_back(xstar);
            lc.weights.push_back(1.0); // H^0 counting weight
        }
        return lc;
    }
    Vec2 ghat = g * (1.0 / gn);
    Vec2 base = ghat * ((k - h) / gn);
    Vec2 dir{-ghat.y, ghat.x};
    auto iv = mu.clip_line(base, dir);
    if (!iv) return lc;
    const auto& rule = GaussLegendre64::instance();
    double c = 0.5 * (iv->first + iv->second), half = 0.5 * (iv->second - iv->first);
    if (half <= 0) return lc;
    for (int i = 0; i < 64; ++i) {
        lc.nodes.push_back(mu.snap_to_domain(base + (c + half * rule.node[i]) * dir));
        lc.weights.push_back(half * rule.weight[i]);
    }
    return lc;
}

enum class LevelWeight { one_over_cross, cyy_over_cross };

// Hausdorff integral over X_=(y,k) of mubar * w / |D^2_xy c| with w = 1 or
// D^2_yy c.  Empty level sets integrate to zero.
inline double level_integral(const CostModel& cost, const SourceMeasure& mu, double y, double k,
                             LevelWeight weight) {
    LevelCurve lc = trace_level_curve(cost, mu, y, k);
    if (lc.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < lc.nodes.size(); ++i) {
        Vec2 x = lc.nodes[i];
        double w = weight == LevelWeight::one_over_cross ? 1.0 : cost.d2_yyc(x, y);
        s += lc.weights[i] * mu.density(x) * w / cost.d2_xyc_norm(x, y);
    }
    return s;
}

// Exact minimum of D_yc(.,y1) over X_>=(y0,k0): the constrained minimum of an
// affine function over a convex clipped region, evaluated on its extreme
// features (vertices, chord endpoints, and the arc point facing -g).  Returns
// +infinity when the super-level set is empty, so containment tests become
// vacuous there.
inline double superlevel_min_dyc(const CostModel& cost, const SourceMeasure& mu, double y0,
                                 double k0, double y1) {
    require_compatible(cost, mu);
    Vec2 g1 = cost.dyc_grad(y1);
    double h1 = cost.dyc_shift(y1);
    auto [r0min, r0max] = dyc_range(cost, mu, y0);
    if (k0 > r0max) return std::numeric_limits<double>::infinity();
    if (k0 <= r0min) return dyc_range(cost, mu, y1).first; // whole domain
    if (mu.dim() == 1) {
        // X_>=(y0,k0) is a subinterval; minimize g1.x*x + h1 at its endpoints.
        Vec2 g0 = cost.dyc_grad(y0);
        double h0 = cost.dyc_shift(y0);
        double xcut = (k0 - h0) / g0.x;
        double lo = g0.x > 0 ? std::max(0.0, xcut) : 0.0;
        double hi = g0.x > 0 ? 1.0 : std::min(1.0, xcut);
        if (hi < lo) return std::numeric_limits<double>::infinity();
        return std::min(g1.x * lo, g1.x * hi) + h1;
    }
    ConvexRegion r = mu.region().clipped(superlevel_halfplane(cost, y0, k0));
    if (r.empty()) return std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    Vec2 gdir = g1.normalized();
    for (const auto& p : r.pieces()) {
        if (p.is_arc) {
            for (double th : {p.th0, p.th1}) best = std::min(best, g1.dot({std::cos(th), std::sin(th)}));
            // interior arc minimum at the point facing -g1
            double phi = std::atan2(-gdir.y, -gdir.x);
            for (int kk = -1; kk <= 1; ++kk) {
                double cand = phi + 2 * kPi * kk;
                if (cand >= p.th0 && cand <= p.th1)
                    best = std::min(best, g1.dot({std::cos(cand), std::sin(cand)}));
            }
        } else {
            best = std::min(best, std::min(g1.dot(p.p0), g1.dot(p.p1)));
        }
    }
    return best + h1;
}

} // namespace uneqot
