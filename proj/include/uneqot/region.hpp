#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "uneqot/common.hpp"

namespace uneqot {

// Closed half-plane {x : n.x*x + n.y*y >= d} with |n| = 1.
struct HalfPlane {
    Vec2 n;
    double d = 0.0;

    double eval(Vec2 p) const { return n.dot(p) - d; }
};

// Boundary piece of a convex region: a straight segment or a ccw arc of the
// unit circle centered at the origin.  Pieces chain head-to-tail into a closed
// ccw loop.
struct RegionPiece {
    bool is_arc = false;
    Vec2 p0, p1;             // segment endpoints
    double th0 = 0, th1 = 0; // arc angles, th0 < th1

    Vec2 start() const { return is_arc ? Vec2{std::cos(th0), std::sin(th0)} : p0; }
    Vec2 end() const { return is_arc ? Vec2{std::cos(th1), std::sin(th1)} : p1; }
};

namespace detail {
constexpr double kGeomEps = 1e-13;
}

// Convex planar region bounded by segments and unit-circle arcs, supporting
// exact half-plane clipping and exact area.  This covers all the geometry the
// builtin cost families need: their level sets are straight lines, so every
// super-level set is a half-plane cut of the domain.
class ConvexRegion {
public:
    ConvexRegion() = default;

    static ConvexRegion quarter_disk() {
        ConvexRegion r;
        r.pieces_.push_back({false, {0, 0}, {1, 0}});
        r.pieces_.push_back({true, {}, {}, 0.0, kPi / 2});
        r.pieces_.push_back({false, {0, 1}, {0, 0}});
        return r;
    }

    static ConvexRegion rectangle(double x0, double x1, double y0, double y1) {
        ConvexRegion r;
        r.pieces_.push_back({false, {x0, y0}, {x1, y0}});
        r.pieces_.push_back({false, {x1, y0}, {x1, y1}});
        r.pieces_.push_back({false, {x1, y1}, {x0, y1}});
        r.pieces_.push_back({false, {x0, y1}, {x0, y0}});
        return r;
    }

    bool empty() const { return pieces_.empty(); }
    const std::vector<RegionPiece>& pieces() const { return pieces_; }

    // Green's theorem: A = 1/2 oint (x dy - y dx).  Arcs on the unit circle
    // contribute (th1-th0)/2 exactly.
    double area() const {
        double a = 0.0;
        for (const auto& p : pieces_) {
            if (p.is_arc)
                a += 0.5 * (p.th1 - p.th0);
            else
                a += 0.5 * p.p0.cross(p.p1);
        }
        return a;
    }

    ConvexRegion clipped(const HalfPlane& h) const {
        if (pieces_.empty()) return {};

        std::vector<RegionPiece> kept;
        bool changed = false;
        for (const auto& p : pieces_) {
            if (p.is_arc)
                split_arc(p, h, kept, changed);
            else
                split_segment(p, h, kept, changed);
        }
        if (!changed) return *this;
        ConvexRegion result;
        if (kept.empty()) return result;

        // Close every positional gap between consecutive kept pieces with a
        // chord along the clip line; convexity guarantees a single gap.
        for (std::size_t i = 0; i < kept.size(); ++i) {
            result.pieces_.push_back(kept[i]);
            Vec2 e = kept[i].end();
            Vec2 s = kept[(i + 1) % kept.size()].start();
            if ((s - e).norm() > detail::kGeomEps)
                result.pieces_.push_back({false, e, s});
        }
        return result;
    }

private:
    std::vector<RegionPiece> pieces_;

    static void split_segment(const RegionPiece& s, const HalfPlane& h,
                              std::vector<RegionPiece>& out, bool& changed) {
        double e0 = h.eval(s.p0), e1 = h.eval(s.p1);
        bool in0 = e0 >= -detail::kGeomEps, in1 = e1 >= -detail::kGeomEps;
        if (in0 && in1) {
            out.push_back(s);
            return;
        }
        changed = true;
        if (!in0 && !in1) return;
        double t = e0 / (e0 - e1);
        Vec2 cross = s.p0 + t * (s.p1 - s.p0);
        RegionPiece sub{false, in0 ? s.p0 : cross, in0 ? cross : s.p1};
        if ((sub.p1 - sub.p0).norm() > detail::kGeomEps) out.push_back(sub);
    }

    static void split_arc(const RegionPiece& s, const HalfPlane& h,
                          std::vector<RegionPiece>& out, bool& changed) {
        // Inside condition on the unit circle: cos(theta - phi) >= d.
        double phi = std::atan2(h.n.y, h.n.x);
        if (h.d <= -1.0) {
            out.push_back(s);
            return;
        }
        if (h.d >= 1.0) {
            changed = true;
            return;
        }
        double alpha = std::acos(h.d);
        // Inside angles: [phi-alpha, phi+alpha] mod 2pi; collect the shifts that
        // overlap [th0, th1].  A chord can cut the arc twice, leaving two parts.
        std::vector<std::pair<double, double>> parts;
        for (int k = -2; k <= 2; ++k) {
            double a = phi - alpha + 2 * kPi * k;
            double b = phi + alpha + 2 * kPi * k;
            double lo = std::max(a, s.th0), hi = std::min(b, s.th1);
            if (hi - lo > detail::kGeomEps) parts.emplace_back(lo, hi);
        }
        std::sort(parts.begin(), parts.end());
        double covered = 0.0;
        for (auto [lo, hi] : parts) {
            out.push_back(RegionPiece{true, {}, {}, lo, hi});
            covered += hi - lo;
        }
        if (covered < (s.th1 - s.th0) - detail::kGeomEps) changed = true;
    }
};

// Clip the parametric line p + s*dir (|dir|=1) against simple convex sets;
// used to trace level segments.  Returns the s-interval inside, if nonempty.
inline std::optional<std::pair<double, double>> clip_line_halfplane(
    std::optional<std::pair<double, double>> iv, Vec2 p, Vec2 dir, const HalfPlane& h) {
    if (!iv) return std::nullopt;
    double c0 = h.eval(p);    // value at s=0
    double c1 = h.n.dot(dir); // slope in s
    auto [lo, hi] = *iv;
    if (std::abs(c1) < 1e-15) {
        if (c0 < -detail::kGeomEps) return std::nullopt;
        return iv;
    }
    double s_cross = -c0 / c1;
    if (c1 > 0)
        lo = std::max(lo, s_cross);
    else
        hi = std::min(hi, s_cross);
    if (hi - lo <= 0) return std::nullopt;
    return std::make_pair(lo, hi);
}

inline std::optional<std::pair<double, double>> clip_line_unit_disk(
    std::optional<std::pair<double, double>> iv, Vec2 p, Vec2 dir) {
    if (!iv) return std::nullopt;
    // |p + s dir|^2 = 1 with |dir| = 1
    double b = p.dot(dir);
    double c = p.dot(p) - 1.0;
    double disc = b * b - c;
    if (disc <= 0) return std::nullopt;
    double r = std::sqrt(disc);
    double lo = std::max(iv->first, -b - r);
    double hi = std::min(iv->second, -b + r);
    if (hi - lo <= 0) return std::nullopt;
    return std::make_pair(lo, hi);
}

} // namespace uneqot
