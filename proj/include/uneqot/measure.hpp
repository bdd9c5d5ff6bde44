#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "uneqot/common.hpp"
#include "uneqot/quadrature.hpp"
#include "uneqot/region.hpp"
#include "uneqot/rng.hpp"

namespace uneqot {

enum class DomainKind { quarter_disk, rectangle, unit_interval };

inline const char* to_string(DomainKind d) {
    switch (d) {
        case DomainKind::quarter_disk: return "quarter_disk";
        case DomainKind::rectangle: return "rectangle";
        case DomainKind::unit_interval: return "unit_interval";
    }
    return "?";
}

// Source measure: a bounded domain with a probability density, either uniform
// or piecewise constant on a regular grid of cells over the bounding box.
class SourceMeasure {
public:
    static SourceMeasure quarter_disk() {
        SourceMeasure m(DomainKind::quarter_disk, 2);
        m.x0_ = 0, m.x1_ = 1, m.y0_ = 0, m.y1_ = 1;
        m.uniform_density_ = 4.0 / kPi;
        return m;
    }
    static SourceMeasure rectangle(double x0, double x1, double y0, double y1) {
        if (!(x1 > x0) || !(y1 > y0)) throw config_error("rectangle: empty extent");
        SourceMeasure m(DomainKind::rectangle, 2);
        m.x0_ = x0, m.x1_ = x1, m.y0_ = y0, m.y1_ = y1;
        m.uniform_density_ = 1.0 / ((x1 - x0) * (y1 - y0));
        return m;
    }
    static SourceMeasure unit_interval() {
        SourceMeasure m(DomainKind::unit_interval, 1);
        m.x0_ = 0, m.x1_ = 1, m.y0_ = 0, m.y1_ = 0;
        m.uniform_density_ = 1.0;
        return m;
    }

    // Replace the uniform density with cell values on a res x res grid (res
    // cells for 1-D domains).  Values are renormalized so the total mass is 1.
    SourceMeasure with_gridded_density(std::vector<double> cell_values, int res) const {
        SourceMeasure m = *this;
        int ncells = dim() == 1 ? res : res * res;
        if (res < 1 || static_cast<int>(cell_values.size()) != ncells)
            throw config_error("gridded density: need res*res (or res) cell values");
        for (double v : cell_values)
            if (!(v >= 0.0)) throw config_error("gridded density: negative cell value");
        m.grid_res_ = res;
        m.grid_vals_ = std::move(cell_values);
        double total = 0.0;
        for (int i = 0; i < ncells; ++i) total += m.cell_mass_raw(i);
        if (total <= 0.0) throw config_error("gridded density: zero total mass");
        for (auto& v : m.grid_vals_) v /= total;
        return m;
    }

    DomainKind domain() const { return kind_; }
    int dim() const { return dim_; }
    bool gridded() const { return grid_res_ > 0; }
    int grid_resolution() const { return grid_res_; }

    Vec2 bbox_lo() const { return {x0_, y0_}; }
    Vec2 bbox_hi() const { return {x1_, y1_}; }
    double bbox_volume() const {
        return dim_ == 1 ? (x1_ - x0_) : (x1_ - x0_) * (y1_ - y0_);
    }

    bool inside(Vec2 p) const {
        switch (kind_) {
            case DomainKind::quarter_disk:
                return p.x >= 0 && p.y >= 0 && p.x * p.x + p.y * p.y <= 1.0;
            case DomainKind::rectangle:
                return p.x >= x0_ && p.x <= x1_ && p.y >= y0_ && p.y <= y1_;
            case DomainKind::unit_interval:
                return p.x >= 0 && p.x <= 1;
        }
        return false;
    }

    double density(Vec2 p) const {
        if (!inside(p)) return 0.0;
        if (!gridded()) return uniform_density_;
        int i = cell_index(p);
        return grid_vals_[i];
    }

    double density_sup() const {
        if (!gridded()) return uniform_density_;
        double s = 0.0;
        for (double v : grid_vals_) s = std::max(s, v);
        return s;
    }

    // Outward unit normal at a boundary point (nearest boundary feature).
    Vec2 outward_normal(Vec2 p) const {
        switch (kind_) {
            case DomainKind::quarter_disk: {
                double r = p.norm();
                if (std::abs(r - 1.0) < 1e-9) return p.normalized();
                return p.x < p.y ? Vec2{-1, 0} : Vec2{0, -1};
            }
            case DomainKind::rectangle: {
                double dl = p.x - x0_, dr = x1_ - p.x, db = p.y - y0_, dt = y1_ - p.y;
                double m = std::min(std::min(dl, dr), std::min(db, dt));
                if (m == dl) return {-1, 0};
                if (m == dr) return {1, 0};
                if (m == db) return {0, -1};
                return {0, 1};
            }
            case DomainKind::unit_interval:
                return p.x < 0.5 ? Vec2{-1, 0} : Vec2{1, 0};
        }
        return {};
    }

    // Project a point sitting within eps outside the closed domain back onto
    // it; used to keep traced level-curve nodes inside X-bar despite roundoff.
    Vec2 snap_to_domain(Vec2 p, double eps = 1e-12) const {
        if (kind_ == DomainKind::unit_interval) {
            if (p.x < 0 && p.x > -eps) p.x = 0;
            if (p.x > 1 && p.x < 1 + eps) p.x = 1;
            return p;
        }
        if (p.x < x0_ && p.x > x0_ - eps) p.x = x0_;
        if (p.x > x1_ && p.x < x1_ + eps) p.x = x1_;
        if (p.y < y0_ && p.y > y0_ - eps) p.y = y0_;
        if (p.y > y1_ && p.y < y1_ + eps) p.y = y1_;
        if (kind_ == DomainKind::quarter_disk) {
            double r = p.norm();
            if (r > 1.0 && r < 1.0 + eps) p = p * (1.0 / r);
        }
        return p;
    }

    ConvexRegion region() const {
        switch (kind_) {
            case DomainKind::quarter_disk:
                return ConvexRegion::quarter_disk();
            case DomainKind::rectangle:
                return ConvexRegion::rectangle(x0_, x1_, y0_, y1_);
            case DomainKind::unit_interval:
                throw config_error("region(): 1-D domain has no planar region");
        }
        return {};
    }

    // mu(domain ∩ H1 [∩ H2]) computed exactly: clipping for uniform densities,
    // per-cell clipping for gridded ones (cells are piecewise constant).
    double mass_clipped(const HalfPlane& h1, const HalfPlane* h2 = nullptr) const {
        if (dim_ == 1) return mass_clipped_1d(h1, h2);
        if (!gridded()) {
            ConvexRegion r = region().clipped(h1);
            if (h2) r = r.clipped(*h2);
            return r.area() * uniform_density_;
        }
        double total = 0.0;
        double hx = (x1_ - x0_) / grid_res_, hy = (y1_ - y0_) / grid_res_;
        ConvexRegion dom = region();
        for (int j = 0; j < grid_res_; ++j) {
            for (int i = 0; i < grid_res_; ++i) {
                double val = grid_vals_[j * grid_res_ + i];
                if (val == 0.0) continue;
                ConvexRegion cell =
                    ConvexRegion::rectangle(x0_ + i * hx, x0_ + (i + 1) * hx,
                                            y0_ + j * hy, y0_ + (j + 1) * hy);
                if (kind_ == DomainKind::quarter_disk) {
                    // Clip the cell against the disk chordwise: cells crossing the
                    // arc get the half-plane tangent sequence replaced by an exact
                    // clip against the circle via the domain region.
                    ConvexRegion r = dom.clipped(edge_halfplane(cell, 0));
                    r = r.clipped(edge_halfplane(cell, 1));
                    r = r.clipped(edge_halfplane(cell, 2));
                    r = r.clipped(edge_halfplane(cell, 3));
                    r = r.clipped(h1);
                    if (h2) r = r.clipped(*h2);
                    total += val * r.area();
                } else {
                    ConvexRegion r = cell.clipped(h1);
                    if (h2) r = r.clipped(*h2);
                    total += val * r.area();
                }
            }
        }
        return total;
    }

    double total_mass() const { return mass_clipped(HalfPlane{{1, 0}, -1e18}); }

    // Clip the parametric line p + s*dir, |dir| = 1, against the domain.
    std::optional<std::pair<double, double>> clip_line(Vec2 p, Vec2 dir) const {
        std::optional<std::pair<double, double>> iv =
            std::make_pair(-1e18, 1e18);
        switch (kind_) {
            case DomainKind::quarter_disk:
                iv = clip_line_halfplane(iv, p, dir, HalfPlane{{1, 0}, 0});
                iv = clip_line_halfplane(iv, p, dir, HalfPlane{{0, 1}, 0});
                iv = clip_line_unit_disk(iv, p, dir);
                return iv;
            case DomainKind::rectangle:
                iv = clip_line_halfplane(iv, p, dir, HalfPlane{{1, 0}, x0_});
                iv = clip_line_halfplane(iv, p, dir, HalfPlane{{-1, 0}, -x1_});
                iv = clip_line_halfplane(iv, p, dir, HalfPlane{{0, 1}, y0_});
                iv = clip_line_halfplane(iv, p, dir, HalfPlane{{0, -1}, -y1_});
                return iv;
            case DomainKind::unit_interval:
                iv = clip_line_halfplane(iv, p, dir, HalfPlane{{1, 0}, 0});
                iv = clip_line_halfplane(iv, p, dir, HalfPlane{{-1, 0}, -1});
                return iv;
        }
        return std::nullopt;
    }

    // Draw a point distributed according to the measure (rejection sampling
    // from the bounding box; deterministic given the generator state).
    Vec2 sample(CounterRng& rng) const {
        double cap = density_sup();
        for (;;) {
            Vec2 p{x0_ + (x1_ - x0_) * rng.next(),
                   dim_ == 1 ? 0.0 : y0_ + (y1_ - y0_) * rng.next()};
            if (!gridded()) {
                if (inside(p)) return p;
            } else if (rng.next() * cap < density(p)) {
                return p;
            }
        }
    }

    // Extrema of the affine function g.x + h over the closed domain (support
    // function); exact, used for D_yc ranges and containment tests.
    std::pair<double, double> affine_range(Vec2 g, double h) const {
        switch (kind_) {
            case DomainKind::quarter_disk: {
                double mx = std::max({0.0, g.x, g.y});
                if (g.x > 0 && g.y > 0) mx = std::max(mx, g.norm());
                double mn = std::min({0.0, g.x, g.y});
                if (g.x < 0 && g.y < 0) mn = std::min(mn, -g.norm());
                return {mn + h, mx + h};
            }
            case DomainKind::rectangle: {
                double mn = 1e300, mx = -1e300;
                for (double cx : {x0_, x1_})
                    for (double cy : {y0_, y1_}) {
                        double t = g.dot({cx, cy});
                        mn = std::min(mn, t);
                        mx = std::max(mx, t);
                    }
                return {mn + h, mx + h};
            }
            case DomainKind::unit_interval: {
                double v0 = 0.0, v1 = g.x;
                return {std::min(v0, v1) + h, std::max(v0, v1) + h};
            }
        }
        return {0, 0};
    }

private:
    SourceMeasure(DomainKind k, int d) : kind_(k), dim_(d) {}

    static HalfPlane edge_halfplane(const ConvexRegion& rect, int edge) {
        const auto& p = rect.pieces()[edge];
        Vec2 t = (p.p1 - p.p0).normalized();
        Vec2 n{-t.y, t.x}; // inward for a ccw loop
        return {n, n.dot(p.p0)};
    }

    int cell_index(Vec2 p) const {
        if (dim_ == 1) {
            int i = std::min(grid_res_ - 1,
                             std::max(0, static_cast<int>((p.x - x0_) / (x1_ - x0_) * grid_res_)));
            return i;
        }
        int i = std::min(grid_res_ - 1,
                         std::max(0, static_cast<int>((p.x - x0_) / (x1_ - x0_) * grid_res_)));
        int j = std::min(grid_res_ - 1,
                         std::max(0, static_cast<int>((p.y - y0_) / (y1_ - y0_) * grid_res_)));
        return j * grid_res_ + i;
    }

    double cell_mass_raw(int idx) const {
        if (dim_ == 1) {
            double h = (x1_ - x0_) / grid_res_;
            return grid_vals_[idx] * h;
        }
        double hx = (x1_ - x0_) / grid_res_, hy = (y1_ - y0_) / grid_res_;
        if (kind_ == DomainKind::rectangle) return grid_vals_[idx] * hx * hy;
        int i = idx % grid_res_, j = idx / grid_res_;
        ConvexRegion cell = ConvexRegion::rectangle(x0_ + i * hx, x0_ + (i + 1) * hx,
                                                    y0_ + j * hy, y0_ + (j + 1) * hy);
        ConvexRegion r = region();
        for (int e = 0; e < 4; ++e) r = r.clipped(edge_halfplane(cell, e));
        return grid_vals_[idx] * r.area();
    }

    double mass_clipped_1d(const HalfPlane& h1, const HalfPlane* h2) const {
        double lo = 0.0, hi = 1.0;
        auto cut = [&](const HalfPlane& h) {
            // h.n.x * x >= h.d on the line
            if (std::abs(h.n.x) < 1e-300) {
                if (h.d > 0) lo = hi = 0.0;
                return;
            }
            double t = h.d / h.n.x;
            if (h.n.x > 0)
                lo = std::max(lo, t);
            else
                hi = std::min(hi, t);
        };
        cut(h1);
        if (h2) cut(*h2);
        if (hi <= lo) return 0.0;
        if (!gridded()) return (hi - lo) * uniform_density_;
        double h = 1.0 / grid_res_, total = 0.0;
        for (int i = 0; i < grid_res_; ++i) {
            double a = std::max(lo, i * h), b = std::min(hi, (i + 1) * h);
            if (b > a) total += grid_vals_[i] * (b - a);
        }
        return total;
    }

    DomainKind kind_;
    int dim_;
    double x0_ = 0, x1_ = 1, y0_ = 0, y1_ = 1;
    double uniform_density_ = 1.0;
    int grid_res_ = 0;
    std::vector<double> grid_vals_;
};

// Weighted particle cloud in 1 or 2 dimensions; the working representation of
// free measures in the best-reply iteration and the Monte-Carlo pushforwards.
struct DiscreteMeasure {
    int dim = 1;
    std::vector<Vec2> points; // .x only when dim == 1
    std::vector<double> weights;

    static DiscreteMeasure quantile_uniform_1d(int n, double a, double b) {
        DiscreteMeasure m;
        m.dim = 1;
        m.points.resize(n);
        m.weights.assign(n, 1.0 / n);
        for (int i = 0; i < n; ++i) m.points[i] = {a + (b - a) * (i + 0.5) / n, 0.0};
        return m;
    }

    static DiscreteMeasure dirac(Vec2 p, int dim = 1) {
        DiscreteMeasure m;
        m.dim = dim;
        m.points = {p};
        m.weights = {1.0};
        return m;
    }

    std::size_t size() const { return points.size(); }

    void validate() const {
        if (points.size() != weights.size() || points.empty())
            throw config_error("DiscreteMeasure: size mismatch or empty");
        double s = 0;
        for (double w : weights) {
            if (w < 0) throw config_error("DiscreteMeasure: negative weight");
            s += w;
        }
        if (std::abs(s - 1.0) > 1e-12)
            throw config_error("DiscreteMeasure: weights sum to " + std::to_string(s));
    }

    Vec2 mean() const {
        Vec2 m{0, 0};
        for (std::size_t i = 0; i < points.size(); ++i) m = m + weights[i] * points[i];
        return m;
    }
};

// Target density on an interval: nodal values on a uniform grid with the cdf
// defined as the exact integral of the piecewise-linear interpolant (so nodal
// cdf values are the running trapezoid sums).
class TargetDensity {
public:
    static TargetDensity from_function(Interval iv, const std::function<double(double)>& f,
                                       int grid, bool normalize = true) {
        std::vector<double> vals(grid);
        double h = iv.length() / (grid - 1);
        for (int i = 0; i < grid; ++i) vals[i] = f(iv.lo + i * h);
        return from_values(iv, std::move(vals), normalize);
    }

    static TargetDensity from_values(Interval iv, std::vector<double> vals,
                                     bool normalize = true) {
        if (vals.size() < 2) throw config_error("TargetDensity: need at least 2 grid values");
        for (double v : vals)
            if (!(v >= 0.0)) throw config_error("TargetDensity: negative density value");
        TargetDensity t;
        t.iv_ = iv;
        t.vals_ = std::move(vals);
        double h = iv.length() / (t.vals_.size() - 1);
        t.cdf_ = cumtrapz(t.vals_, h);
        double total = t.cdf_.back();
        if (normalize) {
            if (total <= 0.0) throw config_error("TargetDensity: zero total mass");
            for (auto& v : t.vals_) v /= total;
            for (auto& v : t.cdf_) v /= total;
        } else if (std::abs(total - 1.0) > 1e-8) {
            throw numeric_error("TargetDensity: mass " + std::to_string(total) +
                                " differs from 1 beyond 1e-8");
        }
        return t;
    }

    static TargetDensity uniform(Interval iv, int grid) {
        return from_function(iv, [&](double) { return 1.0 / iv.length(); }, grid, false);
    }

    Interval interval() const { return iv_; }
    int grid_size() const { return static_cast<int>(vals_.size()); }
    double grid_step() const { return iv_.length() / (vals_.size() - 1); }
    const std::vector<double>& values() const { return vals_; }
    const std::vector<double>& cdf_values() const { return cdf_; }
    double node(int i) const { return iv_.lo + i * grid_step(); }

    double density(double y) const {
        auto [i, t] = locate(y);
        return vals_[i] * (1 - t) + vals_[i + 1] * t;
    }

    // Exact integral of the piecewise-linear density up to y.
    double cdf(double y) const {
        if (y <= iv_.lo) return 0.0;
        if (y >= iv_.hi) return cdf_.back();
        auto [i, t] = locate(y);
        double h = grid_step();
        double d = t * h;
        return cdf_[i] + vals_[i] * d + 0.5 * (vals_[i + 1] - vals_[i]) * d * d / h;
    }

    double mass(double a, double b) const { return cdf(b) - cdf(a); }

    // Generalized inverse of the cdf (for quantile sampling).
    double quantile(double q) const {
        q = std::max(0.0, std::min(q, cdf_.back()));
        auto it = std::lower_bound(cdf_.begin(), cdf_.end(), q);
        if (it == cdf_.begin()) return iv_.lo;
        std::size_t i = (it - cdf_.begin()) - 1;
        double lo = node(static_cast<int>(i)), hi = node(static_cast<int>(i + 1));
        double f = [&] {
            double den = cdf_[i + 1] - cdf_[i];
            return den > 0 ? (q - cdf_[i]) / den : 0.0;
        }();
        return lo + f * (hi - lo);
    }

private:
    std::pair<int, double> locate(double y) const {
        double h = grid_step();
        double u = (y - iv_.lo) / h;
        int i = std::max(0, std::min(static_cast<int>(vals_.size()) - 2, static_cast<int>(u)));
        return {i, std::max(0.0, std::min(1.0, u - i))};
    }

    Interval iv_;
    std::vector<double> vals_;
    std::vector<double> cdf_;
};

} // namespace uneqot
