#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "uneqot/common.hpp"
#include "uneqot/cost.hpp"
#include "uneqot/level_set.hpp"
#include "uneqot/measure.hpp"
#include "uneqot/parallel.hpp"
#include "uneqot/quadrature.hpp"
#include "uneqot/rng.hpp"

namespace uneqot {

// Mass-splitting level profile k(y) with its derivative and the potential
// v(y) = int_{y_lo}^y k.  v(y_lo) = 0 fixes the additive gauge.
struct KProfile {
    std::vector<double> grid;       // uniform y grid
    std::vector<double> k;          // mass-splitting levels
    std::vector<double> kprime;     // central differences, one-sided at the ends
    std::vector<double> v;          // trapezoid cumulative of k
    std::vector<int> suspect_nodes; // |k'| > 10*M_c, reported not rejected

    int size() const { return static_cast<int>(grid.size()); }
    double y_lo() const { return grid.front(); }
    double y_hi() const { return grid.back(); }
    double step() const { return grid[1] - grid[0]; }

    double k_at(double y) const { return interp(k, y); }
    double v_at(double y) const { return interp(v, y); }

    void finalize(double mc_bound) {
        int n = size();
        double h = step();
        kprime.assign(n, 0.0);
        for (int i = 1; i + 1 < n; ++i) kprime[i] = (k[i + 1] - k[i - 1]) / (2 * h);
        if (n >= 3) {
            kprime[0] = (-3 * k[0] + 4 * k[1] - k[2]) / (2 * h);
            kprime[n - 1] = (3 * k[n - 1] - 4 * k[n - 2] + k[n - 3]) / (2 * h);
        }
        v = cumtrapz(k, h);
        suspect_nodes.clear();
        for (int i = 0; i < n; ++i)
            if (std::abs(kprime[i]) > 10.0 * mc_bound) suspect_nodes.push_back(i);
    }

private:
    double interp(const std::vector<double>& a, double y) const {
        double h = step();
        double u = (y - grid.front()) / h;
        int i = std::max(0, std::min(size() - 2, static_cast<int>(u)));
        double t = std::max(0.0, std::min(1.0, u - i));
        return a[i] * (1 - t) + a[i + 1] * t;
    }
};

// Global Lipschitz constant of y -> c(x,y): sup |D_yc| over the closed domain
// and a fine y grid including the endpoints (exact in x).
inline double lipschitz_mc(const CostModel& cost, const SourceMeasure& mu, Interval Y,
                           int ygrid = 1025) {
    double m = 0;
    for (int i = 0; i < ygrid; ++i) {
        double y = Y.lo + Y.length() * i / (ygrid - 1);
        auto [lo, hi] = dyc_range(cost, mu, y);
        m = std::max({m, std::abs(lo), std::abs(hi)});
    }
    return m;
}

// k(y) from the mass-splitting equation mu(X_>=(y,k(y))) = nu((-inf,y]) at
// every grid node; the endpoint masses 0 and 1 hit the exact extrema of D_yc.
inline KProfile solve_k_profile(const CostModel& cost, const SourceMeasure& mu,
                                const TargetDensity& nu, int grid = 512) {
    require_compatible(cost, mu);
    if (grid != nu.grid_size())
        throw config_error("solve_k_profile: grid size must match the target density grid");
    Interval Y = nu.interval();
    KProfile kp;
    kp.grid.resize(grid);
    kp.k.resize(grid);
    double h = Y.length() / (grid - 1);
    for (int i = 0; i < grid; ++i) kp.grid[i] = Y.lo + i * h;
    double total = nu.cdf_values().back();
    std::vector<std::string> failures(grid);
    parallel_for(grid, [&](std::size_t i) {
        double M = i == 0 ? 0.0
                          : (static_cast<int>(i) == grid - 1 ? 1.0
                                                             : nu.cdf_values()[i] / total);
        try {
            kp.k[i] = mass_to_k(cost, mu, kp.grid[i], M);
        } catch (const std::exception& e) {
            failures[i] = e.what();
        }
    });
    for (int i = 0; i < grid; ++i)
        if (!failures[i].empty())
            throw numeric_error("solve_k_profile failed at y=" + std::to_string(kp.grid[i]) +
                                ": " + failures[i]);
    kp.finalize(lipschitz_mc(cost, mu, Y));
    return kp;
}

// Optimal map: the y solving D_yc(x,y) = k(y).  phi(y) = D_yc(x,y) - k(y)
// runs from <= 0 at y_lo (where k is the max of D_yc) to >= 0 at y_hi; the
// first sign change is refined by bisection on the interpolated profile.
// Multiple crossings take the smallest y and bump the tie counter.
inline double transport_map(const CostModel& cost, const SourceMeasure& mu, const KProfile& kp,
                            Vec2 x, int* tie_counter = nullptr) {
    require_compatible(cost, mu);
    auto phi = [&](double y) { return cost.d_yc(x, y) - kp.k_at(y); };
    int n = kp.size();
    int bracket = -1, crossings = 0;
    double prev = phi(kp.grid[0]);
    if (prev == 0.0) return kp.grid[0];
    for (int i = 1; i < n; ++i) {
        double cur = phi(kp.grid[i]);
        if ((prev < 0 && cur >= 0) || (prev > 0 && cur <= 0)) {
            ++crossings;
            if (bracket < 0) bracket = i - 1;
        }
        prev = cur;
    }
    if (bracket < 0)
        throw numeric_error("transport_map: no level crossing; x outside transported region");
    if (crossings > 1 && tie_counter) *tie_counter += crossings - 1;
    return bisect(phi, kp.grid[bracket], kp.grid[bracket + 1], 1e-14);
}

struct NegativityReport {
    int clipped_nodes = 0;
    double worst_value = 0.0; // most negative raw value before clipping
};

// Reconstruct nubar through the unequal-dimension Monge-Ampere identity:
// nubar(y) = A(y,k) - k'(y) B(y,k) with A, B the level integrals weighted by
// D^2_yy c and 1.  Negative values are clipped to zero and reported.
inline TargetDensity density_from_k(const CostModel& cost, const SourceMeasure& mu,
                                    const KProfile& kp, NegativityReport* report = nullptr) {
    int n = kp.size();
    std::vector<double> vals(n);
    parallel_for(n, [&](std::size_t i) {
        double y = kp.grid[i], k = kp.k[i];
        double a = level_integral(cost, mu, y, k, LevelWeight::cyy_over_cross);
        double b = level_integral(cost, mu, y, k, LevelWeight::one_over_cross);
        vals[i] = a - kp.kprime[i] * b;
    });
    NegativityReport rep;
    for (int i = 0; i < n; ++i)
        if (vals[i] < 0) {
            ++rep.clipped_nodes;
            rep.worst_value = std::min(rep.worst_value, vals[i]);
            vals[i] = 0.0;
        }
    if (report) *report = rep;
    return TargetDensity::from_values({kp.y_lo(), kp.y_hi()}, std::move(vals), true);
}

struct NestednessReport {
    bool nested = false;
    bool has_witness = false;
    std::pair<double, double> witness{0, 0}; // (y0, y1) of the first violation
    double min_margin_mass = 0.0;            // most negative sliver mass, <= 0
    bool intercept_monotone = true;          // quarter-disk diagnostic
};

namespace detail {
inline HalfPlane complement(const HalfPlane& h) { return {{-h.n.x, -h.n.y}, -h.d}; }
}

// Containment scan over all grid pairs carrying nu mass: for y0 < y1 require
// X_>=(y0,k(y0)) inside X_>(y1,k(y1)).  The slack
//   min_{X_>=(y0,k0)} D_yc(.,y1) - k(y1)
// decides containment exactly for straight-line level sets; when it is
// negative the violation is graded by the sliver mass and tolerated down to
// -mass_tol (the borderline case of level sets meeting on the boundary, as in
// the k == 0 model, counts as nested).  Witness is the lexicographically
// smallest violating pair.  For the quarter-disk bilinear model the intercept
// -k(y)/cos(y) monotonicity diagnostic is reported alongside.
inline NestednessReport check_nestedness(const CostModel& cost, const SourceMeasure& mu,
                                         const KProfile& kp, const TargetDensity& nu,
                                         double mass_tol = 1e-6) {
    int n = kp.size();
    NestednessReport rep;
    rep.nested = true;
    if (cost.family() == CostFamily::bilinear_arc && mu.domain() == DomainKind::quarter_disk) {
        double prev = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) {
            double cy = std::cos(kp.grid[i]);
            if (cy <= 1e-12) continue;
            double inter = -kp.k[i] / cy;
            if (inter < prev - 1e-12) rep.intercept_monotone = false;
            prev = std::max(prev, inter);
        }
    }
    const auto& cdf = nu.cdf_values();
    double total = cdf.back();

    struct RowResult {
        int witness_j = -1;
        double min_margin = 0.0;
    };
    std::vector<RowResult> rows(n);
    parallel_for(n, [&](std::size_t i) {
        RowResult r;
        for (int j = static_cast<int>(i) + 1; j < n; ++j) {
            if (cdf[j] - cdf[i] <= 1e-15 * total) continue;
            double slack =
                superlevel_min_dyc(cost, mu, kp.grid[i], kp.k[i], kp.grid[j]) - kp.k[j];
            if (slack >= 0) continue;
            HalfPlane h0 = superlevel_halfplane(cost, kp.grid[i], kp.k[i]);
            HalfPlane h1c = detail::complement(superlevel_halfplane(cost, kp.grid[j], kp.k[j]));
            double sliver = mu.mass_clipped(h0, &h1c);
            r.min_margin = std::min(r.min_margin, -sliver);
            if (sliver > mass_tol && r.witness_j < 0) r.witness_j = j;
        }
        rows[i] = r;
    });
    for (int i = 0; i < n; ++i) {
        rep.min_margin_mass = std::min(rep.min_margin_mass, rows[i].min_margin);
        if (rows[i].witness_j >= 0 && !rep.has_witness) {
            rep.has_witness = true;
            rep.nested = false;
            rep.witness = {kp.grid[i], kp.grid[rows[i].witness_j]};
        }
    }
    return rep;
}

struct MinimalMass {
    double k_max = 0;  // sup{k : X_>=(y0,k0) subset of X_>=(y1,k)}
    double dmin = 0;   // mu(X_>=(y1,k_max) \ X_>=(y0,k0)), >= 0
};

// Minimal mass difference D^min_mu(y0,y1,k0).  For straight level sets the
// containment supremum k_max equals the exact minimum of D_yc(.,y1) over
// X_>=(y0,k0), so no bisection over the containment predicate is needed.
inline MinimalMass minimal_mass_difference(const CostModel& cost, const SourceMeasure& mu,
                                           double y0, double y1, double k0) {
    if (!(y0 < y1)) throw config_error("minimal_mass_difference: requires y0 < y1");
    auto [r0min, r0max] = dyc_range(cost, mu, y0);
    if (k0 < r0min - 1e-9 || k0 > r0max + 1e-9)
        throw config_error("minimal_mass_difference: k0 outside the range of D_yc(.,y0)");
    MinimalMass out;
    out.k_max = superlevel_min_dyc(cost, mu, y0, k0, y1);
    if (std::isinf(out.k_max)) { // empty super-level set: nothing forced between
        out.dmin = 0.0;
        return out;
    }
    HalfPlane h1 = superlevel_halfplane(cost, y1, out.k_max);
    HalfPlane h0c = detail::complement(superlevel_halfplane(cost, y0, k0));
    out.dmin = std::max(0.0, mu.mass_clipped(h1, &h0c));
    return out;
}

// Lebesgue-volume variant (uniform density), used by the mu-side corollary
// and the high-dimensional congestion test.
inline double dmin_volume(const CostModel& cost, const SourceMeasure& mu, double y0, double y1,
                          double k0) {
    double k_max = superlevel_min_dyc(cost, mu, y0, k0, y1);
    if (std::isinf(k_max)) return 0.0;
    if (mu.dim() == 1) {
        // subinterval lengths
        auto len = [&](double y, double k) {
            Vec2 g = cost.dyc_grad(y);
            double h = cost.dyc_shift(y);
            double xcut = (k - h) / g.x;
            double lo = g.x > 0 ? std::max(0.0, xcut) : 0.0;
            double hi = g.x > 0 ? 1.0 : std::min(1.0, xcut);
            return std::max(0.0, hi - lo);
        };
        return std::max(0.0, len(y1, k_max) - len(y0, k0));
    }
    ConvexRegion r = mu.region()
                         .clipped(superlevel_halfplane(cost, y1, k_max))
                         .clipped(detail::complement(superlevel_halfplane(cost, y0, k0)));
    return std::max(0.0, r.area());
}

// Sufficient nestedness from a lower bound on nubar: checks
//   sup_{y0<y<y1} D^min(y0,y1,k0)/(y1-y0) - nu_lower(y) < 0
// with k0 swept over the range of D_yc(.,y0) (the mass-splitting level is not
// known without nu, so the worst case over k0 is used).  Returns the boolean
// and the attained supremum.
inline bool nestedness_by_bounds(const CostModel& cost, const SourceMeasure& mu, Interval Y,
                                 const std::function<double(double)>& nu_lower,
                                 double* sup_out = nullptr, int pair_grid = 40,
                                 int k0_grid = 17) {
    double sup = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < pair_grid; ++i) {
        double y0 = Y.lo + Y.length() * i / pair_grid;
        auto [kmin, kmax] = dyc_range(cost, mu, y0);
        for (int j = i + 1; j <= pair_grid; ++j) {
            double y1 = Y.lo + Y.length() * j / pair_grid;
            double worst_ratio = 0.0;
            for (int kk = 0; kk <= k0_grid; ++kk) {
                double k0 = kmin + (kmax - kmin) * kk / k0_grid;
                if (kmin < 0 && kmax > 0 && kk == k0_grid / 2) k0 = 0.0; // include 0
                double d = minimal_mass_difference(cost, mu, y0, y1, k0).dmin;
                worst_ratio = std::max(worst_ratio, d / (y1 - y0));
            }
            double min_lower = std::numeric_limits<double>::infinity();
            for (int s = 0; s <= 16; ++s)
                min_lower = std::min(min_lower, nu_lower(y0 + (y1 - y0) * s / 16.0));
            sup = std::max(sup, worst_ratio - min_lower);
        }
    }
    if (sup_out) *sup_out = sup;
    return sup < 0;
}

// Dual version for problems with nu fixed and mu free: an upper bound on
// mubar over the critical sliver yields nestedness (the L^inf-weighted
// volume form of the criterion).
inline bool nestedness_by_mu_bounds(const CostModel& cost, const SourceMeasure& mu_domain,
                                    const TargetDensity& nu,
                                    const std::function<double(Vec2)>& mu_upper,
                                    double* sup_out = nullptr, int pair_grid = 40,
                                    int k0_grid = 17) {
    Interval Y = nu.interval();
    double sup = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < pair_grid; ++i) {
        double y0 = Y.lo + Y.length() * i / pair_grid;
        auto [kmin, kmax] = dyc_range(cost, mu_domain, y0);
        for (int j = i + 1; j <= pair_grid; ++j) {
            double y1 = Y.lo + Y.length() * j / pair_grid;
            double worst = 0.0;
            for (int kk = 0; kk <= k0_grid; ++kk) {
                double k0 = kmin + (kmax - kmin) * kk / k0_grid;
                double vol = dmin_volume(cost, mu_domain, y0, y1, k0);
                if (vol <= 0) continue;
                double kmx = superlevel_min_dyc(cost, mu_domain, y0, k0, y1);
                double sup_mu = 0.0;
                if (mu_domain.dim() == 2) {
                    ConvexRegion r =
                        mu_domain.region()
                            .clipped(superlevel_halfplane(cost, y1, kmx))
                            .clipped(detail::complement(superlevel_halfplane(cost, y0, k0)));
                    for (const auto& pc : r.pieces()) {
                        if (pc.is_arc) {
                            sup_mu = std::max(sup_mu, mu_upper(pc.start()));
                            sup_mu = std::max(sup_mu, mu_upper(pc.end()));
                            double mid = 0.5 * (pc.th0 + pc.th1);
                            sup_mu = std::max(sup_mu, mu_upper({std::cos(mid), std::sin(mid)}));
                        } else {
                            sup_mu = std::max(sup_mu, mu_upper(pc.p0));
                            sup_mu = std::max(sup_mu, mu_upper(pc.p1));
                            sup_mu = std::max(sup_mu, mu_upper(0.5 * (pc.p0 + pc.p1)));
                        }
                    }
                } else {
                    for (int s = 0; s <= 8; ++s)
                        sup_mu = std::max(sup_mu, mu_upper({s / 8.0, 0.0}));
                }
                worst = std::max(worst, sup_mu * vol / (y1 - y0));
            }
            double min_nu = std::numeric_limits<double>::infinity();
            for (int s = 0; s <= 16; ++s)
                min_nu = std::min(min_nu, nu.density(y0 + (y1 - y0) * s / 16.0));
            sup = std::max(sup, worst - min_nu);
        }
    }
    if (sup_out) *sup_out = sup;
    return sup < 0;
}

struct NestedSolution {
    KProfile kprofile;
    std::vector<std::pair<Vec2, double>> map_samples; // (x, T(x))
    TargetDensity nu_density;                         // reconstructed via the MA identity
    NestednessReport nestedness;
    NegativityReport negativity;
    double ks_statistic = 0;
    int tie_warnings = 0;
};

// Kolmogorov-Smirnov distance between the empirical law of the mapped samples
// and the target cdf.
inline double ks_statistic(std::vector<double> mapped, const TargetDensity& nu) {
    std::sort(mapped.begin(), mapped.end());
    double n = static_cast<double>(mapped.size());
    double ks = 0;
    for (std::size_t s = 0; s < mapped.size(); ++s) {
        double c = nu.cdf(mapped[s]);
        ks = std::max(ks, std::abs(c - s / n));
        ks = std::max(ks, std::abs(c - (s + 1) / n));
    }
    return ks;
}

// Full nested solve: profile, diagnostics, density reconstruction, and the
// pushforward check on mu samples.
inline NestedSolution solve_nested(const CostModel& cost, const SourceMeasure& mu,
                                   const TargetDensity& nu, int grid = 512,
                                   int n_samples = 100000, std::uint64_t seed = 1) {
    NestedSolution sol;
    sol.kprofile = solve_k_profile(cost, mu, nu, grid);
    sol.nestedness = check_nestedness(cost, mu, sol.kprofile, nu);
    sol.nu_density = density_from_k(cost, mu, sol.kprofile, &sol.negativity);

    CounterRng rng(seed);
    sol.map_samples.reserve(n_samples);
    std::vector<double> mapped;
    mapped.reserve(n_samples);
    for (int s = 0; s < n_samples; ++s) {
        Vec2 x = mu.sample(rng);
        double y = transport_map(cost, mu, sol.kprofile, x, &sol.tie_warnings);
        sol.map_samples.push_back({x, y});
        mapped.push_back(y);
    }
    sol.ks_statistic = ks_statistic(std::move(mapped), nu);
    return sol;
}

} // namespace uneqot
