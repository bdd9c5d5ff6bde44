#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "uneqot/common.hpp"
#include "uneqot/cost.hpp"
#include "uneqot/level_set.hpp"
#include "uneqot/measure.hpp"
#include "uneqot/nested_ot.hpp"
#include "uneqot/quadrature.hpp"

namespace uneqot {

enum class CongestionFamily { entropy, power };

// Congestion integrand f and its calculus.  Entropy uses the f'(t) = ln t
// convention (the additive constant is absorbed by the multiplier C).  The
// power family violates f'(0+) = -inf, so the density bounds backed by that
// hypothesis are not guaranteed; it is admitted behind the conforming() flag.
struct CongestionSpec {
    CongestionFamily family = CongestionFamily::entropy;
    double p = 2.0; // power exponent, > 1

    static CongestionSpec entropy() { return {CongestionFamily::entropy, 0}; }
    static CongestionSpec power(double p) {
        if (!(p > 1.0)) throw config_error("power congestion requires p > 1");
        return {CongestionFamily::power, p};
    }

    bool conforming() const { return family == CongestionFamily::entropy; }

    double f(double t) const {
        if (t <= 0) return 0.0;
        return family == CongestionFamily::entropy ? t * std::log(t)
                                                   : std::pow(t, p) / (p - 1);
    }
    double fprime(double t) const {
        if (family == CongestionFamily::entropy) return std::log(t);
        return p * std::pow(t, p - 1) / (p - 1);
    }
    double fsecond(double t) const {
        if (family == CongestionFamily::entropy) return 1.0 / t;
        return p * std::pow(t, p - 2);
    }
    double fprime_inv(double s) const {
        if (family == CongestionFamily::entropy) return std::exp(s);
        if (s <= 0) return 0.0; // clamp: f' >= 0 for the power family
        return std::pow((p - 1) * s / p, 1.0 / (p - 1));
    }
};

inline const char* to_string(CongestionFamily f) {
    return f == CongestionFamily::entropy ? "entropy" : "power";
}

// Invert z -> int_Y (f')^{-1}(z - v(y)) dy at the target mass: the constant
// K_v(target).  Monotone in z; bracket expansion then bisection to 1e-10 in
// mass.
inline double kv_invert(const CongestionSpec& spec, const std::function<double(double)>& v,
                        Interval Y, double target_mass = 1.0) {
    auto total = [&](double z) {
        return adaptive_simpson([&](double y) { return spec.fprime_inv(z - v(y)); }, Y.lo,
                                Y.hi, 1e-12);
    };
    double lo = 0.0, hi = 0.0;
    double flo = total(0.0) - target_mass;
    if (flo < 0) {
        double step = 1.0;
        hi = 0.0;
        for (int it = 0;; ++it) {
            hi += step;
            step *= 2;
            if (total(hi) - target_mass >= 0) break;
            if (it > 80)
                throw numeric_error("kv_invert: bracket expansion failed upward at z=" +
                                    std::to_string(hi));
        }
        lo = hi - step / 2;
        lo = std::min(lo, 0.0);
    } else {
        double step = 1.0;
        lo = 0.0;
        for (int it = 0;; ++it) {
            lo -= step;
            step *= 2;
            if (total(lo) - target_mass <= 0) break;
            if (it > 80)
                throw numeric_error("kv_invert: bracket expansion failed downward at z=" +
                                    std::to_string(lo));
        }
        hi = lo + step / 2;
        hi = std::max(hi, 0.0);
    }
    return bisect([&](double z) { return total(z) - target_mass; }, lo, hi, 1e-13);
}

// Pointwise a-priori bounds on any congestion minimizer:
//   (f')^{-1}(K_{-Mc|y|}(1) - Mc|y|)  <=  nubar(y)  <=  (f')^{-1}(K_{Mc|y|}(1) + Mc|y|).
struct DensityBounds {
    double mc = 0;     // Lipschitz constant used
    double c_low = 0;  // K_{-Mc|y|}(1)
    double c_high = 0; // K_{+Mc|y|}(1)
    CongestionSpec spec;

    double lower(double y) const { return spec.fprime_inv(c_low - mc * std::abs(y)); }
    double upper(double y) const { return spec.fprime_inv(c_high + mc * std::abs(y)); }
};

inline DensityBounds density_bounds(const CostModel& cost, const SourceMeasure& mu,
                                    const CongestionSpec& spec, Interval Y) {
    DensityBounds b;
    b.spec = spec;
    b.mc = lipschitz_mc(cost, mu, Y);
    b.c_low = kv_invert(spec, [&](double y) { return -b.mc * std::abs(y); }, Y);
    b.c_high = kv_invert(spec, [&](double y) { return +b.mc * std::abs(y); }, Y);
    return b;
}

// Worst-case D^min(y0,y1,k0)/(y1-y0) over the admissible range, used by the
// closed-form threshold.  For the quarter-disk bilinear model this equals
// 2/pi exactly (wedge with vertex at the origin, k0 = 0).
inline double dmin_ratio_bound(const CostModel& cost, const SourceMeasure& mu, Interval Y,
                               int pair_grid = 24, int k0_grid = 16) {
    double worst = 0.0;
    for (int i = 0; i < pair_grid; ++i) {
        double y0 = Y.lo + Y.length() * i / pair_grid;
        auto [kmin, kmax] = dyc_range(cost, mu, y0);
        for (int j = i + 1; j <= pair_grid; ++j) {
            double y1 = Y.lo + Y.length() * j / pair_grid;
            for (int kk = 0; kk <= k0_grid; ++kk) {
                double k0 = kmin + (kmax - kmin) * kk / k0_grid;
                if (kmin <= 0 && kmax >= 0 && kk == k0_grid / 2) k0 = 0.0;
                double d = minimal_mass_difference(cost, mu, y0, y1, k0).dmin;
                worst = std::max(worst, d / (y1 - y0));
            }
        }
    }
    return worst;
}

// Largest interval length ybar such that the congestion-minimizer lower bound
// dominates the worst-case minimal-mass-difference ratio, guaranteeing
// nestedness of any minimizer on (0, ybar).  For quarter-disk/entropy this is
// the closed-form ln((1+sqrt(1+2pi))/2).
inline double congestion_nestedness_threshold(const CostModel& cost, const SourceMeasure& mu,
                                              const CongestionSpec& spec,
                                              double ybar_max = kPi / 2) {
    double ratio = dmin_ratio_bound(cost, mu, {0.0, ybar_max});
    auto holds = [&](double ybar) {
        Interval Y{0.0, ybar};
        DensityBounds b = density_bounds(cost, mu, spec, Y);
        double min_lower = std::numeric_limits<double>::infinity();
        for (int s = 0; s <= 64; ++s)
            min_lower = std::min(min_lower, b.lower(ybar * s / 64.0));
        return min_lower > ratio;
    };
    if (holds(ybar_max)) return ybar_max;
    double lo = 1e-4;
    if (!holds(lo)) return 0.0;
    double hi = ybar_max;
    for (int it = 0; it < 60 && hi - lo > 1e-9; ++it) {
        double mid = 0.5 * (lo + hi);
        (holds(mid) ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

struct CongestionSolution {
    KProfile kprofile;
    TargetDensity nu;
    double C = 0;              // multiplier in v + f'(nubar) = C
    double total_mass = 0;     // integral of the returned density
    double foc_residual = 0;   // sup |v + f'(nubar) - C| on the grid
    int clipped_nodes = 0;     // negative intermediate densities clipped
    bool threshold_ok = false; // instance passed the nestedness threshold
    double threshold = 0;
    NestednessReport nestedness;
    DensityBounds bounds;
};

namespace detail {

struct ShootResult {
    std::vector<double> k, v, nu, cum;
    int clipped = 0;
};

// March the integrated first-order system on the grid for a given C:
//   nubar = (f')^{-1}(C - v),  v' = k,  mu(X_>=(y,k(y))) = int_0^y nubar.
// Each step solves the implicit trapezoid update by fixed point.
inline ShootResult shoot_congestion(const CostModel& cost, const SourceMeasure& mu,
                                    const CongestionSpec& spec,
                                    const std::vector<double>& grid, double C) {
    int n = static_cast<int>(grid.size());
    double h = grid[1] - grid[0];
    ShootResult r;
    r.k.assign(n, 0.0);
    r.v.assign(n, 0.0);
    r.nu.assign(n, 0.0);
    r.cum.assign(n, 0.0);
    auto dens = [&](double vv) {
        double d = spec.fprime_inv(C - vv);
        if (d < 1e-12) {
            ++r.clipped;
            d = 1e-12;
        }
        return d;
    };
    r.nu[0] = dens(0.0);
    r.k[0] = mass_to_k(cost, mu, grid[0], 0.0);
    for (int i = 0; i + 1 < n; ++i) {
        double vn = r.v[i] + h * r.k[i]; // Euler predictor
        double kn = r.k[i], nun = r.nu[i], Mn = r.cum[i];
        for (int it = 0; it < 60; ++it) {
            nun = dens(vn);
            Mn = r.cum[i] + 0.5 * h * (r.nu[i] + nun);
            kn = mass_to_k(cost, mu, grid[i + 1], std::min(Mn, 1.0));
            double v2 = r.v[i] + 0.5 * h * (r.k[i] + kn);
            if (std::abs(v2 - vn) < 1e-15) {
                vn = v2;
                break;
            }
            vn = v2;
        }
        r.v[i + 1] = vn;
        r.nu[i + 1] = nun;
        r.cum[i + 1] = Mn;
        r.k[i + 1] = kn;
    }
    return r;
}

} // namespace detail

// Two-point boundary value solve by shooting on the multiplier C.  Total mass
// is monotone in C; matching it to 1 lands both boundary conditions because
// the mass-splitting level at cumulative mass 0 (resp. 1) is the exact max
// (resp. min) of D_yc.
inline CongestionSolution solve_congestion_bvp(const CostModel& cost, const SourceMeasure& mu,
                                               const CongestionSpec& spec, Interval Y,
                                               int grid = 512) {
    require_compatible(cost, mu);
    if (!(Y.lo == 0.0))
        throw config_error("solve_congestion_bvp: interval must start at 0 (gauge v(0)=0)");
    CongestionSolution sol;
    sol.threshold = congestion_nestedness_threshold(cost, mu, spec, kPi / 2);
    sol.threshold_ok = Y.hi <= sol.threshold + 1e-12;

    std::vector<double> ys(grid);
    for (int i = 0; i < grid; ++i) ys[i] = Y.lo + Y.length() * i / (grid - 1);

    auto mass_at = [&](double C) {
        return detail::shoot_congestion(cost, mu, spec, ys, C).cum.back();
    };
    // bracket C by expansion around f'(1/|Y|) (the uniform-density guess)
    double c0 = spec.fprime(1.0 / Y.length());
    double lo = c0, hi = c0, step = 0.5;
    while (mass_at(lo) >= 1.0) {
        lo -= step;
        step *= 2;
        if (step > 1e6) throw numeric_error("solve_congestion_bvp: bracket failure (low)");
    }
    step = 0.5;
    while (mass_at(hi) <= 1.0) {
        hi += step;
        step *= 2;
        if (step > 1e6) throw numeric_error("solve_congestion_bvp: bracket failure (high)");
    }
    double C = bisect([&](double c) { return mass_at(c) - 1.0; }, lo, hi, 1e-13);
    auto run = detail::shoot_congestion(cost, mu, spec, ys, C);

    sol.C = C;
    sol.total_mass = run.cum.back();
    sol.clipped_nodes = run.clipped;
    sol.kprofile.grid = ys;
    sol.kprofile.k = run.k;
    sol.kprofile.finalize(lipschitz_mc(cost, mu, Y));
    sol.nu = TargetDensity::from_values(Y, run.nu, true);
    sol.bounds = density_bounds(cost, mu, spec, Y);

    double res = 0.0;
    for (int i = 0; i < grid; ++i)
        res = std::max(res, std::abs(sol.kprofile.v[i] + spec.fprime(run.nu[i]) - C));
    sol.foc_residual = res;
    if (res > 1e-4)
        throw numeric_error("solve_congestion_bvp: first-order residual " +
                            std::to_string(res) + " exceeds 1e-4");

    sol.nestedness = check_nestedness(cost, mu, sol.kprofile, sol.nu);
    return sol;
}

// ---- Appendix refinement for the quarter-disk / bilinear / entropy model ----

// Chord length of the level segment X_=(y,k) in the quarter disk.
inline double appendix_L(double y, double k) {
    return std::sqrt(std::max(0.0, 1.0 - k * k)) + k * std::tan(y);
}

// The decreasing map k -> -k L(y,k) + y - asin k ( = (pi/2) mu(X_>=(y,k)) ).
inline double appendix_mass_map(double y, double k) {
    return -k * appendix_L(y, k) + y - std::asin(k);
}

// Inverse of the mass map in k (derivative is -2L <= 0).
inline double appendix_Z(double y, double m) {
    double lo = -std::cos(y), hi = std::sin(y);
    if (appendix_mass_map(y, lo) <= m) return lo;
    if (appendix_mass_map(y, hi) >= m) return hi;
    return bisect([&](double k) { return appendix_mass_map(y, k) - m; }, lo, hi, 1e-15);
}

// Largest ybar such that  e^y L^2(y, Z(y; (pi/2)(1-e^{-y})/(e^{ybar}-1)))
// <= pi / (2 (e^{ybar}-1))  for all y in (0, ybar); root found by bisection
// on ybar with the inner condition checked on a fine y grid.
inline double appendix_refined_threshold(int ygrid = 2048) {
    auto ok = [&](double ybar) {
        double rhs = kPi / (2.0 * (std::exp(ybar) - 1.0));
        for (int s = 1; s <= ygrid; ++s) {
            double y = ybar * s / ygrid;
            double m = (kPi / 2) * (1.0 - std::exp(-y)) / (std::exp(ybar) - 1.0);
            double z = appendix_Z(y, m);
            if (std::exp(y) * sqr(appendix_L(y, z)) > rhs) return false;
        }
        return true;
    };
    double lo = 0.1, hi = kPi / 2 - 1e-6;
    if (!ok(lo)) return 0.0;
    if (ok(hi)) return hi;
    for (int it = 0; it < 50 && hi - lo > 1e-10; ++it) {
        double mid = 0.5 * (lo + hi);
        (ok(mid) ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

struct HighDimCheck {
    bool ok = false;
    double margin = 0; // max over samples of lhs - rhs; ok iff < 0
    int vacuous_samples = 0;
    int checked_samples = 0;
};

// Condition from the mu-side congestion theorem: for sampled y0 < y < y1, k0
// and x in the critical sliver,
//   (g')^{-1}(K_{Mc|x|}(1) + Mc|x|)  <  nubar(y) (y1-y0) / D^min_vol(y0,y1,k0).
// Samples with D^min_vol = 0 are vacuous (the pseudo-index case).
inline HighDimCheck highdim_congestion_check(const CostModel& cost,
                                             const SourceMeasure& mu_domain, Interval Y,
                                             const std::function<double(double)>& nubar,
                                             const CongestionSpec& g_spec, int pair_grid = 16,
                                             int k0_grid = 8) {
    double mc = lipschitz_mc(cost, mu_domain, Y);

    // K_{Mc|x|}(1): invert the x-side congestion integral over the domain.
    auto domain_total = [&](double z) {
        if (mu_domain.dim() == 1)
            return adaptive_simpson(
                [&](double x) { return g_spec.fprime_inv(z - mc * std::abs(x)); }, 0.0, 1.0,
                1e-11);
        if (mu_domain.domain() == DomainKind::quarter_disk)
            return (kPi / 2) * adaptive_simpson(
                                   [&](double r) {
                                       return g_spec.fprime_inv(z - mc * r) * r;
                                   },
                                   0.0, 1.0, 1e-11);
        Vec2 lo = mu_domain.bbox_lo(), hi = mu_domain.bbox_hi();
        return adaptive_simpson(
            [&](double x) {
                return adaptive_simpson(
                    [&](double yy) {
                        return g_spec.fprime_inv(z - mc * Vec2{x, yy}.norm());
                    },
                    lo.y, hi.y, 1e-11);
            },
            lo.x, hi.x, 1e-9);
    };
    double step = 1.0, zlo = 0.0, zhi = 0.0;
    while (domain_total(zlo) > 1.0) zlo -= (step *= 2);
    step = 1.0;
    while (domain_total(zhi) < 1.0) zhi += (step *= 2);
    double K = bisect([&](double z) { return domain_total(z) - 1.0; }, zlo, zhi, 1e-12);

    HighDimCheck out;
    double margin = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < pair_grid; ++i) {
        double y0 = Y.lo + Y.length() * i / pair_grid;
        auto [kmin, kmax] = dyc_range(cost, mu_domain, y0);
        for (int j = i + 1; j <= pair_grid; ++j) {
            double y1 = Y.lo + Y.length() * j / pair_grid;
            for (int kk = 0; kk <= k0_grid; ++kk) {
                double k0 = kmin + (kmax - kmin) * kk / k0_grid;
                if (kmin <= 0 && kmax >= 0 && kk == k0_grid / 2) k0 = 0.0;
                double vol = dmin_volume(cost, mu_domain, y0, y1, k0);
                if (vol <= 1e-14) {
                    ++out.vacuous_samples;
                    continue;
                }
                // sup |x| over the sliver:
                double kmx = superlevel_min_dyc(cost, mu_domain, y0, k0, y1);
                double sup_absx = 0.0;
                if (mu_domain.dim() == 2) {
                    ConvexRegion r =
                        mu_domain.region()
                            .clipped(superlevel_halfplane(cost, y1, kmx))
                            .clipped(detail::complement(
                                superlevel_halfplane(cost, y0, k0)));
                    for (const auto& pc : r.pieces()) {
                        if (pc.is_arc) {
                            sup_absx = 1.0;
                        } else {
                            sup_absx = std::max({sup_absx, pc.p0.norm(), pc.p1.norm()});
                        }
                    }
                } else {
                    sup_absx = 1.0;
                }
                double lhs = g_spec.fprime_inv(K + mc * sup_absx);
                for (int s = 1; s < 8; ++s) {
                    double y = y0 + (y1 - y0) * s / 8.0;
                    double rhs = nubar(y) * (y1 - y0) / vol;
                    margin = std::max(margin, lhs - rhs);
                    ++out.checked_samples;
                }
            }
        }
    }
    out.margin = std::isinf(margin) ? 0.0 : margin;
    out.ok = out.checked_samples == 0 ? true : margin < 0;
    return out;
}

inline HighDimCheck highdim_congestion_check(const CostModel& cost,
                                             const SourceMeasure& mu_domain,
                                             const TargetDensity& nu,
                                             const CongestionSpec& g_spec, int pair_grid = 16,
                                             int k0_grid = 8) {
    return highdim_congestion_check(
        cost, mu_domain, nu.interval(), [&](double y) { return nu.density(y); }, g_spec,
        pair_grid, k0_grid);
}

} // namespace uneqot
