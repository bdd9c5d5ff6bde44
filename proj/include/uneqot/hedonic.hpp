#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "uneqot/common.hpp"
#include "uneqot/cost.hpp"
#include "uneqot/level_set.hpp"
#include "uneqot/measure.hpp"
#include "uneqot/nested_ot.hpp"
#include "uneqot/parallel.hpp"

namespace uneqot {

// Two-marginal hedonic matching: buyers (c1, mu1) and sellers (c2, mu2)
// trading goods on a shared quality interval.
struct HedonicInstance {
    CostModel c1, c2;
    SourceMeasure mu1, mu2;
    Interval Y;

    // Uniform buyers on the unit square with c1 = x1 y^2/2 - x2 y, uniform
    // sellers on the unit interval with c2 = -x y + y^2/2, goods on (-3,3).
    static HedonicInstance unit_square_example() {
        return {CostModel::hedonic_buyer(), CostModel::hedonic_seller(),
                SourceMeasure::rectangle(0, 1, 0, 1), SourceMeasure::unit_interval(),
                {-3.0, 3.0}};
    }
};

// Solve k1(y,M) + k2(y,M) = 0 for the shared mass profile at a single y.
// The map is strictly decreasing in M; grid nodes where 0 is outside its
// range are excluded from the support.
inline std::optional<double> solve_M_at(const HedonicInstance& inst, double y) {
    auto k1 = [&](double M) { return mass_to_k(inst.c1, inst.mu1, y, M); };
    auto k2 = [&](double M) { return mass_to_k(inst.c2, inst.mu2, y, M); };
    double phi0 = k1(0.0) + k2(0.0);
    double phi1 = k1(1.0) + k2(1.0);
    if (std::abs(phi0) <= 1e-13) return 0.0;
    if (std::abs(phi1) <= 1e-13) return 1.0;
    if (phi0 < 0 || phi1 > 0) return std::nullopt;
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 100 && hi - lo > 1e-13; ++it) {
        double mid = 0.5 * (lo + hi);
        double phi = k1(mid) + k2(mid);
        if (phi == 0.0) return mid;
        (phi > 0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

struct HedonicSolution {
    std::vector<double> grid;
    std::vector<double> M;  // shared mass profile, only valid on the support
    std::vector<double> k1; // k1(y, M(y))
    std::vector<double> k2; // k2(y, M(y)) = -k1 on the support
    std::vector<double> nu; // dM/dy
    std::vector<char> in_support;
    int support_lo = -1, support_hi = -1; // maximal contiguous support range
    double edge_lo = 0, edge_hi = 0;      // support boundary refined off-grid
    std::vector<double> transitions;      // kink locations detected in M
    bool nested = false;
    NestednessReport side1, side2;

    Interval support_interval() const {
        if (support_lo < 0) return {0, 0};
        return {edge_lo, edge_hi};
    }
};

namespace detail {

// Kinks of M show up as jumps of the discrete second derivative; flag nodes
// where it moves by more than 0.25 against a smooth O(h) drift.
inline std::vector<int> detect_kinks(const std::vector<double>& grid,
                                     const std::vector<double>& m, int lo, int hi) {
    std::vector<int> kinks;
    if (hi - lo < 4) return kinks;
    double h = grid[1] - grid[0];
    std::vector<double> d2(hi - lo + 1, 0.0);
    for (int i = lo + 1; i < hi; ++i)
        d2[i - lo] = (m[i + 1] - 2 * m[i] + m[i - 1]) / (h * h);
    for (int i = lo + 2; i < hi; ++i) {
        double jump = std::abs(d2[i - lo] - d2[i - 1 - lo]);
        double scale = std::max({1.0, std::abs(d2[i - lo]), std::abs(d2[i - 1 - lo])});
        if (jump > 0.25 * scale && jump > 0.1) kinks.push_back(i);
    }
    // collapse adjacent flags to the strongest node of each cluster
    std::vector<int> out;
    for (std::size_t s = 0; s < kinks.size();) {
        std::size_t e = s;
        while (e + 1 < kinks.size() && kinks[e + 1] <= kinks[e] + 2) ++e;
        int best = kinks[s];
        double bestj = 0;
        for (std::size_t q = s; q <= e; ++q) {
            double j = std::abs(d2[kinks[q] - lo] - d2[kinks[q] - 1 - lo]);
            if (j > bestj) {
                bestj = j;
                best = kinks[q];
            }
        }
        out.push_back(best);
        s = e + 1;
    }
    return out;
}

} // namespace detail

std::pair<NestednessReport, NestednessReport> hedonic_nestedness_check(
    const HedonicInstance& inst, const HedonicSolution& sol, double mass_tol = 1e-6);

// Construct the candidate equilibrium: M(y) per grid node, the side levels
// k_i(y, M(y)), the good-quality density nu = dM/dy (one-sided stencils next
// to detected kinks), and the hedonic nestedness verdict.
inline HedonicSolution solve_M(const HedonicInstance& inst, int grid = 1024) {
    require_compatible(inst.c1, inst.mu1);
    require_compatible(inst.c2, inst.mu2);
    HedonicSolution sol;
    sol.grid.resize(grid);
    sol.M.assign(grid, 0.0);
    sol.k1.assign(grid, 0.0);
    sol.k2.assign(grid, 0.0);
    sol.nu.assign(grid, 0.0);
    sol.in_support.assign(grid, 0);
    double h = inst.Y.length() / (grid - 1);
    for (int i = 0; i < grid; ++i) sol.grid[i] = inst.Y.lo + i * h;

    parallel_for(grid, [&](std::size_t i) {
        auto m = solve_M_at(inst, sol.grid[i]);
        if (!m) return;
        sol.in_support[i] = 1;
        sol.M[i] = *m;
        sol.k1[i] = mass_to_k(inst.c1, inst.mu1, sol.grid[i], *m);
        sol.k2[i] = mass_to_k(inst.c2, inst.mu2, sol.grid[i], *m);
    });

    // maximal contiguous support interval
    int best_lo = -1, best_hi = -2;
    for (int i = 0; i < grid;) {
        if (!sol.in_support[i]) {
            ++i;
            continue;
        }
        int j = i;
        while (j + 1 < grid && sol.in_support[j + 1]) ++j;
        if (j - i > best_hi - best_lo) {
            best_lo = i;
            best_hi = j;
        }
        i = j + 1;
    }
    if (best_lo < 0) throw numeric_error("solve_M: empty support (0 outside k1+k2 range everywhere)");
    sol.support_lo = best_lo;
    sol.support_hi = best_hi;

    // refine the support boundary between the last excluded and first included
    // node (membership bisection); endpoint diagnostics need the true edge
    auto refine_edge = [&](int inc, int exc) {
        double a = sol.grid[inc], b = sol.grid[exc];
        for (int it = 0; it < 60 && std::abs(b - a) > 1e-11; ++it) {
            double mid = 0.5 * (a + b);
            (solve_M_at(inst, mid) ? a : b) = mid;
        }
        return a;
    };
    sol.edge_lo = best_lo > 0 ? refine_edge(best_lo, best_lo - 1) : sol.grid[best_lo];
    sol.edge_hi = best_hi + 1 < grid ? refine_edge(best_hi, best_hi + 1) : sol.grid[best_hi];

    auto kink_idx = detail::detect_kinks(sol.grid, sol.M, best_lo, best_hi);
    for (int ki : kink_idx) sol.transitions.push_back(sol.grid[ki]);
    auto near_kink = [&](int i) {
        for (int ki : kink_idx)
            if (std::abs(i - ki) <= 1) return ki;
        return -1;
    };

    for (int i = best_lo; i <= best_hi; ++i) {
        int ki = near_kink(i);
        if (i == best_lo || (ki >= 0 && i > ki)) {
            // forward one-sided (second order where room permits)
            if (i + 2 <= best_hi && near_kink(i + 1) < 0 && near_kink(i + 2) < 0)
                sol.nu[i] = (-3 * sol.M[i] + 4 * sol.M[i + 1] - sol.M[i + 2]) / (2 * h);
            else if (i + 1 <= best_hi)
                sol.nu[i] = (sol.M[i + 1] - sol.M[i]) / h;
        } else if (i == best_hi || (ki >= 0 && i < ki)) {
            if (i - 2 >= best_lo && near_kink(i - 1) < 0 && near_kink(i - 2) < 0)
                sol.nu[i] = (3 * sol.M[i] - 4 * sol.M[i - 1] + sol.M[i - 2]) / (2 * h);
            else if (i - 1 >= best_lo)
                sol.nu[i] = (sol.M[i] - sol.M[i - 1]) / h;
        } else if (ki == i) {
            sol.nu[i] = 0.5 * ((sol.M[i] - sol.M[i - 1]) + (sol.M[i + 1] - sol.M[i])) / h;
        } else {
            sol.nu[i] = (sol.M[i + 1] - sol.M[i - 1]) / (2 * h);
        }
    }

    auto [r1, r2] = hedonic_nestedness_check(inst, sol);
    sol.side1 = r1;
    sol.side2 = r2;
    bool monotone = true;
    for (int i = best_lo; i < best_hi; ++i)
        if (sol.M[i + 1] < sol.M[i] - 1e-10) monotone = false;
    sol.nested = r1.nested && r2.nested && monotone;
    return sol;
}

// Hedonic nestedness: containment of the side-i super-level sets along the
// shared profile, for both sides, over support grid pairs.  Same exact slack
// computation and mass-graded margin as the single-marginal check.
inline std::pair<NestednessReport, NestednessReport> hedonic_nestedness_check(
    const HedonicInstance& inst, const HedonicSolution& sol, double mass_tol) {
    auto check_side = [&](const CostModel& cost, const SourceMeasure& mu,
                          const std::vector<double>& k) {
        NestednessReport rep;
        rep.nested = true;
        int lo = sol.support_lo, hi = sol.support_hi;
        if (lo < 0) return rep;
        struct Row {
            int witness_j = -1;
            double min_margin = 0;
        };
        std::vector<Row> rows(hi - lo + 1);
        parallel_for(hi - lo + 1, [&](std::size_t off) {
            int i = lo + static_cast<int>(off);
            Row r;
            for (int j = i + 1; j <= hi; ++j) {
                if (sol.M[j] <= sol.M[i]) continue; // no nu mass in between
                double slack =
                    superlevel_min_dyc(cost, mu, sol.grid[i], k[i], sol.grid[j]) - k[j];
                if (slack >= 0) continue;
                HalfPlane h0 = superlevel_halfplane(cost, sol.grid[i], k[i]);
                HalfPlane h1c =
                    detail::complement(superlevel_halfplane(cost, sol.grid[j], k[j]));
                double sliver = mu.mass_clipped(h0, &h1c);
                r.min_margin = std::min(r.min_margin, -sliver);
                if (sliver > mass_tol && r.witness_j < 0) r.witness_j = j;
            }
            rows[off] = r;
        });
        for (int off = 0; off <= hi - lo; ++off) {
            rep.min_margin_mass = std::min(rep.min_margin_mass, rows[off].min_margin);
            if (rows[off].witness_j >= 0 && !rep.has_witness) {
                rep.has_witness = true;
                rep.nested = false;
                rep.witness = {sol.grid[lo + off], sol.grid[rows[off].witness_j]};
            }
        }
        return rep;
    };
    return {check_side(inst.c1, inst.mu1, sol.k1), check_side(inst.c2, inst.mu2, sol.k2)};
}

struct EndpointReport {
    double y = 0;                    // support endpoint examined
    bool level_limit_ok = false;     // H^{m_i-1}(X^i_=) -> 0 for some side
    double extrapolated_density = 0; // linear extrapolation of the last 5 nodes
    bool vanishes = false;           // |extrapolated| <= 10 * grid step
};

// Do the lowest/highest traded qualities carry vanishing density?  Evaluated
// at the support endpoints; the level-set limit precondition is probed by
// shrinking offsets from the extreme level.
inline std::pair<EndpointReport, EndpointReport> boundary_vanishing_check(
    const HedonicInstance& inst, const HedonicSolution& sol) {
    double h = sol.grid[1] - sol.grid[0];
    auto probe_limit = [&](const CostModel& cost, const SourceMeasure& mu, double y,
                           bool at_max) {
        auto [kmin, kmax] = dyc_range(cost, mu, y);
        double l_coarse = 0, l_fine = 0;
        for (double delta : {1e-4, 1e-7}) {
            double k = at_max ? kmax - delta : kmin + delta;
            double len = trace_level_curve(cost, mu, y, k).length();
            (delta == 1e-4 ? l_coarse : l_fine) = len;
        }
        return l_fine < 0.02 && l_fine <= l_coarse + 1e-12;
    };
    auto make = [&](bool lower) {
        EndpointReport rep;
        int e = lower ? sol.support_lo : sol.support_hi;
        rep.y = lower ? sol.edge_lo : sol.edge_hi;
        // at the lower end the support starts at mass 0 (k at its max); at the
        // upper end mass 1 (k at its min)
        rep.level_limit_ok = probe_limit(inst.c1, inst.mu1, rep.y, lower) ||
                             probe_limit(inst.c2, inst.mu2, rep.y, lower);
        // linear least-squares extrapolation of nu over the last 5 nodes
        int n = 5;
        int from = lower ? sol.support_lo : sol.support_hi - n + 1;
        from = std::max(sol.support_lo, std::min(from, sol.support_hi - n + 1));
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (int i = from; i < from + n; ++i) {
            double xx = sol.grid[i] - rep.y;
            sx += xx;
            sy += sol.nu[i];
            sxx += xx * xx;
            sxy += xx * sol.nu[i];
        }
        double denom = n * sxx - sx * sx;
        rep.extrapolated_density =
            std::abs(denom) > 1e-300 ? (sy * sxx - sx * sxy) / denom : sol.nu[e];
        rep.vanishes = std::abs(rep.extrapolated_density) <= 10 * h;
        return rep;
    };
    return {make(true), make(false)};
}

struct DifferentialCondition {
    double value = 0;   // left side of the sufficient inequality
    bool holds = false; // value < 0
    double k1prime = 0; // (A1 - A2) / (B1 + B2)
    double a1 = 0, a2 = 0, b1 = 0, b2 = 0;
};

// Differential sufficient condition for hedonic nestedness at (y, x1bar,
// x2bar) on the matched level sets, plus the implicit-derivative value
// k1'(y) it is built from.
inline DifferentialCondition differential_condition(const HedonicInstance& inst, double y,
                                                    Vec2 x1bar, Vec2 x2bar) {
    double k1 = inst.c1.d_yc(x1bar, y);
    double k2 = inst.c2.d_yc(x2bar, y);
    if (std::abs(k1 + k2) > 1e-6)
        throw config_error("differential_condition: k1 + k2 = " + std::to_string(k1 + k2) +
                           " violates the matching precondition");
    double m1 = superlevel_mass(inst.c1, inst.mu1, y, k1);
    double m2 = superlevel_mass(inst.c2, inst.mu2, y, k2);
    if (std::abs(m1 - m2) > 1e-6)
        throw config_error("differential_condition: mass balance violated (" +
                           std::to_string(m1) + " vs " + std::to_string(m2) + ")");
    DifferentialCondition r;
    r.a1 = level_integral(inst.c1, inst.mu1, y, k1, LevelWeight::cyy_over_cross);
    r.b1 = level_integral(inst.c1, inst.mu1, y, k1, LevelWeight::one_over_cross);
    r.a2 = level_integral(inst.c2, inst.mu2, y, k2, LevelWeight::cyy_over_cross);
    r.b2 = level_integral(inst.c2, inst.mu2, y, k2, LevelWeight::one_over_cross);
    if (r.b1 <= 0 || r.b2 <= 0)
        throw numeric_error("differential_condition: empty level set on one side");
    r.k1prime = (r.a1 - r.a2) / (r.b1 + r.b2);
    r.value = (r.a1 - r.a2) - inst.c1.d2_yyc(x1bar, y) * (r.b1 + r.b2);
    r.holds = r.value < 0;
    return r;
}

} // namespace uneqot
