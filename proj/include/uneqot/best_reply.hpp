#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "uneqot/common.hpp"
#include "uneqot/cost.hpp"
#include "uneqot/level_set.hpp"
#include "uneqot/measure.hpp"
#include "uneqot/ot_oracle.hpp"
#include "uneqot/parallel.hpp"

namespace uneqot {

// Potential V and symmetric interaction W for the functional
//   F[nu](y) = V(y) + int W(y,z) dnu(z).
// V is quadratic alpha/2 (y-y0)^2 or a polynomial; W is beta/2 (y-z)^2 or
// absent.  One-dimensional strategy space.
struct InteractionSpec {
    enum class Potential { quadratic, polynomial };
    Potential v_kind = Potential::quadratic;
    double v_alpha = 1.0;
    double v_center = 0.0;
    std::vector<double> v_coeffs; // c0 + c1 y + c2 y^2 + ...
    bool has_w = false;
    double w_beta = 0.0;

    static InteractionSpec quadratic_v(double alpha, double center = 0.0) {
        InteractionSpec s;
        s.v_kind = Potential::quadratic;
        s.v_alpha = alpha;
        s.v_center = center;
        return s;
    }
    static InteractionSpec polynomial_v(std::vector<double> coeffs) {
        InteractionSpec s;
        s.v_kind = Potential::polynomial;
        s.v_coeffs = std::move(coeffs);
        return s;
    }
    InteractionSpec with_quadratic_w(double beta) const {
        InteractionSpec s = *this;
        s.has_w = true;
        s.w_beta = beta;
        return s;
    }

    double V(double y) const {
        if (v_kind == Potential::quadratic) return 0.5 * v_alpha * sqr(y - v_center);
        double p = 0, m = 1;
        for (double c : v_coeffs) {
            p += c * m;
            m *= y;
        }
        return p;
    }
    double DV(double y) const {
        if (v_kind == Potential::quadratic) return v_alpha * (y - v_center);
        double p = 0, m = 1;
        for (std::size_t i = 1; i < v_coeffs.size(); ++i) {
            p += static_cast<double>(i) * v_coeffs[i] * m;
            m *= y;
        }
        return p;
    }
    double D2V(double y) const {
        if (v_kind == Potential::quadratic) return v_alpha;
        double p = 0, m = 1;
        for (std::size_t i = 2; i < v_coeffs.size(); ++i) {
            p += static_cast<double>(i * (i - 1)) * v_coeffs[i] * m;
            m *= y;
        }
        return p;
    }

    double W(double y, double z) const { return has_w ? 0.5 * w_beta * sqr(y - z) : 0.0; }
    double DyW(double y, double z) const { return has_w ? w_beta * (y - z) : 0.0; }
    double D2yyW() const { return has_w ? w_beta : 0.0; }
};

struct FirstVariation {
    double value = 0;
    double grad = 0;
    double hess = 0;
};

// F[nu](y), DF, D2F by weighted sums over the particles of nu.
inline FirstVariation first_variation(const InteractionSpec& spec, const DiscreteMeasure& nu,
                                      double y) {
    FirstVariation r;
    r.value = spec.V(y);
    r.grad = spec.DV(y);
    r.hess = spec.D2V(y);
    if (spec.has_w) {
        double wsum = 0, dsum = 0;
        for (std::size_t i = 0; i < nu.points.size(); ++i) {
            wsum += nu.weights[i] * spec.W(y, nu.points[i].x);
            dsum += nu.weights[i] * spec.DyW(y, nu.points[i].x);
        }
        r.value += wsum;
        r.grad += dsum;
        r.hess += spec.D2yyW();
    }
    return r;
}

// Best response of agent x against the crowd nu: the unique stationary point
// of y -> c(x,y) + F[nu](y) in the closed strategy interval.  The objective
// gradient g(y) = D_yc(x,y) + DF[nu](y) is strictly increasing under the
// uniform convexity margin; a stationary point pushed outside the interval
// violates the outward-gradient boundary hypothesis and is refused.
inline double best_response(const CostModel& cost, const InteractionSpec& spec,
                            const DiscreteMeasure& nu, Vec2 x, Interval Y) {
    auto g = [&](double y) { return cost.d_yc(x, y) + first_variation(spec, nu, y).grad; };
    auto gprime = [&](double y) {
        return cost.d2_yyc(x, y) + first_variation(spec, nu, y).hess;
    };
    // convexity margin along this agent's objective
    double margin = std::numeric_limits<double>::infinity();
    for (int s = 0; s <= 32; ++s)
        margin = std::min(margin, gprime(Y.lo + Y.length() * s / 32.0));
    if (margin <= 0)
        throw hypothesis_violation("best_response: objective not uniformly convex (margin " +
                                   std::to_string(margin) + ")");
    double glo = g(Y.lo), ghi = g(Y.hi);
    if (glo > 1e-12)
        throw hypothesis_violation(
            "best_response: stationary point below the strategy interval; inward gradient " +
            std::to_string(glo) + " at the lower boundary");
    if (ghi < -1e-12)
        throw hypothesis_violation(
            "best_response: stationary point above the strategy interval; inward gradient " +
            std::to_string(ghi) + " at the upper boundary");
    if (glo >= 0) return Y.lo;
    if (ghi <= 0) return Y.hi;

    // safeguarded Newton within the bracket
    double lo = Y.lo, hi = Y.hi, y = 0.5 * (lo + hi);
    for (int it = 0; it < 100; ++it) {
        double gy = g(y);
        if (std::abs(gy) <= 1e-13) return y;
        if (gy > 0)
            hi = y;
        else
            lo = y;
        double step = gy / gprime(y);
        double ynext = y - step;
        if (!(ynext > lo && ynext < hi)) ynext = 0.5 * (lo + hi);
        if (std::abs(ynext - y) < 1e-16) return ynext;
        y = ynext;
    }
    if (std::abs(g(y)) > 1e-10)
        throw numeric_error("best_response: Newton failed to reach gradient tolerance");
    return y;
}

// One sweep of the best-reply map: push every particle of mu through B_nu.
inline DiscreteMeasure iterate(const CostModel& cost, const InteractionSpec& spec,
                               const DiscreteMeasure& mu_samples, const DiscreteMeasure& nu,
                               Interval Y) {
    DiscreteMeasure out;
    out.dim = 1;
    out.points.resize(mu_samples.points.size());
    out.weights = mu_samples.weights;
    std::vector<std::string> errors(mu_samples.points.size());
    parallel_for(mu_samples.points.size(), [&](std::size_t i) {
        try {
            out.points[i] = {best_response(cost, spec, nu, mu_samples.points[i], Y), 0.0};
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    for (std::size_t i = 0; i < errors.size(); ++i)
        if (!errors[i].empty())
            throw hypothesis_violation("iterate: best response failed at particle " +
                                       std::to_string(i) + " (x=" +
                                       std::to_string(mu_samples.points[i].x) +
                                       "): " + errors[i]);
    return out;
}

// 1-Wasserstein distance.  Exact quantile coupling in one dimension; exact
// linear program through the discrete OT solver in higher dimension.
inline double w1(const DiscreteMeasure& a, const DiscreteMeasure& b) {
    if (a.dim != b.dim) throw config_error("w1: dimension mismatch");
    if (a.dim == 1) {
        auto sorted = [](const DiscreteMeasure& m) {
            std::vector<std::pair<double, double>> s(m.points.size());
            for (std::size_t i = 0; i < m.points.size(); ++i)
                s[i] = {m.points[i].x, m.weights[i]};
            std::sort(s.begin(), s.end());
            return s;
        };
        auto sa = sorted(a), sb = sorted(b);
        double dist = 0, qa = 0, qb = 0;
        std::size_t ia = 0, ib = 0;
        double q = 0;
        while (ia < sa.size() && ib < sb.size()) {
            double next_a = qa + sa[ia].second;
            double next_b = qb + sb[ib].second;
            double qn = std::min(next_a, next_b);
            dist += (qn - q) * std::abs(sa[ia].first - sb[ib].first);
            q = qn;
            if (next_a <= qn + 1e-18) {
                qa = next_a;
                ++ia;
            }
            if (next_b <= qn + 1e-18) {
                qb = next_b;
                ++ib;
            }
        }
        return dist;
    }
    if (a.size() > 2000 || b.size() > 2000)
        throw config_error("w1: particle count exceeds the exact-LP cap (2000)");
    DiscreteOTProblem p;
    p.ns = static_cast<int>(a.size());
    p.nt = static_cast<int>(b.size());
    p.source_w = a.weights;
    p.target_w = b.weights;
    p.cost.resize(static_cast<std::size_t>(p.ns) * p.nt);
    for (int i = 0; i < p.ns; ++i)
        for (int j = 0; j < p.nt; ++j)
            p.cost[static_cast<std::size_t>(i) * p.nt + j] = (a.points[i] - b.points[j]).norm();
    return solve_discrete_ot(p).cost;
}

// Instance constants of the contraction theorem, estimated by sampling and
// reported with the resulting ratio bound; the solve proceeds regardless of
// whether the bound certifies contraction.
struct HypothesisConstants {
    double eta = 0;    // min eigenvalue of D^2_yy c over samples
    double lambda = 0; // min of D^2 F over the strategy interval
    double level_m = 0;   // sup_y H^{m-n}(B_nu^{-1}(y))
    double jac_k = 0;  // inf_x of the n-dimensional Jacobian of B_nu
    double c_lip = 0;  // Lipschitz constant of nu -> DF[nu] in W1
    double mu_sup = 0; // ||mubar||_inf
    double rho_hat = 0;
};

inline HypothesisConstants estimate_constants(const CostModel& cost, const SourceMeasure& mu,
                                              const InteractionSpec& spec,
                                              const DiscreteMeasure& nu, Interval Y,
                                              std::uint64_t seed = 7) {
    HypothesisConstants h;
    h.mu_sup = mu.density_sup();

    CounterRng rng(seed);
    const int nx = 100, ny = 100;
    std::vector<Vec2> xs(nx);
    for (int i = 0; i < nx; ++i) xs[i] = mu.sample(rng);

    h.eta = std::numeric_limits<double>::infinity();
    h.lambda = std::numeric_limits<double>::infinity();
    for (int j = 0; j < ny; ++j) {
        double y = Y.lo + Y.length() * j / (ny - 1);
        h.lambda = std::min(h.lambda, spec.D2V(y) + spec.D2yyW());
        for (const Vec2& x : xs) h.eta = std::min(h.eta, cost.d2_yyc(x, y));
    }

    // level-set bound M and Jacobian bound k via the implicit best-reply map
    h.level_m = mu.dim() == 1 ? 1.0 : 0.0;
    h.jac_k = std::numeric_limits<double>::infinity();
    for (int j = 0; j < ny; ++j) {
        double y = Y.lo + Y.length() * j / (ny - 1);
        double level = -first_variation(spec, nu, y).grad;
        if (mu.dim() == 2) {
            auto [kmin, kmax] = dyc_range(cost, mu, y);
            if (level >= kmin && level <= kmax)
                h.level_m = std::max(h.level_m, trace_level_curve(cost, mu, y, level).length());
        }
    }
    for (const Vec2& x : xs) {
        try {
            double bx = best_response(cost, spec, nu, x, Y);
            double denom = cost.d2_yyc(x, bx) + first_variation(spec, nu, bx).hess;
            h.jac_k = std::min(h.jac_k, cost.d2_xyc_norm(x, bx) / denom);
        } catch (const hypothesis_violation&) {
            // boundary-pushed samples carry no Jacobian information
        }
    }

    // Lipschitz constant of DF in W1: analytic beta*|Y| for the quadratic
    // interaction, cross-checked with an empirical estimate on random pairs.
    double analytic = spec.has_w ? spec.w_beta * Y.length() : 0.0;
    double empirical = 0.0;
    if (spec.has_w) {
        for (int t = 0; t < 20; ++t) {
            DiscreteMeasure m0, m1;
            m0.dim = m1.dim = 1;
            const int np = 16;
            m0.weights.assign(np, 1.0 / np);
            m1.weights.assign(np, 1.0 / np);
            for (int i = 0; i < np; ++i) {
                m0.points.push_back({Y.lo + Y.length() * rng.next(), 0});
                m1.points.push_back({Y.lo + Y.length() * rng.next(), 0});
            }
            double dw = w1(m0, m1);
            if (dw < 1e-12) continue;
            double integ = 0;
            const int nq = 64;
            for (int q = 0; q < nq; ++q) {
                double y = Y.lo + Y.length() * (q + 0.5) / nq;
                integ += std::abs(first_variation(spec, m1, y).grad -
                                  first_variation(spec, m0, y).grad) *
                         Y.length() / nq;
            }
            empirical = std::max(empirical, integ / dw);
        }
    }
    h.c_lip = std::max(analytic, empirical);

    double denom = h.jac_k * (h.eta + h.lambda);
    h.rho_hat = denom > 0 ? h.mu_sup * h.level_m * h.c_lip / denom
                          : std::numeric_limits<double>::infinity();
    return h;
}

struct FixedPointLog {
    std::vector<double> w1_steps;
    std::vector<double> ratios;
    HypothesisConstants constants;
    int iterations = 0;
    bool converged = false;
    bool diverged = false;
};

// Iterate nu <- (B_nu)#mu until the W1 step falls below tol.  Flags
// divergence when the step fails to decrease five times in a row.
inline std::pair<DiscreteMeasure, FixedPointLog> solve_fixed_point(
    const CostModel& cost, const SourceMeasure& mu, const InteractionSpec& spec,
    const DiscreteMeasure& mu_samples, const DiscreteMeasure& nu0, Interval Y, double tol,
    int max_iter) {
    FixedPointLog log;
    log.constants = estimate_constants(cost, mu, spec, nu0, Y);
    DiscreteMeasure nu = nu0;
    int non_decreasing = 0;
    for (int it = 0; it < max_iter; ++it) {
        DiscreteMeasure next = iterate(cost, spec, mu_samples, nu, Y);
        double step = w1(next, nu);
        if (!log.w1_steps.empty() && log.w1_steps.back() > 1e-300)
            log.ratios.push_back(step / log.w1_steps.back());
        if (!log.w1_steps.empty() && step >= log.w1_steps.back()) {
            if (++non_decreasing >= 5) {
                log.w1_steps.push_back(step);
                log.iterations = it + 1;
                log.diverged = true;
                return {next, log};
            }
        } else {
            non_decreasing = 0;
        }
        log.w1_steps.push_back(step);
        nu = std::move(next);
        log.iterations = it + 1;
        if (step <= tol) {
            log.converged = true;
            break;
        }
    }
    return {nu, log};
}

struct GeneralizedNestednessReport {
    bool ok = false;
    double worst_gap = 0;     // sup |u(x) + v(ybar) - c(x,ybar)| over checked pairs
    int support_points = 0;   // particles checked
    int level_samples = 0;    // x samples over the level sets
    bool hypothesis_ok = true;
};

// Generalized nestedness at a candidate solution: with v = -F[nu] on the
// support, every x in X_=(ybar, Dv(ybar)) must realize the c-transform
// equality u(x) + v(ybar) = c(x,ybar), where u = v^c is computed
// independently by direct minimization over a fine y grid.
inline GeneralizedNestednessReport generalized_nestedness_check(
    const CostModel& cost, const InteractionSpec& spec, const DiscreteMeasure& solution,
    const SourceMeasure& mu, Interval Y, double tol = 1e-6, int max_support = 64,
    int ugrid = 4096) {
    GeneralizedNestednessReport rep;
    auto v = [&](double y) { return -first_variation(spec, solution, y).value; };
    auto dv = [&](double y) { return -first_variation(spec, solution, y).grad; };

    // sampled hypothesis check: convexity and boundary gradients
    CounterRng rng(11);
    for (int s = 0; s < 64; ++s) {
        Vec2 x = mu.sample(rng);
        for (double y : {Y.lo, Y.lo + 0.37 * Y.length(), Y.hi}) {
            double conv = cost.d2_yyc(x, y) + spec.D2V(y) + spec.D2yyW();
            if (conv <= 0) rep.hypothesis_ok = false;
        }
        for (double z : {Y.lo, Y.hi}) {
            double glo = cost.d_yc(x, Y.lo) + spec.DV(Y.lo) + spec.DyW(Y.lo, z);
            double ghi = cost.d_yc(x, Y.hi) + spec.DV(Y.hi) + spec.DyW(Y.hi, z);
            if (glo > 1e-9 || ghi < -1e-9) rep.hypothesis_ok = false;
        }
    }

    // deduplicated, sorted support subsample
    std::vector<double> support;
    for (const auto& p : solution.points) support.push_back(p.x);
    std::sort(support.begin(), support.end());
    support.erase(std::unique(support.begin(), support.end(),
                              [](double a, double b) { return std::abs(a - b) < 1e-12; }),
                  support.end());
    std::size_t stride = std::max<std::size_t>(1, support.size() / max_support);

    double worst = 0;
    for (std::size_t s = 0; s < support.size(); s += stride) {
        double ybar = support[s];
        ++rep.support_points;
        double level = dv(ybar);
        std::vector<Vec2> xs;
        if (mu.dim() == 1) {
            Vec2 g = cost.dyc_grad(ybar);
            double xstar = (level - cost.dyc_shift(ybar)) / g.x;
            if (xstar >= 0 && xstar <= 1) xs.push_back({xstar, 0});
        } else {
            auto lc = trace_level_curve(cost, mu, ybar, level);
            for (std::size_t q = 0; q < lc.nodes.size(); q += 8) xs.push_back(lc.nodes[q]);
        }
        for (const Vec2& x : xs) {
            ++rep.level_samples;
            double u = std::numeric_limits<double>::infinity();
            for (int q = 0; q <= ugrid; ++q) {
                double y = Y.lo + Y.length() * q / ugrid;
                u = std::min(u, cost.c(x, y) - v(y));
            }
            worst = std::max(worst, std::abs(u + v(ybar) - cost.c(x, ybar)));
        }
    }
    rep.worst_gap = worst;
    rep.ok = rep.hypothesis_ok && worst <= tol;
    return rep;
}

} // namespace uneqot
