#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <queue>
#include <string>
#include <vector>

#include "uneqot/common.hpp"
#include "uneqot/measure.hpp"
#include "uneqot/rng.hpp"

namespace uneqot {

struct DiscreteOTProblem {
    int ns = 0, nt = 0;
    std::vector<double> source_w; // size ns, sums to 1
    std::vector<double> target_w; // size nt, sums to 1
    std::vector<double> cost;     // row-major ns x nt

    double c(int i, int j) const { return cost[static_cast<std::size_t>(i) * nt + j]; }

    void validate() const {
        if (ns <= 0 || nt <= 0 || cost.size() != static_cast<std::size_t>(ns) * nt)
            throw config_error("DiscreteOTProblem: inconsistent sizes");
        if (static_cast<std::size_t>(ns) * nt > 4'000'000)
            throw config_error("DiscreteOTProblem: cost matrix exceeds 4e6 entries");
        double ss = 0, st = 0;
        for (double w : source_w) {
            if (w < 0) throw config_error("DiscreteOTProblem: negative source weight");
            ss += w;
        }
        for (double w : target_w) {
            if (w < 0) throw config_error("DiscreteOTProblem: negative target weight");
            st += w;
        }
        if (std::abs(ss - 1.0) > 1e-12 || std::abs(st - 1.0) > 1e-12)
            throw config_error("DiscreteOTProblem: weights must each sum to 1 (got " +
                               std::to_string(ss) + " and " + std::to_string(st) + ")");
        for (double v : cost)
            if (!std::isfinite(v)) throw config_error("DiscreteOTProblem: non-finite cost");
    }
};

struct PlanEntry {
    int i, j;
    double mass;
};

struct DiscreteOTSolution {
    double cost = 0;
    std::vector<PlanEntry> plan;
    std::vector<double> dual_u, dual_v;

    double dual_value(const DiscreteOTProblem& p) const {
        double s = 0;
        for (int i = 0; i < p.ns; ++i) s += dual_u[i] * p.source_w[i];
        for (int j = 0; j < p.nt; ++j) s += dual_v[j] * p.target_w[j];
        return s;
    }
};

// Exact transportation solver: successive shortest augmenting paths with
// Johnson potentials on the dense bipartite residual graph.  The duals certify
// optimality: u_i + v_j <= c_ij everywhere with equality on the plan support,
// so primal and dual objectives coincide up to roundoff.
inline DiscreteOTSolution solve_discrete_ot(const DiscreteOTProblem& p) {
    p.validate();
    const int ns = p.ns, nt = p.nt;
    const double kInf = std::numeric_limits<double>::infinity();
    const double eps_mass = 1e-15;

    std::vector<double> supply(p.source_w), demand(p.target_w);
    std::vector<double> u(ns, 0.0), v(nt, kInf);
    // v_j = min_i c_ij keeps initial reduced costs nonnegative (costs may be
    // negative).
    for (int i = 0; i < ns; ++i)
        for (int j = 0; j < nt; ++j) v[j] = std::min(v[j], p.c(i, j));

    // flow stored per target so backward scans touch only the support
    std::vector<std::vector<std::pair<int, double>>> flow_to(nt);

    // node ids: sources [0,ns), targets [ns, ns+nt)
    std::vector<double> dist(ns + nt);
    std::vector<int> parent(ns + nt);
    std::vector<char> done(ns + nt);

    double total_remaining = 1.0;
    const long max_augment = 64L * (ns + nt) + 256;
    long augmentations = 0;

    while (total_remaining > 1e-13) {
        if (++augmentations > max_augment)
            throw numeric_error("solve_discrete_ot: augmentation cap exceeded");

        std::fill(dist.begin(), dist.end(), kInf);
        std::fill(parent.begin(), parent.end(), -1);
        std::fill(done.begin(), done.end(), 0);
        using QItem = std::pair<double, int>;
        std::priority_queue<QItem, std::vector<QItem>, std::greater<>> pq;
        for (int i = 0; i < ns; ++i)
            if (supply[i] > eps_mass) {
                dist[i] = 0.0;
                pq.push({0.0, i});
            }
        while (!pq.empty()) {
            auto [d, node] = pq.top();
            pq.pop();
            if (done[node]) continue;
            done[node] = 1;
            if (node >= ns) {
                int j = node - ns;
                for (auto& [i, f] : flow_to[j]) {
                    if (f <= eps_mass || done[i]) continue;
                    // support edges are tight, so the reverse reduced cost is 0
                    if (d < dist[i]) {
                        dist[i] = d;
                        parent[i] = node;
                        pq.push({dist[i], i});
                    }
                }
            } else {
                const double* row = &p.cost[static_cast<std::size_t>(node) * nt];
                double ui = u[node];
                for (int j = 0; j < nt; ++j) {
                    if (done[ns + j]) continue;
                    double rc = row[j] - ui - v[j];
                    if (rc < 0) rc = 0;
                    if (d + rc < dist[ns + j]) {
                        dist[ns + j] = d + rc;
                        parent[ns + j] = node;
                        pq.push({dist[ns + j], ns + j});
                    }
                }
            }
        }

        int tstar = -1;
        double dstar = kInf;
        for (int j = 0; j < nt; ++j)
            if (demand[j] > eps_mass && dist[ns + j] < dstar) {
                dstar = dist[ns + j];
                tstar = j;
            }
        if (tstar < 0)
            throw numeric_error("solve_discrete_ot: no augmenting path, remaining mass " +
                                std::to_string(total_remaining));

        // Potential update keeps reduced costs nonnegative and makes every edge
        // on shortest paths within distance dstar tight.
        for (int i = 0; i < ns; ++i)
            if (dist[i] < kInf) u[i] -= std::min(dist[i], dstar);
        for (int j = 0; j < nt; ++j)
            if (dist[ns + j] < kInf) v[j] += std::min(dist[ns + j], dstar);

        // Bottleneck along the path: root supply, target demand, backward flows.
        double bottleneck = demand[tstar];
        int node = ns + tstar;
        while (parent[node] != -1) {
            int prev = parent[node];
            if (node < ns) { // backward edge prev(target) -> node(source)
                int j = prev - ns;
                for (auto& [i2, f] : flow_to[j])
                    if (i2 == node) bottleneck = std::min(bottleneck, f);
            }
            node = prev;
        }
        bottleneck = std::min(bottleneck, supply[node]);
        int root = node;

        // Apply the augmentation.
        node = ns + tstar;
        while (parent[node] != -1) {
            int prev = parent[node];
            if (node >= ns) { // forward edge prev(source) -> node(target)
                int j = node - ns;
                bool found = false;
                for (auto& [i2, f] : flow_to[j])
                    if (i2 == prev) {
                        f += bottleneck;
                        found = true;
                        break;
                    }
                if (!found) flow_to[j].push_back({prev, bottleneck});
            } else { // backward edge prev(target) -> node(source)
                int j = prev - ns;
                for (auto& [i2, f] : flow_to[j])
                    if (i2 == node) {
                        f -= bottleneck;
                        break;
                    }
            }
            node = prev;
        }
        supply[root] -= bottleneck;
        demand[tstar] -= bottleneck;
        total_remaining -= bottleneck;
    }

    DiscreteOTSolution sol;
    sol.dual_u = std::move(u);
    sol.dual_v = std::move(v);
    for (int j = 0; j < nt; ++j)
        for (auto& [i, f] : flow_to[j])
            if (f > 1e-14) sol.plan.push_back({i, j, f});
    std::sort(sol.plan.begin(), sol.plan.end(),
              [](const PlanEntry& a, const PlanEntry& b) {
                  return a.i != b.i ? a.i < b.i : a.j < b.j;
              });
    for (const auto& e : sol.plan) sol.cost += e.mass * p.c(e.i, e.j);
    return sol;
}

// Cell-center discretization of a source measure with exact cell masses
// (clipped cell areas times density); zero-mass cells are dropped.
struct DiscretizedSource {
    std::vector<Vec2> points;
    std::vector<double> weights;
};

inline DiscretizedSource discretize_source(const SourceMeasure& mu, int n) {
    DiscretizedSource d;
    Vec2 lo = mu.bbox_lo(), hi = mu.bbox_hi();
    if (mu.dim() == 1) {
        double h = (hi.x - lo.x) / n;
        for (int i = 0; i < n; ++i) {
            Vec2 c{lo.x + (i + 0.5) * h, 0.0};
            double w = mu.density(c) * h;
            if (w > 0) {
                d.points.push_back(c);
                d.weights.push_back(w);
            }
        }
    } else {
        double hx = (hi.x - lo.x) / n, hy = (hi.y - lo.y) / n;
        ConvexRegion dom = mu.region();
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < n; ++i) {
                double cx0 = lo.x + i * hx, cy0 = lo.y + j * hy;
                ConvexRegion r = dom.clipped({{1, 0}, cx0})
                                     .clipped({{-1, 0}, -(cx0 + hx)})
                                     .clipped({{0, 1}, cy0})
                                     .clipped({{0, -1}, -(cy0 + hy)});
                double area = r.area();
                if (area <= 1e-15) continue;
                Vec2 c{cx0 + 0.5 * hx, cy0 + 0.5 * hy};
                double dens = mu.density(c);
                if (dens <= 0) dens = mu.density(r.pieces().front().start());
                d.points.push_back(c);
                d.weights.push_back(area * dens);
            }
        }
    }
    double total = 0;
    for (double w : d.weights) total += w;
    for (auto& w : d.weights) w /= total;
    return d;
}

struct McEstimate {
    double estimate = 0;
    double stderr_ = 0;
};

// Unbiased Monte-Carlo estimate of mu({x : pred(x)}) by importance sampling
// over the bounding box; deterministic per seed (counter-based stream, one
// point per index, so it parallelizes without changing the result).
inline McEstimate mc_mass(const SourceMeasure& mu,
                          const std::function<bool(Vec2)>& pred,
                          std::uint64_t n_samples, std::uint64_t seed) {
    CounterRng rng(seed);
    const Vec2 lo = mu.bbox_lo(), hi = mu.bbox_hi();
    const double vol = mu.bbox_volume();
    const bool two_d = mu.dim() == 2;
    double sum = 0, sum2 = 0;
    for (std::uint64_t i = 0; i < n_samples; ++i) {
        Vec2 p{lo.x + (hi.x - lo.x) * rng.uniform(2 * i),
               two_d ? lo.y + (hi.y - lo.y) * rng.uniform(2 * i + 1) : 0.0};
        double w = 0.0;
        double d = mu.density(p);
        if (d > 0 && pred(p)) w = vol * d;
        sum += w;
        sum2 += w * w;
    }
    double mean = sum / n_samples;
    double var = std::max(0.0, sum2 / n_samples - mean * mean);
    return {mean, std::sqrt(var / static_cast<double>(n_samples))};
}

} // namespace uneqot
