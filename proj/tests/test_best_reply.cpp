#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "uneqot/best_reply.hpp"

using namespace uneqot;

namespace {

InteractionSpec quad_spec() {
    return InteractionSpec::quadratic_v(1.0, 0.0).with_quadratic_w(1.0);
}

DiscreteMeasure random_cloud(CounterRng& gen, int n, Interval Y) {
    DiscreteMeasure m;
    m.dim = 1;
    m.weights.assign(n, 1.0 / n);
    for (int i = 0; i < n; ++i) m.points.push_back({Y.lo + Y.length() * gen.next(), 0});
    return m;
}

} // namespace

TEST_CASE("interaction term is symmetric on samples") {
    auto spec = quad_spec();
    CounterRng gen(3);
    for (int t = 0; t < 100; ++t) {
        double y = gen.next(), z = gen.next();
        REQUIRE(std::abs(spec.W(y, z) - spec.W(z, y)) <= 1e-12);
    }
}

TEST_CASE("first variation closed forms") {
    SECTION("no interaction: plain potential") {
        auto spec = InteractionSpec::quadratic_v(2.0, 0.5);
        auto nu = DiscreteMeasure::quantile_uniform_1d(16, 0, 1);
        auto fv = first_variation(spec, nu, 0.8);
        CHECK(fv.value == Catch::Approx(0.5 * 2.0 * sqr(0.3)).epsilon(1e-14));
        CHECK(fv.grad == Catch::Approx(2.0 * 0.3).epsilon(1e-14));
        CHECK(fv.hess == Catch::Approx(2.0).epsilon(1e-14));
    }
    SECTION("single particle interaction") {
        auto spec = InteractionSpec::quadratic_v(0.0, 0.0).with_quadratic_w(2.5);
        auto nu = DiscreteMeasure::dirac({0.3, 0});
        auto fv = first_variation(spec, nu, 0.9);
        CHECK(fv.grad == Catch::Approx(2.5 * (0.9 - 0.3)).epsilon(1e-14));
        CHECK(fv.hess == Catch::Approx(2.5).epsilon(1e-14));
    }
    SECTION("moment algebra: DF(y) = V' + beta (y - mean)") {
        auto spec = quad_spec();
        CounterRng gen(17);
        auto nu = random_cloud(gen, 40, {0, 1});
        double m = nu.mean().x;
        for (double y : {0.1, 0.45, 0.92}) {
            auto fv = first_variation(spec, nu, y);
            CHECK(fv.grad == Catch::Approx(y + (y - m)).margin(1e-12));
        }
    }
    SECTION("polynomial potential derivatives") {
        auto spec = InteractionSpec::polynomial_v({1.0, -0.5, 0.25, 0.125});
        double y = 0.7, h = 1e-6;
        CHECK(spec.DV(y) ==
              Catch::Approx((spec.V(y + h) - spec.V(y - h)) / (2 * h)).margin(1e-8));
        CHECK(spec.D2V(y) ==
              Catch::Approx((spec.V(y + h) - 2 * spec.V(y) + spec.V(y - h)) / (h * h))
                  .margin(1e-3));
    }
}

TEST_CASE("best response closed forms and stationarity") {
    Interval Y{0.0, 1.0};
    auto mu = SourceMeasure::unit_interval();

    SECTION("c = |x-y|^2/2, V = y^2/2, no W: y = x/2") {
        auto spec = InteractionSpec::quadratic_v(1.0, 0.0);
        auto nu = DiscreteMeasure::quantile_uniform_1d(8, 0, 1);
        for (double x : {0.1, 0.5, 0.9}) {
            double y = best_response(CostModel::quadratic(1), spec, nu, {x, 0}, Y);
            CHECK(y == Catch::Approx(x / 2).margin(1e-12));
        }
    }
    SECTION("with W: y = (x + m)/3") {
        auto spec = quad_spec();
        CounterRng gen(5);
        auto nu = random_cloud(gen, 25, {0, 1});
        double m = nu.mean().x;
        for (double x : {0.2, 0.6, 0.95}) {
            double y = best_response(CostModel::quadratic(1), spec, nu, {x, 0}, Y);
            CHECK(y == Catch::Approx((x + m) / 3).margin(1e-12));
        }
    }
    SECTION("returned gradient vanishes to 1e-10") {
        auto spec = quad_spec();
        CounterRng gen(8);
        auto nu = random_cloud(gen, 12, {0, 1});
        for (int t = 0; t < 50; ++t) {
            Vec2 x{gen.next(), 0};
            double y = best_response(CostModel::quadratic(1), spec, nu, x, Y);
            double g = CostModel::quadratic(1).d_yc(x, y) + first_variation(spec, nu, y).grad;
            REQUIRE(std::abs(g) <= 1e-10);
        }
    }
    SECTION("nonconvex instance is refused") {
        auto spec = InteractionSpec::quadratic_v(-3.0, 0.0); // overwhelms eta = 1
        auto nu = DiscreteMeasure::quantile_uniform_1d(8, 0, 1);
        CHECK_THROWS_AS(best_response(CostModel::quadratic(1), spec, nu, {0.5, 0}, Y),
                        hypothesis_violation);
    }
    SECTION("stationary point pushed outside the interval is refused") {
        auto spec = InteractionSpec::quadratic_v(1.0, 5.0); // pulls toward y = 5
        auto nu = DiscreteMeasure::quantile_uniform_1d(8, 0, 1);
        CHECK_THROWS_AS(best_response(CostModel::quadratic(1), spec, nu, {0.2, 0}, Y),
                        hypothesis_violation);
    }
}

TEST_CASE("iterate: pushforward structure") {
    Interval Y{0.0, 1.0};
    auto cost = CostModel::quadratic(1);
    auto mu_samples = DiscreteMeasure::quantile_uniform_1d(200, 0, 1);

    SECTION("W = none makes the map constant in nu") {
        auto spec = InteractionSpec::quadratic_v(1.0, 0.0);
        CounterRng gen(12);
        auto nu_a = random_cloud(gen, 30, Y);
        auto nu_b = random_cloud(gen, 30, Y);
        auto out_a = iterate(cost, spec, mu_samples, nu_a, Y);
        auto out_b = iterate(cost, spec, mu_samples, nu_b, Y);
        REQUIRE(out_a.size() == out_b.size());
        for (std::size_t i = 0; i < out_a.size(); ++i)
            CHECK(out_a.points[i].x == Catch::Approx(out_b.points[i].x).margin(1e-13));
        // second application equals the first
        auto again = iterate(cost, spec, mu_samples, out_a, Y);
        for (std::size_t i = 0; i < out_a.size(); ++i)
            CHECK(again.points[i].x == Catch::Approx(out_a.points[i].x).margin(1e-13));
    }
    SECTION("output mean follows the moment recursion (0.5 + m)/3") {
        auto spec = quad_spec();
        CounterRng gen(21);
        auto nu = random_cloud(gen, 50, Y);
        double m = nu.mean().x;
        auto out = iterate(cost, spec, mu_samples, nu, Y);
        CHECK(out.mean().x == Catch::Approx((0.5 + m) / 3).margin(1e-12));
    }
    SECTION("map is monotone in x (no crossings)") {
        auto spec = quad_spec();
        CounterRng gen(31);
        auto nu = random_cloud(gen, 20, Y);
        auto out = iterate(cost, spec, mu_samples, nu, Y);
        for (std::size_t i = 1; i < out.size(); ++i)
            REQUIRE(out.points[i].x >= out.points[i - 1].x - 1e-13);
    }
}

TEST_CASE("w1 distances") {
    SECTION("diracs and identical measures") {
        auto a = DiscreteMeasure::dirac({0.2, 0});
        auto b = DiscreteMeasure::dirac({0.9, 0});
        CHECK(w1(a, b) == Catch::Approx(0.7).epsilon(1e-14));
        CHECK(w1(a, a) == 0.0);
    }
    SECTION("1-D quantile coupling matches the LP oracle") {
        CounterRng gen(77);
        for (int t = 0; t < 10; ++t) {
            auto a = random_cloud(gen, 3, {0, 1});
            auto b = random_cloud(gen, 3, {0, 1});
            DiscreteOTProblem p;
            p.ns = p.nt = 3;
            p.source_w = a.weights;
            p.target_w = b.weights;
            p.cost.resize(9);
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    p.cost[i * 3 + j] = std::abs(a.points[i].x - b.points[j].x);
            CHECK(w1(a, b) == Catch::Approx(solve_discrete_ot(p).cost).margin(1e-12));
        }
    }
    SECTION("triangle inequality on random triples", "[property]") {
        CounterRng gen(99);
        for (int t = 0; t < 100; ++t) {
            auto a = random_cloud(gen, 12, {0, 1});
            auto b = random_cloud(gen, 9, {0, 1});
            auto c = random_cloud(gen, 15, {0, 1});
            REQUIRE(w1(a, c) <= w1(a, b) + w1(b, c) + 1e-10);
        }
    }
    SECTION("2-D measures go through the exact LP") {
        DiscreteMeasure a, b;
        a.dim = b.dim = 2;
        a.points = {{0, 0}, {1, 0}};
        a.weights = {0.5, 0.5};
        b.points = {{0, 1}, {1, 1}};
        b.weights = {0.5, 0.5};
        CHECK(w1(a, b) == Catch::Approx(1.0).margin(1e-12));
        DiscreteMeasure c = a;
        CHECK_THROWS_AS(w1(a, DiscreteMeasure::dirac({0, 0}, 1)), config_error);
    }
}

TEST_CASE("fixed point of the quadratic instance") {
    Interval Y{0.0, 1.0};
    auto cost = CostModel::quadratic(1);
    auto mu = SourceMeasure::unit_interval();
    auto spec = quad_spec();
    auto mu_samples = DiscreteMeasure::quantile_uniform_1d(1000, 0, 1);

    auto [fixed, log] = solve_fixed_point(cost, mu, spec, mu_samples, mu_samples, Y, 1e-8, 40);

    SECTION("converges to mean 1/4 within 40 iterations") {
        CHECK(log.converged);
        CHECK(log.iterations <= 40);
        CHECK(fixed.mean().x == Catch::Approx(0.25).margin(1e-6));
    }
    SECTION("geometric rate 1/3") {
        REQUIRE(log.ratios.size() >= 3);
        CHECK(log.ratios.back() == Catch::Approx(1.0 / 3).margin(0.03));
        CHECK(log.ratios.back() >= 0.30);
        CHECK(log.ratios.back() <= 0.36);
    }
    SECTION("instance constants") {
        CHECK(log.constants.eta == Catch::Approx(1.0).margin(1e-12));
        CHECK(log.constants.lambda == Catch::Approx(2.0).margin(1e-12));
        CHECK(log.constants.level_m == Catch::Approx(1.0).margin(1e-12));
        CHECK(log.constants.jac_k == Catch::Approx(1.0 / 3).margin(1e-9));
        CHECK(log.constants.c_lip == Catch::Approx(1.0).margin(1e-9));
        CHECK(log.constants.mu_sup == Catch::Approx(1.0).margin(1e-12));
        // the theorem bound is exactly 1 here: logged, contraction still observed
        CHECK(log.constants.rho_hat == Catch::Approx(1.0).margin(1e-6));
    }
    SECTION("W = none converges in one productive step") {
        auto spec0 = InteractionSpec::quadratic_v(1.0, 0.0);
        auto [fx, lg] =
            solve_fixed_point(cost, mu, spec0, mu_samples, mu_samples, Y, 1e-8, 40);
        CHECK(lg.converged);
        CHECK(lg.iterations <= 2); // step 1 moves, step 2 certifies the fixed point
        CHECK(fx.mean().x == Catch::Approx(0.25).margin(1e-12));
    }
}

TEST_CASE("contraction bound holds pairwise when rho_hat < 1", "[property]") {
    Interval Y{0.0, 1.0};
    auto cost = CostModel::quadratic(1);
    auto mu = SourceMeasure::unit_interval();
    auto spec = InteractionSpec::quadratic_v(1.0, 0.0).with_quadratic_w(0.3);
    auto mu_samples = DiscreteMeasure::quantile_uniform_1d(100, 0, 1);

    auto consts = estimate_constants(cost, mu, spec, mu_samples, Y);
    REQUIRE(consts.rho_hat < 1.0);

    CounterRng gen(2718);
    for (int t = 0; t < 100; ++t) {
        auto nu0 = random_cloud(gen, 20, Y);
        auto nu1 = random_cloud(gen, 20, Y);
        double before = w1(nu1, nu0);
        double after = w1(iterate(cost, spec, mu_samples, nu1, Y),
                          iterate(cost, spec, mu_samples, nu0, Y));
        REQUIRE(after <= consts.rho_hat * before + 1e-12);
    }
}

TEST_CASE("fixed point minimizes the mean-field objective", "[slow]") {
    Interval Y{0.0, 1.0};
    auto cost = CostModel::quadratic(1);
    auto mu = SourceMeasure::unit_interval();
    auto spec = quad_spec();
    auto mu_samples = DiscreteMeasure::quantile_uniform_1d(200, 0, 1);
    auto [fixed, log] = solve_fixed_point(cost, mu, spec, mu_samples, mu_samples, Y, 1e-10, 60);
    REQUIRE(log.converged);

    auto objective = [&](const DiscreteMeasure& nu) {
        DiscreteOTProblem p;
        p.ns = static_cast<int>(mu_samples.size());
        p.nt = static_cast<int>(nu.size());
        p.source_w = mu_samples.weights;
        p.target_w = nu.weights;
        p.cost.resize(static_cast<std::size_t>(p.ns) * p.nt);
        for (int i = 0; i < p.ns; ++i)
            for (int j = 0; j < p.nt; ++j)
                p.cost[static_cast<std::size_t>(i) * p.nt + j] =
                    cost.c(mu_samples.points[i], nu.points[j].x);
        double tc = solve_discrete_ot(p).cost;
        double pot = 0, inter = 0;
        for (std::size_t j = 0; j < nu.size(); ++j) {
            pot += nu.weights[j] * spec.V(nu.points[j].x);
            for (std::size_t l = 0; l < nu.size(); ++l)
                inter += 0.5 * nu.weights[j] * nu.weights[l] *
                         spec.W(nu.points[j].x, nu.points[l].x);
        }
        return tc + pot + inter;
    };

    double obj_star = objective(fixed);
    CounterRng gen(5555);
    for (int t = 0; t < 20; ++t) {
        DiscreteMeasure pert = fixed;
        for (auto& p : pert.points)
            p.x = Interval{0, 1}.clamp(p.x + 0.05 * (2 * gen.next() - 1));
        CHECK(obj_star <= objective(pert) + 1e-9);
    }
}

TEST_CASE("generalized nestedness of best-reply solutions") {
    SECTION("quadratic 1-D instance verifies") {
        Interval Y{0.0, 1.0};
        auto cost = CostModel::quadratic(1);
        auto mu = SourceMeasure::unit_interval();
        auto spec = quad_spec();
        auto mu_samples = DiscreteMeasure::quantile_uniform_1d(400, 0, 1);
        auto [fixed, log] =
            solve_fixed_point(cost, mu, spec, mu_samples, mu_samples, Y, 1e-10, 60);
        REQUIRE(log.converged);
        auto rep = generalized_nestedness_check(cost, spec, fixed, mu, Y);
        CHECK(rep.ok);
        CHECK(rep.hypothesis_ok);
        CHECK(rep.worst_gap <= 1e-6);
        CHECK(rep.support_points > 0);
    }
    SECTION("bilinear arc with quadratic potential (m=2, n=1) verifies") {
        Interval Y{0.0, kPi / 2};
        auto cost = CostModel::bilinear_arc();
        auto mu = SourceMeasure::quarter_disk();
        auto spec = InteractionSpec::quadratic_v(1.0, kPi / 4);
        CounterRng rng(9);
        DiscreteMeasure mu_samples;
        mu_samples.dim = 2;
        const int n = 400;
        mu_samples.weights.assign(n, 1.0 / n);
        for (int i = 0; i < n; ++i) mu_samples.points.push_back(mu.sample(rng));
        auto nu0 = DiscreteMeasure::quantile_uniform_1d(n, Y.lo, Y.hi);
        auto [fixed, log] = solve_fixed_point(cost, mu, spec, mu_samples, nu0, Y, 1e-10, 40);
        REQUIRE(log.converged); // W = none: one productive step
        auto rep = generalized_nestedness_check(cost, spec, fixed, mu, Y);
        CHECK(rep.ok);
        CHECK(rep.worst_gap <= 1e-6);
    }
    SECTION("potential pushing mass outward is flagged") {
        Interval Y{0.0, 1.0};
        auto cost = CostModel::quadratic(1);
        auto mu = SourceMeasure::unit_interval();
        auto spec = InteractionSpec::quadratic_v(1.0, 5.0); // argmin far above Y
        auto cloud = DiscreteMeasure::quantile_uniform_1d(50, 0, 1);
        auto rep = generalized_nestedness_check(cost, spec, cloud, mu, Y);
        CHECK_FALSE(rep.hypothesis_ok);
        CHECK_THROWS_AS(iterate(cost, spec, cloud, cloud, Y), hypothesis_violation);
    }
}
