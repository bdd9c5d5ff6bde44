#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "uneqot/ot_oracle.hpp"
#include "uneqot/region.hpp"
#include "uneqot/rng.hpp"

using namespace uneqot;

namespace {

HalfPlane hp(double nx, double ny, double d) {
    Vec2 n{nx, ny};
    double m = n.norm();
    return {n * (1.0 / m), d / m};
}

} // namespace

TEST_CASE("quarter disk area and rectangle area") {
    CHECK(ConvexRegion::quarter_disk().area() == Catch::Approx(kPi / 4).epsilon(1e-14));
    CHECK(ConvexRegion::rectangle(0, 2, -1, 3).area() == Catch::Approx(8.0).epsilon(1e-14));
}

TEST_CASE("half-plane clips of the quarter disk match closed forms") {
    auto q = ConvexRegion::quarter_disk();

    SECTION("diagonal cut through the origin") {
        // {x1 >= x2} is half the quarter disk
        CHECK(q.clipped(hp(1, -1, 0)).area() == Catch::Approx(kPi / 8).margin(1e-13));
    }
    SECTION("vertical cut") {
        // {x1 >= t}: circular segment area pi/4 - t sqrt(1-t^2)/2 - asin(t)/2... via integral
        double t = 0.37;
        double expect = 0.0;
        // integrate sqrt(1-x^2) dx from t to 1
        expect = (kPi / 4) - 0.5 * (t * std::sqrt(1 - t * t) + std::asin(t));
        CHECK(q.clipped(hp(1, 0, t)).area() == Catch::Approx(expect).epsilon(1e-12));
    }
    SECTION("cut keeping everything / nothing") {
        CHECK(q.clipped(hp(1, 1, -5)).area() == Catch::Approx(kPi / 4).epsilon(1e-14));
        CHECK(q.clipped(hp(1, 1, 5)).area() == 0.0);
    }
    SECTION("chord cutting the arc twice") {
        // half-plane pointing away from the arc: n = -(1,1)/sqrt(2), keep
        // n.x >= d with d negative but above -1 so the lens near the arc is cut.
        double d = -0.98;
        auto r = q.clipped(hp(-1, -1, d * std::sqrt(2.0)));
        // complement within the quarter disk: points with (x1+x2)/sqrt2 > -d
        double removed = kPi / 4 - r.area();
        CHECK(removed > 0);
        // MC oracle for the removed area
        CounterRng rng(7);
        int hits = 0;
        const int N = 400000;
        for (int i = 0; i < N; ++i) {
            double a = rng.uniform(2 * i), b = rng.uniform(2 * i + 1);
            if (a * a + b * b <= 1 && (a + b) / std::sqrt(2.0) > -d) ++hits;
        }
        double mc = static_cast<double>(hits) / N;
        CHECK(removed == Catch::Approx(mc).margin(4 * std::sqrt(mc / N) + 1e-4));
    }
}

TEST_CASE("successive clips agree with a Monte Carlo oracle", "[property]") {
    auto q = ConvexRegion::quarter_disk();
    CounterRng gen(20240517);
    for (int trial = 0; trial < 25; ++trial) {
        double a0 = 2 * kPi * gen.next();
        double d0 = 1.4 * gen.next() - 0.7;
        double a1 = 2 * kPi * gen.next();
        double d1 = 1.4 * gen.next() - 0.7;
        HalfPlane h0{{std::cos(a0), std::sin(a0)}, d0};
        HalfPlane h1{{std::cos(a1), std::sin(a1)}, d1};
        double area = q.clipped(h0).clipped(h1).area();

        CounterRng rng(1000 + trial);
        int hits = 0;
        const int N = 200000;
        for (int i = 0; i < N; ++i) {
            Vec2 p{rng.uniform(2 * i), rng.uniform(2 * i + 1)};
            if (p.x * p.x + p.y * p.y <= 1 && h0.eval(p) >= 0 && h1.eval(p) >= 0) ++hits;
        }
        double mc = static_cast<double>(hits) / N;
        double tol = 4 * std::sqrt(std::max(mc, 1e-3) / N) + 2e-3;
        INFO("trial " << trial << " area " << area << " mc " << mc);
        CHECK(area == Catch::Approx(mc).margin(tol));
    }
}

TEST_CASE("line clipping against quarter disk") {
    // horizontal line at height 0.5 from x=-2: enters at x=0, exits at sqrt(3)/2
    Vec2 p{-2.0, 0.5}, dir{1.0, 0.0};
    std::optional<std::pair<double, double>> iv = std::make_pair(-1e18, 1e18);
    iv = clip_line_halfplane(iv, p, dir, {{1, 0}, 0});
    iv = clip_line_halfplane(iv, p, dir, {{0, 1}, 0});
    iv = clip_line_unit_disk(iv, p, dir);
    REQUIRE(iv.has_value());
    CHECK(iv->first == Catch::Approx(2.0).epsilon(1e-13));
    CHECK(iv->second == Catch::Approx(2.0 + std::sqrt(3.0) / 2).epsilon(1e-13));
}
