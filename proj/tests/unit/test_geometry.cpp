#include <cmath>
#include <numbers>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "greenlab/errors.hpp"
#include "greenlab/geometry.hpp"
#include "greenlab/rng.hpp"

using namespace greenlab;

TEST_CASE("normalize picks the canonical representative")
{
    auto p = normalize({0.0, 2.0}, {1.0, 0.0});
    CHECK(std::norm(p.z0()) + std::norm(p.z1()) == doctest::Approx(1.0));
    // largest coordinate is real and positive
    CHECK(p.z0().imag() == 0.0);
    CHECK(p.z0().real() > 0.0);
    CHECK(p.affine().real() == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(p.affine().imag() == doctest::Approx(2.0));

    // scaling by any nonzero complex number gives the same point
    auto q = normalize(complex(0.0, 2.0) * complex(-3, 1), complex(-3, 1));
    CHECK(chordal_dist(p, q) < 1e-15);
    CHECK_THROWS_AS(normalize(0.0, 0.0), ZeroVector);
}

TEST_CASE("special points")
{
    CHECK(infinity_point().is_infinity());
    CHECK(std::isinf(infinity_point().affine().real()));
    CHECK(from_affine(0.0) == ProjectivePoint{});
    CHECK(chordal_dist(infinity_point(), ProjectivePoint{}) == doctest::Approx(1.0));
    CHECK(from_affine({INFINITY, 0.0}).is_infinity());
}

TEST_CASE("chordal distance is a metric bounded by one")
{
    for (std::uint64_t i = 0; i < 500; ++i)
    {
        CounterRng rng(7, StreamId::synthetic, i);
        auto a = random_point(rng), b = random_point(rng), c = random_point(rng);
        double ab = chordal_dist(a, b), bc = chordal_dist(b, c),
               ac = chordal_dist(a, c);
        CHECK(ab >= 0.0);
        CHECK(ab <= 1.0);
        CHECK(ab == doctest::Approx(chordal_dist(b, a)));
        CHECK(chordal_dist(a, a) < 1e-15);
        CHECK(ac <= ab + bc + 1e-14);
    }
}

TEST_CASE("sphere embedding round trip and half-Euclidean distance")
{
    for (std::uint64_t i = 0; i < 200; ++i)
    {
        CounterRng rng(11, StreamId::synthetic, i);
        auto a = random_point(rng), b = random_point(rng);
        auto va = to_sphere(a), vb = to_sphere(b);
        double len = std::sqrt(va[0] * va[0] + va[1] * va[1] + va[2] * va[2]);
        CHECK(len == doctest::Approx(1.0));
        CHECK(chordal_dist(from_sphere(va), a) < 1e-14);
        double e = std::sqrt((va[0] - vb[0]) * (va[0] - vb[0])
                             + (va[1] - vb[1]) * (va[1] - vb[1])
                             + (va[2] - vb[2]) * (va[2] - vb[2]));
        CHECK(chordal_dist(a, b) == doctest::Approx(e / 2).epsilon(1e-12));
    }
    auto north = to_sphere(infinity_point());
    CHECK(north[2] == doctest::Approx(1.0));
}

TEST_CASE("sphere_step moves by the requested angle")
{
    auto p = from_affine({0.3, -0.2});
    for (double angle : {1e-6, 1e-3, 0.5})
    {
        auto q = sphere_step(p, angle, 0.7);
        CHECK(chordal_dist(p, q) == doctest::Approx(std::sin(angle / 2)).epsilon(1e-9));
    }
}

TEST_CASE("random points are uniform in height")
{
    int upper = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i)
    {
        CounterRng rng(3, StreamId::synthetic, i);
        upper += to_sphere(random_point(rng))[2] > 0.5;
    }
    // P(h > 1/2) = 1/4
    CHECK(std::abs(upper / double(n) - 0.25) < 4 * std::sqrt(0.25 * 0.75 / n));
}

TEST_CASE("complex and point literals")
{
    CHECK(parse_complex("1.5") == complex(1.5, 0));
    CHECK(parse_complex("-2i") == complex(0, -2));
    CHECK(parse_complex("0.4+0.7i") == complex(0.4, 0.7));
    CHECK(parse_complex("1e-3-i") == complex(1e-3, -1));
    CHECK(parse_complex(" 2 + 3i ") == complex(2, 3));
    CHECK_THROWS_AS(parse_complex("abc"), InvalidSpec);
    CHECK_THROWS_AS(parse_complex(""), InvalidSpec);
    CHECK(parse_point("inf").is_infinity());
    CHECK(parse_point("1").affine() == complex(1, 0));
}

TEST_CASE("json round trip")
{
    auto p = from_affine({0.25, -4});
    nlohmann::json j = p;
    auto q = j.get<ProjectivePoint>();
    CHECK(p == q);
    CHECK(nlohmann::json("inf").get<ProjectivePoint>().is_infinity());
    CHECK_THROWS_AS(nlohmann::json(3).get<ProjectivePoint>(), InvalidSpec);
}
