#include <cmath>

#include <doctest.h>

#include "greenlab/errors.hpp"
#include "greenlab/rational_map.hpp"
#include "greenlab/rng.hpp"

using namespace greenlab;

TEST_CASE("power map evaluates z^d")
{
    auto f = power_map(3);
    CHECK(f.degree() == 3);
    auto z = complex(0.3, -0.8);
    auto y = evaluate(f, from_affine(z)).affine();
    CHECK(std::abs(y - z * z * z) < 1e-14);
    CHECK(evaluate(f, infinity_point()).is_infinity());
    CHECK(evaluate(f, from_affine(0.0)) == from_affine(0.0));
    CHECK(f.dist_to_degenerate() == 1.0);
}

TEST_CASE("coefficients are sup-normalized")
{
    HomogeneousMap f({complex(0, 4), 0.0, 0.0}, {0.0, 0.0, 2.0});
    double big = 0.0;
    for (auto c : f.p())
        big = std::max(big, std::abs(c));
    for (auto c : f.q())
        big = std::max(big, std::abs(c));
    CHECK(big == doctest::Approx(1.0));
    // the map is unchanged: z -> 2i / z^2
    auto y = evaluate(f, from_affine(2.0)).affine();
    CHECK(std::abs(y - complex(0, 0.5)) < 1e-14);
}

TEST_CASE("resultant detects common roots")
{
    // (z - 1)(z - 2) and (z - 1)(z + 3) share z = 1
    std::vector<complex> p{2.0, -3.0, 1.0}, q{-3.0, 2.0, 1.0};
    CHECK(std::abs(resultant(p, q)) < 1e-12);
    CHECK_THROWS_AS(HomogeneousMap(p, q), DegenerateMap);
    // z^2 and 1 are coprime
    std::vector<complex> a{0.0, 0.0, 1.0}, b{1.0, 0.0, 0.0};
    CHECK(std::abs(resultant(a, b)) == doctest::Approx(1.0));
}

TEST_CASE("resultant of linear forms is the determinant")
{
    std::vector<complex> p{complex(1, 2), 3.0}, q{5.0, complex(0, -1)};
    // forms p0 z1 + p1 z0 and q0 z1 + q1 z0: Sylvester det = p0 q1 - p1 q0
    auto r = resultant(p, q);
    CHECK(std::abs(std::abs(r) - std::abs(p[0] * q[1] - p[1] * q[0])) < 1e-12);
}

TEST_CASE("degenerating family approaches the degenerate locus")
{
    double previous = 2.0;
    for (double t : {0.0, 0.5, 0.9, 0.99})
    {
        auto f = degenerating_map(2, t);
        CHECK(f.dist_to_degenerate() < previous);
        previous = f.dist_to_degenerate();
    }
    CHECK(degenerating_map(2, 1 - 1e-3).dist_to_degenerate()
          == doctest::Approx(1e-3).epsilon(0.05));
}

TEST_CASE("derivative norm of z^2")
{
    auto f = power_map(2);
    // |f'(1)| (1 + 1) / (1 + 1) = 2
    CHECK(derivative_norm(f, from_affine(1.0)) == doctest::Approx(2.0));
    CHECK(derivative_norm(f, from_affine(0.0)) == doctest::Approx(0.0).epsilon(1e-12));
    // affine check by finite differences on the sphere
    auto z = complex(0.4, 0.1);
    double h = 1e-6;
    auto a = evaluate(f, from_affine(z)), b = evaluate(f, from_affine(z + h));
    double chord_in = chordal_dist(from_affine(z), from_affine(z + h));
    CHECK(chordal_dist(a, b) / chord_in
          == doctest::Approx(derivative_norm(f, from_affine(z))).epsilon(1e-5));
}

TEST_CASE("map literals")
{
    auto q = parse_map("z^2+0.25");
    auto y = evaluate(q, from_affine(0.5)).affine();
    CHECK(std::abs(y - 0.5) < 1e-14);
    auto r = parse_map("(z^2+1)/(z^2-1)");
    CHECK(std::abs(evaluate(r, from_affine(2.0)).affine() - 5.0 / 3) < 1e-14);
    auto j = parse_map(R"({"p": [[0,0],[0,0],[1,0]], "q": [[1,0],[0,0],[0,0]]})");
    CHECK(std::abs(evaluate(j, from_affine(3.0)).affine() - 9.0) < 1e-12);
    CHECK_THROWS_AS(parse_map("sin(z)"), InvalidSpec);
}

TEST_CASE("f maps Möbius-invariant pairs consistently")
{
    // property: evaluation commutes with the representative choice
    auto f = parse_map("z^2-0.7+0.2i");
    for (std::uint64_t i = 0; i < 100; ++i)
    {
        CounterRng rng(4, StreamId::synthetic, i);
        auto p = random_point(rng);
        complex s(rng.uniform() + 0.1, rng.uniform());
        auto [a, b] = f.lift(p.z0() * s, p.z1() * s);
        CHECK(chordal_dist(normalize(a, b), evaluate(f, p)) < 1e-13);
    }
}
