#include <cmath>

#include <doctest.h>

#include "greenlab/errors.hpp"
#include "greenlab/map_sequence.hpp"

using namespace greenlab;

TEST_CASE("constant sequences are autonomous")
{
    auto seq = MapSequence::constant(power_map(2));
    CHECK(seq.is_autonomous());
    CHECK(&seq.map(0) == &seq.map(100));
    CHECK(seq.degree() == 2);
}

TEST_CASE("perturbed sequences are reproducible and stable")
{
    auto a = MapSequence::perturbed(power_map(2), 0.05, 11);
    auto b = MapSequence::perturbed(power_map(2), 0.05, 11);
    auto c = MapSequence::perturbed(power_map(2), 0.05, 12);
    CHECK_FALSE(a.is_autonomous());
    auto p = from_affine({0.3, 0.4});
    // order of realization does not matter
    auto late = evaluate(b.map(9), p);
    CHECK(evaluate(a.map(9), p) == late);
    CHECK_FALSE(evaluate(c.map(9), p) == late);
    // references stay valid while more maps are realized
    auto const* first = &a.map(0);
    for (std::size_t j = 1; j < 200; ++j)
        a.map(j);
    CHECK(first == &a.map(0));
    // perturbations are small
    CHECK(chordal_dist(evaluate(a.map(3), p), evaluate(power_map(2), p)) < 0.2);
}

TEST_CASE("explicit lists cycle")
{
    auto seq = MapSequence::explicit_list({power_map(2), parse_map("z^2+0.1")});
    auto p = from_affine(0.5);
    CHECK(evaluate(seq.map(0), p) == evaluate(seq.map(4), p));
    CHECK(evaluate(seq.map(1), p) == evaluate(seq.map(3), p));
}

TEST_CASE("degeneration profiles")
{
    auto e = DegenerationProfile::parse("exp_linear:1");
    CHECK(e.dist(3) == doctest::Approx(std::exp(-3.0)));
    auto s = DegenerationProfile::parse("exp_sqrt:1");
    CHECK(s.dist(4) == doctest::Approx(std::exp(-2.0)));
    auto p = DegenerationProfile::parse("power:2");
    CHECK(p.dist(1) == doctest::Approx(0.25));
    CHECK_THROWS_AS(DegenerationProfile::parse("linear:1"), InvalidSpec);

    auto seq = MapSequence::degenerating(e, 2);
    for (std::size_t j : {0u, 3u, 10u})
        CHECK(seq.map(j).dist_to_degenerate()
              == doctest::Approx(e.dist(j)).epsilon(0.02));
}

TEST_CASE("admissibility oracles")
{
    auto constant = check_admissibility(MapSequence::constant(power_map(2)), 20);
    CHECK(constant.verdict_a);
    CHECK(constant.verdict_b);

    auto linear = check_admissibility(
        MapSequence::degenerating(DegenerationProfile::parse("exp_linear:1"), 2), 20);
    CHECK_FALSE(linear.verdict_b);
    CHECK(linear.fitted_limit == doctest::Approx(-1.0).epsilon(0.05));

    auto root = check_admissibility(
        MapSequence::degenerating(DegenerationProfile::parse("exp_sqrt:1"), 2), 20);
    CHECK(root.verdict_b);
    CHECK_FALSE(root.verdict_a);

    auto poly = check_admissibility(
        MapSequence::degenerating(DegenerationProfile::parse("power:1"), 2), 200);
    CHECK(poly.verdict_b);
}

TEST_CASE("Lyapunov exponent of z^d is log d")
{
    for (int d : {2, 3})
    {
        auto est = topological_lyapunov(MapSequence::constant(power_map(d)), 10, 2000);
        CHECK(est.estimate == doctest::Approx(std::log(d)).epsilon(0.02));
        CHECK(est.upper_trend >= est.estimate - 1e-9);
    }
}

TEST_CASE("sphere grid covers the sphere")
{
    auto grid = sphere_grid(1000);
    CHECK(grid.size() >= 900);
    CHECK(grid.size() <= 1100);
    // every random direction has a grid point nearby
    auto p = from_affine({0.123, -2.5});
    double best = 1.0;
    for (auto const& g : grid)
        best = std::min(best, chordal_dist(g, p));
    CHECK(best < 0.05);
}
