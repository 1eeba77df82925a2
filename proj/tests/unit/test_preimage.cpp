#include <algorithm>
#include <cmath>
#include <numeric>

#include <doctest.h>

#include "greenlab/errors.hpp"
#include "greenlab/map_sequence.hpp"
#include "greenlab/preimage.hpp"
#include "greenlab/rng.hpp"

using namespace greenlab;

TEST_CASE("square roots as a fiber of z^2")
{
    auto f = power_map(2);
    auto x = from_affine({0.0, 4.0});
    auto fiber = preimages(f, x);
    REQUIRE(fiber.points.size() == 2);
    CHECK(fiber.total_multiplicity() == 2);
    for (auto const& y : fiber.points)
    {
        auto w = y.point.affine();
        CHECK(std::abs(w * w - complex(0, 4)) < 1e-13);
    }
}

TEST_CASE("critical values produce multiple roots")
{
    auto f = power_map(3);
    auto zero = preimages(f, from_affine(0.0));
    REQUIRE(zero.points.size() == 1);
    CHECK(zero.points[0].multiplicity == 3);
    CHECK(zero.points[0].point == from_affine(0.0));
    auto inf = preimages(f, infinity_point());
    REQUIRE(inf.points.size() == 1);
    CHECK(inf.points[0].point.is_infinity());
}

TEST_CASE("every fiber point maps back to x")
{
    auto seq = MapSequence::perturbed(parse_map("z^3-0.3"), 0.2, 5);
    for (std::uint64_t i = 0; i < 300; ++i)
    {
        CounterRng rng(8, StreamId::synthetic, i);
        auto x = random_point(rng);
        auto const& f = seq.map(i % 7);
        auto fiber = preimages(f, x);
        CHECK(fiber.total_multiplicity() == 3);
        for (auto const& y : fiber.points)
            CHECK(chordal_dist(evaluate(f, y.point), x) < 1e-9);
    }
}

TEST_CASE("solve_binary_form handles roots at 0 and infinity exactly")
{
    // y0 * y1 * (y0 - 2 y1): coefficient k multiplies y0^k y1^(3-k)
    std::vector<complex> c{0.0, -2.0, 1.0, 0.0};
    auto roots = solve_binary_form(c);
    CHECK(roots.total_multiplicity() == 3);
    bool has_zero = false, has_inf = false, has_two = false;
    for (auto const& r : roots.points)
    {
        has_zero = has_zero || r.point == from_affine(0.0);
        has_inf = has_inf || r.point.is_infinity();
        has_two = has_two || std::abs(r.point.affine() - 2.0) < 1e-13;
    }
    CHECK(has_zero);
    CHECK(has_inf);
    CHECK(has_two);
}

TEST_CASE("full trees have d^n weighted leaves")
{
    auto seq = MapSequence::constant(power_map(2));
    auto tree = preimage_tree(seq, from_affine({0.4, 0.7}), 5, TreeMode::full());
    CHECK(tree.levels.size() == 6);
    CHECK(tree.leaves().size() == 32);
    double total = 0.0;
    for (auto const& leaf : tree.leaves())
        total += tree.weight(5, leaf);
    CHECK(total == doctest::Approx(1.0));
    // leaves are 32nd roots of the root
    for (auto const& leaf : tree.leaves())
    {
        auto w = leaf.point.affine();
        CHECK(std::abs(std::pow(w, 32) - complex(0.4, 0.7)) < 1e-10);
    }
}

TEST_CASE("tree budget is enforced")
{
    auto seq = MapSequence::constant(power_map(2));
    CHECK_THROWS_AS(preimage_tree(seq, from_affine(0.5), 21, TreeMode::full()),
                    BudgetExceeded);
    auto sampled = preimage_tree(seq, from_affine(0.5), 30,
                                 TreeMode::sampled(50, 3));
    CHECK(sampled.leaves().size() == 50);
    CHECK(sampled.weight(30, sampled.leaves()[0]) == doctest::Approx(0.02));
}

TEST_CASE("backward paths chain through the maps")
{
    auto seq = MapSequence::perturbed(power_map(2), 0.05, 2);
    CounterRng rng(1, StreamId::backward_paths, 0);
    auto x = from_affine({0.4, 0.7});
    auto path = backward_path(seq, x, 3, 12, rng, true);
    REQUIRE(path.nodes.size() == 13);
    CHECK(path.nodes.back() == x);
    for (int m = 0; m < 12; ++m)
    {
        CHECK(chordal_dist(evaluate(seq.map(3 + m), path.nodes[m]),
                           path.nodes[m + 1]) < 1e-9);
        auto const& fiber = path.fibers[m];
        CHECK(std::any_of(fiber.points.begin(), fiber.points.end(),
                          [&](Preimage const& y) { return y.point == path.nodes[m]; }));
    }
    // reproducible
    CounterRng again(1, StreamId::backward_paths, 0);
    auto same = backward_path(seq, x, 3, 12, again);
    CHECK(same.nodes == path.nodes);
}

TEST_CASE("sampling follows multiplicities")
{
    PreimageSet set;
    set.points.push_back({from_affine(0.0), 3, 0.0});
    set.points.push_back({from_affine(1.0), 1, 0.0});
    int hits = 0;
    for (int i = 0; i < 8000; ++i)
    {
        CounterRng rng(6, StreamId::synthetic, i);
        hits += set.sample(rng, 4) == from_affine(0.0);
    }
    CHECK(hits / 8000.0 == doctest::Approx(0.75).epsilon(0.03));
}
