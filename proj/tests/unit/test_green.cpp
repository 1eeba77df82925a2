#include <cmath>
#include <numbers>

#include <doctest.h>

#include "greenlab/errors.hpp"
#include "greenlab/green.hpp"
#include "greenlab/rng.hpp"

using namespace greenlab;

TEST_CASE("Green function of z^2 at [1:1]")
{
    auto seq = MapSequence::constant(power_map(2));
    auto v = green_function(seq, normalize(1.0, 1.0), 1e-6);
    CHECK(v.value == doctest::Approx(-0.5 * std::log(2.0)).epsilon(1e-6));
    CHECK(v.tail_bound <= 1e-6);
}

TEST_CASE("Green function matches the closed form of z^d")
{
    for (int d : {2, 3})
    {
        auto seq = MapSequence::constant(power_map(d));
        GreenFunction g(seq);
        for (std::uint64_t i = 0; i < 200; ++i)
        {
            CounterRng rng(12, StreamId::synthetic, i);
            auto p = random_point(rng);
            CHECK(std::abs(g.evaluate(p, 1e-6).value - power_map_green(p)) < 1e-5);
        }
    }
}

TEST_CASE("Green function satisfies g o f = d g + u for constant maps")
{
    // g = u + (1/d) g o f for a single map
    auto f = parse_map("z^2-1");
    auto seq = MapSequence::constant(f);
    GreenFunction g(seq);
    for (std::uint64_t i = 0; i < 50; ++i)
    {
        CounterRng rng(13, StreamId::synthetic, i);
        auto p = random_point(rng);
        double lhs = g.evaluate(p, 1e-9).value;
        double rhs = potential_step(f, p) + g.evaluate(evaluate(f, p), 1e-9).value / 2;
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-7));
    }
}

TEST_CASE("tail estimates")
{
    std::vector<double> flat(8, 1.0);
    // sum_{j >= 0} 2^-j = 2
    CHECK(tail_estimate(flat, 2, 0) == doctest::Approx(2.0).epsilon(1e-9));
    std::vector<double> growing;
    for (int j = 0; j < 8; ++j)
        growing.push_back(std::pow(3.0, j));
    CHECK(std::isinf(tail_estimate(growing, 2, 0)));
}

TEST_CASE("partial sums and depth")
{
    auto seq = MapSequence::constant(power_map(2));
    GreenFunction g(seq);
    auto p = from_affine({0.5, 0.5});
    CHECK(g.partial(p, 0) == 0.0);
    CHECK(g.depth_for(1e-3) < g.depth_for(1e-9));
    // potentials of z^2 in this normalization are bounded by log(2)/2
    CHECK(g.sup_norm(0) <= 0.5 * std::log(2.0) * potential_sup_inflation + 1e-12);
}

TEST_CASE("perturbed sequences have a convergent Green function")
{
    auto seq = MapSequence::perturbed(power_map(2), 0.05, 1);
    auto v = green_function(seq, from_affine({0.2, 1.3}), 1e-6);
    CHECK(v.tail_bound <= 1e-6);
    CHECK(std::isfinite(v.value));
}

TEST_CASE("Holder exponent of the z^2 Green function")
{
    auto seq = MapSequence::constant(power_map(2));
    auto h = holder_exponent_estimate(seq, 400, {1e-4, 1e-3, 1e-2, 1e-1}, 3);
    CHECK(h.floor == doctest::Approx(1.0).epsilon(0.03));
    CHECK(h.alpha > 0.9);
}
