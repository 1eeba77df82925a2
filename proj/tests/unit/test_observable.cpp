#include <cmath>
#include <numbers>

#include <doctest.h>

#include "greenlab/errors.hpp"
#include "greenlab/observable.hpp"
#include "greenlab/rng.hpp"

using namespace greenlab;

TEST_CASE("harmonic(k) is cos(k theta) / 2^(k-1) on the unit circle")
{
    for (int k : {1, 2, 5})
    {
        auto h = Observable::harmonic(k);
        CHECK(h.regularity() == Regularity::smooth);
        for (double theta : {0.0, 0.4, 2.0})
        {
            auto p = from_affine(std::polar(1.0, theta));
            CHECK(h(p) == doctest::Approx(std::cos(k * theta) / std::pow(2.0, k - 1)));
        }
        CHECK(h(infinity_point()) == doctest::Approx(0.0));
    }
}

TEST_CASE("dsh observables and their poles")
{
    auto psi = Observable::dsh(from_affine(0.0), infinity_point());
    CHECK(psi.regularity() == Regularity::dsh);
    // log|z0| - log|z1| = log|z|
    CHECK(psi(from_affine(2.0)) == doctest::Approx(std::log(2.0)));
    CHECK(psi(from_affine(std::polar(1.0, 0.3))) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK_THROWS_AS(psi(from_affine(0.0)), SingularHit);
    CHECK(psi.poles().size() == 2);
}

TEST_CASE("Fubini-Study L1 norm of log|z| is log 2")
{
    auto psi = Observable::dsh(from_affine(0.0), infinity_point());
    CHECK(fs_l1_norm(psi) == doctest::Approx(std::log(2.0)).epsilon(1e-3));
    CHECK(fs_l1_norm(Observable::constant(3.0)) == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(psi.norm_surrogate() == doctest::Approx(std::log(2.0) + 1).epsilon(1e-3));
}

TEST_CASE("Holder observables")
{
    auto anchor = from_affine(1.0);
    auto h = Observable::holder(0.5, anchor);
    CHECK(h.regularity() == Regularity::holder);
    CHECK(h.alpha() == 0.5);
    CHECK(h(anchor) == 0.0);
    CHECK(h(from_affine(-1.0)) == doctest::Approx(1.0));
    CHECK(h.decay_floor(2) == doctest::Approx(0.25 * std::log(2.0)));
    CHECK(Observable::harmonic(1).decay_floor(2) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("arithmetic on observables")
{
    auto a = Observable::harmonic(1), b = Observable::harmonic(2);
    auto s = a + 2.0 * b;
    auto p = from_affine({0.3, 0.9});
    CHECK(s(p) == doctest::Approx(a(p) + 2 * b(p)));
    CHECK((a - a)(p) == doctest::Approx(0.0));
    CHECK(a.shifted(0.5)(p) == doctest::Approx(a(p) - 0.5));
    CHECK(s.norm_surrogate() <= a.norm_surrogate() + 2 * b.norm_surrogate() + 1e-12);
    auto c = Observable::constant(2.5);
    CHECK(c.is_constant());
    CHECK(c.constant_value() == 2.5);
    CHECK((c + Observable::constant(1.0)).is_constant());
    CHECK_FALSE(s.is_constant());
}

TEST_CASE("observable expressions")
{
    auto p = from_affine({0.3, -0.9});
    auto e = make_observable("harmonic(1)+harmonic(2)");
    CHECK(e(p) == doctest::Approx(Observable::harmonic(1)(p) + Observable::harmonic(2)(p)));
    auto scaled = make_observable("8*harmonic(4)");
    CHECK(scaled(p) == doctest::Approx(8 * Observable::harmonic(4)(p)));
    auto neg = make_observable("harmonic(1) - 0.5*harmonic(3)");
    CHECK(neg(p) == doctest::Approx(Observable::harmonic(1)(p) - 0.5 * Observable::harmonic(3)(p)));
    CHECK(make_observable("zero").is_constant());
    CHECK(make_observable("one").constant_value() == 1.0);
    CHECK(make_observable("const(2)").constant_value() == 2.0);
    CHECK(make_observable("dsh(0, inf)").regularity() == Regularity::dsh);
    CHECK(make_observable("holder(0.5, 1)").alpha() == 0.5);
    CHECK_THROWS_AS(make_observable("bogus(1)"), InvalidSpec);
    CHECK_THROWS_AS(make_observable("coboundary(harmonic(1))"), InvalidSpec);
}

TEST_CASE("coboundaries")
{
    auto f = power_map(2);
    auto zeta = Observable::harmonic(1);
    auto cob = Observable::coboundary(zeta, f);
    auto p = from_affine({0.2, 0.6});
    CHECK(cob(p) == doctest::Approx(zeta(p) - zeta(evaluate(f, p))));
    auto parsed = make_observable("coboundary(harmonic(1))", &f);
    CHECK(parsed(p) == doctest::Approx(cob(p)));
}
