#include <cmath>

#include <doctest.h>

#include "greenlab/errors.hpp"
#include "greenlab/measure.hpp"
#include "greenlab/rng.hpp"
#include "greenlab/transfer.hpp"

using namespace greenlab;

TEST_CASE("equilibrium cloud of z^2 lies on the unit circle")
{
    auto seq = MapSequence::constant(power_map(2));
    auto m = sample_equilibrium(seq, 0, 30, 5000, default_base(), 1);
    double worst = 0.0;
    for (auto const& p : m.points)
        worst = std::max(worst, std::abs(std::abs(p.affine()) - 1.0));
    CHECK(worst < 1e-6);
    auto e = integrate(m, Observable::harmonic(1));
    CHECK(std::abs(e.value) < 3 * e.stderr_ + 1e-12);
    // constants integrate exactly
    auto one = integrate(m, Observable::constant(1.0));
    CHECK(one.value == 1.0);
    CHECK(one.stderr_ == 0.0);
}

TEST_CASE("clouds are reproducible and order independent")
{
    auto seq = MapSequence::perturbed(power_map(2), 0.05, 4);
    auto a = sample_equilibrium(seq, 2, 20, 300, default_base(), 9);
    auto b = sample_equilibrium(seq, 2, 20, 300, default_base(), 9);
    CHECK(a.points == b.points);
    auto c = sample_equilibrium(seq, 3, 20, 300, default_base(), 9);
    CHECK_FALSE(a.points == c.points);
    CHECK(a.provenance.tail == 2);
}

TEST_CASE("exceptional base points are rejected")
{
    auto seq = MapSequence::constant(power_map(2));
    CHECK_THROWS_AS(sample_equilibrium(seq, 0, 10, 10, from_affine(0.0), 1),
                    ExceptionalBase);
    CHECK_THROWS_AS(check_base(seq, 0, infinity_point()), ExceptionalBase);
    CHECK_NOTHROW(check_base(seq, 0, from_affine(1.0)));
}

TEST_CASE("agreement at k standard errors")
{
    CHECK(agree({1.0, 0.1, 10}, {1.2, 0.1, 10}));
    CHECK_FALSE(agree({1.0, 0.01, 10}, {1.2, 0.01, 10}));
    CHECK(agree({2.0, 0.0, 1}, {2.0, 0.0, 1}));
    CHECK_FALSE(agree({2.0, 0.0, 1}, {2.0 + 1e-9, 0.0, 1}));
}

TEST_CASE("invariance of the tail measures")
{
    auto seq = MapSequence::perturbed(power_map(2), 0.05, 3);
    auto r = check_invariance(seq, 2, Observable::harmonic(1),
                              Observable::harmonic(2), 4000, 25, default_base(), 5);
    CHECK(r.push_pass);
    CHECK(r.adjoint_pass);
}

TEST_CASE("transfer operator oracles for z^2")
{
    auto f = power_map(2);
    auto x = from_affine({0.3, 0.8});
    // P 1 = 1 and P harmonic(1) = 0 (preimages come in pairs +-w)
    CHECK(apply_P(f, Observable::constant(1.0), x) == doctest::Approx(1.0));
    CHECK(apply_P(f, Observable::harmonic(1), x) == doctest::Approx(0.0).epsilon(1e-14));
    // P (psi o f) = psi
    auto psi = Observable::harmonic(3);
    Observable composed("psi o f", [&](ProjectivePoint const& p) { return psi(evaluate(f, p)); },
                        Regularity::smooth);
    CHECK(apply_P(f, composed, x) == doctest::Approx(psi(x)));
}

TEST_CASE("full and sampled composed transfer agree")
{
    auto seq = MapSequence::perturbed(power_map(2), 0.05, 7);
    auto psi = Observable::holder(0.5, from_affine(1.0));
    std::vector<ProjectivePoint> pts{from_affine({0.1, 0.2}), from_affine(3.0)};
    TransferMode full{TransferMode::Kind::full};
    TransferMode sampled{TransferMode::Kind::sampled, 0, 4000, 5};
    auto a = apply_composed(seq, psi, pts, 6, full, 1);
    auto b = apply_composed(seq, psi, pts, 6, sampled, 1);
    for (std::size_t i = 0; i < pts.size(); ++i)
    {
        CHECK(a.stderrs[i] == 0.0);
        CHECK(std::abs(a.values[i] - b.values[i]) < 4 * b.stderrs[i]);
        CHECK(a.values[i] == doctest::Approx(apply_composed_full(seq, psi, pts[i], 6, 1)));
    }
}

TEST_CASE("decay of a smooth observable under z^2")
{
    auto seq = MapSequence::constant(power_map(2));
    DecayOptions o;
    o.cloud_count = 2000;
    o.centering_count = 2000;
    auto r = decay_report(seq, Observable::holder(1.0, from_affine(1.0)),
                          {1, 2, 3, 4, 5, 6}, o);
    CHECK(r.verdict);
    // the constant observable is fully censored: vacuous pass
    auto c = decay_report(seq, Observable::constant(1.0), {1, 2, 3}, o);
    CHECK(c.vacuous);
    CHECK(c.verdict);
}
