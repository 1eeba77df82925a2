#include <cmath>

#include <doctest.h>

#include "greenlab/errors.hpp"
#include "greenlab/rng.hpp"
#include "greenlab/stats.hpp"
#include "greenlab/stochastics.hpp"

using namespace greenlab;

namespace
{
MapSequence square()
{
    return MapSequence::constant(power_map(2));
}
}  // namespace

TEST_CASE("constant observables give identically zero sums")
{
    auto seq = square();
    auto b = birkhoff_sums(seq, ObservableSequence(Observable::constant(1.0)), 20,
                           200, 100, {});
    for (double s : b.sums)
        CHECK(s == 0.0);
    auto e = ergodic_average_check(b, 10);
    CHECK(e.norm_n == 0.0);
    CHECK(e.verdict);
    CHECK_THROWS_AS(clt_test(b, {5, 10}), DegenerateVariance);
    auto lil = lil_from_sums(b.sums, b.n_max, b.count);
    CHECK(lil.degenerate);
    CHECK_FALSE(lil.verdict);
}

TEST_CASE("variance of harmonic(1) sums grows like n/2")
{
    // lacunary cosines are orthogonal: Var S_n = n * E[cos^2] = n / 2
    auto seq = square();
    auto b = birkhoff_sums(seq, ObservableSequence(Observable::harmonic(1)), 8,
                           20000, 5000, {});
    for (std::size_t n : {2u, 4u, 8u})
    {
        double v = sample_variance(b.column(n));
        CHECK(v == doctest::Approx(n / 2.0).epsilon(0.05));
    }
    auto curve = variance_curve(b, 0.25);
    CHECK(curve.growth_exponent == doctest::Approx(0.5).epsilon(0.05));
    CHECK(curve.verdict);
}

TEST_CASE("stored and streamed Birkhoff sums coincide")
{
    auto seq = MapSequence::perturbed(power_map(2), 0.05, 2);
    ObservableSequence psi(Observable::harmonic(1));
    SamplingOptions o;
    o.seed = 4;
    auto streamed = birkhoff_sums(seq, psi, 10, 50, 300, o);
    auto centering = compute_centering(seq, psi, 10, 300, o);
    auto traj = sample_trajectories(seq, 10, 50, o);
    auto stored = birkhoff_sums(traj, psi, centering);
    CHECK(streamed.sums == stored.sums);
    // trajectories follow the maps
    for (std::size_t j = 0; j < 10; ++j)
        CHECK(chordal_dist(evaluate(seq.map(j), traj.point(3, j)), traj.point(3, j + 1)) < 1e-9);
}

TEST_CASE("centering ladder estimates every tail")
{
    auto seq = MapSequence::perturbed(power_map(2), 0.05, 2);
    ObservableSequence psi(Observable::harmonic(2));
    auto table = compute_centering(seq, psi, 6, 4000, {});
    CHECK_FALSE(table.shared);
    REQUIRE(table.values.size() == 6);
    for (std::size_t j = 0; j < 6; ++j)
    {
        auto cloud = sample_equilibrium(seq, j, 30, 4000, default_base(), 77);
        CHECK(agree(table.values[j], integrate(cloud, psi.at(j)), 4.0));
    }
    auto shared = compute_centering(square(), psi, 6, 1000, {});
    CHECK(shared.shared);
}

TEST_CASE("mixing oracle for harmonic(1) + harmonic(2) under z^2")
{
    auto seq = square();
    auto psi = Observable::harmonic(1) + Observable::harmonic(2);
    MixingOptions o;
    o.count = 20000;
    o.transfer_count = 2000;
    auto m = mixing_check(seq, psi, psi, {1, 3}, o);
    // <mu, psi o f * psi> = E[(c2 + c4/8)(c1 + c2/2)] = 1/4
    CHECK(std::abs(m.gap[0] - 0.25) < 3 * m.gap_stderr[0]);
    CHECK(std::abs(m.gap[1]) < 3 * m.gap_stderr[1] + 1e-12);
    CHECK(std::abs(m.transfer_gap[0] - 0.25) < 3 * m.transfer_stderr[0] + 0.01);

    auto zero = mixing_check(seq, Observable::constant(2.0), psi, {1}, o);
    CHECK(zero.gap[0] == 0.0);
}

TEST_CASE("two-point multicorrelation reduces to mixing")
{
    auto seq = square();
    auto psi = Observable::harmonic(1) + Observable::harmonic(2);
    SamplingOptions s;
    s.seed = 3;
    MixingOptions o;
    o.count = 3000;
    o.sampling = s;
    auto m = mixing_check(seq, psi, psi, {1}, o);
    auto mc = multicorrelation_check(seq, {psi, psi}, {0, 1}, 3000, s);
    CHECK(mc.gap == doctest::Approx(m.gap[0]).epsilon(1e-12));
}

TEST_CASE("three-point correlation oracle")
{
    // 2048 harmonic(12) = cos(12 t); with cos(t) at times 2 and 4 the product
    // is cos(12 t) cos(4 t) cos(16 t) whose mean is 1/4
    auto seq = square();
    auto mc = multicorrelation_check(
        seq,
        {2048.0 * Observable::harmonic(12), Observable::harmonic(1), Observable::harmonic(1)},
        {0, 2, 4}, 20000, {});
    CHECK(std::abs(mc.joint - 0.25) < 3 * mc.joint_stderr);
    CHECK(std::abs(mc.product) < 0.05);
}

TEST_CASE("Gaussian LIL self-test")
{
    auto r = lil_gaussian_selftest(4096, 100, 5);
    CHECK_FALSE(r.degenerate);
    CHECK(r.first_n > 0);
    CHECK(r.median_ratio > 0.5);
    CHECK(r.median_ratio < 1.3);
}

TEST_CASE("martingale decomposition identities")
{
    auto seq = MapSequence::perturbed(power_map(2), 0.05, 6);
    ObservableSequence psi(Observable::holder(1.0, from_affine(1.0)));
    SamplingOptions s;
    auto centering = compute_centering(seq, psi, 9, 2000, s);
    auto id = defining_identity_check(seq, psi, centering, 4, 10, 1);
    CHECK(id.verdict);

    auto traj = sample_trajectories(seq, 8, 300, s, true);
    auto b = birkhoff_sums(traj, psi, centering);
    MartingaleOptions mo;
    mo.cap = 4;
    auto md = martingale_decompose(seq, psi, centering, traj, b, mo);
    CHECK(md.telescoping_error < 1e-12);
    CHECK(md.nu2[0] == 0.0);
    for (std::size_t n = 1; n <= 8; ++n)
        CHECK(md.nu2[n] >= md.nu2[n - 1]);
    // conditional variances are non-negative and U has conditional mean zero
    // in the sense that E[U_j] is within noise of zero
    for (double v : md.conditional_variance)
        CHECK(v >= 0.0);
    auto rel = variance_relations(md, b);
    CHECK(rel.pairs == 28);
    CHECK(rel.orthogonal);
    CHECK(md.truncation_bound > 0.0);
}

TEST_CASE("h vanishes for harmonic(1) under z^2")
{
    auto seq = square();
    ObservableSequence psi(Observable::harmonic(1));
    CenteringTable exact;
    exact.values.assign(10, {0.0, 0.0, 1});
    HFunction h(seq, psi, exact, {});
    for (std::size_t j : {1u, 3u, 8u})
        CHECK(std::abs(h(j, from_affine({0.3, 0.1})).value) < 1e-14);
}

TEST_CASE("sampled continuation of h agrees with the full tree")
{
    auto seq = MapSequence::perturbed(power_map(2), 0.05, 8);
    ObservableSequence psi(Observable::holder(1.0, from_affine(1.0)));
    auto centering = compute_centering(seq, psi, 10, 1000, {});
    MartingaleOptions full;
    full.cap = 9;
    MartingaleOptions sampled;
    sampled.cap = 3;
    sampled.budget = 2000;
    HFunction hf(seq, psi, centering, full), hs(seq, psi, centering, sampled);
    auto x = from_affine({0.4, 0.2});
    auto a = hf(9, x), b = hs(9, x, 17);
    CHECK(b.stderr_ > 0.0);
    CHECK(std::abs(a.value - b.value) < 4 * b.stderr_);
    CHECK(hs.truncation_bound() == 0.0);
}

TEST_CASE("ASIP side conditions validate gamma")
{
    MartingaleDecomposition md;
    CHECK_THROWS_AS(asip_condition_check(md, 0.7, 0.25), InvalidSpec);
    CHECK_THROWS_AS(asip_condition_check(md, 1.0, 0.25), InvalidSpec);
}

TEST_CASE("ASIP side conditions on a short run")
{
    auto seq = square();
    ObservableSequence psi(Observable::harmonic(1));
    auto centering = compute_centering(seq, psi, 65, 2000, {});
    auto traj = sample_trajectories(seq, 64, 100, {}, true);
    auto b = birkhoff_sums(traj, psi, centering);
    auto md = martingale_decompose(seq, psi, centering, traj, b, {});
    auto r = asip_condition_check(md, 0.8, 0.25, 1e-2);
    CHECK(r.ratio_sq_nonincreasing);
    CHECK(r.ratio_nondecreasing);
    CHECK(r.nu2_fit_exponent == doctest::Approx(1.0).epsilon(0.1));
    CHECK(r.partial_sums.back() > 0.0);
}

TEST_CASE("transfer route for the variance")
{
    auto seq = square();
    ObservableSequence psi(Observable::harmonic(1));
    auto centering = compute_centering(seq, psi, 6, 2000, {});
    auto tv = variance_transfer_route(seq, psi, centering, 6, 2000, 4, {});
    CHECK(tv.variance[6] == doctest::Approx(3.0).epsilon(0.08));
}

TEST_CASE("SLLN statistic for bounded observables")
{
    auto seq = square();
    auto r = slln_check(seq, Observable::harmonic(1), 1, 1.0, 256, 200, 500, {});
    CHECK(r.q95.size() == 3);
    CHECK(r.decreasing);
    CHECK(r.verdict);
    // increments are uncorrelated
    for (std::size_t l = 0; l < r.lag_covariance.size(); ++l)
        CHECK(std::abs(r.lag_covariance[l]) < 4 * r.lag_covariance_stderr[l] + 0.01);
}

TEST_CASE("surrogate comparability")
{
    auto seq = MapSequence::perturbed(power_map(2), 0.05, 1);
    auto psi = Observable::dsh(from_affine(0.0), infinity_point());
    auto r = surrogate_comparability(seq, psi, 3, 1000, {});
    CHECK(r.verdict);
    CHECK(r.measure_side.size() == 4);
}

TEST_CASE("variance relations reject a gap that keeps growing")
{
    // S_n = sum of U_j plus a drift n * xi: sigma_n^2 = n + n^2, nu_n^2 = n
    std::size_t count = 4000, n_max = 10;
    MartingaleDecomposition md;
    md.count = count;
    md.n_max = n_max;
    md.u.assign(count * n_max, 0.0);
    md.h.assign(count * (n_max + 1), 0.0);
    md.nu2.resize(n_max + 1);
    BirkhoffSample b;
    b.count = count;
    b.n_max = n_max;
    b.sums.assign(count * (n_max + 1), 0.0);
    for (std::size_t i = 0; i < count; ++i)
    {
        CounterRng rng(3, StreamId::synthetic, i);
        double xi = rng.normal(), acc = 0.0;
        for (std::size_t j = 0; j < n_max; ++j)
        {
            double u = rng.normal();
            md.u[i * n_max + j] = u;
            acc += u;
            b.sums[i * (n_max + 1) + j + 1] = acc + (j + 1) * xi;
        }
    }
    for (std::size_t n = 0; n <= n_max; ++n)
        md.nu2[n] = static_cast<double>(n);
    auto rel = variance_relations(md, b);
    CHECK_FALSE(rel.verdict);
    CHECK(rel.gap_z_slope > 3 * rel.gap_z_slope_stderr);

    // without the drift the gap stays at sampling noise
    for (std::size_t i = 0; i < count; ++i)
    {
        double acc = 0.0;
        for (std::size_t j = 0; j < n_max; ++j)
        {
            acc += md.u[i * n_max + j];
            b.sums[i * (n_max + 1) + j + 1] = acc;
        }
    }
    CHECK(variance_relations(md, b).verdict);
}
