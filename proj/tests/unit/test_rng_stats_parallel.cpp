#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "greenlab/parallel.hpp"
#include "greenlab/rng.hpp"
#include "greenlab/stats.hpp"

using namespace greenlab;

TEST_CASE("counter rng streams are pure functions of their key")
{
    CounterRng a(5, StreamId::measure, 17), b(5, StreamId::measure, 17);
    for (int i = 0; i < 10; ++i)
        CHECK(a() == b());
    CounterRng c(5, StreamId::measure, 18), d(5, StreamId::centering, 17);
    CounterRng a2(5, StreamId::measure, 17);
    auto first = a2();
    CHECK(first != c());
    CHECK(first != d());
}

TEST_CASE("uniform and normal draws have the right moments")
{
    std::vector<double> u, z;
    for (int i = 0; i < 20000; ++i)
    {
        CounterRng r(1, StreamId::synthetic, i);
        double x = r.uniform();
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
        u.push_back(x);
        z.push_back(r.normal());
    }
    CHECK(mean(u) == doctest::Approx(0.5).epsilon(0.02));
    CHECK(std::abs(mean(z)) < 0.03);
    CHECK(sample_variance(z) == doctest::Approx(1.0).epsilon(0.03));
    CHECK(ks_normal(z) < ks_critical(z.size(), 0.001));
}

TEST_CASE("index draws stay in range")
{
    CounterRng r(2, StreamId::synthetic, 0);
    for (int i = 0; i < 1000; ++i)
        CHECK(r.index(3) < 3);
}

TEST_CASE("basic statistics")
{
    std::vector<double> v{1, 2, 3, 4};
    CHECK(pairwise_sum(v) == 10.0);
    CHECK(mean(v) == 2.5);
    CHECK(sample_variance(v) == doctest::Approx(5.0 / 3));
    CHECK(sample_variance(std::vector<double>{1.0}) == 0.0);
    auto e = mean_estimate(v);
    CHECK(e.stderr_ == doctest::Approx(std::sqrt(5.0 / 3 / 4)));
    std::vector<double> w{0.1, 0.2, 0.3, 0.4};
    CHECK(weighted_mean(v, w) == doctest::Approx(3.0));
    CHECK(sample_covariance(v, v) == doctest::Approx(sample_variance(v)));
    CHECK(quantile(v, 0.5) == doctest::Approx(2.5));
    CHECK(quantile(v, 0.0) == 1.0);
    CHECK(quantile(v, 1.0) == 4.0);
}

TEST_CASE("linear fit recovers an exact line")
{
    std::vector<double> x{0, 1, 2, 3, 4}, y;
    for (double t : x)
        y.push_back(2 - 0.5 * t);
    auto f = linear_fit(x, y);
    CHECK(f.intercept == doctest::Approx(2.0));
    CHECK(f.slope == doctest::Approx(-0.5));
    CHECK(f.r_squared == doctest::Approx(1.0));
    CHECK(f.slope_stderr == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("normal distribution helpers")
{
    CHECK(normal_cdf(0.0) == doctest::Approx(0.5));
    CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975));
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054));
    // KS distance of the exact quantile grid is about 1/(2n)
    std::vector<double> grid;
    for (int i = 0; i < 1000; ++i)
        grid.push_back(normal_quantile((i + 0.5) / 1000));
    CHECK(ks_normal(grid) == doctest::Approx(0.0005).epsilon(0.01));
    CHECK(ks_critical(10000, 0.01) == doctest::Approx(1.6276 / 100).epsilon(0.001));
}

TEST_CASE("parallel_for is independent of the worker count")
{
    auto run = [](std::size_t workers) {
        set_worker_count(workers);
        std::vector<double> out(1000);
        parallel_for(out.size(), [&](std::size_t i) {
            CounterRng r(9, StreamId::synthetic, i);
            out[i] = r.uniform();
        }, 7);
        return out;
    };
    auto a = run(1), b = run(4);
    set_worker_count(1);
    CHECK(a == b);
}

TEST_CASE("parallel_for rethrows the smallest failing index")
{
    set_worker_count(3);
    try
    {
        parallel_for(500, [](std::size_t i) {
            if (i == 123 || i == 400)
                throw std::runtime_error(std::to_string(i));
        }, 5);
        FAIL("no exception");
    }
    catch (std::runtime_error const& e)
    {
        CHECK(std::string(e.what()) == "123");
    }
    set_worker_count(1);
}
