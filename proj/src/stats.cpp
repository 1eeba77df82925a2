#include "greenlab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/distributions/normal.hpp>

#include "greenlab/errors.hpp"

namespace greenlab
{
double pairwise_sum(std::span<double const> values)
{
    constexpr std::size_t block = 32;
    if (values.size() <= block)
    {
        double s = 0.0;
        for (double v : values)
            s += v;
        return s;
    }
    std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

double mean(std::span<double const> values)
{
    if (values.empty())
        return 0.0;
    return pairwise_sum(values) / static_cast<double>(values.size());
}

double sample_variance(std::span<double const> values)
{
    if (values.size() < 2)
        return 0.0;
    double m = mean(values);
    std::vector<double> sq(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        sq[i] = (values[i] - m) * (values[i] - m);
    return pairwise_sum(sq) / static_cast<double>(values.size() - 1);
}

double weighted_mean(std::span<double const> values,
                     std::span<double const> weights)
{
    std::vector<double> prod(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        prod[i] = values[i] * weights[i];
    return pairwise_sum(prod);
}

MeanEstimate mean_estimate(std::span<double const> values)
{
    MeanEstimate e;
    e.count = values.size();
    e.value = mean(values);
    if (values.size() > 1)
        e.stderr_ = std::sqrt(sample_variance(values)
                              / static_cast<double>(values.size()));
    return e;
}

double sample_covariance(std::span<double const> x, std::span<double const> y)
{
    if (x.size() != y.size())
        throw InvalidSpec("covariance of mismatched samples");
    if (x.size() < 2)
        return 0.0;
    double mx = mean(x), my = mean(y);
    std::vector<double> prod(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        prod[i] = (x[i] - mx) * (y[i] - my);
    return pairwise_sum(prod) / static_cast<double>(x.size() - 1);
}

LinearFit linear_fit(std::span<double const> x, std::span<double const> y)
{
    if (x.size() != y.size() || x.size() < 2)
        throw InvalidSpec("linear fit needs at least two points");
    double n = static_cast<double>(x.size());
    double mx = mean(x), my = mean(y);
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LinearFit fit;
    if (sxx == 0.0)
    {
        fit.intercept = my;
        return fit;
    }
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double sse = std::max(0.0, syy - fit.slope * sxy);
    fit.r_squared = syy > 0 ? 1.0 - sse / syy : 1.0;
    if (x.size() > 2)
        fit.slope_stderr = std::sqrt(sse / (n - 2) / sxx);
    return fit;
}

double normal_cdf(double x)
{
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

double normal_quantile(double p)
{
    if (!(p > 0.0 && p < 1.0))
        throw InvalidSpec("normal quantile needs p in (0, 1)");
    return boost::math::quantile(boost::math::normal_distribution<>(), p);
}

double ks_normal(std::vector<double> samples)
{
    if (samples.empty())
        return 0.0;
    std::sort(samples.begin(), samples.end());
    double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i)
    {
        double f = normal_cdf(samples[i]);
        d = std::max(d, std::max(static_cast<double>(i + 1) / n - f,
                                 f - static_cast<double>(i) / n));
    }
    return d;
}

double ks_critical(std::size_t n, double alpha)
{
    // Kolmogorov limit law: P(sqrt(n) D > c) ~ 2 exp(-2 c^2)
    return std::sqrt(-0.5 * std::log(alpha / 2)) / std::sqrt(static_cast<double>(n));
}

double quantile(std::vector<double> values, double p)
{
    if (values.empty())
        return 0.0;
    std::sort(values.begin(), values.end());
    double pos = p * static_cast<double>(values.size() - 1);
    auto lo = static_cast<std::size_t>(std::floor(pos));
    auto hi = std::min(lo + 1, values.size() - 1);
    double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

}  // namespace greenlab
