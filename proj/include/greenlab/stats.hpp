#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace greenlab
{
//! Pairwise (cascade) summation; result depends only on the input order
double pairwise_sum(std::span<double const> values);

double mean(std::span<double const> values);
//! Unbiased sample variance (zero for fewer than two values)
double sample_variance(std::span<double const> values);
//! Weighted mean with weights summing to one
double weighted_mean(std::span<double const> values,
                     std::span<double const> weights);

struct MeanEstimate
{
    double value{0.0};
    double stderr_{0.0};
    std::size_t count{0};
};
MeanEstimate mean_estimate(std::span<double const> values);

double sample_covariance(std::span<double const> x, std::span<double const> y);

struct LinearFit
{
    double intercept{0.0};
    double slope{0.0};
    double r_squared{0.0};
    double slope_stderr{0.0};
};
//! Ordinary least squares y ~ intercept + slope * x
LinearFit linear_fit(std::span<double const> x, std::span<double const> y);

double normal_cdf(double x);
double normal_quantile(double p);

//! Kolmogorov-Smirnov distance between the empirical law and N(0, 1)
double ks_normal(std::vector<double> samples);
//! Asymptotic KS critical value at level alpha for n samples
double ks_critical(std::size_t n, double alpha);

//! Empirical quantile with linear interpolation (p in [0, 1])
double quantile(std::vector<double> values, double p);

}  // namespace greenlab
