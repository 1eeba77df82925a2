#include "greenlab/green.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>

#include "greenlab/errors.hpp"
#include "greenlab/parallel.hpp"
#include "greenlab/rng.hpp"
#include "greenlab/stats.hpp"

namespace greenlab
{
double potential_step(HomogeneousMap const& f, ProjectivePoint const& p)
{
    auto [pv, qv] = f.lift(p.z0(), p.z1());
    double n2 = std::norm(pv) + std::norm(qv);
    if (!(n2 > 1e-300))
        throw DegenerateImage("lift vanishes at " + to_string(p));
    return std::log(n2) / (2.0 * f.degree());
}

double power_map_green(ProjectivePoint const& p)
{
    double a0 = std::abs(p.z0()), a1 = std::abs(p.z1());
    return std::log(std::max(a0, a1)) - 0.5 * std::log(a0 * a0 + a1 * a1);
}

double potential_sup(HomogeneousMap const& f,
                     std::span<ProjectivePoint const> grid)
{
    double sup = 0.0;
    for (auto const& p : grid)
        sup = std::max(sup, std::abs(potential_step(f, p)));
    return potential_sup_inflation * sup;
}

double tail_estimate(std::span<double const> window, int degree,
                     std::size_t n)
{
    if (window.empty())
        return 0.0;
    double d = static_cast<double>(degree);
    std::vector<double> terms(window.size());
    for (std::size_t i = 0; i < window.size(); ++i)
    {
        terms[i] = window[i]
                   * std::pow(d, -static_cast<double>(n + i));
    }
    double explicit_sum = 0.0;
    for (double t : terms)
        explicit_sum += t;
    // Worst successive ratio over the second half of the window
    double ratio = 0.0;
    for (std::size_t i = window.size() / 2; i + 1 < window.size(); ++i)
    {
        if (terms[i] > 0.0)
            ratio = std::max(ratio, terms[i + 1] / terms[i]);
        else if (terms[i + 1] > 0.0)
            return std::numeric_limits<double>::infinity();
    }
    if (ratio >= 1.0)
        return std::numeric_limits<double>::infinity();
    return explicit_sum + terms.back() * ratio / (1.0 - ratio);
}

//---------------------------------------------------------------------------//

struct GreenFunction::Cache
{
    std::mutex lock;
    std::vector<double> sups;
};

GreenFunction::GreenFunction(MapSequence const& seq)
    : seq_(seq)
    , grid_(sphere_grid(potential_grid_size))
    , cache_(std::make_unique<Cache>())
{
}

GreenFunction::~GreenFunction() = default;

double GreenFunction::sup_norm(std::size_t j) const
{
    std::size_t key = seq_.is_autonomous() ? 0 : j;
    {
        std::lock_guard<std::mutex> guard(cache_->lock);
        if (key < cache_->sups.size() && cache_->sups[key] >= 0.0)
            return cache_->sups[key];
    }
    double value = potential_sup(seq_.map(key), grid_);
    std::lock_guard<std::mutex> guard(cache_->lock);
    if (cache_->sups.size() <= key)
        cache_->sups.resize(key + 1, -1.0);
    cache_->sups[key] = value;
    return value;
}

PotentialStep GreenFunction::step(std::size_t j) const
{
    return {j, sup_norm(j), seq_.map(j).dist_to_degenerate()};
}

double GreenFunction::tail_bound(std::size_t n) const
{
    std::vector<double> sups(window);
    for (std::size_t i = 0; i < window; ++i)
        sups[i] = sup_norm(n + i);
    return tail_estimate(sups, seq_.degree(), n);
}

double GreenFunction::partial(ProjectivePoint const& p, std::size_t n) const
{
    double d = static_cast<double>(seq_.degree());
    double value = 0.0;
    double scale = 1.0;
    ProjectivePoint x = p;
    for (std::size_t j = 0; j < n; ++j)
    {
        auto const& f = seq_.map(j);
        value += scale * potential_step(f, x);
        x = greenlab::evaluate(f, x);
        scale /= d;
    }
    return value;
}

std::size_t GreenFunction::depth_for(double tol) const
{
    if (!(tol > 0))
        throw InvalidSpec("tolerance must be positive");
    double previous = tail_bound(0);
    int stalls = 0;
    for (std::size_t n = 0; n <= max_terms; ++n)
    {
        double bound = n == 0 ? previous : tail_bound(n);
        if (bound < tol)
            return n;
        if (n > 0)
        {
            stalls = bound >= previous ? stalls + 1 : 0;
            if (stalls >= 3)
            {
                throw NoConvergence("tail estimate stopped decreasing at term "
                                    + std::to_string(n));
            }
        }
        previous = bound;
    }
    throw NoConvergence("tail estimate above tolerance after "
                        + std::to_string(max_terms) + " terms");
}

GreenValue GreenFunction::evaluate(ProjectivePoint const& p, double tol) const
{
    GreenValue result;
    result.depth = depth_for(tol);
    result.tail_bound = tail_bound(result.depth);
    result.value = partial(p, result.depth);
    return result;
}

GaugeFit GreenFunction::fit_gauge(std::size_t n) const
{
    GaugeFit fit;
    std::vector<double> x, y;
    for (std::size_t j = 0; j < n; ++j)
    {
        auto s = step(j);
        x.push_back(-std::log(s.dist));
        y.push_back(std::log(std::max(s.sup_norm, 1e-300)));
    }
    fit.points = n;
    if (n == 0)
        return fit;
    auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    if (n >= 2 && *hi - *lo > 1e-12)
        fit.q = std::max(0.0, linear_fit(x, y).slope);
    double c = 0.0;
    for (std::size_t j = 0; j < n; ++j)
        c = std::max(c, std::exp(y[j] - fit.q * x[j]));
    fit.c = c;
    return fit;
}

GreenValue green_function(MapSequence const& seq, ProjectivePoint const& p,
                          double tol)
{
    return GreenFunction(seq).evaluate(p, tol);
}

HolderReport holder_exponent_estimate(MapSequence const& seq,
                                      std::size_t samples,
                                      std::vector<double> const& scales,
                                      std::uint64_t seed)
{
    if (scales.size() < 2)
        throw InvalidSpec("Holder fit needs at least two scales");
    auto [lo, hi] = std::minmax_element(scales.begin(), scales.end());
    if (!(*lo > 0 && *hi <= 1))
        throw InvalidSpec("Holder scales must lie in (0, 1]");

    GreenFunction green(seq);
    std::size_t depth = green.depth_for(1e-3 * *lo);
    std::size_t per_scale = std::max<std::size_t>(1, samples / scales.size());

    HolderReport report;
    report.scales = scales;
    std::vector<double> log_s, log_inc;
    for (std::size_t s = 0; s < scales.size(); ++s)
    {
        double angle = 2 * std::asin(scales[s]);
        std::vector<double> inc(per_scale);
        parallel_for(per_scale, [&](std::size_t i) {
            CounterRng rng(seed, StreamId::holder_pairs, s * per_scale + i);
            auto p = random_point(rng);
            auto q = sphere_step(p, angle, 2 * std::numbers::pi * rng.uniform());
            inc[i] = std::abs(green.partial(p, depth) - green.partial(q, depth));
        });
        double m = *std::max_element(inc.begin(), inc.end());
        report.max_increments.push_back(m);
        if (m > 0)
        {
            log_s.push_back(std::log(scales[s]));
            log_inc.push_back(std::log(m));
        }
    }
    if (log_s.size() >= 2)
    {
        auto fit = linear_fit(log_s, log_inc);
        report.alpha = fit.slope;
        report.r_squared = fit.r_squared;
    }
    auto lyap = topological_lyapunov(seq, 10, 10'000);
    report.lyapunov = lyap.estimate;
    report.floor = std::log(static_cast<double>(seq.degree())) / lyap.estimate;
    return report;
}

}  // namespace greenlab
