#include "greenlab/map_sequence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "greenlab/errors.hpp"
#include "greenlab/rng.hpp"
#include "greenlab/stats.hpp"

namespace greenlab
{
//---------------------------------------------------------------------------//
// DegenerationProfile
//---------------------------------------------------------------------------//

double DegenerationProfile::dist(std::size_t j) const
{
    double x = static_cast<double>(j);
    switch (kind)
    {
        case Kind::constant: return rate;
        case Kind::exp_linear: return std::exp(-rate * x);
        case Kind::exp_sqrt: return std::exp(-rate * std::sqrt(x));
        case Kind::power: return std::pow(1.0 + x, -rate);
    }
    return 1.0;
}

DegenerationProfile DegenerationProfile::parse(std::string const& text)
{
    DegenerationProfile result;
    auto colon = text.find(':');
    std::string name = text.substr(0, colon);
    if (colon != std::string::npos)
    {
        try
        {
            result.rate = std::stod(text.substr(colon + 1));
        }
        catch (std::exception const&)
        {
            throw InvalidSpec("bad profile rate in '" + text + "'");
        }
    }
    if (name == "constant")
        result.kind = Kind::constant;
    else if (name == "exp_linear")
        result.kind = Kind::exp_linear;
    else if (name == "exp_sqrt")
        result.kind = Kind::exp_sqrt;
    else if (name == "power")
        result.kind = Kind::power;
    else
        throw InvalidSpec("unknown degeneration profile '" + name + "'");
    if (result.kind == Kind::constant && !(result.rate > 0 && result.rate <= 1))
        throw InvalidSpec("constant profile needs a value in (0, 1]");
    if (result.kind != Kind::constant && !(result.rate >= 0))
        throw InvalidSpec("profile rate must be non-negative");
    return result;
}

std::string DegenerationProfile::describe() const
{
    char const* names[] = {"constant", "exp_linear", "exp_sqrt", "power"};
    std::ostringstream os;
    os << names[static_cast<int>(kind)] << ":" << rate;
    return os.str();
}

//---------------------------------------------------------------------------//
// MapSequence
//---------------------------------------------------------------------------//

struct MapSequence::Cache
{
    std::mutex lock;
    std::deque<std::unique_ptr<HomogeneousMap>> maps;
};

MapSequence::MapSequence(Kind kind, int degree)
    : kind_(kind), degree_(degree), cache_(std::make_unique<Cache>())
{
}

MapSequence::MapSequence(MapSequence&&) noexcept = default;
MapSequence& MapSequence::operator=(MapSequence&&) noexcept = default;
MapSequence::~MapSequence() = default;

MapSequence MapSequence::constant(HomogeneousMap f)
{
    MapSequence seq(Kind::constant, f.degree());
    seq.maps_.push_back(std::move(f));
    return seq;
}

MapSequence MapSequence::perturbed(HomogeneousMap base, double amplitude,
                                   std::uint64_t seed)
{
    if (!(amplitude >= 0) || !std::isfinite(amplitude))
        throw InvalidSpec("perturbation amplitude must be finite and >= 0");
    MapSequence seq(Kind::perturbed, base.degree());
    seq.maps_.push_back(std::move(base));
    seq.amplitude_ = amplitude;
    seq.seed_ = seed;
    return seq;
}

MapSequence MapSequence::explicit_list(std::vector<HomogeneousMap> maps)
{
    if (maps.empty())
        throw InvalidSpec("explicit sequence needs at least one map");
    int d = maps.front().degree();
    for (auto const& f : maps)
    {
        if (f.degree() != d)
            throw InvalidSpec("explicit sequence mixes degrees");
    }
    MapSequence seq(Kind::explicit_list, d);
    seq.maps_ = std::move(maps);
    return seq;
}

MapSequence MapSequence::degenerating(DegenerationProfile profile, int degree)
{
    if (degree < 2 || degree > max_degree)
        throw InvalidSpec("degree out of range");
    MapSequence seq(Kind::degenerating, degree);
    seq.profile_ = profile;
    return seq;
}

bool MapSequence::is_autonomous() const
{
    switch (kind_)
    {
        case Kind::constant: return true;
        case Kind::explicit_list: return maps_.size() == 1;
        case Kind::perturbed: return amplitude_ == 0.0;
        case Kind::degenerating:
            return profile_.kind == DegenerationProfile::Kind::constant
                   || profile_.rate == 0.0;
    }
    return false;
}

HomogeneousMap MapSequence::realize(std::size_t j) const
{
    if (kind_ == Kind::perturbed)
    {
        auto const& base = maps_.front();
        CounterRng rng(seed_, StreamId::perturbation, j);
        auto draw = [&] {
            double r = amplitude_ * std::sqrt(rng.uniform());
            double angle = 2 * std::numbers::pi * rng.uniform();
            return std::polar(r, angle);
        };
        std::vector<complex> p(base.p().begin(), base.p().end());
        std::vector<complex> q(base.q().begin(), base.q().end());
        for (auto& c : p)
            c += draw();
        for (auto& c : q)
            c += draw();
        return HomogeneousMap(std::move(p), std::move(q));
    }
    // Degenerating family: dist = 1 - t for P = z0^d, Q = t z0^d + (1-t) z1^d
    return degenerating_map(degree_, 1.0 - profile_.dist(j));
}

HomogeneousMap const& MapSequence::map(std::size_t j) const
{
    if (kind_ == Kind::constant)
        return maps_.front();
    if (kind_ == Kind::explicit_list)
        return maps_[j % maps_.size()];
    std::lock_guard<std::mutex> guard(cache_->lock);
    auto& maps = cache_->maps;
    if (maps.size() <= j)
        maps.resize(j + 1);
    if (!maps[j])
        maps[j] = std::make_unique<HomogeneousMap>(realize(j));
    return *maps[j];
}

std::string MapSequence::describe() const
{
    std::ostringstream os;
    switch (kind_)
    {
        case Kind::constant: os << "constant(" << maps_[0].describe() << ")"; break;
        case Kind::perturbed:
            os << "perturbed(" << maps_[0].describe() << ", amplitude "
               << amplitude_ << ", seed " << seed_ << ")";
            break;
        case Kind::explicit_list:
            os << "explicit(" << maps_.size() << " maps)";
            break;
        case Kind::degenerating:
            os << "degenerating(" << profile_.describe() << ", degree "
               << degree_ << ")";
            break;
    }
    return os.str();
}

//---------------------------------------------------------------------------//
// Admissibility
//---------------------------------------------------------------------------//

AdmissibilityReport check_admissibility(MapSequence const& seq,
                                        std::size_t n_max, double tolerance)
{
    if (n_max < 10)
        throw InvalidSpec("admissibility needs n_max >= 10");
    AdmissibilityReport report;
    report.tolerance = tolerance;
    report.dists.resize(n_max);
    report.cesaro_averages.resize(n_max);
    double running = 0.0;
    for (std::size_t j = 0; j < n_max; ++j)
    {
        report.dists[j] = seq.map(j).dist_to_degenerate();
        running += std::log(report.dists[j]);
        report.cesaro_averages[j] = running / static_cast<double>(j + 1);
    }
    for (std::size_t j = 1; j < n_max; ++j)
    {
        report.per_index_rates.push_back(std::log(report.dists[j])
                                         / static_cast<double>(j));
    }

    // (A): Cesaro averages c_n ~ a + b sqrt(n) over the last half.
    {
        std::vector<double> x, y;
        for (std::size_t n = n_max / 2 + 1; n <= n_max; ++n)
        {
            x.push_back(std::sqrt(static_cast<double>(n)));
            y.push_back(report.cesaro_averages[n - 1]);
        }
        auto fit = linear_fit(x, y);
        report.cesaro_drift = fit.slope;
        report.verdict_a = !(fit.slope < -tolerance);
        if (report.verdict_a)
        {
            double lowest = std::numeric_limits<double>::infinity();
            for (double xi : x)
                lowest = std::min(lowest, fit.intercept + fit.slope * xi);
            report.fitted_liminf = lowest;
        }
        else
        {
            report.fitted_liminf = -std::numeric_limits<double>::infinity();
        }
    }
    // (B): (1/j) log dist_j ~ a + b / sqrt(j) over the last half.
    {
        std::vector<double> x, y;
        std::size_t first = std::max<std::size_t>(1, n_max / 2);
        for (std::size_t j = first; j < n_max; ++j)
        {
            x.push_back(1.0 / std::sqrt(static_cast<double>(j)));
            y.push_back(report.per_index_rates[j - 1]);
        }
        auto fit = linear_fit(x, y);
        report.fitted_limit = fit.intercept;
        report.verdict_b = std::abs(fit.intercept) <= tolerance;
    }
    return report;
}

//---------------------------------------------------------------------------//
// Lyapunov exponent
//---------------------------------------------------------------------------//

std::vector<ProjectivePoint> sphere_grid(std::size_t count)
{
    if (count == 0)
        return {};
    std::size_t rings = static_cast<std::size_t>(
        std::sqrt(static_cast<double>(count) * std::numbers::pi / 4));
    rings = std::max<std::size_t>(rings, 3);
    if (rings % 2 == 0)
        ++rings;
    std::vector<double> lat(rings);
    double total = 0.0;
    for (std::size_t i = 0; i < rings; ++i)
    {
        lat[i] = -std::numbers::pi / 2
                 + std::numbers::pi * (static_cast<double>(i) + 0.5)
                       / static_cast<double>(rings);
        total += std::cos(lat[i]);
    }
    std::vector<ProjectivePoint> grid;
    grid.reserve(count + rings);
    for (std::size_t i = 0; i < rings; ++i)
    {
        double c = std::cos(lat[i]);
        auto m = static_cast<std::size_t>(
            std::max(1.0, std::round(static_cast<double>(count) * c / total)));
        double offset = (i % 2) ? 0.5 : 0.0;
        for (std::size_t k = 0; k < m; ++k)
        {
            double lon = 2 * std::numbers::pi
                         * (static_cast<double>(k) + offset)
                         / static_cast<double>(m);
            grid.push_back(from_sphere(
                {c * std::cos(lon), c * std::sin(lon), std::sin(lat[i])}));
        }
    }
    return grid;
}

namespace
{
// log |D_x F_n| via the chain rule along the forward orbit
double log_chain(MapSequence const& seq, std::size_t n, ProjectivePoint x)
{
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j)
    {
        auto const& f = seq.map(j);
        double dn = derivative_norm(f, x);
        if (!(dn > 0.0))
            return -std::numeric_limits<double>::infinity();
        total += std::log(dn);
        x = evaluate(f, x);
    }
    return total;
}

template <class F>
double maximize(std::vector<ProjectivePoint> const& grid, F&& objective,
                double spacing)
{
    constexpr std::size_t candidates = 8;
    std::vector<std::pair<double, std::size_t>> scored(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
        scored[i] = {objective(grid[i]), i};
    std::size_t keep = std::min(candidates, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + keep, scored.end(),
                      [](auto const& l, auto const& r) { return l.first > r.first; });
    double best = scored.front().first;
    for (std::size_t c = 0; c < keep; ++c)
    {
        ProjectivePoint x = grid[scored[c].second];
        double value = scored[c].first;
        double step = spacing;
        while (step > 1e-9)
        {
            bool improved = false;
            for (int dir = 0; dir < 8; ++dir)
            {
                auto y = sphere_step(x, step, dir * std::numbers::pi / 4);
                double v = objective(y);
                if (v > value)
                {
                    value = v;
                    x = y;
                    improved = true;
                }
            }
            if (!improved)
                step /= 2;
        }
        best = std::max(best, value);
    }
    return best;
}
}  // namespace

LyapunovEstimate topological_lyapunov(MapSequence const& seq, std::size_t n,
                                      std::size_t grid_size)
{
    if (n < 1)
        throw InvalidSpec("Lyapunov estimate needs n >= 1");
    auto grid = sphere_grid(grid_size);
    double spacing = 2.0 / std::sqrt(static_cast<double>(grid.size()));

    LyapunovEstimate result;
    result.n = n;
    result.grid_size = grid.size();
    double best = maximize(
        grid, [&](ProjectivePoint const& x) { return log_chain(seq, n, x); },
        spacing);
    result.estimate = best / static_cast<double>(n);

    double trend = 0.0;
    double single = 0.0;
    for (std::size_t j = 0; j < n; ++j)
    {
        if (j == 0 || !seq.is_autonomous())
        {
            auto const& f = seq.map(j);
            single = maximize(
                grid,
                [&](ProjectivePoint const& x) {
                    double dn = derivative_norm(f, x);
                    return dn > 0 ? std::log(dn)
                                  : -std::numeric_limits<double>::infinity();
                },
                spacing);
        }
        trend += single;
    }
    result.upper_trend = trend / static_cast<double>(n);
    return result;
}

}  // namespace greenlab
