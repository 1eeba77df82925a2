#include "greenlab/transfer.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "greenlab/errors.hpp"
#include "greenlab/parallel.hpp"
#include "greenlab/preimage.hpp"
#include "greenlab/rng.hpp"
#include "greenlab/stats.hpp"

namespace greenlab
{
double apply_P(HomogeneousMap const& f, Observable const& psi,
               ProjectivePoint const& x)
{
    auto fiber = preimages(f, x);
    double total = 0.0;
    for (auto const& y : fiber.points)
        total += y.multiplicity * psi(y.point);
    return total / f.degree();
}

bool TransferMode::uses_full(int degree, std::size_t n) const
{
    if (kind == Kind::full)
        return true;
    if (kind == Kind::sampled)
        return false;
    return std::pow(static_cast<double>(degree), static_cast<double>(n))
           <= static_cast<double>(switch_leaves);
}

double apply_composed_full(MapSequence const& seq, Observable const& psi,
                           ProjectivePoint const& x, std::size_t n,
                           std::size_t start)
{
    if (n == 0)
        return psi(x);
    auto tree = preimage_tree(seq, x, static_cast<int>(n), TreeMode::full(),
                              start);
    double total = 0.0;
    for (auto const& leaf : tree.leaves())
        total += static_cast<double>(leaf.multiplicity) * psi(leaf.point);
    return total / std::pow(static_cast<double>(seq.degree()),
                            static_cast<double>(n));
}

TransferEvaluation apply_composed(MapSequence const& seq, Observable const& psi,
                                  std::vector<ProjectivePoint> const& points,
                                  std::size_t n, TransferMode mode,
                                  std::size_t start)
{
    TransferEvaluation out;
    out.observable = psi.name();
    out.n = n;
    out.points = points;
    out.full = n == 0 || mode.uses_full(seq.degree(), n);
    out.values.resize(points.size());
    out.stderrs.assign(points.size(), 0.0);
    if (!out.full && mode.paths < 2)
        throw InvalidSpec("sampled transfer evaluation needs >= 2 paths");
    parallel_for(
        points.size(),
        [&](std::size_t i) {
            if (out.full)
            {
                out.values[i] = apply_composed_full(seq, psi, points[i], n, start);
                return;
            }
            std::vector<double> leaf_values(mode.paths);
            std::uint64_t point_seed = derive_seed(
                mode.seed, static_cast<std::uint64_t>(StreamId::transfer_sampling), i);
            for (std::uint64_t path = 0; path < mode.paths; ++path)
            {
                CounterRng rng(point_seed, StreamId::transfer_sampling, path);
                leaf_values[path] = psi(backward_orbit_sample(
                    seq, points[i], static_cast<int>(n), rng, start));
            }
            auto e = mean_estimate(leaf_values);
            out.values[i] = e.value;
            out.stderrs[i] = e.stderr_;
        },
        out.full ? 64 : 1);
    return out;
}

//---------------------------------------------------------------------------//

DecayReport decay_report(MapSequence const& seq, Observable const& psi,
                         std::vector<std::size_t> const& ns,
                         DecayOptions const& options, double rate_factor)
{
    if (ns.empty())
        throw InvalidSpec("decay report needs at least one n");
    if (!(options.q >= 1.0))
        throw InvalidSpec("norm exponent q must be >= 1");
    ProjectivePoint base = options.base_set ? options.base : default_base();
    int const d = seq.degree();

    DecayReport r;
    r.observable = psi.name();
    r.regularity = to_string(psi.regularity());
    r.q = options.q;
    r.rate_factor = rate_factor;
    r.theoretical_floor = psi.decay_floor(d);
    r.resolution_floor = std::pow(static_cast<double>(d),
                                  -static_cast<double>(options.depth))
                         * psi.norm_surrogate();

    if (options.center)
    {
        std::size_t m = options.centering_tree_depth;
        auto cloud = sample_equilibrium(
            seq, options.start + m, options.depth, options.centering_count,
            base, derive_seed(options.seed, static_cast<std::uint64_t>(StreamId::centering), 0));
        r.centering = integrate(cloud, [&](ProjectivePoint const& x) {
            return apply_composed_full(seq, psi, x, m, options.start);
        });
    }
    r.noise_floor = std::max(3.0 * r.centering.stderr_, r.resolution_floor);

    for (std::size_t n : ns)
    {
        auto cloud = sample_equilibrium(seq, options.start + n, options.depth,
                                        options.cloud_count, base,
                                        options.seed);
        TransferMode mode = options.mode;
        mode.seed = derive_seed(options.seed, n, 0);
        auto eval = apply_composed(seq, psi, cloud.points, n, mode,
                                   options.start);
        std::size_t count = cloud.size();
        std::vector<double> abs1(count), sq(count), absq(count);
        for (std::size_t i = 0; i < count; ++i)
        {
            double v = eval.values[i] - r.centering.value;
            abs1[i] = std::abs(v);
            sq[i] = v * v;
            absq[i] = std::pow(std::abs(v), options.q);
        }
        auto e1 = mean_estimate(abs1);
        r.ns.push_back(n);
        r.l1.push_back(e1.value);
        r.l1_stderr.push_back(e1.stderr_);
        r.l2.push_back(std::sqrt(mean(sq)));
        r.lq.push_back(std::pow(mean(absq), 1.0 / options.q));
        r.censored.push_back(!(r.lq.back() > r.noise_floor));
    }

    std::vector<double> x, y;
    for (std::size_t i = 0; i < r.ns.size(); ++i)
    {
        if (!r.censored[i])
        {
            x.push_back(static_cast<double>(r.ns[i]));
            y.push_back(-std::log(r.lq[i]));
        }
    }
    r.fitted_points = x.size();
    r.vacuous = x.empty();
    if (x.size() >= 2)
    {
        auto fit = linear_fit(x, y);
        r.fitted_rate = fit.slope;
        r.fit_r_squared = fit.r_squared;
    }
    r.verdict = r.vacuous
                || (r.fitted_points >= 5
                    && r.fitted_rate >= rate_factor * r.theoretical_floor);
    return r;
}

ExactnessReport exactness_check(MapSequence const& seq, Observable const& psi,
                                std::vector<std::size_t> const& ns,
                                DecayOptions const& options,
                                double ratio_limit)
{
    ExactnessReport e;
    e.decay = decay_report(seq, psi, ns, options);
    e.ratio_limit = ratio_limit;
    auto const& l1 = e.decay.l1;
    e.ratio = l1.front() > 0 ? l1.back() / l1.front() : 0.0;
    e.monotone = true;
    for (std::size_t i = 2; i + 1 < l1.size(); ++i)
    {
        if (e.decay.censored[i + 1])
            continue;
        double slack = 3.0 * std::hypot(e.decay.l1_stderr[i],
                                        e.decay.l1_stderr[i + 1]);
        if (!(l1[i + 1] < l1[i] + slack))
            e.monotone = false;
    }
    e.verdict = e.decay.vacuous || (e.monotone && e.ratio <= ratio_limit);
    return e;
}

void to_json(nlohmann::json& j, DecayReport const& r)
{
    j = nlohmann::json{{"observable", r.observable},
                       {"regularity", r.regularity},
                       {"n", r.ns},
                       {"l1", r.l1},
                       {"l2", r.l2},
                       {"lq", r.lq},
                       {"q", r.q},
                       {"l1_stderr", r.l1_stderr},
                       {"censored", r.censored},
                       {"centering", r.centering},
                       {"noise_floor", r.noise_floor},
                       {"resolution_floor", r.resolution_floor},
                       {"fitted_rate", r.fitted_rate},
                       {"fit_r_squared", r.fit_r_squared},
                       {"fitted_points", r.fitted_points},
                       {"theoretical_floor", r.theoretical_floor},
                       {"rate_factor", r.rate_factor},
                       {"vacuous", r.vacuous},
                       {"pass", r.verdict}};
}

}  // namespace greenlab
