#include "greenlab/measure.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "greenlab/errors.hpp"
#include "greenlab/parallel.hpp"
#include "greenlab/preimage.hpp"
#include "greenlab/rng.hpp"
#include "greenlab/stats.hpp"
#include "greenlab/transfer.hpp"

namespace greenlab
{
ProjectivePoint default_base()
{
    return from_affine({0.4, 0.7});
}

void check_base(MapSequence const& seq, std::size_t tail,
                ProjectivePoint const& base)
{
    auto tree = preimage_tree(seq, base, 3, TreeMode::full(), tail);
    auto const& leaves = tree.leaves();
    for (auto const& leaf : leaves)
    {
        if (chordal_dist(leaf.point, leaves.front().point) > root_cluster_radius)
            return;
    }
    throw ExceptionalBase("base " + to_string(base)
                          + " has a single pullback under the first maps");
}

EmpiricalMeasure sample_equilibrium(MapSequence const& seq, std::size_t tail,
                                    std::size_t depth, std::size_t count,
                                    ProjectivePoint const& base,
                                    std::uint64_t seed)
{
    if (depth < 1)
        throw InvalidSpec("sampling depth must be at least 1");
    check_base(seq, tail, base);
    EmpiricalMeasure m;
    m.points.resize(count);
    m.weights.assign(count, count ? 1.0 / static_cast<double>(count) : 0.0);
    m.provenance = {tail, depth, count, base, seed};
    std::uint64_t tail_seed = derive_seed(seed, static_cast<std::uint64_t>(StreamId::measure), tail);
    parallel_for(count, [&](std::size_t i) {
        CounterRng rng(tail_seed, StreamId::measure, i);
        m.points[i] = backward_orbit_sample(seq, base, static_cast<int>(depth),
                                            rng, tail);
    });
    return m;
}

IntegralEstimate integrate(
    EmpiricalMeasure const& m,
    std::function<double(ProjectivePoint const&)> const& fn)
{
    std::vector<double> values(m.size());
    parallel_for(m.size(), [&](std::size_t i) { values[i] = fn(m.points[i]); });
    IntegralEstimate e;
    e.count = m.size();
    if (m.size() == 0)
        return e;
    e.value = weighted_mean(values, m.weights);
    std::vector<double> dev(m.size());
    for (std::size_t i = 0; i < m.size(); ++i)
        dev[i] = m.weights[i] * m.weights[i] * (values[i] - e.value)
                 * (values[i] - e.value);
    // Equal weights reduce this to the sample sd / sqrt(count).
    double n = static_cast<double>(m.size());
    e.stderr_ = n > 1 ? std::sqrt(pairwise_sum(dev) * n / (n - 1)) : 0.0;
    return e;
}

IntegralEstimate integrate(EmpiricalMeasure const& m, Observable const& psi)
{
    if (psi.is_constant())
        return {psi.constant_value(), 0.0, m.size()};
    return integrate(m, [&psi](ProjectivePoint const& p) { return psi(p); });
}

bool agree(IntegralEstimate const& a, IntegralEstimate const& b, double k)
{
    double diff = std::abs(a.value - b.value);
    double se = std::hypot(a.stderr_, b.stderr_);
    if (se == 0.0)
        return diff <= 1e-12 * std::max(1.0, std::abs(a.value));
    return diff <= k * se;
}

InvarianceReport check_invariance(MapSequence const& seq, std::size_t j,
                                  Observable const& psi,
                                  Observable const& psi_prime,
                                  std::size_t count, std::size_t depth,
                                  ProjectivePoint const& base,
                                  std::uint64_t seed)
{
    if (j < 1)
        throw InvalidSpec("invariance check needs j >= 1");
    InvarianceReport r;
    r.j = j;
    auto previous = sample_equilibrium(seq, j - 1, depth, count, base, seed);
    auto current = sample_equilibrium(seq, j, depth, count, base, seed);
    auto const& f = seq.map(j - 1);

    r.push_lhs = integrate(previous, [&](ProjectivePoint const& p) {
        return psi(evaluate(f, p));
    });
    r.push_rhs = integrate(current, psi);
    r.push_pass = agree(r.push_lhs, r.push_rhs);

    r.adjoint_lhs = integrate(current, [&](ProjectivePoint const& x) {
        return apply_P(f, psi_prime, x);
    });
    r.adjoint_rhs = integrate(previous, psi_prime);
    r.adjoint_pass = agree(r.adjoint_lhs, r.adjoint_rhs);
    return r;
}

void to_json(nlohmann::json& j, MeasureProvenance const& p)
{
    j = nlohmann::json{{"tail", p.tail},   {"depth", p.depth},
                       {"count", p.count}, {"base", p.base},
                       {"seed", p.seed}};
}

void to_json(nlohmann::json& j, IntegralEstimate const& e)
{
    j = nlohmann::json{
        {"value", e.value}, {"stderr", e.stderr_}, {"count", e.count}};
}

}  // namespace greenlab
