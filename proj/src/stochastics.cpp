#include "greenlab/stochastics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "greenlab/errors.hpp"
#include "greenlab/parallel.hpp"
#include "greenlab/rng.hpp"
#include "greenlab/stats.hpp"
#include "greenlab/transfer.hpp"

namespace greenlab
{
namespace
{
constexpr std::uint64_t stream(StreamId id)
{
    return static_cast<std::uint64_t>(id);
}

// Paths per accumulation block of the centering ladder
constexpr std::size_t ladder_block = 256;

// Standard deviation below which a Birkhoff sum counts as degenerate
constexpr double variance_noise_floor = 1e-9;

double sample_sd(std::span<double const> values)
{
    return std::sqrt(sample_variance(values));
}

// Smallest k with P(Bin(n, p) > k) < alpha
std::size_t binomial_allowance(std::size_t n, double p, double alpha)
{
    double pmf = std::pow(1 - p, static_cast<double>(n));
    double cdf = pmf;
    std::size_t k = 0;
    while (1 - cdf >= alpha && k < n)
    {
        pmf *= static_cast<double>(n - k) / static_cast<double>(k + 1) * p
               / (1 - p);
        cdf += pmf;
        ++k;
    }
    return k;
}

std::vector<double> row_increments(ObservableSequence const& psis,
                                   CenteringTable const& centering,
                                   std::vector<ProjectivePoint> const& nodes,
                                   std::size_t n)
{
    std::vector<double> x(n);
    for (std::size_t j = 0; j < n; ++j)
    {
        auto const& psi = psis.at(j);
        x[j] = psi.is_constant() ? psi.constant_value() - centering.at(j)
                                 : psi(nodes[j]) - centering.at(j);
    }
    return x;
}
}  // namespace

//---------------------------------------------------------------------------//

bool ObservableSequence::all_constant() const
{
    return std::all_of(list.begin(), list.end(),
                       [](Observable const& o) { return o.is_constant(); });
}

ObservableSequence ObservableSequence::power(int r) const
{
    if (r < 1)
        throw InvalidSpec("power must be at least 1");
    if (r == 1)
        return *this;
    std::vector<Observable> out;
    for (auto const& psi : list)
    {
        if (psi.is_constant())
        {
            out.push_back(Observable::constant(std::pow(psi.constant_value(), r)));
            continue;
        }
        auto fn = [psi, r](ProjectivePoint const& p) {
            return std::pow(psi(p), r);
        };
        out.emplace_back("(" + psi.name() + ")^" + std::to_string(r), fn,
                         psi.regularity(), psi.alpha(), psi.poles());
    }
    return ObservableSequence(std::move(out));
}

CenteringTable compute_centering(MapSequence const& seq,
                                 ObservableSequence const& psis, std::size_t n,
                                 std::size_t count,
                                 SamplingOptions const& options)
{
    if (psis.size() == 0)
        throw InvalidSpec("empty observable sequence");
    CenteringTable table;
    table.values.resize(n);
    if (n == 0)
        return table;
    if (psis.all_constant())
    {
        for (std::size_t j = 0; j < n; ++j)
            table.values[j] = {psis.at(j).constant_value(), 0.0, count};
        table.shared = seq.is_autonomous() && psis.size() == 1;
        return table;
    }
    if (count < 2)
        throw InvalidSpec("centering needs at least two samples");

    if (seq.is_autonomous())
    {
        auto cloud = sample_equilibrium(
            seq, 0, options.depth, count, options.base,
            derive_seed(options.seed, stream(StreamId::centering), 0));
        std::size_t distinct = std::min(n, psis.size());
        for (std::size_t j = 0; j < distinct; ++j)
            table.values[j] = integrate(cloud, psis.at(j));
        for (std::size_t j = distinct; j < n; ++j)
            table.values[j] = table.values[j % psis.size()];
        table.shared = psis.size() == 1;
        return table;
    }

    // Ladder: node j of a path from the base at depth n + depth samples mu_j.
    check_base(seq, 0, options.base);
    std::uint64_t ladder_seed =
        derive_seed(options.seed, stream(StreamId::centering), 1);
    int length = static_cast<int>(n + options.depth);
    std::vector<double> sum(n, 0.0), sumsq(n, 0.0);
    std::vector<double> block;
    for (std::size_t begin = 0; begin < count; begin += ladder_block)
    {
        std::size_t rows = std::min(ladder_block, count - begin);
        block.assign(rows * n, 0.0);
        parallel_for(
            rows,
            [&](std::size_t r) {
                CounterRng rng(ladder_seed, StreamId::centering, begin + r);
                auto path = backward_path(seq, options.base, 0, length, rng);
                for (std::size_t j = 0; j < n; ++j)
                    block[r * n + j] = psis.at(j)(path.nodes[j]);
            },
            4);
        for (std::size_t r = 0; r < rows; ++r)
        {
            for (std::size_t j = 0; j < n; ++j)
            {
                double v = block[r * n + j];
                sum[j] += v;
                sumsq[j] += v * v;
            }
        }
    }
    double c = static_cast<double>(count);
    for (std::size_t j = 0; j < n; ++j)
    {
        auto const& psi = psis.at(j);
        if (psi.is_constant())
        {
            table.values[j] = {psi.constant_value(), 0.0, count};
            continue;
        }
        double m = sum[j] / c;
        double var = std::max(0.0, (sumsq[j] - c * m * m) / (c - 1));
        table.values[j] = {m, std::sqrt(var / c), count};
    }
    return table;
}

//---------------------------------------------------------------------------//

TrajectoryBundle sample_trajectories(MapSequence const& seq, std::size_t n_max,
                                     std::size_t count,
                                     SamplingOptions const& options,
                                     bool keep_fibers)
{
    check_base(seq, 0, options.base);
    TrajectoryBundle b;
    b.count = count;
    b.n_max = n_max;
    b.seed = options.seed;
    b.points.resize(count * (n_max + 1));
    if (keep_fibers)
        b.fibers.resize(count * n_max);
    int length = static_cast<int>(n_max + options.depth);
    parallel_for(
        count,
        [&](std::size_t i) {
            CounterRng rng(options.seed, StreamId::trajectories, i);
            auto path = backward_path(seq, options.base, 0, length, rng,
                                      keep_fibers);
            for (std::size_t j = 0; j <= n_max; ++j)
                b.points[i * (n_max + 1) + j] = path.nodes[j];
            if (keep_fibers)
            {
                for (std::size_t j = 0; j < n_max; ++j)
                    b.fibers[i * n_max + j] = std::move(path.fibers[j]);
            }
        },
        16);
    return b;
}

std::vector<double> BirkhoffSample::column(std::size_t n) const
{
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i)
        out[i] = sum(i, n);
    return out;
}

namespace
{
BirkhoffSample empty_sample(std::size_t count, std::size_t n_max,
                            std::uint64_t seed, CenteringTable const& centering)
{
    BirkhoffSample s;
    s.count = count;
    s.n_max = n_max;
    s.seed = seed;
    s.centering.resize(n_max);
    for (std::size_t j = 0; j < n_max; ++j)
        s.centering[j] = centering.at(j);
    s.increments.assign(count * n_max, 0.0);
    s.sums.assign(count * (n_max + 1), 0.0);
    return s;
}

void fill_row(BirkhoffSample& s, std::size_t i, std::vector<double> const& x)
{
    double acc = 0.0;
    s.sums[i * (s.n_max + 1)] = 0.0;
    for (std::size_t j = 0; j < s.n_max; ++j)
    {
        s.increments[i * s.n_max + j] = x[j];
        acc += x[j];
        s.sums[i * (s.n_max + 1) + j + 1] = acc;
    }
}
}  // namespace

BirkhoffSample birkhoff_sums(TrajectoryBundle const& traj,
                             ObservableSequence const& psis,
                             CenteringTable const& centering)
{
    if (centering.values.size() < traj.n_max)
        throw InvalidSpec("centering table shorter than the trajectories");
    auto s = empty_sample(traj.count, traj.n_max, traj.seed, centering);
    parallel_for(traj.count, [&](std::size_t i) {
        std::vector<double> x(traj.n_max);
        for (std::size_t j = 0; j < traj.n_max; ++j)
        {
            auto const& psi = psis.at(j);
            x[j] = psi.is_constant()
                       ? psi.constant_value() - centering.at(j)
                       : psi(traj.point(i, j)) - centering.at(j);
        }
        fill_row(s, i, x);
    });
    return s;
}

BirkhoffSample birkhoff_sums(MapSequence const& seq,
                             ObservableSequence const& psis, std::size_t n_max,
                             std::size_t count, std::size_t centering_count,
                             SamplingOptions const& options)
{
    auto centering =
        compute_centering(seq, psis, n_max, centering_count, options);
    check_base(seq, 0, options.base);
    auto s = empty_sample(count, n_max, options.seed, centering);
    int length = static_cast<int>(n_max + options.depth);
    parallel_for(
        count,
        [&](std::size_t i) {
            CounterRng rng(options.seed, StreamId::trajectories, i);
            auto path = backward_path(seq, options.base, 0, length, rng);
            fill_row(s, i,
                     row_increments(psis, centering, path.nodes, n_max));
        },
        16);
    return s;
}

//---------------------------------------------------------------------------//

VarianceCurve variance_curve(BirkhoffSample const& b, double epsilon,
                             double tolerance)
{
    VarianceCurve c;
    c.epsilon = epsilon;
    c.tolerance = tolerance;
    std::vector<double> lx, ly;
    for (std::size_t n = 1; n <= b.n_max; ++n)
    {
        double v = sample_variance(b.column(n));
        c.ns.push_back(n);
        c.variance.push_back(v);
        if (n >= 2 && v > 0)
        {
            lx.push_back(std::log(static_cast<double>(n)));
            ly.push_back(std::log(v));
        }
    }
    if (lx.size() >= 2)
        c.growth_exponent = linear_fit(lx, ly).slope / 2;
    c.verdict = lx.size() >= 2
                && c.growth_exponent >= 0.25 + epsilon - tolerance;
    return c;
}

ErgodicReport ergodic_average_check(BirkhoffSample const& b, std::size_t n,
                                    double slack)
{
    if (n == 0 || 2 * n > b.n_max)
        throw InvalidSpec("ergodic check needs 0 < 2n <= n_max");
    auto l2 = [&](std::size_t m) {
        auto col = b.column(m);
        for (auto& v : col)
            v *= v;
        return std::sqrt(mean(col)) / static_cast<double>(m);
    };
    ErgodicReport r;
    r.n = n;
    r.norm_n = l2(n);
    r.norm_2n = l2(2 * n);
    // c is fitted at n from norm_n = c / sqrt(n)
    r.threshold = slack * r.norm_n / std::sqrt(2.0);
    r.decreasing = r.norm_2n < r.norm_n || r.norm_2n == 0.0;
    r.verdict = r.decreasing && r.norm_2n <= r.threshold;
    return r;
}

//---------------------------------------------------------------------------//

MixingReport mixing_check(MapSequence const& seq, Observable const& phi,
                          Observable const& psi,
                          std::vector<std::size_t> const& ns,
                          MixingOptions const& options)
{
    if (ns.empty())
        throw InvalidSpec("mixing check needs at least one n");
    if (options.count < 2)
        throw InvalidSpec("mixing check needs at least two trajectories");
    MixingReport r;
    r.ns = ns;
    r.p = options.p;
    r.psi_norm = psi.norm_surrogate();
    r.theoretical_floor = psi.decay_floor(seq.degree());
    std::size_t n_top = *std::max_element(ns.begin(), ns.end());
    auto traj = sample_trajectories(seq, n_top, options.count, options.sampling);
    std::size_t count = traj.count;

    std::vector<double> psi0(count);
    parallel_for(count,
                 [&](std::size_t i) { psi0[i] = psi(traj.point(i, 0)); });
    double psi_mean = mean(psi0);

    std::vector<double> fit_x, fit_y;
    for (std::size_t n : ns)
    {
        std::vector<double> phin(count), absp(count);
        parallel_for(count, [&](std::size_t i) {
            phin[i] = phi(traj.point(i, n));
            absp[i] = std::pow(std::abs(phin[i]), options.p);
        });
        r.phi_lp.push_back(std::pow(mean(absp), 1.0 / options.p));
        if (phi.is_constant() || psi.is_constant())
        {
            r.gap.push_back(0.0);
            r.gap_stderr.push_back(0.0);
        }
        else
        {
            double phi_mean = mean(phin);
            std::vector<double> joint(count), infl(count);
            for (std::size_t i = 0; i < count; ++i)
            {
                joint[i] = phin[i] * psi0[i];
                infl[i] = (phin[i] - phi_mean) * (psi0[i] - psi_mean);
            }
            r.gap.push_back(mean(joint) - phi_mean * psi_mean);
            r.gap_stderr.push_back(sample_sd(infl)
                                   / std::sqrt(static_cast<double>(count)));
        }
        if (std::abs(r.gap.back()) > 3 * r.gap_stderr.back()
            && r.gap.back() != 0.0)
        {
            fit_x.push_back(static_cast<double>(n));
            fit_y.push_back(-std::log(std::abs(r.gap.back())));
        }

        if (options.transfer_count > 0)
        {
            if (phi.is_constant() || psi.is_constant())
            {
                r.transfer_gap.push_back(0.0);
                r.transfer_stderr.push_back(0.0);
                continue;
            }
            auto cloud = sample_equilibrium(
                seq, n, options.sampling.depth, options.transfer_count,
                options.sampling.base,
                derive_seed(options.sampling.seed,
                            stream(StreamId::transfer_sampling), n));
            TransferMode mode;
            mode.seed = derive_seed(options.sampling.seed,
                                    stream(StreamId::transfer_sampling),
                                    n + 0x10000);
            auto eval = apply_composed(seq, psi, cloud.points, n, mode);
            std::vector<double> v(cloud.size());
            for (std::size_t i = 0; i < cloud.size(); ++i)
                v[i] = phi(cloud.points[i]) * (eval.values[i] - psi_mean);
            auto e = mean_estimate(v);
            r.transfer_gap.push_back(e.value);
            r.transfer_stderr.push_back(e.stderr_);
        }
    }
    r.fitted_points = fit_x.size();
    if (fit_x.size() >= 2)
        r.fitted_rate = linear_fit(fit_x, fit_y).slope;
    return r;
}

MulticorrelationReport multicorrelation_check(
    MapSequence const& seq, std::vector<Observable> const& psis,
    std::vector<std::size_t> const& times, std::size_t count,
    SamplingOptions const& options)
{
    if (psis.size() != times.size() || psis.size() < 2)
        throw InvalidSpec("multicorrelation needs matching lists of >= 2");
    if (!std::is_sorted(times.begin(), times.end()))
        throw InvalidSpec("multicorrelation times must be non-decreasing");
    if (count < 2)
        throw InvalidSpec("multicorrelation needs at least two trajectories");
    MulticorrelationReport r;
    r.times = times;
    auto traj = sample_trajectories(seq, times.back(), count, options);
    std::size_t k = psis.size();
    std::vector<std::vector<double>> vals(k, std::vector<double>(count));
    parallel_for(count, [&](std::size_t i) {
        for (std::size_t m = 0; m < k; ++m)
            vals[m][i] = psis[m](traj.point(i, times[m]));
    });
    std::vector<double> joint(count, 1.0), infl(count, 0.0);
    std::vector<double> means(k);
    for (std::size_t m = 0; m < k; ++m)
        means[m] = mean(vals[m]);
    r.product = 1.0;
    for (std::size_t m = 0; m < k; ++m)
        r.product *= means[m];
    for (std::size_t i = 0; i < count; ++i)
    {
        for (std::size_t m = 0; m < k; ++m)
            joint[i] *= vals[m][i];
        // Linearized error of joint - prod(means)
        double lin = joint[i];
        for (std::size_t m = 0; m < k; ++m)
        {
            double others = 1.0;
            for (std::size_t l = 0; l < k; ++l)
                if (l != m)
                    others *= means[l];
            lin -= others * vals[m][i];
        }
        infl[i] = lin;
    }
    auto je = mean_estimate(joint);
    r.joint = je.value;
    r.joint_stderr = je.stderr_;
    r.gap = r.joint - r.product;
    r.gap_stderr = sample_sd(infl) / std::sqrt(static_cast<double>(count));
    std::size_t min_gap = times.back() - times.front();
    for (std::size_t m = 1; m < k; ++m)
        min_gap = std::min(min_gap, times[m] - times[m - 1]);
    r.bound_scale = std::pow(static_cast<double>(seq.degree()),
                             -static_cast<double>(min_gap));
    for (auto const& psi : psis)
        r.bound_scale *= psi.norm_surrogate();
    return r;
}

//---------------------------------------------------------------------------//

SllnReport slln_check(MapSequence const& seq, Observable const& psi, int r,
                      double delta, std::size_t n_max, std::size_t count,
                      std::size_t centering_count,
                      SamplingOptions const& options, double threshold,
                      std::size_t lags)
{
    if (n_max < 16)
        throw InvalidSpec("slln check needs n_max >= 16");
    if (lags + 1 >= n_max)
        throw InvalidSpec("too many covariance lags for n_max");
    SllnReport rep;
    rep.r = r;
    rep.delta = delta;
    rep.threshold = threshold;
    auto powered = ObservableSequence(psi).power(r);
    auto b = birkhoff_sums(seq, powered, n_max, count, centering_count, options);

    rep.ns = {n_max / 4, n_max / 2, n_max};
    for (std::size_t n : rep.ns)
    {
        double nn = static_cast<double>(n);
        double scale = std::sqrt(nn) * std::pow(std::log(nn), 2 + delta);
        auto col = b.column(n);
        for (auto& v : col)
            v = std::abs(v) / scale;
        rep.q95.push_back(quantile(col, 0.95));
    }
    rep.decreasing = true;
    for (std::size_t k = 1; k < rep.q95.size(); ++k)
    {
        bool both_zero = rep.q95[k] == 0.0 && rep.q95[k - 1] == 0.0;
        if (!(rep.q95[k] < rep.q95[k - 1] || both_zero))
            rep.decreasing = false;
    }
    rep.verdict = rep.decreasing && rep.q95.back() < threshold;

    // Lag covariances averaged over the leading block of indices
    std::size_t span = std::min<std::size_t>(n_max - lags, 256);
    std::vector<double> fit_x, fit_y;
    for (std::size_t l = 1; l <= lags; ++l)
    {
        std::vector<double> covs(span);
        for (std::size_t j = 0; j < span; ++j)
        {
            std::vector<double> a(count), c(count);
            for (std::size_t i = 0; i < count; ++i)
            {
                a[i] = b.increment(i, j);
                c[i] = b.increment(i, j + l);
            }
            covs[j] = sample_covariance(a, c);
        }
        auto e = mean_estimate(covs);
        rep.lag_covariance.push_back(e.value);
        rep.lag_covariance_stderr.push_back(e.stderr_);
        if (std::abs(e.value) > 3 * e.stderr_ && e.value != 0.0)
        {
            fit_x.push_back(static_cast<double>(l));
            fit_y.push_back(-std::log(std::abs(e.value)));
        }
    }
    rep.covariance_points = fit_x.size();
    if (fit_x.size() >= 2)
        rep.covariance_rate = linear_fit(fit_x, fit_y).slope;
    return rep;
}

CltReport clt_test(BirkhoffSample const& b, std::vector<std::size_t> const& ns,
                   double threshold)
{
    if (ns.empty())
        throw InvalidSpec("clt test needs at least one n");
    CltReport r;
    r.ns = ns;
    r.threshold = threshold;
    r.ks_null_99 = ks_critical(b.count, 0.01);
    std::vector<double> last;
    for (std::size_t n : ns)
    {
        if (n == 0 || n > b.n_max)
            throw InvalidSpec("clt n outside the sampled range");
        auto col = b.column(n);
        double sd = sample_sd(col);
        if (!(sd > variance_noise_floor))
            throw DegenerateVariance("sigma_" + std::to_string(n)
                                     + " is at the noise floor");
        for (auto& v : col)
            v /= sd;
        r.sigma.push_back(sd);
        r.ks.push_back(ks_normal(col));
        last = std::move(col);
    }
    r.decreasing = true;
    for (std::size_t k = 1; k < r.ks.size(); ++k)
        if (!(r.ks[k] < r.ks[k - 1]))
            r.decreasing = false;
    r.verdict = r.decreasing && r.ks.back() < threshold;
    std::sort(last.begin(), last.end());
    for (int k = 1; k <= 99; ++k)
    {
        double p = k / 100.0;
        r.qq.emplace_back(quantile(last, p), normal_quantile(p));
    }
    return r;
}

//---------------------------------------------------------------------------//

LilReport lil_from_sums(std::vector<double> const& sums, std::size_t n_max,
                        std::size_t count)
{
    LilReport r;
    r.n_max = n_max;
    r.count = count;
    std::vector<double> sigma(n_max + 1, 0.0);
    std::vector<double> col(count);
    r.first_n = 0;
    for (std::size_t n = 1; n <= n_max; ++n)
    {
        for (std::size_t i = 0; i < count; ++i)
            col[i] = sums[i * (n_max + 1) + n];
        sigma[n] = sample_sd(col);
        if (r.first_n == 0 && sigma[n] >= std::exp(std::exp(1.0)))
            r.first_n = n;
    }
    if (r.first_n == 0)
    {
        r.degenerate = true;
        r.verdict = false;
        return r;
    }
    std::vector<double> ratios(count);
    for (std::size_t i = 0; i < count; ++i)
    {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t n = r.first_n; n <= n_max; ++n)
        {
            double s = sigma[n];
            double scale = s * std::sqrt(2 * std::log(std::log(s)));
            best = std::max(best, sums[i * (n_max + 1) + n] / scale);
        }
        ratios[i] = best;
    }
    r.median_ratio = quantile(ratios, 0.5);
    r.verdict = r.median_ratio >= r.lower && r.median_ratio <= r.upper;
    return r;
}

LilReport lil_check(MapSequence const& seq, Observable const& psi,
                    std::size_t n_max, std::size_t count,
                    std::size_t centering_count,
                    SamplingOptions const& options)
{
    auto b = birkhoff_sums(seq, ObservableSequence(psi), n_max, count,
                           centering_count, options);
    return lil_from_sums(b.sums, n_max, count);
}

LilReport lil_gaussian_selftest(std::size_t n_max, std::size_t count,
                                std::uint64_t seed)
{
    std::vector<double> sums(count * (n_max + 1), 0.0);
    parallel_for(count, [&](std::size_t i) {
        CounterRng rng(seed, StreamId::synthetic, i);
        double acc = 0.0;
        for (std::size_t n = 1; n <= n_max; ++n)
        {
            acc += rng.normal();
            sums[i * (n_max + 1) + n] = acc;
        }
    });
    return lil_from_sums(sums, n_max, count);
}

//---------------------------------------------------------------------------//

HFunction::HFunction(MapSequence const& seq, ObservableSequence const& psis,
                     CenteringTable const& centering, MartingaleOptions options)
    : seq_(seq), psis_(psis), centering_(centering), options_(options)
{
    if (options_.cap < 1)
        throw InvalidSpec("h cap must be at least 1");
}

double HFunction::centered(std::size_t j, ProjectivePoint const& x) const
{
    auto const& psi = psis_.at(j);
    if (psi.is_constant())
        return psi.constant_value() - centering_.at(j);
    return psi(x) - centering_.at(j);
}

HFunction::Value HFunction::operator()(std::size_t j, ProjectivePoint const& x,
                                       std::uint64_t key) const
{
    Value out;
    if (j == 0)
        return out;
    std::size_t m = std::min<std::size_t>(j, static_cast<std::size_t>(options_.cap));
    std::size_t start = j - m;
    auto tree = preimage_tree(seq_, x, static_cast<int>(m), TreeMode::full(),
                              start);
    for (std::size_t level = 1; level <= m; ++level)
    {
        std::size_t index = j - level;
        if (psis_.at(index).is_constant()
            && psis_.at(index).constant_value() == centering_.at(index))
            continue;
        for (auto const& node : tree.levels[level])
            out.value += tree.weight(static_cast<int>(level), node)
                         * centered(index, node.point);
    }
    if (start == 0 || options_.budget == 0)
        return out;

    // Sampled continuation below the full tree: leaf chosen by weight, then
    // a uniform backward path through f_{start-1}, ..., f_0.
    auto const& leaves = tree.leaves();
    std::vector<double> cumulative(leaves.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < leaves.size(); ++k)
    {
        acc += tree.weight(static_cast<int>(m), leaves[k]);
        cumulative[k] = acc;
    }
    std::vector<double> samples(options_.budget);
    std::uint64_t point_seed = derive_seed(
        options_.seed, stream(StreamId::h_continuation), mix64(key) ^ j);
    for (std::size_t b = 0; b < options_.budget; ++b)
    {
        CounterRng rng(point_seed, StreamId::h_continuation, b);
        double u = rng.uniform() * acc;
        std::size_t k = static_cast<std::size_t>(
            std::upper_bound(cumulative.begin(), cumulative.end(), u)
            - cumulative.begin());
        k = std::min(k, leaves.size() - 1);
        auto path = backward_path(seq_, leaves[k].point, 0,
                                  static_cast<int>(start), rng);
        double s = 0.0;
        for (std::size_t level = 0; level < start; ++level)
            s += centered(level, path.nodes[level]);
        samples[b] = s;
    }
    auto e = mean_estimate(samples);
    out.value += e.value;
    out.stderr_ = e.stderr_;
    return out;
}

double HFunction::truncation_bound() const
{
    if (options_.budget > 0)
        return 0.0;
    double surrogate = 0.0;
    double rate = std::numeric_limits<double>::infinity();
    for (auto const& psi : psis_.list)
    {
        surrogate = std::max(surrogate, psi.norm_surrogate());
        rate = std::min(rate, psi.decay_floor(seq_.degree()));
    }
    double q = std::exp(-rate);
    return surrogate * std::pow(q, options_.cap + 1) / (1 - q);
}

MartingaleDecomposition martingale_decompose(MapSequence const& seq,
                                             ObservableSequence const& psis,
                                             CenteringTable const& centering,
                                             TrajectoryBundle const& traj,
                                             BirkhoffSample const& b,
                                             MartingaleOptions const& options)
{
    if (traj.fibers.size() != traj.count * traj.n_max)
        throw InvalidSpec("martingale decomposition needs stored fibers");
    if (b.count != traj.count || b.n_max != traj.n_max)
        throw InvalidSpec("sums and trajectories do not match");
    HFunction h(seq, psis, centering, options);
    MartingaleDecomposition md;
    md.count = traj.count;
    md.n_max = traj.n_max;
    std::size_t n = traj.n_max;
    double d = static_cast<double>(seq.degree());
    md.h.assign(md.count * (n + 1), 0.0);
    md.u.assign(md.count * n, 0.0);
    md.conditional_variance.assign(md.count * n, 0.0);
    md.truncation_bound = h.truncation_bound();
    std::vector<double> h_err(md.count, 0.0), tele(md.count, 0.0);

    parallel_for(
        md.count,
        [&](std::size_t i) {
            double* hrow = &md.h[i * (n + 1)];
            std::vector<double> vals;
            for (std::size_t j = 0; j < n; ++j)
            {
                auto const& fiber = traj.fiber(i, j);
                auto const& zj = traj.point(i, j);
                vals.clear();
                double next = 0.0;
                for (std::size_t k = 0; k < fiber.points.size(); ++k)
                {
                    auto const& y = fiber.points[k];
                    double hy;
                    if (y.point == zj)
                        hy = hrow[j];
                    else
                    {
                        auto v = h(j, y.point, i * (n + 1) + j);
                        hy = v.value;
                        h_err[i] = std::max(h_err[i], v.stderr_);
                    }
                    vals.push_back(h.centered(j, y.point) + hy);
                    next += y.multiplicity * vals.back();
                }
                next /= d;
                hrow[j + 1] = next;
                double cv = 0.0;
                for (std::size_t k = 0; k < fiber.points.size(); ++k)
                    cv += fiber.points[k].multiplicity
                          * (vals[k] - next) * (vals[k] - next);
                md.conditional_variance[i * n + j] = cv / d;
                md.u[i * n + j] = b.increment(i, j) + hrow[j] - next;
            }
            double acc = 0.0;
            for (std::size_t m = 1; m <= n; ++m)
            {
                acc += md.u[i * n + m - 1];
                tele[i] = std::max(tele[i],
                                   std::abs(acc - (b.sum(i, m) - hrow[m])));
            }
        },
        4);

    md.h_stderr = *std::max_element(h_err.begin(), h_err.end());
    md.telescoping_error =
        md.count ? *std::max_element(tele.begin(), tele.end()) : 0.0;
    md.nu2.assign(n + 1, 0.0);
    std::vector<double> sq(md.count);
    for (std::size_t j = 0; j < n; ++j)
    {
        for (std::size_t i = 0; i < md.count; ++i)
            sq[i] = md.u_at(i, j) * md.u_at(i, j);
        md.nu2[j + 1] = md.nu2[j] + mean(sq);
    }
    return md;
}

IdentityReport defining_identity_check(MapSequence const& seq,
                                       ObservableSequence const& psis,
                                       CenteringTable const& centering,
                                       std::size_t j_max, std::size_t points,
                                       std::uint64_t seed, double tolerance)
{
    if (centering.values.size() < j_max + 1)
        throw InvalidSpec("centering table too short for the identity check");
    MartingaleOptions opts;
    opts.cap = static_cast<int>(j_max + 1);
    opts.budget = 0;
    HFunction h(seq, psis, centering, opts);
    IdentityReport r;
    r.tolerance = tolerance;
    double d = static_cast<double>(seq.degree());
    std::vector<ProjectivePoint> xs(points);
    for (std::size_t k = 0; k < points; ++k)
    {
        CounterRng rng(seed, StreamId::synthetic, k);
        xs[k] = random_point(rng);
    }
    for (std::size_t j = 0; j <= j_max; ++j)
    {
        std::vector<double> res(points);
        parallel_for(
            points,
            [&](std::size_t k) {
                auto fiber = preimages(seq.map(j), xs[k]);
                double lhs = 0.0;
                for (auto const& y : fiber.points)
                    lhs += y.multiplicity
                           * (h.centered(j, y.point) + h(j, y.point).value);
                lhs /= d;
                res[k] = std::abs(lhs - h(j + 1, xs[k]).value);
            },
            1);
        r.js.push_back(j);
        r.max_residual.push_back(
            points ? *std::max_element(res.begin(), res.end()) : 0.0);
    }
    r.verdict = std::all_of(r.max_residual.begin(), r.max_residual.end(),
                            [&](double v) { return v <= tolerance; });
    return r;
}

VarianceRelations variance_relations(MartingaleDecomposition const& md,
                                     BirkhoffSample const& b,
                                     std::size_t max_pair_index)
{
    VarianceRelations r;
    std::size_t n = md.n_max;
    std::size_t count = md.count;
    double rc = std::sqrt(static_cast<double>(count));
    std::vector<double> gap_se(n + 1, 0.0);
    for (std::size_t m = 1; m <= n; ++m)
    {
        auto col = b.column(m);
        double s_mean = mean(col);
        std::vector<double> hsq(count), w(count);
        for (std::size_t i = 0; i < count; ++i)
        {
            double h = md.h_at(i, m);
            hsq[i] = h * h;
            double usq = 0.0;
            for (std::size_t j = 0; j < m; ++j)
                usq += md.u_at(i, j) * md.u_at(i, j);
            w[i] = (col[i] - s_mean) * (col[i] - s_mean) - usq;
        }
        double sigma = sample_sd(col);
        double nu = std::sqrt(md.nu2[m]);
        double hl2 = std::sqrt(mean(hsq));
        std::vector<double> hcol(count);
        for (std::size_t i = 0; i < count; ++i)
            hcol[i] = md.h_at(i, m);
        double hsd = sample_sd(hcol);
        r.ns.push_back(m);
        r.sigma.push_back(sigma);
        r.nu.push_back(nu);
        r.h_l2.push_back(hl2);
        r.h_sd.push_back(hsd);
        // Delta-method standard error of |sigma - nu|
        gap_se[m] = sigma + nu > 0 ? sample_sd(w) / rc / (sigma + nu) : 0.0;
    }
    std::vector<double> gaps(r.ns.size());
    for (std::size_t k = 0; k < r.ns.size(); ++k)
        gaps[k] = std::abs(r.sigma[k] - r.nu[k]);
    r.sup_gap = gaps.empty() ? 0.0 : *std::max_element(gaps.begin(), gaps.end());
    r.sup_h = r.h_l2.empty() ? 0.0
                             : *std::max_element(r.h_l2.begin(), r.h_l2.end());

    std::size_t half = r.ns.size() / 2;
    if (r.ns.size() - half >= 3)
    {
        std::vector<double> x, g, z, hh;
        for (std::size_t k = half; k < r.ns.size(); ++k)
        {
            x.push_back(static_cast<double>(r.ns[k]));
            g.push_back(gaps[k]);
            double se = gap_se[r.ns[k]];
            z.push_back(se > 0 ? gaps[k] / se : 0.0);
            hh.push_back(r.h_sd[k]);
        }
        auto gf = linear_fit(x, g);
        auto zf = linear_fit(x, z);
        auto hf = linear_fit(x, hh);
        r.gap_slope = gf.slope;
        r.gap_slope_stderr = gf.slope_stderr;
        r.gap_z_slope = zf.slope;
        r.gap_z_slope_stderr = zf.slope_stderr;
        r.h_slope = hf.slope;
        r.h_slope_stderr = hf.slope_stderr;
    }
    // Later gaps may not exceed the early maximum beyond sampling noise and
    // the late-half slope of the standardized gap may not be resolved above
    // zero (raw gap noise itself grows like sqrt(n / count)). h_sd is
    // reported only: with varying maps each h_n sees a different window.
    double early_gap = 0.0;
    for (std::size_t k = 0; k < half; ++k)
        early_gap = std::max(early_gap, gaps[k]);
    bool bounded = half > 0;
    for (std::size_t k = half; k < r.ns.size() && bounded; ++k)
        if (gaps[k] > early_gap + 3 * gap_se[r.ns[k]] + 1e-12)
            bounded = false;
    bool trend = r.gap_z_slope <= 3 * r.gap_z_slope_stderr + 1e-12;
    r.verdict = bounded && trend;

    std::size_t top = std::min(n, max_pair_index);
    std::vector<double> prod(count);
    for (std::size_t a = 0; a < top; ++a)
    {
        for (std::size_t c = a + 1; c < top; ++c)
        {
            for (std::size_t i = 0; i < count; ++i)
                prod[i] = md.u_at(i, a) * md.u_at(i, c);
            auto e = mean_estimate(prod);
            ++r.pairs;
            if (e.stderr_ == 0.0)
                continue;
            double z = std::abs(e.value) / e.stderr_;
            r.max_abs_z = std::max(r.max_abs_z, z);
            if (z > 3.0)
                ++r.pairs_outside;
        }
    }
    r.pairs_allowed = binomial_allowance(r.pairs, 0.0027, 0.01);
    r.orthogonal = r.pairs_outside <= r.pairs_allowed;
    return r;
}

AsipReport asip_condition_check(MartingaleDecomposition const& md,
                                double gamma, double epsilon,
                                double tail_tolerance)
{
    double lower = (1 + 2 * epsilon) / (1 + 4 * epsilon);
    if (!(gamma > lower && gamma < 1))
        throw InvalidSpec("gamma must lie in ((1 + 2 eps) / (1 + 4 eps), 1)");
    AsipReport r;
    r.gamma = gamma;
    r.epsilon = epsilon;
    r.tail_tolerance = tail_tolerance;
    std::size_t n = md.n_max;
    if (n < 4)
        throw InvalidSpec("asip check needs n_max >= 4");

    std::vector<double> lx, ly;
    for (std::size_t m = 1; m <= n; ++m)
    {
        if (md.nu2[m] > 0)
        {
            lx.push_back(std::log(static_cast<double>(m)));
            ly.push_back(std::log(md.nu2[m]));
        }
    }
    if (lx.size() < 2)
        throw DegenerateVariance("nu_n^2 vanishes; no asip normalization");
    auto fit = linear_fit(lx, ly);
    r.nu2_fit_exponent = fit.slope;
    std::vector<double> nu2_fit(n + 1, 0.0);
    r.a.assign(n + 1, 0.0);
    for (std::size_t m = 1; m <= n; ++m)
    {
        nu2_fit[m] = std::exp(fit.intercept
                              + fit.slope * std::log(static_cast<double>(m)));
        r.a[m] = std::pow(nu2_fit[m], gamma);
    }
    r.ratio_sq_nonincreasing = true;
    r.ratio_nondecreasing = true;
    for (std::size_t m = 2; m <= n; ++m)
    {
        if (r.a[m] / nu2_fit[m] > r.a[m - 1] / nu2_fit[m - 1])
            r.ratio_sq_nonincreasing = false;
        if (r.a[m] / std::sqrt(nu2_fit[m])
            < r.a[m - 1] / std::sqrt(nu2_fit[m - 1]))
            r.ratio_nondecreasing = false;
    }

    std::vector<double> q(md.count);
    r.fourth_moment.resize(n);
    for (std::size_t j = 0; j < n; ++j)
    {
        for (std::size_t i = 0; i < md.count; ++i)
        {
            double u = md.u_at(i, j);
            q[i] = u * u * u * u;
        }
        r.fourth_moment[j] = mean(q);
    }
    r.fourth_moment_sup =
        *std::max_element(r.fourth_moment.begin(), r.fourth_moment.end());
    auto second = std::span<double const>(r.fourth_moment).subspan(n / 2);
    auto [lo, hi] = std::minmax_element(second.begin(), second.end());
    r.fourth_moment_spread = *lo > 0 ? *hi / *lo
                                     : std::numeric_limits<double>::infinity();
    r.partial_sums.assign(n + 1, 0.0);
    for (std::size_t j = 0; j < n; ++j)
    {
        double term = r.fourth_moment[j] / (r.a[j + 1] * r.a[j + 1]);
        r.partial_sums[j + 1] = r.partial_sums[j] + term;
        if (j + 1 == n)
            r.tail_increment = term;
    }

    std::vector<double> m2(n);
    for (std::size_t j = 0; j < n; ++j)
    {
        for (std::size_t i = 0; i < md.count; ++i)
            q[i] = md.u_at(i, j) * md.u_at(i, j);
        m2[j] = mean(q);
    }
    for (std::size_t m : {n / 8, n / 4, n / 2, n})
    {
        if (m == 0)
            continue;
        for (std::size_t i = 0; i < md.count; ++i)
        {
            double c = 0.0;
            for (std::size_t j = 0; j < m; ++j)
                c += md.conditional_variance[i * n + j] - m2[j];
            q[i] = std::abs(c);
        }
        r.conditional_ratio.push_back(quantile(q, 0.5) / r.a[m]);
    }
    r.verdict = r.ratio_sq_nonincreasing && r.ratio_nondecreasing
                && r.tail_increment < tail_tolerance;
    return r;
}

TransferVariance variance_transfer_route(MapSequence const& seq,
                                         ObservableSequence const& psis,
                                         CenteringTable const& centering,
                                         std::size_t n_max, std::size_t count,
                                         int cap,
                                         SamplingOptions const& options)
{
    MartingaleOptions opts;
    opts.cap = cap;
    HFunction h(seq, psis, centering, opts);
    TransferVariance out;
    out.variance.assign(n_max + 1, 0.0);
    out.stderr_.assign(n_max + 1, 0.0);
    double var_acc = 0.0;
    for (std::size_t m = 0; m < n_max; ++m)
    {
        auto cloud = sample_equilibrium(
            seq, m, options.depth, count, options.base,
            derive_seed(options.seed, stream(StreamId::centering), 100 + m));
        std::vector<double> v(count);
        parallel_for(
            count,
            [&](std::size_t i) {
                double c = h.centered(m, cloud.points[i]);
                v[i] = c * c + 2 * c * h(m, cloud.points[i]).value;
            },
            8);
        auto e = mean_estimate(v);
        out.variance[m + 1] = out.variance[m] + e.value;
        var_acc += e.stderr_ * e.stderr_;
        out.stderr_[m + 1] = std::sqrt(var_acc);
    }
    return out;
}

SurrogateComparison surrogate_comparability(MapSequence const& seq,
                                            Observable const& psi,
                                            std::size_t n_max,
                                            std::size_t count,
                                            SamplingOptions const& options)
{
    SurrogateComparison r;
    r.reference = fs_l1_norm(psi) + 1;
    for (std::size_t n = 0; n <= n_max; ++n)
    {
        auto cloud = sample_equilibrium(
            seq, n, options.depth, count, options.base,
            derive_seed(options.seed, stream(StreamId::observable_norms), n));
        double side = std::abs(integrate(cloud, psi).value) + 1;
        r.measure_side.push_back(side);
        double factor = std::max(side / r.reference, r.reference / side);
        r.worst_factor = std::max(r.worst_factor, factor);
    }
    r.verdict = r.worst_factor <= 10.0;
    return r;
}

//---------------------------------------------------------------------------//

void to_json(nlohmann::json& j, VarianceCurve const& r)
{
    j = nlohmann::json{{"n", r.ns},
                       {"variance", r.variance},
                       {"growth_exponent", r.growth_exponent},
                       {"epsilon", r.epsilon},
                       {"tolerance", r.tolerance},
                       {"pass", r.verdict}};
}

void to_json(nlohmann::json& j, ErgodicReport const& r)
{
    j = nlohmann::json{{"n", r.n},
                       {"norm_n", r.norm_n},
                       {"norm_2n", r.norm_2n},
                       {"threshold", r.threshold},
                       {"decreasing", r.decreasing},
                       {"pass", r.verdict}};
}

void to_json(nlohmann::json& j, MixingReport const& r)
{
    j = nlohmann::json{{"n", r.ns},
                       {"gap", r.gap},
                       {"gap_stderr", r.gap_stderr},
                       {"transfer_gap", r.transfer_gap},
                       {"transfer_stderr", r.transfer_stderr},
                       {"phi_lp", r.phi_lp},
                       {"psi_norm", r.psi_norm},
                       {"p", r.p},
                       {"fitted_rate", r.fitted_rate},
                       {"fitted_points", r.fitted_points},
                       {"theoretical_floor", r.theoretical_floor}};
}

void to_json(nlohmann::json& j, MulticorrelationReport const& r)
{
    j = nlohmann::json{{"times", r.times},
                       {"joint", r.joint},
                       {"joint_stderr", r.joint_stderr},
                       {"product", r.product},
                       {"gap", r.gap},
                       {"gap_stderr", r.gap_stderr},
                       {"bound_scale", r.bound_scale}};
}

void to_json(nlohmann::json& j, SllnReport const& r)
{
    j = nlohmann::json{{"r", r.r},
                       {"delta", r.delta},
                       {"n", r.ns},
                       {"q95", r.q95},
                       {"threshold", r.threshold},
                       {"decreasing", r.decreasing},
                       {"lag_covariance", r.lag_covariance},
                       {"lag_covariance_stderr", r.lag_covariance_stderr},
                       {"covariance_rate", r.covariance_rate},
                       {"covariance_points", r.covariance_points},
                       {"pass", r.verdict}};
}

void to_json(nlohmann::json& j, CltReport const& r)
{
    j = nlohmann::json{{"n", r.ns},
                       {"sigma", r.sigma},
                       {"ks", r.ks},
                       {"ks_null_99", r.ks_null_99},
                       {"threshold", r.threshold},
                       {"decreasing", r.decreasing},
                       {"pass", r.verdict}};
}

void to_json(nlohmann::json& j, LilReport const& r)
{
    j = nlohmann::json{{"n_max", r.n_max},
                       {"count", r.count},
                       {"median_ratio", r.median_ratio},
                       {"first_n", r.first_n},
                       {"degenerate", r.degenerate},
                       {"lower", r.lower},
                       {"upper", r.upper},
                       {"pass", r.verdict}};
}

void to_json(nlohmann::json& j, VarianceRelations const& r)
{
    j = nlohmann::json{{"n", r.ns},
                       {"sigma", r.sigma},
                       {"nu", r.nu},
                       {"h_l2", r.h_l2},
                       {"h_sd", r.h_sd},
                       {"sup_gap", r.sup_gap},
                       {"sup_h", r.sup_h},
                       {"gap_slope", r.gap_slope},
                       {"gap_z_slope", r.gap_z_slope},
                       {"gap_z_slope_stderr", r.gap_z_slope_stderr},
                       {"gap_slope_stderr", r.gap_slope_stderr},
                       {"h_slope", r.h_slope},
                       {"h_slope_stderr", r.h_slope_stderr},
                       {"pass", r.verdict},
                       {"pairs", r.pairs},
                       {"pairs_outside", r.pairs_outside},
                       {"pairs_allowed", r.pairs_allowed},
                       {"max_abs_z", r.max_abs_z},
                       {"orthogonal", r.orthogonal}};
}

void to_json(nlohmann::json& j, AsipReport const& r)
{
    j = nlohmann::json{{"gamma", r.gamma},
                       {"epsilon", r.epsilon},
                       {"ratio_sq_nonincreasing", r.ratio_sq_nonincreasing},
                       {"ratio_nondecreasing", r.ratio_nondecreasing},
                       {"nu2_fit_exponent", r.nu2_fit_exponent},
                       {"fourth_moment_sup", r.fourth_moment_sup},
                       {"fourth_moment_spread", r.fourth_moment_spread},
                       {"tail_increment", r.tail_increment},
                       {"tail_tolerance", r.tail_tolerance},
                       {"partial_sum",
                        r.partial_sums.empty() ? 0.0 : r.partial_sums.back()},
                       {"conditional_ratio", r.conditional_ratio},
                       {"pass", r.verdict}};
}

void to_json(nlohmann::json& j, IdentityReport const& r)
{
    j = nlohmann::json{{"j", r.js},
                       {"max_residual", r.max_residual},
                       {"tolerance", r.tolerance},
                       {"pass", r.verdict}};
}

}  // namespace greenlab
