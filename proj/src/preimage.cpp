#include "greenlab/preimage.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "greenlab/errors.hpp"
#include "greenlab/map_sequence.hpp"

namespace greenlab
{
namespace
{
constexpr double end_coefficient_tol = 1e-14;
constexpr int aberth_max_iterations = 200;
constexpr int polish_steps = 3;

using CoeffArray = std::array<complex, max_degree + 1>;

// Magnitudes here stay far from overflow, so skip hypot's scaling.
inline double mag(complex z)
{
    return std::sqrt(std::norm(z));
}

// Horner evaluation of sum a[k] z^k and its derivative
inline void horner(complex const* a, int n, complex z, complex& value,
                   complex& deriv)
{
    value = a[n];
    deriv = 0.0;
    for (int k = n - 1; k >= 0; --k)
    {
        deriv = deriv * z + value;
        value = value * z + a[k];
    }
}

// Relative backward error of a unit representative of a root
double backward_error(std::span<complex const> c, ProjectivePoint const& y)
{
    int const d = static_cast<int>(c.size()) - 1;
    double a0 = mag(y.z0()), a1 = mag(y.z1());
    complex value = 0.0;
    double scale = 0.0;
    complex p0 = 1.0;
    double m0 = 1.0;
    std::array<complex, max_degree + 1> w1;
    std::array<double, max_degree + 1> m1;
    w1[0] = 1.0;
    m1[0] = 1.0;
    for (int k = 1; k <= d; ++k)
    {
        w1[k] = w1[k - 1] * y.z1();
        m1[k] = m1[k - 1] * a1;
    }
    for (int k = 0; k <= d; ++k)
    {
        value += c[k] * p0 * w1[d - k];
        scale += mag(c[k]) * m0 * m1[d - k];
        p0 *= y.z0();
        m0 *= a0;
    }
    if (scale == 0.0)
        return 0.0;
    return mag(value) / scale;
}

// One Newton step on the form in the chart where the root is small.
ProjectivePoint polish(std::span<complex const> c, complex z)
{
    int const d = static_cast<int>(c.size()) - 1;
    CoeffArray a;
    bool reversed = mag(z) > 1.0;
    for (int k = 0; k <= d; ++k)
        a[k] = reversed ? c[d - k] : c[k];
    complex w = reversed ? 1.0 / z : z;
    for (int step = 0; step < polish_steps; ++step)
    {
        complex v, dv;
        horner(a.data(), d, w, v, dv);
        if (v == complex{} || mag(dv) < 1e-300)
            break;
        complex next = w - v / dv;
        complex nv, ndv;
        horner(a.data(), d, next, nv, ndv);
        if (!(mag(nv) < mag(v)))
            break;
        w = next;
    }
    return reversed ? normalize(1.0, w) : normalize(w, 1.0);
}

// Aberth-Ehrlich iteration for the roots of sum a[k] z^k, a[n] != 0.
void aberth(complex const* a, int n, complex* roots)
{
    if (n == 1)
    {
        roots[0] = -a[0] / a[1];
        return;
    }
    if (n == 2)
    {
        // Cancellation-free quadratic formula
        complex disc = std::sqrt(a[1] * a[1] - 4.0 * a[2] * a[0]);
        complex s = std::real(std::conj(a[1]) * disc) >= 0 ? a[1] + disc
                                                           : a[1] - disc;
        if (s == complex{})
        {
            roots[0] = roots[1] = 0.0;
            return;
        }
        complex qv = -0.5 * s;
        roots[0] = qv / a[2];
        roots[1] = a[0] / qv;
        return;
    }
    double radius = std::pow(mag(a[0]) / mag(a[n]), 1.0 / n);
    if (!(radius > 0) || !std::isfinite(radius))
        radius = 1.0;
    for (int k = 0; k < n; ++k)
    {
        double angle = 2 * std::numbers::pi * k / n + 0.7;
        roots[k] = std::polar(radius, angle);
    }
    std::array<bool, max_degree> done{};
    int remaining = n;
    for (int iter = 0; iter < aberth_max_iterations && remaining > 0; ++iter)
    {
        for (int i = 0; i < n; ++i)
        {
            if (done[i])
                continue;
            complex value, deriv;
            horner(a, n, roots[i], value, deriv);
            if (value == complex{})
            {
                done[i] = true;
                --remaining;
                continue;
            }
            complex ratio = value / deriv;
            complex repulsion = 0.0;
            for (int j = 0; j < n; ++j)
            {
                if (j != i)
                    repulsion += 1.0 / (roots[i] - roots[j]);
            }
            complex step = ratio / (1.0 - ratio * repulsion);
            if (!std::isfinite(step.real()) || !std::isfinite(step.imag()))
            {
                // Perturb off a degenerate configuration.
                roots[i] += complex(1e-3, 1e-3) * (1.0 + mag(roots[i]));
                continue;
            }
            roots[i] -= step;
            if (mag(step) <= 1e-15 * std::max(1.0, mag(roots[i])))
            {
                done[i] = true;
                --remaining;
            }
        }
    }
}

struct RawRoot
{
    ProjectivePoint point;
    bool exact{false};
};

}  // namespace

int PreimageSet::total_multiplicity() const
{
    int total = 0;
    for (auto const& p : points)
        total += p.multiplicity;
    return total;
}

ProjectivePoint const& PreimageSet::sample(CounterRng& rng, int degree) const
{
    auto pick = static_cast<int>(rng.index(static_cast<std::uint64_t>(degree)));
    for (auto const& p : points)
    {
        pick -= p.multiplicity;
        if (pick < 0)
            return p.point;
    }
    return points.back().point;
}

PreimageSet solve_binary_form(std::span<complex const> c)
{
    int const d = static_cast<int>(c.size()) - 1;
    if (d < 1 || d > max_degree)
        throw InvalidSpec("binary form degree out of range");
    double scale = 0.0;
    for (complex v : c)
        scale = std::max(scale, mag(v));
    if (!(scale > 0.0) || !std::isfinite(scale))
        throw SolverDivergence("binary form vanishes identically");
    double const tol = end_coefficient_tol * scale;

    int top = d;
    while (top >= 0 && mag(c[top]) <= tol)
        --top;
    int bottom = 0;
    while (bottom < top && mag(c[bottom]) <= tol)
        ++bottom;
    int const at_infinity = d - top;
    int const at_zero = bottom;
    int const n = top - bottom;

    std::array<RawRoot, max_degree> raw;
    int count = 0;
    for (int k = 0; k < at_infinity; ++k)
        raw[count++] = {infinity_point(), true};
    for (int k = 0; k < at_zero; ++k)
        raw[count++] = {from_affine(0.0), true};
    if (n > 0)
    {
        std::array<complex, max_degree> roots;
        aberth(c.data() + bottom, n, roots.data());
        for (int k = 0; k < n; ++k)
            raw[count++] = {polish(c, roots[k]), false};
    }

    // Greedy clustering in chordal distance.
    std::array<int, max_degree> label;
    label.fill(-1);
    int clusters = 0;
    for (int i = 0; i < count; ++i)
    {
        if (label[i] >= 0)
            continue;
        label[i] = clusters;
        for (int j = i + 1; j < count; ++j)
        {
            if (label[j] < 0
                && chordal_dist(raw[i].point, raw[j].point)
                       < root_cluster_radius)
            {
                label[j] = clusters;
            }
        }
        ++clusters;
    }

    PreimageSet result;
    result.points.reserve(clusters);
    for (int cl = 0; cl < clusters; ++cl)
    {
        int mult = 0;
        int exact_index = -1;
        complex sum = 0.0;
        bool use_inverse = false;
        int first = -1;
        for (int i = 0; i < count; ++i)
        {
            if (label[i] != cl)
                continue;
            if (first < 0)
            {
                first = i;
                use_inverse = mag(raw[i].point.z0())
                              > mag(raw[i].point.z1());
            }
            ++mult;
            if (raw[i].exact)
                exact_index = i;
            auto const& p = raw[i].point;
            sum += use_inverse ? p.z1() / p.z0() : p.z0() / p.z1();
        }
        ProjectivePoint point;
        if (exact_index >= 0)
            point = raw[exact_index].point;
        else if (mult == 1)
            point = raw[first].point;
        else
        {
            complex mean = sum / static_cast<double>(mult);
            point = use_inverse ? normalize(1.0, mean) : normalize(mean, 1.0);
        }
        double residual = backward_error(c, point);
        if (!(residual <= root_residual_limit))
        {
            throw SolverDivergence("root residual "
                                   + std::to_string(residual)
                                   + " above limit");
        }
        result.points.push_back({point, mult, residual});
    }
    return result;
}

PreimageSet preimages(HomogeneousMap const& f, ProjectivePoint const& x)
{
    int const d = f.degree();
    std::array<complex, max_degree + 1> c;
    auto p = f.p();
    auto q = f.q();
    for (int k = 0; k <= d; ++k)
        c[k] = x.z1() * p[k] - x.z0() * q[k];
    return solve_binary_form(std::span<complex const>(c.data(), d + 1));
}

double PreimageTree::weight(int level, TreeNode const& node) const
{
    if (mode.kind == TreeMode::Kind::sampled)
        return 1.0 / static_cast<double>(levels[level].size());
    return static_cast<double>(node.multiplicity)
           / std::pow(static_cast<double>(degree), level);
}

PreimageTree preimage_tree(MapSequence const& seq, ProjectivePoint const& x,
                           int depth, TreeMode mode, std::size_t start)
{
    if (depth < 1)
        throw InvalidSpec("tree depth must be at least 1");
    PreimageTree tree;
    tree.root = x;
    tree.depth = depth;
    tree.degree = seq.degree();
    tree.mode = mode;
    tree.levels.reserve(depth + 1);

    if (mode.kind == TreeMode::Kind::full)
    {
        if (std::pow(static_cast<double>(seq.degree()), depth)
            > static_cast<double>(full_tree_budget))
        {
            throw BudgetExceeded("full tree of depth " + std::to_string(depth)
                                 + " exceeds the leaf budget");
        }
        tree.levels.push_back({TreeNode{x, 1}});
        for (int level = 0; level < depth; ++level)
        {
            auto const& f = seq.map(start + depth - 1 - level);
            std::vector<TreeNode> next;
            next.reserve(tree.levels.back().size() * seq.degree());
            for (auto const& node : tree.levels.back())
            {
                auto fiber = preimages(f, node.point);
                for (auto const& y : fiber.points)
                {
                    next.push_back(
                        {y.point,
                         node.multiplicity
                             * static_cast<std::uint64_t>(y.multiplicity)});
                }
            }
            tree.levels.push_back(std::move(next));
        }
        return tree;
    }

    if (mode.paths == 0)
        throw InvalidSpec("sampled tree needs at least one path");
    tree.levels.assign(depth + 1, std::vector<TreeNode>(mode.paths));
    for (std::uint64_t path = 0; path < mode.paths; ++path)
    {
        CounterRng rng(mode.seed, StreamId::tree_sampling, path);
        ProjectivePoint current = x;
        tree.levels[0][path] = {current, 1};
        for (int level = 0; level < depth; ++level)
        {
            auto const& f = seq.map(start + depth - 1 - level);
            current = preimages(f, current).sample(rng, seq.degree());
            tree.levels[level + 1][path] = {current, 1};
        }
    }
    return tree;
}

ProjectivePoint backward_orbit_sample(MapSequence const& seq,
                                      ProjectivePoint const& x, int depth,
                                      CounterRng& rng, std::size_t start)
{
    if (depth < 1)
        throw InvalidSpec("backward depth must be at least 1");
    ProjectivePoint current = x;
    for (int level = 0; level < depth; ++level)
    {
        auto const& f = seq.map(start + depth - 1 - level);
        current = preimages(f, current).sample(rng, seq.degree());
    }
    return current;
}

BackwardPath backward_path(MapSequence const& seq, ProjectivePoint const& x,
                           std::size_t start, int length, CounterRng& rng,
                           bool keep_fibers)
{
    BackwardPath path;
    path.nodes.resize(length + 1);
    if (keep_fibers)
        path.fibers.resize(length);
    path.nodes[length] = x;
    for (int m = length - 1; m >= 0; --m)
    {
        auto const& f = seq.map(start + m);
        auto fiber = preimages(f, path.nodes[m + 1]);
        path.nodes[m] = fiber.sample(rng, seq.degree());
        if (keep_fibers)
            path.fibers[m] = std::move(fiber);
    }
    return path;
}

void to_json(nlohmann::json& j, PreimageTree const& tree)
{
    j = nlohmann::json::object();
    j["root"] = tree.root;
    j["depth"] = tree.depth;
    j["degree"] = tree.degree;
    j["mode"] = tree.mode.kind == TreeMode::Kind::full ? "full" : "sampled";
    auto levels = nlohmann::json::array();
    for (auto const& level : tree.levels)
    {
        auto arr = nlohmann::json::array();
        for (auto const& node : level)
        {
            nlohmann::json entry;
            entry["point"] = node.point;
            entry["multiplicity"] = node.multiplicity;
            arr.push_back(std::move(entry));
        }
        levels.push_back(std::move(arr));
    }
    j["levels"] = std::move(levels);
}

}  // namespace greenlab
