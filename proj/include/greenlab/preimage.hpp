#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "geometry.hpp"
#include "rational_map.hpp"
#include "rng.hpp"

namespace greenlab
{
class MapSequence;

//! Clustering radius (chordal) used to merge coincident roots
inline constexpr double root_cluster_radius = 1e-7;
//! Largest accepted relative backward error of a root
inline constexpr double root_residual_limit = 1e-9;

struct Preimage
{
    ProjectivePoint point;
    int multiplicity{1};
    double residual{0.0};
};

//! Fiber {y : f(y) = x}; multiplicities always sum to the degree
struct PreimageSet
{
    std::vector<Preimage> points;

    int total_multiplicity() const;
    //! Draw one point with probability multiplicity / d
    ProjectivePoint const& sample(CounterRng& rng, int degree) const;
};

/*!
 * Roots of the binary form sum_k c[k] y0^k y1^(d-k).
 *
 * Roots at [1:0] and [0:1] are split off from vanishing end coefficients;
 * the remaining ones come from Aberth-Ehrlich simultaneous iteration followed
 * by Newton polishing in the chart where each root is small.
 */
PreimageSet solve_binary_form(std::span<complex const> coeffs);

//! The fiber of f over x
PreimageSet preimages(HomogeneousMap const& f, ProjectivePoint const& x);

//---------------------------------------------------------------------------//
// Trees
//---------------------------------------------------------------------------//

struct TreeMode
{
    enum class Kind
    {
        full,
        sampled
    };
    Kind kind{Kind::full};
    std::uint64_t paths{0};
    std::uint64_t seed{0};

    static TreeMode full() { return {}; }
    static TreeMode sampled(std::uint64_t paths, std::uint64_t seed)
    {
        return {Kind::sampled, paths, seed};
    }
};

struct TreeNode
{
    ProjectivePoint point;
    //! Product of multiplicities along the branch (full mode), else 1
    std::uint64_t multiplicity{1};
};

/*!
 * Iterated preimages of a root point.
 *
 * Level l+1 holds the preimages of level l under f_{start+depth-1-l}, so the
 * last level is the fiber of F_{start, start+depth} = f_{start+depth-1} o ...
 * o f_start over the root. Full-mode leaf weights are multiplicity / d^depth;
 * sampled-mode levels hold one node per path with equal weight.
 */
struct PreimageTree
{
    ProjectivePoint root;
    int depth{0};
    int degree{2};
    TreeMode mode;
    std::vector<std::vector<TreeNode>> levels;

    //! Normalized weight of a node on the given level
    double weight(int level, TreeNode const& node) const;
    std::vector<TreeNode> const& leaves() const { return levels.back(); }
};

//! Largest full tree (leaf count d^depth) accepted by preimage_tree
inline constexpr std::uint64_t full_tree_budget = 1'000'000;

PreimageTree preimage_tree(MapSequence const& seq, ProjectivePoint const& x,
                           int depth, TreeMode mode, std::size_t start = 0);

//! Leaf of one uniformly sampled backward path through the maps
//! f_{start+depth-1}, ..., f_start
ProjectivePoint backward_orbit_sample(MapSequence const& seq,
                                      ProjectivePoint const& x, int depth,
                                      CounterRng& rng, std::size_t start = 0);

/*!
 * A backward path z_0 <- z_1 <- ... <- z_len = x with f_{start+m}(z_m) =
 * z_{m+1}. When fibers are kept, fibers[m] is the full fiber of z_{m+1}
 * under f_{start+m} (z_m is one of its points).
 */
struct BackwardPath
{
    std::vector<ProjectivePoint> nodes;
    std::vector<PreimageSet> fibers;
};

BackwardPath backward_path(MapSequence const& seq, ProjectivePoint const& x,
                           std::size_t start, int length, CounterRng& rng,
                           bool keep_fibers = false);

void to_json(nlohmann::json& j, PreimageTree const& tree);

}  // namespace greenlab
