#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "rational_map.hpp"

namespace greenlab
{
//! Prescribed proxy distances dist_j for the degenerating generator
struct DegenerationProfile
{
    enum class Kind
    {
        constant,    //!< dist_j = rate (a value in (0, 1])
        exp_linear,  //!< dist_j = exp(-rate * j)
        exp_sqrt,    //!< dist_j = exp(-rate * sqrt(j))
        power,       //!< dist_j = (1 + j)^(-rate)
    };
    Kind kind{Kind::exp_linear};
    double rate{1.0};

    double dist(std::size_t j) const;
    //! Parse "exp_linear:1", "exp_sqrt:1", "power:2", "constant:0.5"
    static DegenerationProfile parse(std::string const& text);
    std::string describe() const;
};

//---------------------------------------------------------------------------//
/*!
 * A lazily realized sequence f_0, f_1, ... of maps of one degree.
 *
 * Each f_j is a deterministic function of the generator and j; realized maps
 * are memoized behind a mutex and references to them stay valid for the
 * lifetime of the sequence.
 */
class MapSequence
{
  public:
    enum class Kind
    {
        constant,
        perturbed,
        explicit_list,
        degenerating,
    };

    static MapSequence constant(HomogeneousMap f);
    //! f_j = base + amplitude * (coefficients uniform in the unit disk),
    //! drawn from the counter stream (seed, j)
    static MapSequence perturbed(HomogeneousMap base, double amplitude,
                                 std::uint64_t seed);
    //! Cycles through the list: f_j = maps[j mod size]
    static MapSequence explicit_list(std::vector<HomogeneousMap> maps);
    static MapSequence degenerating(DegenerationProfile profile, int degree);

    MapSequence(MapSequence&&) noexcept;
    MapSequence& operator=(MapSequence&&) noexcept;
    ~MapSequence();

    Kind kind() const { return kind_; }
    int degree() const { return degree_; }
    //! True when every f_j is the same map (all tails coincide)
    bool is_autonomous() const;

    HomogeneousMap const& map(std::size_t j) const;
    HomogeneousMap const& operator[](std::size_t j) const { return map(j); }

    std::string describe() const;

  private:
    MapSequence(Kind kind, int degree);
    HomogeneousMap realize(std::size_t j) const;

    Kind kind_;
    int degree_;
    std::vector<HomogeneousMap> maps_;  // constant/explicit/perturbed base
    double amplitude_{0.0};
    std::uint64_t seed_{0};
    DegenerationProfile profile_;

    struct Cache;
    std::unique_ptr<Cache> cache_;
};

//---------------------------------------------------------------------------//
// Admissibility diagnostics
//---------------------------------------------------------------------------//

struct AdmissibilityReport
{
    //! (1/n) sum_{j<n} log dist_j for n = 1..n_max
    std::vector<double> cesaro_averages;
    //! (1/j) log dist_j for j = 1..n_max-1 (index 0 holds j = 1)
    std::vector<double> per_index_rates;
    std::vector<double> dists;

    bool verdict_a{false};
    //! Fitted lower level of the Cesaro averages (-inf on drift)
    double fitted_liminf{0.0};
    //! Fitted slope of the Cesaro averages against sqrt(n)
    double cesaro_drift{0.0};

    bool verdict_b{false};
    //! Extrapolated limit of (1/j) log dist_j
    double fitted_limit{0.0};
    double tolerance{0.05};
};

AdmissibilityReport check_admissibility(MapSequence const& seq,
                                        std::size_t n_max,
                                        double tolerance = 0.05);

//---------------------------------------------------------------------------//
// Topological Lyapunov exponent
//---------------------------------------------------------------------------//

struct LyapunovEstimate
{
    //! (1/n) log sup_x |D_x F_n|
    double estimate{0.0};
    //! (1/n) sum_j log sup_x |D f_j| (sub-multiplicative upper bound)
    double upper_trend{0.0};
    std::size_t n{0};
    std::size_t grid_size{0};
};

LyapunovEstimate topological_lyapunov(MapSequence const& seq, std::size_t n,
                                      std::size_t grid_size);

//! Quasi-uniform grid on the sphere: latitude rings (equator included)
//! with points per ring proportional to the ring circumference
std::vector<ProjectivePoint> sphere_grid(std::size_t count);

}  // namespace greenlab
