#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "geometry.hpp"
#include "map_sequence.hpp"
#include "rational_map.hpp"

namespace greenlab
{
/*!
 * Potential u(p) = (1/(2d)) log(|P(p)|^2 + |Q(p)|^2) on unit representatives.
 *
 * With the canonical coefficient scaling this solves
 * (1/d) f^* omega = omega + dd^c u for the Fubini-Study form omega.
 */
double potential_step(HomogeneousMap const& f, ProjectivePoint const& p);

//! Closed-form Green function of z^d (independent of d)
double power_map_green(ProjectivePoint const& p);

//! Grid size used for sup-norm estimates of the potentials
inline constexpr std::size_t potential_grid_size = 10'000;
//! Multiplicative safety margin applied to grid sup-norm estimates
inline constexpr double potential_sup_inflation = 1.05;

struct PotentialStep
{
    std::size_t index{0};
    //! Inflated grid estimate of sup |u_j|
    double sup_norm{0.0};
    double dist{1.0};
};

//! Grid estimate of sup |u| (inflated)
double potential_sup(HomogeneousMap const& f,
                     std::span<ProjectivePoint const> grid);

/*!
 * Estimate of sum_{j >= n} s_j / d^j from the measured window
 * s_n, ..., s_{n+L-1} plus a geometric remainder continuing the trend of the
 * window. Returns +inf when the trend does not decay.
 */
double tail_estimate(std::span<double const> window, int degree,
                     std::size_t n);

struct GreenValue
{
    double value{0.0};
    std::size_t depth{0};
    double tail_bound{0.0};
};

//! Fitted gauge sup |u_j| <= C dist_j^(-q)
struct GaugeFit
{
    double c{0.0};
    double q{0.0};
    std::size_t points{0};
};

//---------------------------------------------------------------------------//
/*!
 * Green function g = sum_j d^-j u_j o F_j of a map sequence.
 *
 * Sup norms of the potentials are measured once per index on a fixed grid
 * and cached; evaluation truncates once the tail estimate drops below the
 * requested tolerance.
 */
class GreenFunction
{
  public:
    static constexpr std::size_t window = 8;
    static constexpr std::size_t max_terms = 200;

    explicit GreenFunction(MapSequence const& seq);
    ~GreenFunction();

    MapSequence const& sequence() const { return seq_; }

    PotentialStep step(std::size_t j) const;
    double sup_norm(std::size_t j) const;
    //! Estimate of sum_{j >= n} sup|u_j| / d^j
    double tail_bound(std::size_t n) const;

    //! g_n(p) = sum_{j<n} d^-j u_j(F_j p)
    double partial(ProjectivePoint const& p, std::size_t n) const;

    //! Truncated value with tail below tol; NoConvergence on a stalled tail
    GreenValue evaluate(ProjectivePoint const& p, double tol) const;

    //! Truncation depth needed for tol (independent of the point)
    std::size_t depth_for(double tol) const;

    GaugeFit fit_gauge(std::size_t n) const;

  private:
    MapSequence const& seq_;
    std::vector<ProjectivePoint> grid_;
    struct Cache;
    std::unique_ptr<Cache> cache_;
};

//! Single-call form of GreenFunction::evaluate
GreenValue green_function(MapSequence const& seq, ProjectivePoint const& p,
                          double tol);

struct HolderReport
{
    double alpha{0.0};
    double r_squared{0.0};
    //! log d / chi_top
    double floor{0.0};
    double lyapunov{0.0};
    std::vector<double> scales;
    //! Largest |g(p) - g(q)| observed at each scale
    std::vector<double> max_increments;
};

/*!
 * Fit alpha in |g(p) - g(q)| ~ dist(p, q)^alpha from random pairs at the
 * given chordal scales (samples split evenly across scales).
 */
HolderReport holder_exponent_estimate(MapSequence const& seq,
                                      std::size_t samples,
                                      std::vector<double> const& scales,
                                      std::uint64_t seed);

}  // namespace greenlab
