#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "geometry.hpp"
#include "map_sequence.hpp"
#include "observable.hpp"

namespace greenlab
{
//! Generic base point used when none is supplied
ProjectivePoint default_base();

struct MeasureProvenance
{
    std::size_t tail{0};
    std::size_t depth{0};
    std::size_t count{0};
    ProjectivePoint base;
    std::uint64_t seed{0};
};

//! Weighted point cloud approximating a tail measure mu_n
struct EmpiricalMeasure
{
    std::vector<ProjectivePoint> points;
    std::vector<double> weights;
    MeasureProvenance provenance;

    std::size_t size() const { return points.size(); }
};

struct IntegralEstimate
{
    double value{0.0};
    double stderr_{0.0};
    std::size_t count{0};
};

/*!
 * Draw count independent backward-orbit samples of depth `depth` through
 * f_{tail+depth-1}, ..., f_tail, starting at base. Sample i depends only on
 * (seed, tail, i).
 *
 * Throws ExceptionalBase when the first few pullbacks of base collapse to a
 * single point.
 */
EmpiricalMeasure sample_equilibrium(MapSequence const& seq, std::size_t tail,
                                    std::size_t depth, std::size_t count,
                                    ProjectivePoint const& base,
                                    std::uint64_t seed);

//! Throws ExceptionalBase if base is totally invariant for the first maps
void check_base(MapSequence const& seq, std::size_t tail,
                ProjectivePoint const& base);

IntegralEstimate integrate(EmpiricalMeasure const& m, Observable const& psi);
IntegralEstimate integrate(
    EmpiricalMeasure const& m,
    std::function<double(ProjectivePoint const&)> const& fn);

//! |a - b| <= k * sqrt(se_a^2 + se_b^2) (exact agreement when both are exact)
bool agree(IntegralEstimate const& a, IntegralEstimate const& b,
           double k = 3.0);

struct InvarianceReport
{
    std::size_t j{0};
    //! <mu_{j-1}, psi o f_{j-1}> vs <mu_j, psi>
    IntegralEstimate push_lhs, push_rhs;
    bool push_pass{false};
    //! <mu_j, P_{j-1} psi'> vs <mu_{j-1}, psi'>
    IntegralEstimate adjoint_lhs, adjoint_rhs;
    bool adjoint_pass{false};
};

InvarianceReport check_invariance(MapSequence const& seq, std::size_t j,
                                  Observable const& psi,
                                  Observable const& psi_prime,
                                  std::size_t count, std::size_t depth,
                                  ProjectivePoint const& base,
                                  std::uint64_t seed);

void to_json(nlohmann::json& j, MeasureProvenance const& p);
void to_json(nlohmann::json& j, IntegralEstimate const& e);

}  // namespace greenlab
