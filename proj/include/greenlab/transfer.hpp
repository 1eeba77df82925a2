#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "map_sequence.hpp"
#include "measure.hpp"
#include "observable.hpp"

namespace greenlab
{
//! P psi(x) = d^-1 sum_{f(y) = x} psi(y) (with multiplicity)
double apply_P(HomogeneousMap const& f, Observable const& psi,
               ProjectivePoint const& x);

struct TransferMode
{
    enum class Kind
    {
        automatic,  //!< full tree up to switch_leaves, sampled beyond
        full,
        sampled,
    };
    Kind kind{Kind::automatic};
    std::uint64_t switch_leaves{10'000};
    std::uint64_t paths{1'000};
    std::uint64_t seed{0};

    bool uses_full(int degree, std::size_t n) const;
};

//! Values of the composed operator P_{start+n-1} ... P_start psi
struct TransferEvaluation
{
    std::string observable;
    std::size_t n{0};
    bool full{true};
    std::vector<ProjectivePoint> points;
    std::vector<double> values;
    //! Zero in full mode
    std::vector<double> stderrs;
};

//! Exact tree average at a single point
double apply_composed_full(MapSequence const& seq, Observable const& psi,
                           ProjectivePoint const& x, std::size_t n,
                           std::size_t start = 0);

TransferEvaluation apply_composed(MapSequence const& seq, Observable const& psi,
                                  std::vector<ProjectivePoint> const& points,
                                  std::size_t n, TransferMode mode,
                                  std::size_t start = 0);

//---------------------------------------------------------------------------//
// Decay and exactness
//---------------------------------------------------------------------------//

struct DecayOptions
{
    //! Points per mu_n cloud
    std::size_t cloud_count{50'000};
    //! Samples for the centering constant <mu_0, psi>
    std::size_t centering_count{20'000};
    //! The centering constant is estimated as <mu_m, P_m psi> with full
    //! trees of this depth m (same value by duality, smaller variance)
    std::size_t centering_tree_depth{6};
    //! First map index: the operators are P_{start+n-1} ... P_start
    std::size_t start{0};
    std::size_t depth{30};
    ProjectivePoint base{};
    bool base_set{false};
    std::uint64_t seed{1};
    TransferMode mode{};
    //! Norm exponent q >= 1
    double q{1.0};
    //! Subtract the centering estimate (disable for negative controls)
    bool center{true};
};

struct DecayReport
{
    std::string observable;
    std::string regularity;
    std::vector<std::size_t> ns;
    std::vector<double> l1, l2, lq, l1_stderr;
    std::vector<bool> censored;
    double q{1.0};
    IntegralEstimate centering;
    //! Norms below max(3 * centering stderr, resolution) are censored
    double noise_floor{0.0};
    //! d^-depth * norm surrogate: influence left by the finite sampling depth
    double resolution_floor{0.0};
    double fitted_rate{0.0};
    double fit_r_squared{0.0};
    std::size_t fitted_points{0};
    double theoretical_floor{0.0};
    //! True when every norm sits below the noise floor
    bool vacuous{false};
    bool verdict{false};
    double rate_factor{0.8};
};

/*!
 * L^q(mu_n) norms of P_n(psi - <mu_0, psi>) on independent mu_n clouds,
 * with a least-squares fit of -log L^q against n over the uncensored points.
 * The verdict requires fitted rate >= rate_factor * theoretical floor, over
 * at least five uncensored n; a fully censored report is vacuous (passes).
 */
DecayReport decay_report(MapSequence const& seq, Observable const& psi,
                         std::vector<std::size_t> const& ns,
                         DecayOptions const& options,
                         double rate_factor = 0.8);

struct ExactnessReport
{
    DecayReport decay;
    //! l1[last] / l1[first]
    double ratio{0.0};
    //! Decreasing after a burn-in of two steps, within stderr
    bool monotone{false};
    bool verdict{false};
    double ratio_limit{0.0};
};

ExactnessReport exactness_check(MapSequence const& seq, Observable const& psi,
                                std::vector<std::size_t> const& ns,
                                DecayOptions const& options,
                                double ratio_limit);

void to_json(nlohmann::json& j, DecayReport const& r);

}  // namespace greenlab
