#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "map_sequence.hpp"
#include "measure.hpp"
#include "observable.hpp"
#include "preimage.hpp"

namespace greenlab
{
//! psi_j = list[j mod size]; a single entry is reused at every step
struct ObservableSequence
{
    std::vector<Observable> list;

    ObservableSequence() = default;
    ObservableSequence(Observable psi) : list{std::move(psi)} {}
    explicit ObservableSequence(std::vector<Observable> psis)
        : list(std::move(psis))
    {
    }

    Observable const& at(std::size_t j) const { return list[j % list.size()]; }
    std::size_t size() const { return list.size(); }
    bool all_constant() const;
    //! psi_j^r for every member
    ObservableSequence power(int r) const;
};

//---------------------------------------------------------------------------//
// Centering constants <mu_j, psi_j>
//---------------------------------------------------------------------------//

struct SamplingOptions
{
    std::size_t depth{30};
    ProjectivePoint base{default_base()};
    std::uint64_t seed{1};
};

struct CenteringTable
{
    std::vector<IntegralEstimate> values;
    //! True when one cloud served every index
    bool shared{false};

    double at(std::size_t j) const { return values[j].value; }
};

/*!
 * Estimates of <mu_j, psi_j> for j < n.
 *
 * Autonomous sequences with one observable use a single cloud. Otherwise
 * count backward paths of length n + depth are drawn from the base; node j of
 * a path is a sample of mu_j at depth >= depth, so every index gets an
 * unbiased estimate from the same paths.
 */
CenteringTable compute_centering(MapSequence const& seq,
                                 ObservableSequence const& psis, std::size_t n,
                                 std::size_t count,
                                 SamplingOptions const& options);

//---------------------------------------------------------------------------//
// Trajectories and Birkhoff sums
//---------------------------------------------------------------------------//

/*!
 * Orbits x, F_1 x, ..., F_n x with x distributed as mu_0.
 *
 * Each orbit is read off a backward path of length n + depth from the base:
 * z_m is a preimage of z_{m+1} under f_m, so z_j = F_j(z_0) up to root
 * accuracy. Trajectory i depends only on (seed, i).
 */
struct TrajectoryBundle
{
    std::size_t count{0};
    std::size_t n_max{0};
    std::uint64_t seed{0};
    //! count x (n_max + 1), row-major
    std::vector<ProjectivePoint> points;
    //! count x n_max: fibers[i][j] is the fiber of z_{j+1} under f_j
    std::vector<PreimageSet> fibers;

    ProjectivePoint const& point(std::size_t i, std::size_t j) const
    {
        return points[i * (n_max + 1) + j];
    }
    PreimageSet const& fiber(std::size_t i, std::size_t j) const
    {
        return fibers[i * n_max + j];
    }
};

TrajectoryBundle sample_trajectories(MapSequence const& seq, std::size_t n_max,
                                     std::size_t count,
                                     SamplingOptions const& options,
                                     bool keep_fibers = false);

struct BirkhoffSample
{
    std::size_t count{0};
    std::size_t n_max{0};
    std::uint64_t seed{0};
    std::vector<double> centering;
    //! count x n_max centered increments psi_j(F_j x) - <mu_j, psi_j>
    std::vector<double> increments;
    //! count x (n_max + 1) partial sums, S_0 = 0, S_{n+1} = S_n + X_n
    std::vector<double> sums;

    double increment(std::size_t i, std::size_t j) const
    {
        return increments[i * n_max + j];
    }
    double sum(std::size_t i, std::size_t n) const
    {
        return sums[i * (n_max + 1) + n];
    }
    //! S_n across trajectories
    std::vector<double> column(std::size_t n) const;
};

BirkhoffSample birkhoff_sums(TrajectoryBundle const& traj,
                             ObservableSequence const& psis,
                             CenteringTable const& centering);

//! Convenience: centering + trajectories + sums
BirkhoffSample birkhoff_sums(MapSequence const& seq,
                             ObservableSequence const& psis, std::size_t n_max,
                             std::size_t count, std::size_t centering_count,
                             SamplingOptions const& options);

//---------------------------------------------------------------------------//
// Variance, ergodic averages, mixing
//---------------------------------------------------------------------------//

struct VarianceCurve
{
    std::vector<std::size_t> ns;
    std::vector<double> variance;
    //! Fitted exponent b in sigma_n ~ C n^b
    double growth_exponent{0.0};
    double epsilon{0.0};
    //! b >= 1/4 + epsilon - tolerance
    bool verdict{false};
    double tolerance{0.05};
};

VarianceCurve variance_curve(BirkhoffSample const& b, double epsilon,
                             double tolerance = 0.05);

struct ErgodicReport
{
    std::size_t n{0};
    //! L2 norm across trajectories of S_n / n (and S_2n / 2n)
    double norm_n{0.0};
    double norm_2n{0.0};
    //! c / sqrt(2n) with c fitted at n, times slack
    double threshold{0.0};
    bool decreasing{false};
    bool verdict{false};
};

//! Needs b.n_max >= 2n
ErgodicReport ergodic_average_check(BirkhoffSample const& b, std::size_t n,
                                    double slack = 1.5);

struct MixingOptions
{
    std::size_t count{100'000};
    //! mu_n cloud size of the transfer-operator route (0 disables it)
    std::size_t transfer_count{0};
    double p{2.0};
    SamplingOptions sampling{};
};

struct MixingReport
{
    std::vector<std::size_t> ns;
    //! <mu_0, (phi o F_n) psi> - <mu_n, phi><mu_0, psi> from trajectories
    std::vector<double> gap, gap_stderr;
    //! <mu_n, phi P_n(psi - <mu_0, psi>)> from independent clouds
    std::vector<double> transfer_gap, transfer_stderr;
    std::vector<double> phi_lp;
    double psi_norm{0.0};
    double p{2.0};
    double fitted_rate{0.0};
    std::size_t fitted_points{0};
    double theoretical_floor{0.0};
};

MixingReport mixing_check(MapSequence const& seq, Observable const& phi,
                          Observable const& psi,
                          std::vector<std::size_t> const& ns,
                          MixingOptions const& options);

struct MulticorrelationReport
{
    std::vector<std::size_t> times;
    double joint{0.0};
    double joint_stderr{0.0};
    double product{0.0};
    double gap{0.0};
    double gap_stderr{0.0};
    //! Product of norm surrogates times d^-(min time gap)
    double bound_scale{0.0};
};

//! <mu_0, prod_k psi_k o F_{n_k}> against prod_k <mu_{n_k}, psi_k>
MulticorrelationReport multicorrelation_check(
    MapSequence const& seq, std::vector<Observable> const& psis,
    std::vector<std::size_t> const& times, std::size_t count,
    SamplingOptions const& options);

//---------------------------------------------------------------------------//
// Limit theorems
//---------------------------------------------------------------------------//

struct SllnReport
{
    int r{1};
    double delta{1.0};
    std::vector<std::size_t> ns;
    //! 95th percentile of |S_n| / (sqrt(n) (log n)^(2+delta))
    std::vector<double> q95;
    double threshold{0.1};
    bool decreasing{false};
    bool verdict{false};
    //! Average empirical Cov(X_j, X_{j+l}) for l = 1..lags
    std::vector<double> lag_covariance, lag_covariance_stderr;
    double covariance_rate{0.0};
    std::size_t covariance_points{0};
};

SllnReport slln_check(MapSequence const& seq, Observable const& psi, int r,
                      double delta, std::size_t n_max, std::size_t count,
                      std::size_t centering_count,
                      SamplingOptions const& options, double threshold = 0.1,
                      std::size_t lags = 8);

struct CltReport
{
    std::vector<std::size_t> ns;
    std::vector<double> sigma;
    std::vector<double> ks;
    //! 0.99 null quantile of the KS distance for this sample size
    double ks_null_99{0.0};
    double threshold{0.02};
    bool decreasing{false};
    bool verdict{false};
    //! (empirical, normal) quantile pairs at 1%, ..., 99% for the largest n
    std::vector<std::pair<double, double>> qq;
};

//! Throws DegenerateVariance if some sigma_n is at the noise floor
CltReport clt_test(BirkhoffSample const& b, std::vector<std::size_t> const& ns,
                   double threshold = 0.02);

struct LilReport
{
    std::size_t n_max{0};
    std::size_t count{0};
    //! Median over trajectories of max_n |S_n| / (sigma_n sqrt(2 log log sigma_n))
    double median_ratio{0.0};
    //! First n whose sigma_n reaches e^e (log log sigma_n >= 1)
    std::size_t first_n{0};
    bool degenerate{false};
    double lower{0.5}, upper{1.3};
    bool verdict{false};
};

LilReport lil_check(MapSequence const& seq, Observable const& psi,
                    std::size_t n_max, std::size_t count,
                    std::size_t centering_count,
                    SamplingOptions const& options);

//! The same statistic for i.i.d. standard normal increments
LilReport lil_gaussian_selftest(std::size_t n_max, std::size_t count,
                                std::uint64_t seed);

//! Shared LIL evaluation over a count x (n_max + 1) matrix of partial sums
LilReport lil_from_sums(std::vector<double> const& sums, std::size_t n_max,
                        std::size_t count);

//---------------------------------------------------------------------------//
// Reversed-martingale decomposition
//---------------------------------------------------------------------------//

struct MartingaleOptions
{
    //! Full-tree depth used for h_j at points off the trajectory
    int cap{6};
    //! Sampled continuation paths beyond the cap (0 truncates)
    std::size_t budget{0};
    std::uint64_t seed{1};
};

/*!
 * h_j with h_0 = 0 and h_{j+1} = P_j(psi_j + h_j), psi_j centered.
 *
 * Unrolled, h_j(x) sums psi_{j-l} over the level-l preimages of x with weight
 * d^-l. Levels up to min(j, cap) come from a full tree; deeper levels are
 * either dropped or estimated by sampled backward paths.
 */
class HFunction
{
  public:
    HFunction(MapSequence const& seq, ObservableSequence const& psis,
              CenteringTable const& centering, MartingaleOptions options);

    struct Value
    {
        double value{0.0};
        double stderr_{0.0};
    };
    Value operator()(std::size_t j, ProjectivePoint const& x,
                     std::uint64_t key = 0) const;

    double centered(std::size_t j, ProjectivePoint const& x) const;

    //! Bound on the dropped levels when budget is zero
    double truncation_bound() const;
    MartingaleOptions const& options() const { return options_; }

  private:
    MapSequence const& seq_;
    ObservableSequence const& psis_;
    CenteringTable const& centering_;
    MartingaleOptions options_;
};

struct MartingaleDecomposition
{
    std::size_t count{0};
    std::size_t n_max{0};
    //! count x (n_max + 1): h_n(F_n x)
    std::vector<double> h;
    //! count x n_max
    std::vector<double> u;
    //! count x n_max: E[U_j^2 | B_{j+1}] along the trajectory
    std::vector<double> conditional_variance;
    //! Largest standard error of the off-trajectory h evaluations
    double h_stderr{0.0};
    double truncation_bound{0.0};
    //! nu_n^2 = sum_{j<n} mean(U_j^2), n = 0..n_max
    std::vector<double> nu2;
    //! max over trajectories and n of |sum_{j<n} U_j - (S_n - h_n o F_n)|
    double telescoping_error{0.0};

    double h_at(std::size_t i, std::size_t n) const
    {
        return h[i * (n_max + 1) + n];
    }
    double u_at(std::size_t i, std::size_t j) const
    {
        return u[i * n_max + j];
    }
};

//! Built on the trajectories and sums of b (fibers must be kept)
MartingaleDecomposition martingale_decompose(MapSequence const& seq,
                                             ObservableSequence const& psis,
                                             CenteringTable const& centering,
                                             TrajectoryBundle const& traj,
                                             BirkhoffSample const& b,
                                             MartingaleOptions const& options);

struct IdentityReport
{
    std::vector<std::size_t> js;
    //! max_x |P_j(psi_j + h_j)(x) - h_{j+1}(x)|
    std::vector<double> max_residual;
    double tolerance{1e-8};
    bool verdict{false};
};

//! Defining identity at random points with full trees (cap >= j_max + 1)
IdentityReport defining_identity_check(MapSequence const& seq,
                                       ObservableSequence const& psis,
                                       CenteringTable const& centering,
                                       std::size_t j_max, std::size_t points,
                                       std::uint64_t seed,
                                       double tolerance = 1e-8);

struct VarianceRelations
{
    std::vector<std::size_t> ns;
    std::vector<double> sigma, nu, h_l2;
    //! Spread of h_n o F_n across trajectories (diagnostic)
    std::vector<double> h_sd;
    double sup_gap{0.0};
    double sup_h{0.0};
    //! Slope of |sigma_n - nu_n| over the second half of the n grid
    double gap_slope{0.0};
    double gap_slope_stderr{0.0};
    //! Same slope for gap / stderr(gap); the trend verdict uses this
    double gap_z_slope{0.0};
    double gap_z_slope_stderr{0.0};
    double h_slope{0.0};
    double h_slope_stderr{0.0};
    //! Gap bounded by its early maximum and no resolved upward trend
    bool verdict{false};
    //! Orthogonality of increments
    std::size_t pairs{0};
    std::size_t pairs_outside{0};
    std::size_t pairs_allowed{0};
    double max_abs_z{0.0};
    bool orthogonal{false};
};

VarianceRelations variance_relations(MartingaleDecomposition const& md,
                                     BirkhoffSample const& b,
                                     std::size_t max_pair_index = 16);

struct AsipReport
{
    double gamma{0.8};
    double epsilon{0.25};
    std::vector<double> a;  //!< a_n = nu_n^(2 gamma) from the fitted nu_n^2
    bool ratio_sq_nonincreasing{false};  //!< a_n / nu_n^2
    bool ratio_nondecreasing{false};     //!< a_n / nu_n
    double nu2_fit_exponent{0.0};
    std::vector<double> fourth_moment;   //!< E[U_j^4]
    double fourth_moment_sup{0.0};
    double fourth_moment_spread{0.0};    //!< max/min over the second half
    std::vector<double> partial_sums;    //!< sum_{j<n} a_{j+1}^-2 E[U_j^4]
    double tail_increment{0.0};          //!< term at j = n_max - 1
    double tail_tolerance{1e-3};
    //! median over trajectories of |sum_{j<n} (E[U_j^2|B_{j+1}] - E U_j^2)| / a_n
    std::vector<double> conditional_ratio;
    bool verdict{false};
};

//! Requires gamma in ((1 + 2 eps) / (1 + 4 eps), 1)
AsipReport asip_condition_check(MartingaleDecomposition const& md,
                                double gamma, double epsilon,
                                double tail_tolerance = 1e-3);

/*!
 * sigma_n^2 by the transfer-operator route:
 * sum_{m<n} <mu_m, psi_m^2> + 2 <mu_m, psi_m h_m>, on independent mu_m clouds.
 */
struct TransferVariance
{
    std::vector<double> variance;
    std::vector<double> stderr_;
};

TransferVariance variance_transfer_route(MapSequence const& seq,
                                         ObservableSequence const& psis,
                                         CenteringTable const& centering,
                                         std::size_t n_max, std::size_t count,
                                         int cap,
                                         SamplingOptions const& options);

//! Norm-surrogate comparability |<mu_n, psi>| + 1 vs ||psi||_L1 + 1
struct SurrogateComparison
{
    std::vector<double> measure_side;
    double reference{0.0};
    double worst_factor{0.0};
    bool verdict{false};
};

SurrogateComparison surrogate_comparability(MapSequence const& seq,
                                            Observable const& psi,
                                            std::size_t n_max,
                                            std::size_t count,
                                            SamplingOptions const& options);

void to_json(nlohmann::json& j, VarianceCurve const& r);
void to_json(nlohmann::json& j, ErgodicReport const& r);
void to_json(nlohmann::json& j, MixingReport const& r);
void to_json(nlohmann::json& j, MulticorrelationReport const& r);
void to_json(nlohmann::json& j, SllnReport const& r);
void to_json(nlohmann::json& j, CltReport const& r);
void to_json(nlohmann::json& j, LilReport const& r);
void to_json(nlohmann::json& j, VarianceRelations const& r);
void to_json(nlohmann::json& j, AsipReport const& r);
void to_json(nlohmann::json& j, IdentityReport const& r);

}  // namespace greenlab
