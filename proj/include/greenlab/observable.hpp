#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "geometry.hpp"
#include "rational_map.hpp"

namespace greenlab
{
enum class Regularity
{
    smooth,
    holder,
    dsh,
};

char const* to_string(Regularity r);

//! Chordal distance below which a DSH evaluation raises SingularHit
inline constexpr double singular_radius = 1e-12;

//---------------------------------------------------------------------------//
/*!
 * A real function on the sphere tagged with its regularity class.
 *
 * The norm surrogate is computed on first use: for DSH functions it is the
 * Fubini-Study L1 norm plus the mass (one) of the currents in dd^c psi =
 * T+ - T-; for Holder and smooth functions it is sup|psi| plus the
 * C^alpha (resp. Lipschitz) constant estimated from sampled pairs. Sums and
 * multiples bound their surrogate by the triangle inequality.
 */
class Observable
{
  public:
    using Evaluator = std::function<double(ProjectivePoint const&)>;

    Observable(std::string name, Evaluator fn, Regularity regularity,
               double alpha = 1.0, std::vector<ProjectivePoint> poles = {});

    static Observable constant(double c);
    //! 2 Re((z0 conj z1)^k) on unit representatives
    static Observable harmonic(int k);
    //! ch(., a)^alpha
    static Observable holder(double alpha, ProjectivePoint const& anchor);
    //! log ch(., a) - log ch(., b)
    static Observable dsh(ProjectivePoint const& a, ProjectivePoint const& b);
    //! zeta - zeta o f
    static Observable coboundary(Observable const& zeta, HomogeneousMap f);

    double operator()(ProjectivePoint const& p) const { return fn_(p); }

    std::string const& name() const { return name_; }
    Regularity regularity() const { return regularity_; }
    double alpha() const { return alpha_; }
    std::vector<ProjectivePoint> const& poles() const { return poles_; }
    bool is_constant() const { return constant_.has_value; }
    double constant_value() const { return constant_.value; }

    double norm_surrogate() const;
    //! Per-step decay floor implied by the regularity class
    double decay_floor(int degree) const;

    friend Observable operator+(Observable const& a, Observable const& b);
    friend Observable operator*(double s, Observable const& a);
    friend Observable operator-(Observable const& a, Observable const& b);
    //! psi - c
    Observable shifted(double c) const;

  private:
    struct Constant
    {
        bool has_value{false};
        double value{0.0};
    };
    std::string name_;
    Evaluator fn_;
    Regularity regularity_;
    double alpha_;
    std::vector<ProjectivePoint> poles_;
    Constant constant_;
    // Surrogate combination: sum of |coef| * surrogate of the parts
    std::vector<std::pair<double, std::shared_ptr<Observable const>>> parts_;
    struct Lazy;
    std::shared_ptr<Lazy> lazy_;

    double compute_surrogate() const;
};

//! Fubini-Study L1 norm by midpoint quadrature in (|z0|^2, arg)
double fs_l1_norm(Observable const& psi, int resolution = 400);

/*!
 * Parse an observable expression: a sum of optionally scaled terms such as
 * "harmonic(1)+harmonic(2)", "8*harmonic(4)", "holder(0.5, 1)",
 * "dsh(0, inf)", "const(2)", "zero" or "coboundary(harmonic(1))". The map is
 * required only by coboundary terms.
 */
Observable make_observable(std::string const& spec,
                           HomogeneousMap const* map = nullptr);

}  // namespace greenlab
