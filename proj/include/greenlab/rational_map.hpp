#pragma once

#include <array>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "geometry.hpp"

namespace greenlab
{
//! Maps whose proxy distance to the degenerate locus falls below this are
//! rejected.
inline constexpr double degeneracy_threshold = 1e-12;
inline constexpr int max_degree = 8;

//---------------------------------------------------------------------------//
/*!
 * A degree-d rational map of the sphere given by two binary forms.
 *
 * Coefficient k of each form multiplies z0^k z1^(d-k), so in the affine chart
 * z = z0/z1 the map reads P(z,1)/Q(z,1) with coefficients in ascending
 * powers of z. The stacked coefficient vector is scaled so its largest entry
 * is real, positive and equal to one.
 */
class HomogeneousMap
{
  public:
    //! Throws InvalidSpec for mismatched sizes, DegenerateMap near M
    HomogeneousMap(std::vector<complex> p, std::vector<complex> q);

    int degree() const { return degree_; }
    std::span<complex const> p() const { return p_; }
    std::span<complex const> q() const { return q_; }

    //! Values of the lift (P, Q) at the given homogeneous coordinates
    std::pair<complex, complex> lift(complex z0, complex z1) const;

    //! Lift values plus the 2x2 Jacobian determinant
    struct LiftJet
    {
        complex p;
        complex q;
        complex jacobian;
    };
    LiftJet lift_jet(complex z0, complex z1) const;

    //! Proxy distance to the degenerate locus (cached at construction)
    double dist_to_degenerate() const { return dist_; }

    std::string describe() const;

  private:
    int degree_{0};
    std::vector<complex> p_;
    std::vector<complex> q_;
    double dist_{1.0};
};

//! normalize(P(p), Q(p)); throws DegenerateImage if both forms vanish
ProjectivePoint evaluate(HomogeneousMap const& f, ProjectivePoint const& p);

//! Spherical derivative of f at p measured in the chordal metric
double derivative_norm(HomogeneousMap const& f, ProjectivePoint const& p);

//! Determinant of the 2d x 2d Sylvester matrix of two binary forms
complex resultant(std::span<complex const> p, std::span<complex const> q);
complex resultant(HomogeneousMap const& f);

//! min(1, |Res|^(1/d)) on sup-normalized coefficients; throws DegenerateMap
double dist_to_degenerate(std::span<complex const> p,
                          std::span<complex const> q);
double dist_to_degenerate(HomogeneousMap const& f);

//! Scale a stacked coefficient vector to the canonical normalization
void normalize_coefficients(std::vector<complex>& p, std::vector<complex>& q);

//---------------------------------------------------------------------------//
// Map literals
//---------------------------------------------------------------------------//

//! z^d
HomogeneousMap power_map(int degree);
//! z^2 + c
HomogeneousMap quadratic_map(complex c);
//! (z^2 + a) / (z^2 + b)
HomogeneousMap quadratic_ratio_map(complex a, complex b);
//! Degree-d member of z0^d, t z0^d + (1 - t) z1^d
HomogeneousMap degenerating_map(int degree, double t);

/*!
 * Parse a map literal: "z^d", "z^2+c", "(z^2+a)/(z^2+b)", or a JSON object
 * {"p": [[re, im], ...], "q": [[re, im], ...]} in ascending powers.
 */
HomogeneousMap parse_map(std::string const& text);

}  // namespace greenlab
