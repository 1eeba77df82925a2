#pragma once

#include <array>
#include <complex>
#include <string>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

namespace greenlab
{
using complex = std::complex<double>;

//---------------------------------------------------------------------------//
/*!
 * A point of the Riemann sphere stored as a unit-norm pair of homogeneous
 * coordinates.
 *
 * The canonical representative has |z0|^2 + |z1|^2 = 1 and the coordinate of
 * largest modulus real and positive. Affine coordinate is z0 / z1, so [1:0] is
 * the point at infinity.
 */
class ProjectivePoint
{
  public:
    //! The point [0:1] (affine zero)
    ProjectivePoint() = default;

    complex z0() const { return z0_; }
    complex z1() const { return z1_; }

    //! Affine coordinate z0/z1; infinite for [1:0]
    complex affine() const;
    bool is_infinity() const { return z1_ == complex{}; }

    //! Bitwise equality of canonical representatives
    friend bool operator==(ProjectivePoint const&, ProjectivePoint const&)
        = default;

  private:
    complex z0_{0.0, 0.0};
    complex z1_{1.0, 0.0};

    friend ProjectivePoint normalize(complex, complex);
};

//! Canonical representative of [a:b]; throws ZeroVector for (0,0)
ProjectivePoint normalize(complex a, complex b);

//! The point [z:1]
ProjectivePoint from_affine(complex z);
ProjectivePoint infinity_point();

//! Chordal distance |z0 w1 - z1 w0| on unit representatives (diameter 1)
double chordal_dist(ProjectivePoint const& p, ProjectivePoint const& q);

// Unit-sphere embedding: [1:0] maps to the north pole and the chordal
// distance equals half the Euclidean distance of the images.
std::array<double, 3> to_sphere(ProjectivePoint const& p);
ProjectivePoint from_sphere(std::array<double, 3> const& v);

//! Move along the great circle leaving p with the given heading (radians,
//! measured in a fixed tangent frame) by the given sphere angle
ProjectivePoint sphere_step(ProjectivePoint const& p, double angle,
                            double heading);

class CounterRng;
//! Point drawn from the normalized area measure of the sphere
ProjectivePoint random_point(CounterRng& rng);

//! Parse "a+bi", "-2i", "0.5", "inf" into a point (affine literal)
ProjectivePoint parse_point(std::string_view text);
//! Parse a complex literal such as "0.4+0.7i"
complex parse_complex(std::string_view text);

std::string to_string(ProjectivePoint const& p);

void to_json(nlohmann::json& j, ProjectivePoint const& p);
void from_json(nlohmann::json const& j, ProjectivePoint& p);

}  // namespace greenlab
