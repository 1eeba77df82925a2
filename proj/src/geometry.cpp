#include "greenlab/geometry.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "greenlab/errors.hpp"
#include "greenlab/rng.hpp"

namespace greenlab
{
namespace
{
constexpr double zero_threshold = 1e-300;

// Modulus without hypot's rescaling when the square stays in range
inline double modulus(complex z)
{
    double n2 = std::norm(z);
    if (n2 > 1e-290 && n2 < 1e290)
        return std::sqrt(n2);
    return std::abs(z);
}

bool is_canonical(complex a, complex b)
{
    double na = modulus(a);
    double nb = modulus(b);
    double norm2 = std::norm(a) + std::norm(b);
    if (std::abs(norm2 - 1.0) > 4 * std::numeric_limits<double>::epsilon())
        return false;
    double big = std::max(na, nb);
    auto pivot_ok = [big](complex c) {
        return c.imag() == 0.0 && c.real() > 0.0
               && c.real() >= big * (1 - 1e-12);
    };
    return pivot_ok(a) || pivot_ok(b);
}
}  // namespace

const char* to_string(ErrorKind kind)
{
    switch (kind)
    {
        case ErrorKind::zero_vector: return "ZeroVector";
        case ErrorKind::degenerate_image: return "DegenerateImage";
        case ErrorKind::degenerate_map: return "DegenerateMap";
        case ErrorKind::solver_divergence: return "SolverDivergence";
        case ErrorKind::budget_exceeded: return "BudgetExceeded";
        case ErrorKind::no_convergence: return "NoConvergence";
        case ErrorKind::exceptional_base: return "ExceptionalBase";
        case ErrorKind::singular_hit: return "SingularHit";
        case ErrorKind::invalid_spec: return "InvalidSpec";
        case ErrorKind::degenerate_variance: return "DegenerateVariance";
        case ErrorKind::config_error: return "ConfigError";
        case ErrorKind::io_error: return "IOError";
    }
    return "Error";
}

ProjectivePoint normalize(complex a, complex b)
{
    ProjectivePoint result;
    if (is_canonical(a, b))
    {
        result.z0_ = a;
        result.z1_ = b;
        return result;
    }
    double na = modulus(a);
    double nb = modulus(b);
    if (!(na > zero_threshold || nb > zero_threshold))
    {
        throw ZeroVector("cannot normalize the zero vector");
    }
    if (!std::isfinite(na) || !std::isfinite(nb))
    {
        // Rescale before forming the norm to survive huge coordinates.
        if (std::isinf(na) && std::isinf(nb))
            throw ZeroVector("both coordinates infinite");
        if (std::isinf(na))
        {
            result.z0_ = 1.0;
            result.z1_ = 0.0;
        }
        else
        {
            result.z0_ = 0.0;
            result.z1_ = 1.0;
        }
        return result;
    }
    double big = std::max(na, nb), small = std::min(na, nb);
    double ratio = small / big;
    double norm = big * std::sqrt(1.0 + ratio * ratio);
    if (na >= nb)
    {
        complex phase = std::conj(a) / na;
        result.z0_ = complex(na / norm, 0.0);
        result.z1_ = b * phase / norm;
    }
    else
    {
        complex phase = std::conj(b) / nb;
        result.z0_ = a * phase / norm;
        result.z1_ = complex(nb / norm, 0.0);
    }
    return result;
}

complex ProjectivePoint::affine() const
{
    if (z1_ == complex{})
        return {std::numeric_limits<double>::infinity(), 0.0};
    return z0_ / z1_;
}

ProjectivePoint from_affine(complex z)
{
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
        return infinity_point();
    return normalize(z, 1.0);
}

ProjectivePoint infinity_point()
{
    return normalize(1.0, 0.0);
}

double chordal_dist(ProjectivePoint const& p, ProjectivePoint const& q)
{
    double d = std::abs(p.z0() * q.z1() - p.z1() * q.z0());
    return std::min(d, 1.0);
}

std::array<double, 3> to_sphere(ProjectivePoint const& p)
{
    complex c = p.z0() * std::conj(p.z1());
    return {2 * c.real(), 2 * c.imag(), std::norm(p.z0()) - std::norm(p.z1())};
}

ProjectivePoint from_sphere(std::array<double, 3> const& v)
{
    double len = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (!(len > 0))
        throw ZeroVector("zero vector is not on the sphere");
    double x = v[0] / len, y = v[1] / len, h = v[2] / len;
    if (h >= 0)
    {
        double r0 = std::sqrt((1 + h) / 2);
        return normalize(r0, complex(x, -y) / (2 * r0));
    }
    double r1 = std::sqrt((1 - h) / 2);
    return normalize(complex(x, y) / (2 * r1), r1);
}

ProjectivePoint sphere_step(ProjectivePoint const& p, double angle,
                            double heading)
{
    auto v = to_sphere(p);
    std::array<double, 3> a = std::abs(v[2]) < 0.9
                                  ? std::array<double, 3>{0, 0, 1}
                                  : std::array<double, 3>{1, 0, 0};
    std::array<double, 3> e1{a[1] * v[2] - a[2] * v[1],
                             a[2] * v[0] - a[0] * v[2],
                             a[0] * v[1] - a[1] * v[0]};
    double len = std::sqrt(e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]);
    for (auto& c : e1)
        c /= len;
    std::array<double, 3> e2{v[1] * e1[2] - v[2] * e1[1],
                             v[2] * e1[0] - v[0] * e1[2],
                             v[0] * e1[1] - v[1] * e1[0]};
    std::array<double, 3> w;
    for (int k = 0; k < 3; ++k)
    {
        double dir = std::cos(heading) * e1[k] + std::sin(heading) * e2[k];
        w[k] = std::cos(angle) * v[k] + std::sin(angle) * dir;
    }
    return from_sphere(w);
}

ProjectivePoint random_point(CounterRng& rng)
{
    // Archimedes: height uniform in [-1, 1], longitude uniform
    double h = 2 * rng.uniform() - 1;
    double lon = 2 * std::numbers::pi * rng.uniform();
    double r = std::sqrt(std::max(0.0, 1 - h * h));
    return from_sphere({r * std::cos(lon), r * std::sin(lon), h});
}

complex parse_complex(std::string_view text)
{
    std::string s;
    for (char c : text)
    {
        if (!std::isspace(static_cast<unsigned char>(c)))
            s.push_back(c);
    }
    if (s.empty())
        throw InvalidSpec("empty complex literal");

    auto fail = [&] {
        throw InvalidSpec("malformed complex literal '" + std::string(text)
                          + "'");
    };
    // Parse an optional real part followed by an optional imaginary part.
    auto parse_imag_tail = [&](char const* begin) -> double {
        // begin points at [+-]?[number]?i
        std::string rest(begin);
        if (rest.empty() || rest.back() != 'i')
            fail();
        rest.pop_back();
        if (rest.empty() || rest == "+")
            return 1.0;
        if (rest == "-")
            return -1.0;
        char* end = nullptr;
        double v = std::strtod(rest.c_str(), &end);
        if (end != rest.c_str() + rest.size())
            fail();
        return v;
    };

    char const* begin = s.c_str();
    if (s.back() != 'i')
    {
        char* end = nullptr;
        double re = std::strtod(begin, &end);
        if (end != begin + s.size())
            fail();
        return {re, 0.0};
    }
    // Find the split between real and imaginary parts: last sign that is not
    // an exponent sign and not at position 0.
    std::size_t split = std::string::npos;
    for (std::size_t i = s.size() - 1; i > 0; --i)
    {
        if ((s[i] == '+' || s[i] == '-') && s[i - 1] != 'e' && s[i - 1] != 'E')
        {
            split = i;
            break;
        }
    }
    if (split == std::string::npos)
        return {0.0, parse_imag_tail(begin)};
    std::string re_part = s.substr(0, split);
    char* end = nullptr;
    double re = std::strtod(re_part.c_str(), &end);
    if (end != re_part.c_str() + re_part.size())
        fail();
    return {re, parse_imag_tail(begin + split)};
}

ProjectivePoint parse_point(std::string_view text)
{
    std::string s;
    for (char c : text)
    {
        if (!std::isspace(static_cast<unsigned char>(c)))
            s.push_back(static_cast<char>(std::tolower(c)));
    }
    if (s == "inf" || s == "infinity" || s == "oo")
        return infinity_point();
    return from_affine(parse_complex(s));
}

std::string to_string(ProjectivePoint const& p)
{
    std::ostringstream os;
    os.precision(17);
    os << "[" << p.z0().real() << (p.z0().imag() < 0 ? "" : "+")
       << p.z0().imag() << "i : " << p.z1().real()
       << (p.z1().imag() < 0 ? "" : "+") << p.z1().imag() << "i]";
    return os.str();
}

void to_json(nlohmann::json& j, ProjectivePoint const& p)
{
    j = nlohmann::json::array({{p.z0().real(), p.z0().imag()},
                               {p.z1().real(), p.z1().imag()}});
}

void from_json(nlohmann::json const& j, ProjectivePoint& p)
{
    if (j.is_string())
    {
        p = parse_point(j.get<std::string>());
        return;
    }
    if (!j.is_array() || j.size() != 2 || !j[0].is_array() || j[0].size() != 2
        || !j[1].is_array() || j[1].size() != 2)
    {
        throw InvalidSpec("point must be [[re, im], [re, im]] or a string");
    }
    p = normalize({j[0][0].get<double>(), j[0][1].get<double>()},
                  {j[1][0].get<double>(), j[1][1].get<double>()});
}

}  // namespace greenlab
