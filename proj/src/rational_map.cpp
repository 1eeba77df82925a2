#include "greenlab/rational_map.hpp"

#include <algorithm>
#include <cmath>
#include <regex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "greenlab/errors.hpp"
#include "greenlab/preimage.hpp"

namespace greenlab
{
namespace
{
constexpr double image_threshold = 1e-200;

// Powers z^0 .. z^d
void fill_powers(complex z, int d, std::array<complex, max_degree + 1>& out)
{
    out[0] = 1.0;
    for (int k = 1; k <= d; ++k)
        out[k] = out[k - 1] * z;
}

complex sylvester_determinant(std::vector<complex> m, std::size_t n)
{
    complex det = 1.0;
    for (std::size_t col = 0; col < n; ++col)
    {
        std::size_t pivot = col;
        double best = std::abs(m[col * n + col]);
        for (std::size_t r = col + 1; r < n; ++r)
        {
            double v = std::abs(m[r * n + col]);
            if (v > best)
            {
                best = v;
                pivot = r;
            }
        }
        if (best == 0.0)
            return 0.0;
        if (pivot != col)
        {
            for (std::size_t c = 0; c < n; ++c)
                std::swap(m[col * n + c], m[pivot * n + c]);
            det = -det;
        }
        complex diag = m[col * n + col];
        det *= diag;
        for (std::size_t r = col + 1; r < n; ++r)
        {
            complex factor = m[r * n + col] / diag;
            if (factor == complex{})
                continue;
            for (std::size_t c = col; c < n; ++c)
                m[r * n + c] -= factor * m[col * n + c];
        }
    }
    return det;
}

std::string strip_parens(std::string s)
{
    if (s.size() >= 2 && s.front() == '(' && s.back() == ')')
        return s.substr(1, s.size() - 2);
    return s;
}

// "+0.25", "-(1+2i)", "+(0.1-0.3i)" -> signed complex
complex parse_signed_constant(std::string const& s)
{
    if (s.empty())
        return 0.0;
    double sign = 1.0;
    std::string body = s;
    if (body.front() == '+' || body.front() == '-')
    {
        sign = body.front() == '-' ? -1.0 : 1.0;
        body = body.substr(1);
    }
    return sign * parse_complex(strip_parens(body));
}
}  // namespace

void normalize_coefficients(std::vector<complex>& p, std::vector<complex>& q)
{
    complex pivot = 0.0;
    double best = 0.0;
    for (auto const* v : {&p, &q})
    {
        for (complex c : *v)
        {
            if (std::abs(c) > best)
            {
                best = std::abs(c);
                pivot = c;
            }
        }
    }
    if (!(best > 0.0) || !std::isfinite(best))
        throw DegenerateMap("coefficient vector is zero or not finite");
    complex scale = std::conj(pivot) / (best * best);
    for (auto* v : {&p, &q})
    {
        for (complex& c : *v)
            c *= scale;
    }
}

HomogeneousMap::HomogeneousMap(std::vector<complex> p, std::vector<complex> q)
    : p_(std::move(p)), q_(std::move(q))
{
    if (p_.size() != q_.size() || p_.size() < 3)
    {
        throw InvalidSpec("binary forms need matching degree >= 2");
    }
    degree_ = static_cast<int>(p_.size()) - 1;
    if (degree_ > max_degree)
    {
        throw InvalidSpec("degree above " + std::to_string(max_degree)
                          + " is not supported");
    }
    normalize_coefficients(p_, q_);
    dist_ = greenlab::dist_to_degenerate(p_, q_);
}

std::pair<complex, complex> HomogeneousMap::lift(complex z0, complex z1) const
{
    std::array<complex, max_degree + 1> w0, w1;
    fill_powers(z0, degree_, w0);
    fill_powers(z1, degree_, w1);
    complex pv = 0.0, qv = 0.0;
    for (int k = 0; k <= degree_; ++k)
    {
        complex mono = w0[k] * w1[degree_ - k];
        pv += p_[k] * mono;
        qv += q_[k] * mono;
    }
    return {pv, qv};
}

HomogeneousMap::LiftJet HomogeneousMap::lift_jet(complex z0, complex z1) const
{
    std::array<complex, max_degree + 1> w0, w1;
    fill_powers(z0, degree_, w0);
    fill_powers(z1, degree_, w1);
    int const d = degree_;
    LiftJet jet{0.0, 0.0, 0.0};
    complex p0 = 0.0, p1 = 0.0, q0 = 0.0, q1 = 0.0;
    for (int k = 0; k <= d; ++k)
    {
        complex mono = w0[k] * w1[d - k];
        jet.p += p_[k] * mono;
        jet.q += q_[k] * mono;
        if (k > 0)
        {
            complex m0 = static_cast<double>(k) * w0[k - 1] * w1[d - k];
            p0 += p_[k] * m0;
            q0 += q_[k] * m0;
        }
        if (k < d)
        {
            complex m1 = static_cast<double>(d - k) * w0[k] * w1[d - k - 1];
            p1 += p_[k] * m1;
            q1 += q_[k] * m1;
        }
    }
    jet.jacobian = p0 * q1 - p1 * q0;
    return jet;
}

std::string HomogeneousMap::describe() const
{
    std::ostringstream os;
    os.precision(6);
    os << "deg " << degree_ << " P=[";
    for (int k = 0; k <= degree_; ++k)
        os << (k ? "," : "") << p_[k];
    os << "] Q=[";
    for (int k = 0; k <= degree_; ++k)
        os << (k ? "," : "") << q_[k];
    os << "]";
    return os.str();
}

ProjectivePoint evaluate(HomogeneousMap const& f, ProjectivePoint const& p)
{
    auto [pv, qv] = f.lift(p.z0(), p.z1());
    if (std::abs(pv) < image_threshold && std::abs(qv) < image_threshold)
    {
        throw DegenerateImage("both forms vanish at " + to_string(p));
    }
    return normalize(pv, qv);
}

double derivative_norm(HomogeneousMap const& f, ProjectivePoint const& p)
{
    auto jet = f.lift_jet(p.z0(), p.z1());
    double image_norm2 = std::norm(jet.p) + std::norm(jet.q);
    if (image_norm2 < image_threshold * image_threshold)
    {
        throw DegenerateImage("both forms vanish at " + to_string(p));
    }
    return std::abs(jet.jacobian) / (f.degree() * image_norm2);
}

complex resultant(std::span<complex const> p, std::span<complex const> q)
{
    if (p.size() != q.size() || p.size() < 2)
        throw InvalidSpec("resultant needs two forms of equal degree");
    std::size_t const d = p.size() - 1;
    std::size_t const n = 2 * d;
    std::vector<complex> m(n * n, 0.0);
    // Rows hold coefficients in descending powers of z0, shifted per row.
    for (std::size_t row = 0; row < d; ++row)
    {
        for (std::size_t k = 0; k <= d; ++k)
        {
            m[row * n + row + k] = p[d - k];
            m[(row + d) * n + row + k] = q[d - k];
        }
    }
    return sylvester_determinant(std::move(m), n);
}

complex resultant(HomogeneousMap const& f)
{
    return resultant(f.p(), f.q());
}

namespace
{
// min over roots y of one form of |other(y)| on unit representatives. The
// Sylvester determinant of an exactly degenerate pair is only zero up to
// roundoff, so shared roots are also checked directly.
double common_root_gap(std::vector<complex> const& p,
                       std::vector<complex> const& q)
{
    auto all_zero = [](std::vector<complex> const& c) {
        return std::all_of(c.begin(), c.end(),
                           [](complex v) { return v == complex{}; });
    };
    if (all_zero(p) || all_zero(q))
        return 0.0;
    int d = static_cast<int>(p.size()) - 1;
    auto value_at = [d](std::vector<complex> const& c, ProjectivePoint const& y) {
        complex acc = 0.0;
        for (int k = 0; k <= d; ++k)
            acc += c[k] * std::pow(y.z0(), k) * std::pow(y.z1(), d - k);
        return std::abs(acc);
    };
    double gap = 1.0;
    try
    {
        for (auto const& r : solve_binary_form(p).points)
            gap = std::min(gap, value_at(q, r.point));
        for (auto const& r : solve_binary_form(q).points)
            gap = std::min(gap, value_at(p, r.point));
    }
    catch (SolverDivergence const&)
    {
        // leave the decision to the resultant
    }
    return gap;
}
}  // namespace

double dist_to_degenerate(std::span<complex const> p,
                          std::span<complex const> q)
{
    std::vector<complex> pn(p.begin(), p.end()), qn(q.begin(), q.end());
    normalize_coefficients(pn, qn);
    double d = static_cast<double>(pn.size() - 1);
    double res = std::abs(resultant(pn, qn));
    double dist = std::min(1.0, std::pow(res, 1.0 / d));
    if (dist >= degeneracy_threshold
        && common_root_gap(pn, qn) < degeneracy_threshold)
        dist = 0.0;
    if (!(dist >= degeneracy_threshold))
    {
        std::ostringstream os;
        os << "proxy distance " << dist << " below " << degeneracy_threshold;
        throw DegenerateMap(os.str());
    }
    return dist;
}

double dist_to_degenerate(HomogeneousMap const& f)
{
    return f.dist_to_degenerate();
}

HomogeneousMap power_map(int degree)
{
    if (degree < 2)
        throw InvalidSpec("degree must be at least 2");
    std::vector<complex> p(degree + 1, 0.0), q(degree + 1, 0.0);
    p[degree] = 1.0;
    q[0] = 1.0;
    return HomogeneousMap(std::move(p), std::move(q));
}

HomogeneousMap quadratic_map(complex c)
{
    return HomogeneousMap({c, 0.0, 1.0}, {1.0, 0.0, 0.0});
}

HomogeneousMap quadratic_ratio_map(complex a, complex b)
{
    return HomogeneousMap({a, 0.0, 1.0}, {b, 0.0, 1.0});
}

HomogeneousMap degenerating_map(int degree, double t)
{
    if (degree < 2)
        throw InvalidSpec("degree must be at least 2");
    std::vector<complex> p(degree + 1, 0.0), q(degree + 1, 0.0);
    p[degree] = 1.0;
    q[degree] = t;
    q[0] = 1.0 - t;
    return HomogeneousMap(std::move(p), std::move(q));
}

HomogeneousMap parse_map(std::string const& raw)
{
    std::string text;
    for (char c : raw)
    {
        if (!std::isspace(static_cast<unsigned char>(c)))
            text.push_back(c);
    }
    if (text.empty())
        throw InvalidSpec("empty map literal");

    if (text.front() == '{')
    {
        nlohmann::json j;
        try
        {
            j = nlohmann::json::parse(raw);
        }
        catch (nlohmann::json::exception const& e)
        {
            throw InvalidSpec(std::string("map JSON: ") + e.what());
        }
        auto read = [&](char const* key) {
            if (!j.contains(key) || !j[key].is_array())
                throw InvalidSpec(std::string("map JSON needs array '") + key
                                  + "'");
            std::vector<complex> out;
            for (auto const& c : j[key])
            {
                if (c.is_array() && c.size() == 2)
                    out.emplace_back(c[0].get<double>(), c[1].get<double>());
                else if (c.is_number())
                    out.emplace_back(c.get<double>(), 0.0);
                else
                    throw InvalidSpec("coefficient must be [re, im]");
            }
            return out;
        };
        return HomogeneousMap(read("p"), read("q"));
    }

    static std::regex const power_re(R"(^z\^(\d+)(.*)$)");
    static std::regex const ratio_re(
        R"(^\(z\^2([+-].+)\)/\(z\^2([+-].+)\)$)");
    std::smatch m;
    if (std::regex_match(text, m, ratio_re))
    {
        return quadratic_ratio_map(parse_signed_constant(m[1]),
                                   parse_signed_constant(m[2]));
    }
    if (std::regex_match(text, m, power_re))
    {
        int d = std::stoi(m[1]);
        if (d < 2 || d > max_degree)
            throw InvalidSpec("map degree out of range in '" + raw + "'");
        complex c = parse_signed_constant(m[2]);
        std::vector<complex> p(d + 1, 0.0), q(d + 1, 0.0);
        p[d] = 1.0;
        p[0] = c;
        q[0] = 1.0;
        return HomogeneousMap(std::move(p), std::move(q));
    }
    throw InvalidSpec("unrecognized map literal '" + raw + "'");
}

}  // namespace greenlab
