#include "greenlab/observable.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <mutex>
#include <numbers>
#include <optional>
#include <sstream>

#include "greenlab/errors.hpp"
#include "greenlab/rng.hpp"

namespace greenlab
{
namespace
{
constexpr std::size_t surrogate_points = 2000;

double checked_log_dist(ProjectivePoint const& p, ProjectivePoint const& a)
{
    double ch = chordal_dist(p, a);
    if (ch < singular_radius)
        throw SingularHit("evaluation within " + std::to_string(singular_radius)
                          + " of pole " + to_string(a));
    return std::log(ch);
}

std::string format_number(double v)
{
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}

int regularity_rank(Regularity r)
{
    return r == Regularity::smooth ? 0 : (r == Regularity::dsh ? 1 : 2);
}
}  // namespace

char const* to_string(Regularity r)
{
    switch (r)
    {
        case Regularity::smooth: return "smooth";
        case Regularity::holder: return "holder";
        case Regularity::dsh: return "dsh";
    }
    return "unknown";
}

struct Observable::Lazy
{
    std::once_flag once;
    double value{0.0};
};

Observable::Observable(std::string name, Evaluator fn, Regularity regularity,
                       double alpha, std::vector<ProjectivePoint> poles)
    : name_(std::move(name))
    , fn_(std::move(fn))
    , regularity_(regularity)
    , alpha_(alpha)
    , poles_(std::move(poles))
    , lazy_(std::make_shared<Lazy>())
{
}

Observable Observable::constant(double c)
{
    Observable obs("const(" + format_number(c) + ")",
                   [c](ProjectivePoint const&) { return c; },
                   Regularity::smooth);
    obs.constant_ = {true, c};
    return obs;
}

Observable Observable::harmonic(int k)
{
    if (k < 1)
        throw InvalidSpec("harmonic order must be at least 1");
    return Observable(
        "harmonic(" + std::to_string(k) + ")",
        [k](ProjectivePoint const& p) {
            complex w = p.z0() * std::conj(p.z1());
            complex wk = 1.0;
            for (int i = 0; i < k; ++i)
                wk *= w;
            return 2.0 * wk.real();
        },
        Regularity::smooth);
}

Observable Observable::holder(double alpha, ProjectivePoint const& anchor)
{
    if (!(alpha > 0 && alpha <= 1))
        throw InvalidSpec("Holder exponent must lie in (0, 1]");
    return Observable(
        "holder(" + format_number(alpha) + ", " + to_string(anchor) + ")",
        [alpha, anchor](ProjectivePoint const& p) {
            return std::pow(chordal_dist(p, anchor), alpha);
        },
        Regularity::holder, alpha);
}

Observable Observable::dsh(ProjectivePoint const& a, ProjectivePoint const& b)
{
    if (chordal_dist(a, b) < singular_radius)
        throw InvalidSpec("dsh observable needs two distinct poles");
    return Observable(
        "dsh(" + to_string(a) + ", " + to_string(b) + ")",
        [a, b](ProjectivePoint const& p) {
            return checked_log_dist(p, a) - checked_log_dist(p, b);
        },
        Regularity::dsh, 1.0, {a, b});
}

Observable Observable::coboundary(Observable const& zeta, HomogeneousMap f)
{
    auto inner = std::make_shared<Observable const>(zeta);
    auto map = std::make_shared<HomogeneousMap const>(std::move(f));
    Observable obs(
        "coboundary(" + zeta.name() + ")",
        [inner, map](ProjectivePoint const& p) {
            return (*inner)(p) - (*inner)(evaluate(*map, p));
        },
        zeta.regularity(), zeta.alpha(), zeta.poles());
    obs.parts_.emplace_back(2.0, inner);
    return obs;
}

Observable operator+(Observable const& a, Observable const& b)
{
    auto pa = std::make_shared<Observable const>(a);
    auto pb = std::make_shared<Observable const>(b);
    Regularity reg = regularity_rank(a.regularity_) >= regularity_rank(b.regularity_)
                         ? a.regularity_
                         : b.regularity_;
    auto poles = a.poles_;
    poles.insert(poles.end(), b.poles_.begin(), b.poles_.end());
    Observable sum(
        a.name_ + "+" + b.name_,
        [pa, pb](ProjectivePoint const& p) { return (*pa)(p) + (*pb)(p); },
        reg, std::min(a.alpha_, b.alpha_), std::move(poles));
    if (a.constant_.has_value && b.constant_.has_value)
        sum.constant_ = {true, a.constant_.value + b.constant_.value};
    sum.parts_.emplace_back(1.0, pa);
    sum.parts_.emplace_back(1.0, pb);
    return sum;
}

Observable operator*(double s, Observable const& a)
{
    auto pa = std::make_shared<Observable const>(a);
    Observable scaled(
        format_number(s) + "*" + a.name_,
        [pa, s](ProjectivePoint const& p) { return s * (*pa)(p); },
        a.regularity_, a.alpha_, a.poles_);
    if (a.constant_.has_value)
        scaled.constant_ = {true, s * a.constant_.value};
    scaled.parts_.emplace_back(std::abs(s), pa);
    return scaled;
}

Observable operator-(Observable const& a, Observable const& b)
{
    return a + (-1.0) * b;
}

Observable Observable::shifted(double c) const
{
    return *this + Observable::constant(-c);
}

double Observable::norm_surrogate() const
{
    std::call_once(lazy_->once, [this] { lazy_->value = compute_surrogate(); });
    return lazy_->value;
}

double Observable::decay_floor(int degree) const
{
    double log_d = std::log(static_cast<double>(degree));
    if (regularity_ == Regularity::holder)
        return 0.5 * alpha_ * log_d;
    return log_d;
}

double Observable::compute_surrogate() const
{
    if (constant_.has_value)
        return std::abs(constant_.value);
    if (!parts_.empty())
    {
        double total = 0.0;
        for (auto const& [coef, part] : parts_)
            total += coef * part->norm_surrogate();
        return total;
    }
    if (regularity_ == Regularity::dsh)
        return fs_l1_norm(*this) + 1.0;

    // sup |psi| plus the C^alpha constant from sampled pairs
    double sup = 0.0, ratio = 0.0;
    double const scales[] = {1e-1, 1e-2, 1e-3};
    for (std::size_t i = 0; i < surrogate_points; ++i)
    {
        CounterRng rng(0, StreamId::observable_norms, i);
        auto p = random_point(rng);
        double v = (*this)(p);
        sup = std::max(sup, std::abs(v));
        double s = scales[i % 3];
        auto q = sphere_step(p, 2 * std::asin(s),
                             2 * std::numbers::pi * rng.uniform());
        double dist = chordal_dist(p, q);
        if (dist > 0)
            ratio = std::max(ratio, std::abs(v - (*this)(q)) / std::pow(dist, alpha_));
    }
    return sup + ratio;
}

double fs_l1_norm(Observable const& psi, int resolution)
{
    // |z0|^2 = s is uniform under the normalized area measure.
    double total = 0.0;
    double hs = 1.0 / resolution;
    double ht = 2 * std::numbers::pi / resolution;
    for (int i = 0; i < resolution; ++i)
    {
        double s = (i + 0.5) * hs;
        double r0 = std::sqrt(s), r1 = std::sqrt(1 - s);
        double row = 0.0;
        for (int k = 0; k < resolution; ++k)
        {
            double t = (k + 0.5) * ht;
            auto p = normalize(r0, std::polar(r1, -t));
            try
            {
                row += std::abs(psi(p));
            }
            catch (SingularHit const&)
            {
                // measure-zero node on a pole
            }
        }
        total += row;
    }
    return total / (static_cast<double>(resolution) * resolution);
}

//---------------------------------------------------------------------------//
// Parsing
//---------------------------------------------------------------------------//

namespace
{
std::string trim(std::string s)
{
    auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

// Split at top-level occurrences of sep (parenthesis depth zero)
std::vector<std::string> split_top(std::string const& s, char sep)
{
    std::vector<std::string> out;
    int depth = 0;
    std::string cur;
    for (char c : s)
    {
        if (c == '(')
            ++depth;
        if (c == ')')
            --depth;
        if (c == sep && depth == 0)
        {
            out.push_back(trim(cur));
            cur.clear();
            continue;
        }
        cur.push_back(c);
    }
    out.push_back(trim(cur));
    return out;
}

Observable parse_expression(std::string const& s, HomogeneousMap const* map);

Observable parse_atom(std::string const& s, HomogeneousMap const* map)
{
    if (s == "zero")
        return Observable::constant(0.0);
    if (s == "one")
        return Observable::constant(1.0);
    auto open = s.find('(');
    if (open == std::string::npos || s.back() != ')')
        throw InvalidSpec("malformed observable term '" + s + "'");
    std::string name = trim(s.substr(0, open));
    std::string inner = s.substr(open + 1, s.size() - open - 2);
    auto args = split_top(inner, ',');
    auto need = [&](std::size_t n) {
        if (args.size() != n)
            throw InvalidSpec(name + " takes " + std::to_string(n)
                              + " argument(s)");
    };
    try
    {
        if (name == "harmonic")
        {
            need(1);
            return Observable::harmonic(std::stoi(args[0]));
        }
        if (name == "holder")
        {
            need(2);
            return Observable::holder(std::stod(args[0]), parse_point(args[1]));
        }
        if (name == "dsh")
        {
            need(2);
            return Observable::dsh(parse_point(args[0]), parse_point(args[1]));
        }
        if (name == "const")
        {
            need(1);
            return Observable::constant(std::stod(args[0]));
        }
        if (name == "coboundary")
        {
            if (!map)
                throw InvalidSpec("coboundary needs a map");
            return Observable::coboundary(parse_expression(inner, map), *map);
        }
    }
    catch (std::invalid_argument const&)
    {
        throw InvalidSpec("bad argument in '" + s + "'");
    }
    catch (std::out_of_range const&)
    {
        throw InvalidSpec("argument out of range in '" + s + "'");
    }
    throw InvalidSpec("unknown observable family '" + name + "'");
}

Observable parse_term(std::string s, HomogeneousMap const* map)
{
    s = trim(s);
    double sign = 1.0;
    while (!s.empty() && (s.front() == '+' || s.front() == '-'))
    {
        if (s.front() == '-')
            sign = -sign;
        s = trim(s.substr(1));
    }
    auto parts = split_top(s, '*');
    double scale = sign;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i)
    {
        try
        {
            std::size_t used = 0;
            scale *= std::stod(parts[i], &used);
            if (used != parts[i].size())
                throw std::invalid_argument("trailing");
        }
        catch (std::exception const&)
        {
            throw InvalidSpec("bad coefficient '" + parts[i] + "'");
        }
    }
    auto atom = parse_atom(parts.back(), map);
    if (scale == 1.0)
        return atom;
    return scale * atom;
}

Observable parse_expression(std::string const& s, HomogeneousMap const* map)
{
    // Split at top-level +/- that are not exponent signs or leading signs
    std::vector<std::string> terms;
    int depth = 0;
    std::string cur;
    for (std::size_t i = 0; i < s.size(); ++i)
    {
        char c = s[i];
        if (c == '(')
            ++depth;
        if (c == ')')
            --depth;
        bool is_sign = (c == '+' || c == '-') && depth == 0;
        bool exponent = i > 0 && (s[i - 1] == 'e' || s[i - 1] == 'E') && i > 1
                        && std::isdigit(static_cast<unsigned char>(s[i - 2]));
        if (is_sign && !exponent && !trim(cur).empty()
            && trim(cur).back() != '*')
        {
            terms.push_back(cur);
            cur.clear();
        }
        cur.push_back(c);
    }
    terms.push_back(cur);
    std::optional<Observable> total;
    for (auto const& t : terms)
    {
        auto term = parse_term(t, map);
        total = total ? *total + term : term;
    }
    return *total;
}
}  // namespace

Observable make_observable(std::string const& spec, HomogeneousMap const* map)
{
    auto s = trim(spec);
    if (s.empty())
        throw InvalidSpec("empty observable spec");
    return parse_expression(s, map);
}

}  // namespace greenlab
