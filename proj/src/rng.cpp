#include "greenlab/rng.hpp"

#include <cmath>
#include <numbers>

namespace greenlab
{
double CounterRng::normal()
{
    double u1 = uniform();
    double u2 = uniform();
    // 1 - u1 lies in (0, 1], so the log is finite.
    return std::sqrt(-2.0 * std::log1p(-u1))
           * std::cos(2 * std::numbers::pi * u2);
}

}  // namespace greenlab
