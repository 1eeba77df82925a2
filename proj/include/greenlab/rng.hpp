#pragma once

#include <cstdint>
#include <limits>

namespace greenlab
{
//! Finalizer of splitmix64: a bijective 64-bit mixer
constexpr std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

//! Stream identifiers so that different modules never share draws.
enum class StreamId : std::uint64_t
{
    perturbation = 1,
    backward_paths = 2,
    tree_sampling = 3,
    measure = 4,
    centering = 5,
    trajectories = 6,
    observable_norms = 7,
    holder_pairs = 8,
    transfer_sampling = 9,
    h_continuation = 10,
    synthetic = 11,
};

//---------------------------------------------------------------------------//
/*!
 * Counter-based generator.
 *
 * Output i of the stream keyed by (seed, stream, item) is a pure function
 * mix64(key + i * golden), so any draw can be reproduced independently of the
 * order in which items are processed.
 */
class CounterRng
{
  public:
    using result_type = std::uint64_t;

    CounterRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t item)
        : key_(mix64(mix64(mix64(seed) ^ stream) ^ item))
    {
    }
    CounterRng(std::uint64_t seed, StreamId stream, std::uint64_t item)
        : CounterRng(seed, static_cast<std::uint64_t>(stream), item)
    {
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max()
    {
        return std::numeric_limits<result_type>::max();
    }

    result_type operator()()
    {
        ++counter_;
        return mix64(key_ + counter_ * 0xD1B54A32D192ED03ULL);
    }

    //! Uniform on [0, 1) with 53 random bits
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    //! Uniform index in [0, n)
    std::uint64_t index(std::uint64_t n)
    {
        // Lemire's multiply-shift; bias below 2^-64 * n is irrelevant here.
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>((*this)()) * n) >> 64);
    }

    //! Standard normal draw (Box-Muller, one value per call)
    double normal();

    std::uint64_t counter() const { return counter_; }

  private:
    std::uint64_t key_;
    std::uint64_t counter_{0};
};

//! Derive a child seed for (seed, stream, item) as a plain integer
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                                 std::uint64_t item)
{
    return mix64(mix64(mix64(seed) ^ stream) ^ item);
}

}  // namespace greenlab
