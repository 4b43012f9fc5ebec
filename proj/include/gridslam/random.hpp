/* random.hpp */

#ifndef GRIDSLAM_RANDOM_HPP
#define GRIDSLAM_RANDOM_HPP

#include <cstdint>
#include <initializer_list>
#include <random>

namespace gridslam {

/* Stream tags keep the random streams of different stages disjoint */
enum class StreamTag : std::uint64_t
{
    Simulate = 1,
    Path = 2,
    ThetaAlgo1 = 3,
    ThetaPhase1 = 4,
    PoseCandidate = 5,
    Resample = 6,
    PriorMap = 7,
    Test = 99,
};

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace detail

/*
 * Seedable random source. Independent streams are derived from a run seed
 * and a tuple of integer keys, e.g. (stage, timestep, candidate), so work
 * items can draw their numbers in any order or on any thread and still
 * reproduce a sequential run bit for bit.
 */
class Rng
{
public:
    explicit Rng(std::uint64_t seed) : mEngine(seed) { }

    static Rng stream(std::uint64_t seed, StreamTag tag,
                      std::initializer_list<std::uint64_t> keys = {})
    {
        std::uint64_t h = detail::splitmix64(seed);
        h = detail::splitmix64(h ^ static_cast<std::uint64_t>(tag));
        for (const std::uint64_t key : keys)
            h = detail::splitmix64(h ^ (key + 0x632be59bd9b4e019ULL));
        return Rng(h);
    }

    /* Uniform on [0, 1) */
    double uniform() { return this->mUniform(this->mEngine); }
    /* Standard normal */
    double normal() { return this->mNormal(this->mEngine); }

    std::mt19937_64& engine() noexcept { return this->mEngine; }

private:
    std::mt19937_64 mEngine;
    std::uniform_real_distribution<double> mUniform { 0.0, 1.0 };
    std::normal_distribution<double> mNormal { 0.0, 1.0 };
};

} // namespace gridslam

#endif // GRIDSLAM_RANDOM_HPP
