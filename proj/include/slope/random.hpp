#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace slope {

/// Seedable generator with platform-independent variates.
///
/// Built on std::mt19937_64, whose output sequence is fixed by the standard.
/// The standard library distributions are not, so uniform, normal, Poisson
/// and categorical variates are derived here. Independent streams come from
/// hashing (seed, tag, index) with splitmix64, so each column or replicate
/// can be generated without reference to the others.
class Rng
{
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    static Rng stream(std::uint64_t seed, std::uint64_t tag, std::uint64_t index = 0);

    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    /// Standard normal via Box-Muller.
    double normal();
    /// Uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound);
    std::int64_t poisson(double mean);
    /// Index drawn with the given (normalized) probabilities.
    std::size_t categorical(std::span<const double> probs);

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);

} // namespace slope
