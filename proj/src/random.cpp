#include <slope/random.hpp>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace slope {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Rng Rng::stream(std::uint64_t seed, std::uint64_t tag, std::uint64_t index)
{
    return Rng(splitmix64(splitmix64(splitmix64(seed) ^ tag) ^ index));
}

double Rng::uniform()
{
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal()
{
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 == 0.0);
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

std::uint64_t Rng::below(std::uint64_t bound)
{
    if (bound == 0) {
        throw std::invalid_argument("Rng::below: zero bound");
    }
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x = 0;
    do {
        x = engine_();
    } while (x >= limit);
    return x % bound;
}

std::int64_t Rng::poisson(double mean)
{
    if (!(mean >= 0.0) || !std::isfinite(mean)) {
        throw std::invalid_argument("Rng::poisson: mean must be finite and nonnegative");
    }
    if (mean == 0.0) {
        return 0;
    }
    if (mean < 30.0) {
        // Inversion by sequential search.
        std::int64_t k = 0;
        double term = std::exp(-mean);
        double cdf = term;
        const double u = uniform();
        while (u > cdf && term > 0.0) {
            ++k;
            term *= mean / static_cast<double>(k);
            cdf += term;
        }
        return k;
    }

    // Transformed rejection with squeeze (Hormann, PTRS).
    const double slam = std::sqrt(mean);
    const double loglam = std::log(mean);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    while (true) {
        const double u = uniform() - 0.5;
        const double v = uniform();
        const double us = 0.5 - std::abs(u);
        const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
        if (us >= 0.07 && v <= vr) {
            return static_cast<std::int64_t>(k);
        }
        if (k < 0.0 || (us < 0.013 && v > us)) {
            continue;
        }
        if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
            -mean + k * loglam - std::lgamma(k + 1.0)) {
            return static_cast<std::int64_t>(k);
        }
    }
}

std::size_t Rng::categorical(std::span<const double> probs)
{
    const double u = uniform();
    double cdf = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        cdf += probs[i];
        if (u < cdf) {
            return i;
        }
    }
    return probs.size() - 1;
}

} // namespace slope
