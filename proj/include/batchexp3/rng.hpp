#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string_view>

namespace batchexp3 {

// Finalizer of SplitMix64.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) noexcept
{
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

/// Counter-based random stream.
///
/// Every stream is addressed by (master seed, tag, a, b); the n-th output is
/// a pure function of that key and n, so the full stream position is the
/// single integer returned by position(). All distributions are implemented
/// here on top of next_u64() so that draws do not depend on the standard
/// library's implementation-defined distribution algorithms.
class Stream
{
public:
    using result_type = std::uint64_t;

    Stream() = default;

    Stream(std::uint64_t seed, std::string_view tag, std::uint64_t a = 0, std::uint64_t b = 0,
           std::uint64_t position = 0)
        : key_(derive_key(seed, tag, a, b)), position_(position)
    {
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept { return next_u64(); }

    result_type next_u64() noexcept
    {
        ++position_;
        return mix64(key_ + position_ * 0x9E3779B97F4A7C15ULL);
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) noexcept { return uniform() < p; }

    /// Uniform integer on [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) noexcept
    {
        const auto span = static_cast<double>(hi - lo + 1);
        auto k = static_cast<std::int64_t>(uniform() * span);
        return lo + (k > hi - lo ? hi - lo : k);
    }

    /// Standard normal via Box-Muller; consumes two uniforms.
    double normal() noexcept
    {
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Poisson by sequential inversion; consumes one uniform.
    std::uint64_t poisson(double mean)
    {
        if (!(mean >= 0.0) || mean > 700.0)
            throw std::invalid_argument("poisson mean must be in [0, 700]");
        const double u = uniform();
        double p = std::exp(-mean);
        double cdf = p;
        std::uint64_t k = 0;
        while (u >= cdf) {
            ++k;
            p *= mean / static_cast<double>(k);
            const double next = cdf + p;
            if (next == cdf)
                break;
            cdf = next;
        }
        return k;
    }

    std::uint64_t position() const noexcept { return position_; }
    void seek(std::uint64_t position) noexcept { position_ = position; }

private:
    static std::uint64_t derive_key(std::uint64_t seed, std::string_view tag, std::uint64_t a,
                                    std::uint64_t b) noexcept
    {
        std::uint64_t k = mix64(seed ^ fnv1a64(tag));
        k = mix64(k ^ (a + 0x632BE59BD9B4E019ULL));
        k = mix64(k ^ (b + 0x8CB92BA72F3D8DD7ULL));
        return k;
    }

    std::uint64_t key_ = 0;
    std::uint64_t position_ = 0;
};

} // namespace batchexp3
