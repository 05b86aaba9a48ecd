#pragma once

#include <cstddef>
#include <cstdint>

namespace pcalab::noise {

namespace detail {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace detail

/// Counter-based generator: every output is a pure function of
/// (master_seed, stream_id, counter). Streams are independent by keying, so
/// trajectories can be generated in any order on any number of threads.
class RngStream {
public:
    constexpr RngStream(std::uint64_t master_seed, std::uint64_t stream_id,
                        std::uint64_t counter = 0) noexcept
        : master_seed_(master_seed), stream_id_(stream_id), counter_(counter) {
        key0_ = detail::mix64(master_seed ^ detail::mix64(stream_id + detail::kGolden));
        key1_ = detail::mix64(key0_ ^ 0xD1B54A32D192ED03ULL) | 1U;
    }

    [[nodiscard]] constexpr std::uint64_t master_seed() const noexcept { return master_seed_; }
    [[nodiscard]] constexpr std::uint64_t stream_id() const noexcept { return stream_id_; }
    [[nodiscard]] constexpr std::uint64_t counter() const noexcept { return counter_; }

    /// Output at an absolute counter value; does not advance.
    [[nodiscard]] constexpr std::uint64_t at(std::uint64_t counter) const noexcept {
        std::uint64_t z = detail::mix64(counter * detail::kGolden + key0_);
        return detail::mix64((z ^ key1_) + counter);
    }

    /// out[i] = at(first + i) for i < 8.
    void at8(std::uint64_t first, std::uint64_t* out) const noexcept {
        for (std::uint64_t i = 0; i < 8; ++i) out[i] = at(first + i);
    }

    constexpr std::uint64_t next() noexcept { return at(counter_++); }
    constexpr void advance(std::uint64_t n) noexcept { counter_ += n; }

    /// Uniform double in [0, 1).
    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t master_seed_;
    std::uint64_t stream_id_;
    std::uint64_t counter_;
    std::uint64_t key0_ = 0;
    std::uint64_t key1_ = 0;
};

/// Counter budget of one lattice step: each 64-site block of a row owns
/// kCountersPerBlock consecutive counters. Planes 0..31 carry the bit-sliced
/// 32-bit uniform of every site in the block (plane 0 is the most significant
/// bit); plane kTiePlane carries tie-break coins.
inline constexpr std::uint64_t kCountersPerBlock = 64;
inline constexpr std::uint64_t kNoisePlanes = 32;
inline constexpr std::uint64_t kTiePlane = 32;

constexpr std::uint64_t counters_per_step(std::size_t blocks) noexcept {
    return static_cast<std::uint64_t>(blocks) * kCountersPerBlock;
}

}  // namespace pcalab::noise
