#pragma once

#include <cstdint>
#include <cstring>
#include <string_view>
#include <type_traits>

namespace pcalab::util {

/// Incremental FNV-1a 64-bit digest.
class Fnv1a64 {
public:
    static constexpr std::uint64_t kOffset = 0xcbf29ce484222325ULL;
    static constexpr std::uint64_t kPrime = 0x100000001b3ULL;

    Fnv1a64& bytes(const void* data, std::size_t n) noexcept {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h_ ^= p[i];
            h_ *= kPrime;
        }
        return *this;
    }
    Fnv1a64& str(std::string_view s) noexcept {
        u64(s.size());
        return bytes(s.data(), s.size());
    }
    /// Hashes the little-endian encoding, independent of host byte order.
    Fnv1a64& u64(std::uint64_t v) noexcept {
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
        return bytes(b, 8);
    }
    Fnv1a64& f64(double v) noexcept {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        return u64(bits);
    }

    [[nodiscard]] std::uint64_t value() const noexcept { return h_; }

private:
    std::uint64_t h_ = kOffset;
};

inline std::uint64_t fnv1a64(std::string_view s) noexcept {
    return Fnv1a64{}.bytes(s.data(), s.size()).value();
}

}  // namespace pcalab::util
