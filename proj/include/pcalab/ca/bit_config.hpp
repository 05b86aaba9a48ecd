#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pcalab/ca/lattice.hpp"

namespace pcalab::ca {

inline constexpr std::size_t kWordBits = 64;

inline constexpr std::size_t words_for(std::size_t bits) noexcept {
    return (bits + kWordBits - 1) / kWordBits;
}

/// One bit per site, site i stored in bit (i % 64) of word i / 64.
/// A set bit is an "error". Padding bits past the last site are always zero.
class BitConfig {
public:
    BitConfig() = default;
    explicit BitConfig(const Lattice& lattice);

    static BitConfig zeros(const Lattice& lattice) { return BitConfig(lattice); }
    static BitConfig ones(const Lattice& lattice);
    /// Configuration whose site i equals bit i of `index` (requires N <= 64).
    static BitConfig from_index(const Lattice& lattice, std::uint64_t index);
    /// Parses a string of '0'/'1' characters listed in site order.
    static BitConfig from_string(const Lattice& lattice, std::string_view bits);

    [[nodiscard]] const Lattice& lattice() const noexcept { return lattice_; }
    [[nodiscard]] std::size_t size() const noexcept { return lattice_.site_count(); }

    [[nodiscard]] bool get(std::size_t site) const noexcept {
        return (words_[site / kWordBits] >> (site % kWordBits)) & 1U;
    }
    [[nodiscard]] bool at(std::size_t column, std::size_t row) const noexcept {
        return get(lattice_.site_index(column, row));
    }
    void set(std::size_t site, bool value) noexcept;
    void set(std::size_t column, std::size_t row, bool value) noexcept {
        set(lattice_.site_index(column, row), value);
    }
    void flip(std::size_t site) noexcept { words_[site / kWordBits] ^= std::uint64_t{1} << (site % kWordBits); }

    [[nodiscard]] std::size_t count() const noexcept;
    [[nodiscard]] bool none() const noexcept;
    [[nodiscard]] bool all() const noexcept;

    /// Census index; requires N <= 64.
    [[nodiscard]] std::uint64_t index() const;

    [[nodiscard]] std::span<const std::uint64_t> words() const noexcept { return words_; }
    [[nodiscard]] std::span<std::uint64_t> words() noexcept { return words_; }
    /// Clears padding bits of the last word. Call after writing words() directly.
    void normalize() noexcept;

    [[nodiscard]] std::string to_string() const;

    friend bool operator==(const BitConfig& a, const BitConfig& b) noexcept {
        return a.lattice_ == b.lattice_ && a.words_ == b.words_;
    }
    /// Orders by the configuration's value read with the highest site as the
    /// most significant bit, i.e. by census index.
    friend std::strong_ordering operator<=>(const BitConfig& a, const BitConfig& b) noexcept;

    /// Sitewise a <= b.
    friend bool sitewise_leq(const BitConfig& a, const BitConfig& b) noexcept;

private:
    Lattice lattice_{};
    std::vector<std::uint64_t> words_;
};

}  // namespace pcalab::ca
