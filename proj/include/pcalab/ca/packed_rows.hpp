#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pcalab/ca/bit_config.hpp"
#include "pcalab/ca/lattice.hpp"

namespace pcalab::ca {

/// Working layout for the update kernels: every lattice row starts on a word
/// boundary, so periodic shifts along a row never cross into another row.
/// Padding bits past the row length are kept zero.
class PackedRows {
public:
    PackedRows() = default;
    explicit PackedRows(const Lattice& lattice);

    static PackedRows from_config(const BitConfig& config);
    [[nodiscard]] BitConfig to_config() const;
    void assign(const BitConfig& config);

    [[nodiscard]] const Lattice& lattice() const noexcept { return lattice_; }
    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t row_length() const noexcept { return lattice_.length; }
    [[nodiscard]] std::size_t words_per_row() const noexcept { return wpr_; }
    [[nodiscard]] std::size_t block_count() const noexcept { return data_.size(); }

    [[nodiscard]] std::span<std::uint64_t> row(std::size_t r) noexcept {
        return {data_.data() + r * wpr_, wpr_};
    }
    [[nodiscard]] std::span<const std::uint64_t> row(std::size_t r) const noexcept {
        return {data_.data() + r * wpr_, wpr_};
    }
    [[nodiscard]] std::span<std::uint64_t> data() noexcept { return data_; }
    [[nodiscard]] std::span<const std::uint64_t> data() const noexcept { return data_; }

    /// Valid-bit mask of word `w` within a row.
    [[nodiscard]] std::uint64_t word_mask(std::size_t w) const noexcept {
        return w + 1 == wpr_ ? last_mask_ : ~std::uint64_t{0};
    }

    [[nodiscard]] bool get(std::size_t column, std::size_t r) const noexcept {
        return (data_[r * wpr_ + column / kWordBits] >> (column % kWordBits)) & 1U;
    }
    void set(std::size_t column, std::size_t r, bool value) noexcept;

    [[nodiscard]] std::size_t count() const noexcept;
    [[nodiscard]] std::size_t count_row(std::size_t r) const noexcept;
    [[nodiscard]] bool none() const noexcept;

    void fill(bool value) noexcept;

    friend bool operator==(const PackedRows& a, const PackedRows& b) noexcept {
        return a.lattice_ == b.lattice_ && a.data_ == b.data_;
    }

private:
    Lattice lattice_{};
    std::size_t rows_ = 0;
    std::size_t wpr_ = 0;
    std::uint64_t last_mask_ = 0;
    std::vector<std::uint64_t> data_;
};

/// out[x] = in[(x + offset) mod n] for a row of n sites stored in `in.size()`
/// words. `out` must not alias `in`.
void rotate_row(std::span<const std::uint64_t> in, std::span<std::uint64_t> out, std::size_t n,
                long offset) noexcept;

}  // namespace pcalab::ca
