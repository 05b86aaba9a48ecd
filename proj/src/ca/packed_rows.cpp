#include "pcalab/ca/packed_rows.hpp"

#include <algorithm>
#include <bit>
#include <stdexcept>

namespace pcalab::ca {

namespace {

std::uint64_t mask_bits(std::size_t n) {
    const std::size_t r = n % kWordBits;
    return r == 0 ? ~std::uint64_t{0} : (std::uint64_t{1} << r) - 1;
}

// Word i of (in >> k), treating `in` as a big little-endian integer.
inline std::uint64_t shr_word(std::span<const std::uint64_t> in, std::size_t i, std::size_t k) {
    const std::size_t q = k / kWordBits, r = k % kWordBits;
    const std::size_t src = i + q;
    if (src >= in.size()) return 0;
    std::uint64_t v = in[src] >> r;
    if (r != 0 && src + 1 < in.size()) v |= in[src + 1] << (kWordBits - r);
    return v;
}

// Word i of (in << k).
inline std::uint64_t shl_word(std::span<const std::uint64_t> in, std::size_t i, std::size_t k) {
    const std::size_t q = k / kWordBits, r = k % kWordBits;
    if (i < q) return 0;
    const std::size_t src = i - q;
    std::uint64_t v = in[src] << r;
    if (r != 0 && src >= 1) v |= in[src - 1] >> (kWordBits - r);
    return v;
}

}  // namespace

void rotate_row(std::span<const std::uint64_t> in, std::span<std::uint64_t> out, std::size_t n,
                long offset) noexcept {
    const long ln = static_cast<long>(n);
    long k = offset % ln;
    if (k < 0) k += ln;
    const std::size_t uk = static_cast<std::size_t>(k);
    const std::uint64_t last = mask_bits(n);
    if (in.size() == 1) {
        const std::uint64_t w = in[0];
        out[0] = uk == 0 ? w : (((w >> uk) | (w << (n - uk))) & last);
        return;
    }
    if (uk == 0) {
        std::copy(in.begin(), in.end(), out.begin());
        return;
    }
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = shr_word(in, i, uk) | shl_word(in, i, n - uk);
    out[out.size() - 1] &= last;
}

PackedRows::PackedRows(const Lattice& lattice)
    : lattice_(lattice), rows_(lattice.rows()), wpr_(words_for(lattice.length)),
      last_mask_(mask_bits(lattice.length)), data_(rows_ * wpr_, 0) {
    lattice_.validate();
}

PackedRows PackedRows::from_config(const BitConfig& config) {
    PackedRows p(config.lattice());
    p.assign(config);
    return p;
}

void PackedRows::assign(const BitConfig& config) {
    if (!(config.lattice() == lattice_)) throw std::invalid_argument("lattice mismatch");
    std::fill(data_.begin(), data_.end(), 0);
    const std::size_t n = lattice_.length;
    if (rows_ == 1) {
        auto w = config.words();
        std::copy(w.begin(), w.end(), data_.begin());
        return;
    }
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t x = 0; x < n; ++x)
            if (config.get(r * n + x)) set(x, r, true);
}

BitConfig PackedRows::to_config() const {
    BitConfig c(lattice_);
    const std::size_t n = lattice_.length;
    if (rows_ == 1) {
        auto w = c.words();
        std::copy(data_.begin(), data_.end(), w.begin());
        return c;
    }
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t x = 0; x < n; ++x)
            if (get(x, r)) c.set(r * n + x, true);
    return c;
}

void PackedRows::set(std::size_t column, std::size_t r, bool value) noexcept {
    const std::uint64_t m = std::uint64_t{1} << (column % kWordBits);
    auto& w = data_[r * wpr_ + column / kWordBits];
    w = value ? (w | m) : (w & ~m);
}

std::size_t PackedRows::count() const noexcept {
    std::size_t n = 0;
    for (auto w : data_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
}

std::size_t PackedRows::count_row(std::size_t r) const noexcept {
    std::size_t n = 0;
    for (auto w : row(r)) n += static_cast<std::size_t>(std::popcount(w));
    return n;
}

bool PackedRows::none() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](std::uint64_t w) { return w == 0; });
}

void PackedRows::fill(bool value) noexcept {
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t w = 0; w < wpr_; ++w) data_[r * wpr_ + w] = value ? word_mask(w) : 0;
}

}  // namespace pcalab::ca
