#include "pcalab/ca/bit_config.hpp"

#include <bit>
#include <stdexcept>

namespace pcalab::ca {

namespace {

std::uint64_t tail_mask(std::size_t n) {
    const std::size_t r = n % kWordBits;
    return r == 0 ? ~std::uint64_t{0} : (std::uint64_t{1} << r) - 1;
}

}  // namespace

BitConfig::BitConfig(const Lattice& lattice) : lattice_(lattice) {
    lattice_.validate();
    words_.assign(words_for(lattice_.site_count()), 0);
}

BitConfig BitConfig::ones(const Lattice& lattice) {
    BitConfig c(lattice);
    for (auto& w : c.words_) w = ~std::uint64_t{0};
    c.normalize();
    return c;
}

BitConfig BitConfig::from_index(const Lattice& lattice, std::uint64_t index) {
    BitConfig c(lattice);
    if (c.size() > kWordBits) throw std::invalid_argument("from_index needs at most 64 sites");
    if (c.size() < kWordBits && (index >> c.size()) != 0)
        throw std::invalid_argument("index out of range for lattice");
    c.words_[0] = index;
    return c;
}

BitConfig BitConfig::from_string(const Lattice& lattice, std::string_view bits) {
    BitConfig c(lattice);
    if (bits.size() != c.size())
        throw std::invalid_argument("bit string length does not match site count");
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i] == '1') c.set(i, true);
        else if (bits[i] != '0') throw std::invalid_argument("bit string must contain only 0/1");
    }
    return c;
}

void BitConfig::set(std::size_t site, bool value) noexcept {
    const std::uint64_t m = std::uint64_t{1} << (site % kWordBits);
    auto& w = words_[site / kWordBits];
    w = value ? (w | m) : (w & ~m);
}

std::size_t BitConfig::count() const noexcept {
    std::size_t n = 0;
    for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
}

bool BitConfig::none() const noexcept {
    for (auto w : words_)
        if (w) return false;
    return true;
}

bool BitConfig::all() const noexcept { return count() == size(); }

std::uint64_t BitConfig::index() const {
    if (size() > kWordBits) throw std::logic_error("index() needs at most 64 sites");
    return words_.empty() ? 0 : words_[0];
}

void BitConfig::normalize() noexcept {
    if (!words_.empty()) words_.back() &= tail_mask(size());
}

std::string BitConfig::to_string() const {
    std::string s(size(), '0');
    for (std::size_t i = 0; i < size(); ++i)
        if (get(i)) s[i] = '1';
    return s;
}

std::strong_ordering operator<=>(const BitConfig& a, const BitConfig& b) noexcept {
    if (a.words_.size() != b.words_.size()) return a.words_.size() <=> b.words_.size();
    for (std::size_t i = a.words_.size(); i-- > 0;) {
        if (a.words_[i] != b.words_[i]) return a.words_[i] <=> b.words_[i];
    }
    return std::strong_ordering::equal;
}

bool sitewise_leq(const BitConfig& a, const BitConfig& b) noexcept {
    for (std::size_t i = 0; i < a.words_.size(); ++i)
        if (a.words_[i] & ~b.words_[i]) return false;
    return true;
}

}  // namespace pcalab::ca
