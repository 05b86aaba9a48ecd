#include "pcalab/noise/noise_model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace pcalab::noise {

namespace {

void check_probability(double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0))
        throw std::invalid_argument(std::string(what) + " must lie in [0,1], got " + std::to_string(p));
}

}  // namespace

NoiseModel::NoiseModel(double p_up, double p_down) : bulk_{p_up, p_down} {
    check_probability(p_up, "p_up");
    check_probability(p_down, "p_down");
}

void NoiseModel::set_site(std::size_t site, double p_up, double p_down) {
    check_probability(p_up, "p_up");
    check_probability(p_down, "p_down");
    overrides_[site] = {p_up, p_down};
}

SiteNoise NoiseModel::at(std::size_t site) const {
    auto it = overrides_.find(site);
    return it == overrides_.end() ? bulk_ : it->second;
}

bool NoiseModel::is_up_biased() const {
    if (bulk_.p_down != 0.0) return false;
    for (const auto& [s, n] : overrides_)
        if (n.p_down != 0.0) return false;
    return true;
}

bool NoiseModel::is_down_biased() const {
    if (bulk_.p_up != 0.0) return false;
    for (const auto& [s, n] : overrides_)
        if (n.p_up != 0.0) return false;
    return true;
}

bool NoiseModel::is_identity() const { return is_up_biased() && is_down_biased(); }

SiteKernel site_kernel(const NoiseModel& noise, std::size_t site) {
    const SiteNoise n = noise.at(site);
    SiteKernel k;
    k.m[0][0] = 1.0 - n.p_up;
    k.m[1][0] = n.p_up;
    k.m[0][1] = n.p_down;
    k.m[1][1] = 1.0 - n.p_down;
    return k;
}

std::uint32_t threshold32(double p) {
    if (p <= 0.0) return 0;
    if (p >= 1.0) return 0xFFFFFFFFu;
    return static_cast<std::uint32_t>(std::floor(std::ldexp(p, 32)));
}

CompiledNoise::CompiledNoise(const NoiseModel& noise, const ca::Lattice& lattice) {
    const ca::PackedRows layout(lattice);
    const std::size_t wpr = layout.words_per_row();
    blocks_.resize(layout.block_count());
    trivial_ = noise.is_identity();
    if (trivial_) return;
    for (std::size_t r = 0; r < layout.rows(); ++r) {
        for (std::size_t x = 0; x < lattice.length; ++x) {
            const SiteNoise n = noise.at(lattice.site_index(x, r));
            Block& b = blocks_[r * wpr + x / ca::kWordBits];
            const std::uint64_t bit = std::uint64_t{1} << (x % ca::kWordBits);
            auto lower = [&](double p, std::array<std::uint64_t, kNoisePlanes>& planes,
                             std::uint64_t& any, std::uint64_t& always) {
                if (p >= 1.0) {
                    always |= bit;
                    return;
                }
                const std::uint32_t th = threshold32(p);
                if (th == 0) return;
                any |= bit;
                for (std::size_t j = 0; j < kNoisePlanes; ++j)
                    if ((th >> (31 - j)) & 1U) planes[j] |= bit;
            };
            lower(n.p_up, b.up, b.any_up, b.always_up);
            lower(n.p_down, b.down, b.any_down, b.always_down);
        }
    }
}

void CompiledNoise::apply(ca::PackedRows& state, const RngStream& rng, std::uint64_t base) const {
    if (trivial_) return;
    auto data = state.data();
    const std::size_t wpr = state.words_per_row();
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Block& b = blocks_[i];
        const std::uint64_t x = data[i];
        const std::uint64_t valid = state.word_mask(i % wpr);
        std::uint64_t flip = ((x & b.always_down) | (~x & b.always_up)) & valid;
        std::uint64_t eq = ((x & b.any_down) | (~x & b.any_up)) & valid;
        std::uint64_t lt = 0;
        const std::uint64_t cbase = base + i * kCountersPerBlock;
        alignas(64) std::uint64_t u[8];
        for (std::size_t j0 = 0; j0 < kNoisePlanes && eq != 0; j0 += 8) {
            rng.at8(cbase + j0, u);
            for (std::size_t j = 0; j < 8; ++j) {
                const std::uint64_t th = (x & b.down[j0 + j]) | (~x & b.up[j0 + j]);
                lt |= eq & ~u[j] & th;
                eq &= ~(u[j] ^ th);
            }
        }
        data[i] = x ^ (flip | lt);
    }
}

NoisyStepper::NoisyStepper(const ca::RuleSpec& rule, const NoiseModel& noise, const ca::Lattice& lattice)
    : rule_(rule), lattice_(lattice), noise_(noise, lattice) {
    ca::check_compatible(rule, lattice);
    coins_ = ca::PackedRows(lattice);
    per_step_ = noise::counters_per_step(coins_.block_count());
}

void NoisyStepper::noise_only(ca::PackedRows& cur, const RngStream& rng, std::uint64_t t) const {
    noise_.apply(cur, rng, t * per_step_);
}

void NoisyStepper::step(ca::PackedRows& cur, ca::PackedRows& tmp, const RngStream& rng, std::uint64_t t) {
    const std::uint64_t base = t * per_step_;
    noise_.apply(cur, rng, base);
    ca::UpdateContext ctx{t, nullptr};
    if (rule_.uses_tie_coins()) {
        auto d = coins_.data();
        const std::size_t wpr = coins_.words_per_row();
        for (std::size_t i = 0; i < d.size(); ++i)
            d[i] = rng.at(base + i * kCountersPerBlock + kTiePlane) & coins_.word_mask(i % wpr);
        ctx.tie_coins = &coins_;
    }
    ca::apply_rule(rule_, cur, tmp, scratch_, ctx);
    std::swap(cur, tmp);
}

ca::BitConfig sample_step(const ca::RuleSpec& rule, const NoiseModel& noise, const ca::BitConfig& config,
                          RngStream& rng) {
    NoisyStepper stepper(rule, noise, config.lattice());
    const std::uint64_t per = stepper.counters_per_step();
    if (rng.counter() % per != 0)
        throw std::invalid_argument("rng counter is not aligned to a step boundary");
    ca::PackedRows cur = ca::PackedRows::from_config(config);
    ca::PackedRows tmp(config.lattice());
    stepper.step(cur, tmp, rng, rng.counter() / per);
    rng.advance(per);
    return cur.to_config();
}

}  // namespace pcalab::noise
