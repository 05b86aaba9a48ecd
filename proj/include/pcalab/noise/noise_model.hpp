#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <vector>

#include "pcalab/ca/bit_config.hpp"
#include "pcalab/ca/packed_rows.hpp"
#include "pcalab/ca/rules.hpp"
#include "pcalab/noise/rng.hpp"

namespace pcalab::noise {

struct SiteNoise {
    double p_up = 0.0;    ///< 0 -> 1
    double p_down = 0.0;  ///< 1 -> 0

    friend bool operator==(const SiteNoise&, const SiteNoise&) = default;
};

/// Independent per-site flip channel, applied before the deterministic rule.
class NoiseModel {
public:
    NoiseModel() = default;
    NoiseModel(double p_up, double p_down);

    static NoiseModel up_biased(double eps) { return {eps, 0.0}; }
    static NoiseModel down_biased(double eps) { return {0.0, eps}; }

    /// Overrides the bulk probabilities at one site.
    void set_site(std::size_t site, double p_up, double p_down);

    [[nodiscard]] double p_up() const noexcept { return bulk_.p_up; }
    [[nodiscard]] double p_down() const noexcept { return bulk_.p_down; }
    [[nodiscard]] SiteNoise at(std::size_t site) const;
    [[nodiscard]] const std::map<std::size_t, SiteNoise>& overrides() const noexcept { return overrides_; }

    [[nodiscard]] bool is_up_biased() const;
    [[nodiscard]] bool is_down_biased() const;
    [[nodiscard]] bool is_identity() const;

private:
    SiteNoise bulk_{};
    std::map<std::size_t, SiteNoise> overrides_;
};

/// Column-stochastic 2x2 table; entry(to, from).
struct SiteKernel {
    std::array<std::array<double, 2>, 2> m{};
    [[nodiscard]] double operator()(int to, int from) const noexcept { return m[to][from]; }
};

SiteKernel site_kernel(const NoiseModel& noise, std::size_t site);

/// Noise model lowered onto the PackedRows layout of one lattice.
///
/// Site j of a block flips when its 32-bit uniform u_j (bit-sliced over
/// counter planes 0..31 of the block, plane 0 most significant) is below
/// floor(p * 2^32), with p = p_up or p_down depending on the current bit.
/// Probability 1 bypasses the comparison.
class CompiledNoise {
public:
    CompiledNoise() = default;
    CompiledNoise(const NoiseModel& noise, const ca::Lattice& lattice);

    [[nodiscard]] bool trivial() const noexcept { return trivial_; }

    /// Applies the noise sub-step to `state` using counters starting at `base`.
    void apply(ca::PackedRows& state, const RngStream& rng, std::uint64_t base) const;

private:
    struct Block {
        std::array<std::uint64_t, kNoisePlanes> up{};
        std::array<std::uint64_t, kNoisePlanes> down{};
        std::uint64_t any_up = 0, any_down = 0;
        std::uint64_t always_up = 0, always_down = 0;
    };
    std::vector<Block> blocks_;
    bool trivial_ = true;
};

std::uint32_t threshold32(double p);

/// Noise sub-step followed by one rule application, on the kernel layout.
/// Step t draws from counters [t * counters_per_step, (t + 1) * counters_per_step).
class NoisyStepper {
public:
    NoisyStepper(const ca::RuleSpec& rule, const NoiseModel& noise, const ca::Lattice& lattice);

    /// Advances `cur` by one step in place (`tmp` is a work buffer).
    void step(ca::PackedRows& cur, ca::PackedRows& tmp, const RngStream& rng, std::uint64_t t);
    /// Noise sub-step only.
    void noise_only(ca::PackedRows& cur, const RngStream& rng, std::uint64_t t) const;

    [[nodiscard]] const ca::RuleSpec& rule() const noexcept { return rule_; }
    [[nodiscard]] const ca::Lattice& lattice() const noexcept { return lattice_; }
    [[nodiscard]] std::uint64_t counters_per_step() const noexcept { return per_step_; }

private:
    ca::RuleSpec rule_;
    ca::Lattice lattice_;
    CompiledNoise noise_;
    std::uint64_t per_step_ = 0;
    std::vector<std::uint64_t> scratch_;
    ca::PackedRows coins_;
};

/// One noisy step on a BitConfig. Consumes counters_per_step() counters of
/// `rng` starting at its current counter, independent of the outcome.
ca::BitConfig sample_step(const ca::RuleSpec& rule, const NoiseModel& noise,
                          const ca::BitConfig& config, RngStream& rng);

}  // namespace pcalab::noise
