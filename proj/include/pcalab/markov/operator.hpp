#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pcalab/ca/bit_config.hpp"
#include "pcalab/ca/rules.hpp"
#include "pcalab/noise/noise_model.hpp"

namespace pcalab::markov {

/// Largest site count accepted for exact vector evolution.
inline constexpr std::size_t kMaxExactSites = 26;

/// Probability distribution over all 2^N configurations, indexed by
/// BitConfig::index().
struct DistVector {
    ca::Lattice lattice;
    std::vector<double> p;

    static DistVector point_mass(const ca::BitConfig& config);
    static DistVector zeros_state(const ca::Lattice& lattice);

    [[nodiscard]] std::size_t dimension() const noexcept { return p.size(); }
    [[nodiscard]] double sum() const;
    [[nodiscard]] double probability_of(const ca::BitConfig& config) const;
    /// P(b_site = 1).
    [[nodiscard]] double marginal(std::size_t site) const;
    /// All single-site marginals in one pass.
    [[nodiscard]] std::vector<double> marginals() const;
    [[nodiscard]] double mean_magnetization() const;
};

/// The one-step map K_eps = K o prod_x (site noise) on the full state space,
/// applied matrix-free: site kernels sweep index pairs differing in one bit,
/// then the rule pushes mass forward, y[f(b)] += x[b].
///
/// GlauberZeroT2D is step dependent (checkerboard parity) and splits the mass
/// of each configuration evenly over the outcomes of its tie coins.
class TransitionOperator {
public:
    TransitionOperator(const ca::RuleSpec& rule, const noise::NoiseModel& noise, const ca::Lattice& lattice);
    /// Arbitrary per-site 2x2 tables (entries may be negative, e.g. for
    /// finite differences at negative epsilon).
    TransitionOperator(const ca::RuleSpec& rule, std::vector<noise::SiteKernel> kernels, const ca::Lattice& lattice);

    [[nodiscard]] std::size_t dimension() const noexcept { return dim_; }
    [[nodiscard]] std::size_t sites() const noexcept { return n_; }
    [[nodiscard]] const ca::RuleSpec& rule() const noexcept { return rule_; }
    [[nodiscard]] const ca::Lattice& lattice() const noexcept { return lattice_; }
    /// Bulk noise model (default-constructed for the raw-kernel constructor).
    [[nodiscard]] const noise::NoiseModel& noise() const noexcept { return noise_; }
    [[nodiscard]] bool step_dependent() const noexcept { return rule_.uses_tie_coins(); }

    /// y = K x (raw linear action; y must not alias x).
    void apply(std::span<const double> x, std::span<double> y, std::uint64_t step = 0) const;
    /// y = K^T x.
    void apply_transpose(std::span<const double> x, std::span<double> y, std::uint64_t step = 0) const;
    /// In-place noise sub-step only.
    void apply_noise(std::span<double> x) const;
    /// Deterministic push-forward only.
    void push_forward(std::span<const double> x, std::span<double> y, std::uint64_t step = 0) const;

    /// One step on a distribution with clamping of round-off negatives.
    [[nodiscard]] DistVector apply(const DistVector& x, std::uint64_t step = 0) const;

    /// Image of configuration index b under the deterministic rule (ties -> 0).
    [[nodiscard]] std::uint32_t image(std::uint64_t b, std::uint64_t step = 0) const noexcept {
        return map_[step_dependent() ? step % 2 : 0][b];
    }

private:
    void build_maps();

    ca::RuleSpec rule_;
    ca::Lattice lattice_;
    noise::NoiseModel noise_;
    std::size_t n_ = 0;
    std::size_t dim_ = 0;
    std::vector<noise::SiteKernel> kernels_;
    std::vector<bool> identity_site_;
    std::vector<std::uint32_t> map_[2];
    std::vector<std::uint32_t> ties_[2];
};

/// K^t x0, starting the step counter at `first_step`.
DistVector evolve_dist(const TransitionOperator& op, const DistVector& x0, std::uint64_t t,
                       std::uint64_t first_step = 0);

/// Image index of configuration index b under one deterministic update.
std::uint64_t rule_image(const ca::RuleSpec& rule, const ca::Lattice& lattice, std::uint64_t b,
                         std::uint64_t step = 0, bool coins = false);

}  // namespace pcalab::markov
