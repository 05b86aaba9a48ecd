#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pcalab/ca/bit_config.hpp"
#include "pcalab/ca/lattice.hpp"
#include "pcalab/ca/packed_rows.hpp"

namespace pcalab::ca {

enum class Rule { Stavskaya, ToomNEC2D, ToomLadder, Soldier, TwoLineVoting, GlauberZeroT2D };

/// Deterministic local update rule together with its geometry.
///
/// Rule definitions (periodic boundaries, sites indexed by column x and row y):
///  - Stavskaya:      b_x -> min(b_x, b_{x+1})
///  - ToomNEC2D:      b_{x,y} -> Maj(b_{x,y}, b_{x,y+1}, b_{x+1,y})
///  - ToomLadder:     top_x -> min(max(top_x, bot_x), top_{x-1}),
///                    bot_x -> min(max(top_x, bot_x), bot_{x+1})
///  - Soldier:        b_x -> Maj(b_x, b_{x+s}, b_{x+3s}) with s = +1 if b_x = 1, else -1
///  - TwoLineVoting:  top_x -> Maj(bot_x, top_{x-1}, top_{x-2}),
///                    bot_x -> Maj(top_x, bot_{x+1}, bot_{x+2})
///  - GlauberZeroT2D: on step t only sites with (x + y + t) even update; an
///                    updating site takes the majority of its four neighbours,
///                    a 2-2 tie is settled by a coin (or keeps its value when no
///                    coins are supplied).
struct RuleSpec {
    Rule rule = Rule::Stavskaya;

    [[nodiscard]] int radius() const noexcept;
    [[nodiscard]] LatticeKind lattice_kind() const noexcept;
    [[nodiscard]] bool is_monotone() const noexcept;
    [[nodiscard]] bool uses_tie_coins() const noexcept { return rule == Rule::GlauberZeroT2D; }
    [[nodiscard]] std::string name() const;

    friend bool operator==(const RuleSpec&, const RuleSpec&) = default;
};

RuleSpec parse_rule(std::string_view name);
std::vector<RuleSpec> all_rules();

/// Throws std::invalid_argument if the lattice cannot host the rule.
void check_compatible(const RuleSpec& rule, const Lattice& lattice);

/// Per-step inputs for rules that need more than the configuration.
struct UpdateContext {
    std::uint64_t step = 0;                ///< checkerboard parity for GlauberZeroT2D
    const PackedRows* tie_coins = nullptr; ///< coin bits for GlauberZeroT2D ties
};

/// One synchronous deterministic update. Throws on an incompatible lattice.
BitConfig apply_rule(const RuleSpec& rule, const BitConfig& config, const UpdateContext& ctx = {});

/// Kernel form used by the simulators: writes the update of `in` into `out`.
/// `scratch` is resized as needed. No lattice check is performed.
void apply_rule(const RuleSpec& rule, const PackedRows& in, PackedRows& out,
                std::vector<std::uint64_t>& scratch, const UpdateContext& ctx = {});

/// Scalar reference for a single site, used by tests and the exact solvers.
/// `tie_coin` is consulted only for GlauberZeroT2D ties.
bool apply_rule_at(const RuleSpec& rule, const BitConfig& config, std::size_t site,
                   std::uint64_t step = 0, std::optional<bool> tie_coin = std::nullopt);

/// Number of unperturbed steps until `island` becomes all-zeros, or nullopt if
/// that does not happen within `max_steps`. GlauberZeroT2D ties draw coins
/// from a counter-based stream keyed by `tie_seed`.
std::optional<std::uint64_t> erosion_step_count(const RuleSpec& rule, const BitConfig& island,
                                                std::uint64_t max_steps, std::uint64_t tie_seed = 0);

}  // namespace pcalab::ca
