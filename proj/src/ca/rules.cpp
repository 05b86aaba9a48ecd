#include "pcalab/ca/rules.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>

#include "pcalab/noise/rng.hpp"

namespace pcalab::ca {

namespace {

inline std::uint64_t maj(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return (a & b) | (a & c) | (b & c);
}

std::size_t wrap(long v, std::size_t n) {
    const long ln = static_cast<long>(n);
    long r = v % ln;
    return static_cast<std::size_t>(r < 0 ? r + ln : r);
}

// Bits x of a row word w with (x + parity) even.
inline std::uint64_t checkerboard_word(std::size_t parity) {
    return (parity % 2 == 0) ? 0x5555555555555555ULL : 0xAAAAAAAAAAAAAAAAULL;
}

}  // namespace

int RuleSpec::radius() const noexcept {
    switch (rule) {
        case Rule::Stavskaya: return 1;
        case Rule::ToomNEC2D: return 1;
        case Rule::ToomLadder: return 1;
        case Rule::Soldier: return 3;
        case Rule::TwoLineVoting: return 2;
        case Rule::GlauberZeroT2D: return 1;
    }
    return 0;
}

LatticeKind RuleSpec::lattice_kind() const noexcept {
    switch (rule) {
        case Rule::Stavskaya:
        case Rule::Soldier: return LatticeKind::Chain1D;
        case Rule::ToomLadder:
        case Rule::TwoLineVoting: return LatticeKind::Ladder2xL;
        case Rule::ToomNEC2D:
        case Rule::GlauberZeroT2D: return LatticeKind::Torus2D;
    }
    return LatticeKind::Chain1D;
}

bool RuleSpec::is_monotone() const noexcept {
    return rule == Rule::Stavskaya || rule == Rule::ToomNEC2D || rule == Rule::ToomLadder;
}

std::string RuleSpec::name() const {
    switch (rule) {
        case Rule::Stavskaya: return "stavskaya";
        case Rule::ToomNEC2D: return "toom_nec_2d";
        case Rule::ToomLadder: return "toom_ladder";
        case Rule::Soldier: return "soldier";
        case Rule::TwoLineVoting: return "two_line_voting";
        case Rule::GlauberZeroT2D: return "glauber_zero_t_2d";
    }
    return "?";
}

RuleSpec parse_rule(std::string_view name) {
    for (const auto& r : all_rules())
        if (r.name() == name) return r;
    throw std::invalid_argument("unknown rule '" + std::string(name) + "'");
}

std::vector<RuleSpec> all_rules() {
    return {{Rule::Stavskaya}, {Rule::ToomNEC2D},     {Rule::ToomLadder},
            {Rule::Soldier},   {Rule::TwoLineVoting}, {Rule::GlauberZeroT2D}};
}

void check_compatible(const RuleSpec& rule, const Lattice& lattice) {
    lattice.validate();
    if (lattice.kind != rule.lattice_kind())
        throw std::invalid_argument("rule " + rule.name() + " requires a " +
                                    to_string(rule.lattice_kind()) + " lattice, got " +
                                    lattice.describe());
    if (lattice.boundary != Boundary::Periodic)
        throw std::invalid_argument("rule " + rule.name() + " requires periodic boundaries");
    if (rule.rule == Rule::GlauberZeroT2D && (lattice.length % 2 != 0 || lattice.width % 2 != 0))
        throw std::invalid_argument("glauber_zero_t_2d needs even torus extents for the checkerboard");
}

void apply_rule(const RuleSpec& rule, const PackedRows& in, PackedRows& out,
                std::vector<std::uint64_t>& scratch, const UpdateContext& ctx) {
    const std::size_t wpr = in.words_per_row();
    const std::size_t n = in.row_length();
    const std::size_t rows = in.rows();
    if (out.lattice() != in.lattice()) out = PackedRows(in.lattice());
    scratch.resize(4 * wpr);
    std::span<std::uint64_t> s0(scratch.data(), wpr), s1(scratch.data() + wpr, wpr),
        s2(scratch.data() + 2 * wpr, wpr), s3(scratch.data() + 3 * wpr, wpr);

    switch (rule.rule) {
        case Rule::Stavskaya: {
            auto b = in.row(0);
            auto o = out.row(0);
            rotate_row(b, s0, n, +1);
            for (std::size_t i = 0; i < wpr; ++i) o[i] = b[i] & s0[i];
            break;
        }
        case Rule::Soldier: {
            auto b = in.row(0);
            auto o = out.row(0);
            rotate_row(b, s0, n, +1);
            rotate_row(b, s1, n, +3);
            rotate_row(b, s2, n, -1);
            rotate_row(b, s3, n, -3);
            for (std::size_t i = 0; i < wpr; ++i)
                o[i] = ((b[i] & (s0[i] | s1[i])) | (~b[i] & s2[i] & s3[i])) & in.word_mask(i);
            break;
        }
        case Rule::ToomLadder: {
            auto bot = in.row(0), top = in.row(1);
            auto obot = out.row(0), otop = out.row(1);
            rotate_row(top, s0, n, -1);
            rotate_row(bot, s1, n, +1);
            for (std::size_t i = 0; i < wpr; ++i) {
                const std::uint64_t m = top[i] | bot[i];
                otop[i] = m & s0[i];
                obot[i] = m & s1[i];
            }
            break;
        }
        case Rule::TwoLineVoting: {
            auto bot = in.row(0), top = in.row(1);
            auto obot = out.row(0), otop = out.row(1);
            rotate_row(top, s0, n, -1);
            rotate_row(top, s1, n, -2);
            rotate_row(bot, s2, n, +1);
            rotate_row(bot, s3, n, +2);
            for (std::size_t i = 0; i < wpr; ++i) {
                otop[i] = maj(bot[i], s0[i], s1[i]);
                obot[i] = maj(top[i], s2[i], s3[i]);
            }
            break;
        }
        case Rule::ToomNEC2D: {
            for (std::size_t y = 0; y < rows; ++y) {
                auto b = in.row(y);
                auto north = in.row((y + 1) % rows);
                auto o = out.row(y);
                rotate_row(b, s0, n, +1);
                for (std::size_t i = 0; i < wpr; ++i) o[i] = maj(b[i], north[i], s0[i]);
            }
            break;
        }
        case Rule::GlauberZeroT2D: {
            for (std::size_t y = 0; y < rows; ++y) {
                auto b = in.row(y);
                auto north = in.row((y + 1) % rows);
                auto south = in.row((y + rows - 1) % rows);
                auto o = out.row(y);
                rotate_row(b, s0, n, +1);
                rotate_row(b, s1, n, -1);
                const std::uint64_t update = checkerboard_word(y + ctx.step);
                for (std::size_t i = 0; i < wpr; ++i) {
                    const std::uint64_t a = north[i], c = south[i], d = s0[i], e = s1[i];
                    const std::uint64_t sum1 = a ^ c, car1 = a & c;
                    const std::uint64_t sum2 = d ^ e, car2 = d & e;
                    const std::uint64_t low = sum1 ^ sum2, car3 = sum1 & sum2;
                    const std::uint64_t twos_ge1 = car1 | car2 | car3;
                    const std::uint64_t twos_ge2 = (car1 & car2) | (car1 & car3) | (car2 & car3);
                    const std::uint64_t ge3 = twos_ge2 | (twos_ge1 & low);
                    const std::uint64_t tie = twos_ge1 & ~twos_ge2 & ~low;
                    const std::uint64_t coin =
                        ctx.tie_coins ? ctx.tie_coins->row(y)[i] : b[i];
                    const std::uint64_t fresh = ge3 | (tie & coin);
                    o[i] = ((update & fresh) | (~update & b[i])) & in.word_mask(i);
                }
            }
            break;
        }
    }
}

BitConfig apply_rule(const RuleSpec& rule, const BitConfig& config, const UpdateContext& ctx) {
    check_compatible(rule, config.lattice());
    PackedRows in = PackedRows::from_config(config);
    PackedRows out(config.lattice());
    std::vector<std::uint64_t> scratch;
    apply_rule(rule, in, out, scratch, ctx);
    return out.to_config();
}

bool apply_rule_at(const RuleSpec& rule, const BitConfig& config, std::size_t site,
                   std::uint64_t step, std::optional<bool> tie_coin) {
    const Lattice& lat = config.lattice();
    const std::size_t n = lat.length;
    const std::size_t rows = lat.rows();
    const std::size_t x = site % n, y = site / n;
    auto b = [&](long dx, long dy) {
        return config.at(wrap(static_cast<long>(x) + dx, n), wrap(static_cast<long>(y) + dy, rows));
    };
    auto majority = [](bool p, bool q, bool r) { return (p + q + r) >= 2; };
    switch (rule.rule) {
        case Rule::Stavskaya: return b(0, 0) && b(1, 0);
        case Rule::Soldier: {
            const long s = b(0, 0) ? 1 : -1;
            return majority(b(0, 0), b(s, 0), b(3 * s, 0));
        }
        case Rule::ToomLadder: {
            // row 0 = bottom (-), row 1 = top (+)
            const bool m = config.at(x, 0) || config.at(x, 1);
            return y == 1 ? (m && b(-1, 0)) : (m && b(1, 0));
        }
        case Rule::TwoLineVoting: {
            const long j = y == 1 ? 1 : -1;
            const bool other = config.at(x, y == 1 ? 0 : 1);
            return majority(other, b(-j, 0), b(-2 * j, 0));
        }
        case Rule::ToomNEC2D: return majority(b(0, 0), b(0, 1), b(1, 0));
        case Rule::GlauberZeroT2D: {
            if ((x + y + step) % 2 != 0) return b(0, 0);
            const int c = b(0, 1) + b(0, -1) + b(1, 0) + b(-1, 0);
            if (c >= 3) return true;
            if (c <= 1) return false;
            return tie_coin.value_or(b(0, 0));
        }
    }
    return false;
}

std::optional<std::uint64_t> erosion_step_count(const RuleSpec& rule, const BitConfig& island,
                                                std::uint64_t max_steps, std::uint64_t tie_seed) {
    check_compatible(rule, island.lattice());
    if (max_steps < 1) throw std::invalid_argument("max_steps must be at least 1");
    PackedRows cur = PackedRows::from_config(island);
    PackedRows next(island.lattice());
    PackedRows coins(island.lattice());
    std::vector<std::uint64_t> scratch;
    const noise::RngStream rng(tie_seed, 0);
    const std::uint64_t per_step = noise::counters_per_step(cur.block_count());
    for (std::uint64_t t = 0; t <= max_steps; ++t) {
        if (cur.none()) return t;
        if (t == max_steps) break;
        UpdateContext ctx{t, nullptr};
        if (rule.uses_tie_coins()) {
            auto d = coins.data();
            for (std::size_t blk = 0; blk < d.size(); ++blk)
                d[blk] = rng.at(t * per_step + blk * noise::kCountersPerBlock + noise::kTiePlane) &
                         coins.word_mask(blk % coins.words_per_row());
            ctx.tie_coins = &coins;
        }
        apply_rule(rule, cur, next, scratch, ctx);
        std::swap(cur, next);
    }
    return std::nullopt;
}

}  // namespace pcalab::ca
