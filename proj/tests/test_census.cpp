#include "doctest.h"

#include <bit>
#include <numeric>
#include <random>
#include <sstream>

#include "pcalab/census/census.hpp"
#include "pcalab/markov/analysis.hpp"
#include "pcalab/util/errors.hpp"

using namespace pcalab;
using namespace pcalab::census;
using ca::Rule;

namespace {

struct Counts {
    std::size_t L;
    std::uint64_t cycles, periodic, fixed;
};

// Regression baselines produced by exhaustive enumeration.
const std::vector<Counts> kSoldier = {
    {4, 7, 8, 6},       {5, 2, 2, 2},       {6, 18, 22, 14},    {7, 16, 16, 16},    {8, 11, 24, 6},
    {9, 32, 44, 26},    {10, 53, 84, 42},   {11, 24, 24, 24},   {12, 76, 158, 54},  {13, 106, 106, 106},
    {14, 101, 200, 86}, {15, 140, 188, 128}, {16, 299, 536, 262},
};
const std::vector<Counts> kTwoLine = {
    {2, 7, 8, 6},     {3, 13, 22, 4},   {4, 27, 48, 6},    {5, 29, 64, 4},
    {6, 106, 290, 6}, {7, 88, 214, 4},  {8, 279, 840, 6},
};

void check_invariants(const CycleCensus& c) {
    CHECK(c.n_fixed_points <= c.n_cycles);
    CHECK(c.n_cycles <= c.n_periodic_states);
    CHECK(c.n_periodic_states + c.n_transient_states == (std::uint64_t{1} << c.sites));
    std::uint64_t states = 0, cycles = 0;
    for (auto [len, count] : c.cycle_length_histogram) {
        states += len * count;
        cycles += count;
    }
    CHECK(states == c.n_periodic_states);
    CHECK(cycles == c.n_cycles);
    const auto it = c.cycle_length_histogram.find(1);
    CHECK((it == c.cycle_length_histogram.end() ? 0 : it->second) == c.n_fixed_points);
}

// Rotates every row of an index by one column.
std::uint64_t rotate_index(std::uint64_t b, std::size_t len, std::size_t rows) {
    const std::uint64_t mask = (std::uint64_t{1} << len) - 1;
    std::uint64_t out = 0;
    for (std::size_t r = 0; r < rows; ++r) {
        const std::uint64_t row = (b >> (r * len)) & mask;
        out |= (((row << 1) | (row >> (len - 1))) & mask) << (r * len);
    }
    return out;
}

}  // namespace

TEST_CASE("identity map: every state is a fixed point") {
    const auto c = census_of_map(4, [](std::uint64_t b) { return b; });
    CHECK(c.n_cycles == 16);
    CHECK(c.n_periodic_states == 16);
    CHECK(c.n_fixed_points == 16);
    check_invariants(c);
    const auto cmp = census_vs_spectrum(4, [](std::uint64_t b) { return b; });
    CHECK(cmp.agrees());
}

TEST_CASE("known cycle structure of a permutation with tails") {
    // 0->1->2->0, 3->4->3, 5->5, 6->0, 7->6
    const std::uint64_t f[8] = {1, 2, 0, 4, 3, 5, 0, 6};
    const auto c = census_of_map(3, [&](std::uint64_t b) { return f[b]; });
    CHECK(c.n_cycles == 3);
    CHECK(c.n_periodic_states == 6);
    CHECK(c.n_fixed_points == 1);
    CHECK(c.n_transient_states == 2);
    CHECK(c.cycle_length_histogram.at(3) == 1);
    CHECK(c.cycle_length_histogram.at(2) == 1);
    CHECK(census_vs_spectrum(3, [&](std::uint64_t b) { return f[b]; }).agrees());
}

TEST_CASE("stavskaya has exactly the two uniform fixed points") {
    for (std::size_t L = 2; L <= 14; ++L) {
        const auto c = enumerate_cycles({Rule::Stavskaya}, L);
        CHECK(c.n_cycles == 2);
        CHECK(c.n_periodic_states == 2);
        check_invariants(c);
    }
}

TEST_CASE("archived soldier and two-line voting counts") {
    for (const auto& e : kSoldier) {
        CAPTURE(e.L);
        const auto c = enumerate_cycles({Rule::Soldier}, e.L);
        CHECK(c.n_cycles == e.cycles);
        CHECK(c.n_periodic_states == e.periodic);
        CHECK(c.n_fixed_points == e.fixed);
        CHECK(c.n_fixed_points >= 2);
        check_invariants(c);
    }
    for (const auto& e : kTwoLine) {
        CAPTURE(e.L);
        const auto c = enumerate_cycles({Rule::TwoLineVoting}, e.L);
        CHECK(c.n_cycles == e.cycles);
        CHECK(c.n_periodic_states == e.periodic);
        CHECK(c.n_fixed_points == e.fixed);
        check_invariants(c);
    }
}

TEST_CASE("census agrees with dense eigencounts") {
    for (auto [rule, L] : {std::pair{Rule::Stavskaya, 6}, std::pair{Rule::Soldier, 5}, std::pair{Rule::Soldier, 8},
                           std::pair{Rule::TwoLineVoting, 3}, std::pair{Rule::TwoLineVoting, 5},
                           std::pair{Rule::ToomLadder, 4}}) {
        CAPTURE(L);
        const auto cmp = census_vs_spectrum({rule}, L);
        CHECK(cmp.agrees());
    }
    const auto stav = census_vs_spectrum({Rule::Stavskaya}, 6);
    CHECK(stav.eig_unit == 2);
    CHECK(stav.eig_modulus1 == 2);
}

TEST_CASE("rule maps commute with translations and the census is invariant") {
    for (Rule r : {Rule::Stavskaya, Rule::Soldier, Rule::TwoLineVoting, Rule::ToomLadder}) {
        for (std::size_t L : {5, 6}) {
            const ca::RuleSpec rule{r};
            const auto lat = markov::lattice_for(rule, L);
            const auto f = rule_map(rule, lat);
            const std::size_t rows = lat.rows();
            for (std::uint64_t b = 0; b < (std::uint64_t{1} << lat.site_count()); ++b)
                REQUIRE(f(rotate_index(b, L, rows)) == rotate_index(f(b), L, rows));
            // conjugating by a translation permutes orbits only
            const auto direct = census_of_map(lat.site_count(), f);
            const auto conj = census_of_map(lat.site_count(), [&](std::uint64_t b) {
                std::uint64_t back = b;
                for (std::size_t k = 1; k < L; ++k) back = rotate_index(back, L, rows);
                return rotate_index(f(back), L, rows);
            });
            CHECK(direct.n_cycles == conj.n_cycles);
            CHECK(direct.n_periodic_states == conj.n_periodic_states);
            CHECK(direct.cycle_length_histogram == conj.cycle_length_histogram);
        }
    }
}

TEST_CASE("census refuses oversize and step-dependent requests") {
    CHECK_THROWS_AS(enumerate_cycles({Rule::Stavskaya}, 29), ResourceError);
    try {
        (void)enumerate_cycles({Rule::TwoLineVoting}, 15);
        FAIL("expected refusal");
    } catch (const ResourceError& e) {
        CHECK(std::string(e.what()).find("MiB") != std::string::npos);
    }
    CHECK_THROWS_AS(enumerate_cycles({Rule::GlauberZeroT2D}, 4), std::invalid_argument);
    CHECK_THROWS_AS(census_vs_spectrum({Rule::Stavskaya}, 13), ResourceError);
}

TEST_CASE("census output formats") {
    const auto c = enumerate_cycles({Rule::Soldier}, 8);
    std::ostringstream os;
    write_census_csv_header(os);
    write_census_csv_row(os, c);
    CHECK(os.str() == "rule,L,n_cycles,n_periodic_states,n_fixed_points\nsoldier,8,11,24,6\n");
    const auto j = census_json(c);
    CHECK(j.find("\"histogram\"") != std::string::npos);
    CHECK(j.find("\"4\": 4") != std::string::npos);
}
