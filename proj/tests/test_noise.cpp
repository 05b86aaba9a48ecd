#include "doctest.h"

#include <cmath>
#include <random>

#include "pcalab/noise/noise_model.hpp"

using namespace pcalab;
using namespace pcalab::noise;
using ca::BitConfig;
using ca::Lattice;
using ca::Rule;

TEST_CASE("rng is a pure function of its key") {
    RngStream a(42, 7), b(42, 7), c(42, 8), d(43, 7);
    CHECK(a.at(123) == b.at(123));
    CHECK(a.at(123) != c.at(123));
    CHECK(a.at(123) != d.at(123));
    RngStream e(42, 7, 100);
    CHECK(e.next() == a.at(100));
    CHECK(e.counter() == 101);
}

TEST_CASE("site kernel") {
    auto k = site_kernel(NoiseModel::up_biased(0.3), 0);
    CHECK(k(0, 0) == doctest::Approx(0.7));
    CHECK(k(1, 0) == 0.3);
    CHECK(k(0, 1) == 0.0);
    CHECK(k(1, 1) == 1.0);
    auto id = site_kernel(NoiseModel(0, 0), 3);
    CHECK(id(0, 0) == 1.0);
    CHECK(id(1, 1) == 1.0);
    CHECK(id(1, 0) == 0.0);
    auto g = site_kernel(NoiseModel(0.2, 0.3), 0);
    CHECK(g(0, 0) == 0.8);
    CHECK(g(1, 0) == 0.2);
    CHECK(g(0, 1) == 0.3);
    CHECK(g(1, 1) == 0.7);
    std::mt19937_64 gen(2);
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < 10000; ++i) {
        NoiseModel m(u(gen), u(gen));
        auto s = site_kernel(m, 0);
        REQUIRE(s(0, 0) + s(1, 0) == 1.0);
        REQUIRE(s(0, 1) + s(1, 1) == 1.0);
    }
    NoiseModel o(0.1, 0.0);
    o.set_site(2, 0.5, 0.25);
    CHECK(site_kernel(o, 2)(0, 1) == 0.25);
    CHECK(site_kernel(o, 1)(1, 0) == 0.1);
    CHECK_THROWS(NoiseModel(1.5, 0));
    CHECK_THROWS(o.set_site(0, -0.1, 0));
    CHECK(NoiseModel::up_biased(0.2).is_up_biased());
    CHECK(!NoiseModel::up_biased(0.2).is_down_biased());
}

TEST_CASE("identity noise reduces to the rule") {
    std::mt19937_64 gen(4);
    const auto lat = Lattice::chain(37);
    for (int i = 0; i < 20; ++i) {
        BitConfig c(lat);
        for (std::size_t s = 0; s < c.size(); ++s) c.set(s, gen() & 1U);
        RngStream rng(1, i);
        CHECK(sample_step({Rule::Stavskaya}, NoiseModel(0, 0), c, rng) == ca::apply_rule({Rule::Stavskaya}, c));
        CHECK(rng.counter() == counters_per_step(1));
    }
}

TEST_CASE("certain flips") {
    const auto lat = Lattice::chain(100);
    RngStream rng(9, 0);
    CHECK(sample_step({Rule::Stavskaya}, NoiseModel(1, 0), BitConfig::zeros(lat), rng).all());
    RngStream rng2(9, 0);
    CHECK(sample_step({Rule::Stavskaya}, NoiseModel(0, 1), BitConfig::ones(lat), rng2).none());
}

TEST_CASE("empirical flip fraction") {
    // 10^6 sites, noise only (rule applied to zeros only moves zeros)
    const auto lat = Lattice::chain(1000);
    NoisyStepper stepper({Rule::Stavskaya}, NoiseModel(0.1, 0.0), lat);
    std::size_t flips = 0;
    const RngStream rng(2024, 0);
    for (std::uint64_t t = 0; t < 1000; ++t) {
        ca::PackedRows s(lat);
        stepper.noise_only(s, rng, t);
        flips += s.count();
    }
    const double frac = static_cast<double>(flips) / 1e6;
    CHECK(std::abs(frac - 0.1) < 3e-4 * 3);  // generous: 3 sigma is 9e-4/3
    CHECK(std::abs(frac - 0.1) < 9e-4);
}

TEST_CASE("per-site overrides and down flips") {
    const auto lat = Lattice::chain(64);
    NoiseModel m(0.0, 0.0);
    m.set_site(5, 0.0, 0.5);
    NoisyStepper stepper({Rule::Stavskaya}, m, lat);
    const RngStream rng(1, 1);
    std::size_t flipped = 0;
    const int trials = 20000;
    for (int t = 0; t < trials; ++t) {
        auto s = ca::PackedRows::from_config(BitConfig::ones(lat));
        stepper.noise_only(s, rng, t);
        REQUIRE(s.count() >= 63);
        for (std::size_t x = 0; x < 64; ++x)
            if (x != 5) REQUIRE(s.get(x, 0));
        flipped += !s.get(5, 0);
    }
    const double p = static_cast<double>(flipped) / trials;
    CHECK(std::abs(p - 0.5) < 4 * std::sqrt(0.25 / trials));
}

TEST_CASE("coupled noise light cone") {
    // exhaustive over all initial pairs differing at one site, L <= 8
    const ca::RuleSpec stav{Rule::Stavskaya};
    for (std::size_t L = 3; L <= 8; ++L) {
        const auto lat = Lattice::chain(L);
        NoisyStepper stepper(stav, NoiseModel(0.2, 0.1), lat);
        for (std::uint64_t idx = 0; idx < (1ULL << L); ++idx) {
            for (std::size_t s = 0; s < L; ++s) {
                auto a = ca::PackedRows::from_config(BitConfig::from_index(lat, idx));
                auto b = a;
                b.set(s, 0, !b.get(s, 0));
                ca::PackedRows ta(lat), tb(lat);
                const RngStream rng(77, idx * 16 + s);
                for (std::uint64_t t = 1; t <= 3; ++t) {
                    stepper.step(a, ta, rng, t - 1);
                    stepper.step(b, tb, rng, t - 1);
                    for (std::size_t x = 0; x < L; ++x) {
                        const std::size_t d = (s + L - x) % L;  // Stavskaya reads rightwards only
                        if (a.get(x, 0) != b.get(x, 0)) REQUIRE(d <= t);
                    }
                }
            }
        }
    }
}

TEST_CASE("trajectories are reproducible") {
    const auto lat = Lattice::torus(8, 8);
    NoisyStepper s1({Rule::GlauberZeroT2D}, NoiseModel(0.1, 0.1), lat);
    NoisyStepper s2({Rule::GlauberZeroT2D}, NoiseModel(0.1, 0.1), lat);
    ca::PackedRows a(lat), b(lat), ta(lat), tb(lat);
    const RngStream rng(5, 3);
    for (std::uint64_t t = 0; t < 50; ++t) {
        s1.step(a, ta, rng, t);
        s2.step(b, tb, rng, t);
        REQUIRE(a == b);
    }
    CHECK(a.count() > 0);
}

TEST_CASE("every counter slot is unbiased across streams") {
    // each bit of at(c) over many streams should be a fair coin, for every c in a block
    const int streams = 4096;
    for (std::uint64_t c = 0; c < 2 * kCountersPerBlock; ++c) {
        double ones = 0;
        for (int s = 0; s < streams; ++s) ones += __builtin_popcountll(RngStream(3, s).at(c));
        const double mean = ones / (64.0 * streams);
        REQUIRE(std::abs(mean - 0.5) < 5 * 0.5 / std::sqrt(64.0 * streams));
    }
    // and individual low bits across streams
    for (std::uint64_t c = 0; c < 8; ++c)
        for (int bit = 0; bit < 64; bit += 7) {
            double ones = 0;
            for (int s = 0; s < streams; ++s) ones += (RngStream(3, s).at(c) >> bit) & 1U;
            REQUIRE(std::abs(ones / streams - 0.5) < 5 * 0.5 / std::sqrt(streams));
        }
}

TEST_CASE("flip rate is uniform across blocks and rows") {
    const auto lat = Lattice::ladder(130);
    NoisyStepper stepper({Rule::ToomLadder}, NoiseModel(0.1, 0.0), lat);
    std::vector<double> hits(lat.site_count());
    const int trials = 4000;
    for (int i = 0; i < trials; ++i) {
        ca::PackedRows s(lat);
        stepper.noise_only(s, RngStream(1, i), 3);
        for (std::size_t r = 0; r < 2; ++r)
            for (std::size_t x = 0; x < 130; ++x) hits[r * 130 + x] += s.get(x, r);
    }
    const double sigma = std::sqrt(0.09 / trials);
    for (double h : hits) REQUIRE(std::abs(h / trials - 0.1) < 5 * sigma);
}
