#include "doctest.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <random>

#include "pcalab/markov/analysis.hpp"
#include "pcalab/markov/operator.hpp"
#include "pcalab/markov/spectrum.hpp"
#include "pcalab/mc/ensemble.hpp"
#include "pcalab/util/errors.hpp"

using namespace pcalab;
using namespace pcalab::markov;
using ca::BitConfig;
using ca::Lattice;
using ca::Rule;
using ca::RuleSpec;

namespace {

std::vector<double> random_dist(std::size_t n, unsigned seed) {
    std::mt19937_64 g(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> p(n);
    double s = 0;
    for (double& v : p) s += v = u(g);
    for (double& v : p) v /= s;
    return p;
}

// K[to][from] from first principles: sum over noisy intermediates.
double brute_entry(const RuleSpec& rule, const noise::NoiseModel& nm, const Lattice& lat, std::uint64_t from,
                   std::uint64_t to) {
    const std::size_t n = lat.site_count();
    double total = 0.0;
    for (std::uint64_t c = 0; c < (std::uint64_t{1} << n); ++c) {
        double w = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto k = noise::site_kernel(nm, i);
            w *= k((c >> i) & 1U, (from >> i) & 1U);
        }
        if (w == 0.0) continue;
        if (ca::apply_rule(rule, BitConfig::from_index(lat, c)).index() == to) total += w;
    }
    return total;
}

struct RuleCase {
    RuleSpec rule;
    Lattice lattice;
};

std::vector<RuleCase> small_cases() {
    return {{{Rule::Stavskaya}, Lattice::chain(6)},
            {{Rule::Soldier}, Lattice::chain(7)},
            {{Rule::ToomLadder}, Lattice::ladder(4)},
            {{Rule::TwoLineVoting}, Lattice::ladder(4)},
            {{Rule::ToomNEC2D}, Lattice::torus(3, 3)}};
}

}  // namespace

TEST_CASE("noiseless operator maps point masses to rule images") {
    for (const auto& c : small_cases()) {
        TransitionOperator op(c.rule, noise::NoiseModel(0, 0), c.lattice);
        for (std::uint64_t b = 0; b < op.dimension(); b += 7) {
            const auto cfg = BitConfig::from_index(c.lattice, b);
            const auto y = op.apply(DistVector::point_mass(cfg));
            const auto img = ca::apply_rule(c.rule, cfg).index();
            CHECK(y.p[img] == 1.0);
            CHECK(y.sum() == 1.0);
        }
    }
}

TEST_CASE("operator entries match a brute-force sum over noise outcomes") {
    const Lattice lat = Lattice::chain(4);
    noise::NoiseModel nm(0.2, 0.1);
    nm.set_site(2, 0.5, 0.3);
    for (Rule r : {Rule::Stavskaya, Rule::Soldier}) {
        TransitionOperator op({r}, nm, lat);
        const Eigen::MatrixXd K = dense_matrix(op);
        for (std::uint64_t from = 0; from < 16; ++from)
            for (std::uint64_t to = 0; to < 16; ++to)
                CHECK(K(static_cast<Eigen::Index>(to), static_cast<Eigen::Index>(from)) ==
                      doctest::Approx(brute_entry({r}, nm, lat, from, to)).epsilon(1e-14));
    }
}

TEST_CASE("all-ones is absorbing under up-biased stavskaya") {
    TransitionOperator op({Rule::Stavskaya}, noise::NoiseModel::up_biased(0.3), Lattice::chain(8));
    const auto ones = DistVector::point_mass(BitConfig::ones(Lattice::chain(8)));
    const auto y = evolve_dist(op, ones, 5);
    CHECK(y.p.back() == 1.0);
}

TEST_CASE("stochasticity, positivity and the left eigenvector") {
    for (const auto& c : small_cases()) {
        TransitionOperator op(c.rule, noise::NoiseModel(0.13, 0.07), c.lattice);
        DistVector x{c.lattice, random_dist(op.dimension(), 3)};
        const auto y = op.apply(x);
        CHECK(std::abs(y.sum() - 1.0) < 1e-12);
        CHECK(*std::min_element(y.p.begin(), y.p.end()) >= 0.0);
        std::vector<double> ones(op.dimension(), 1.0), lt(op.dimension());
        op.apply_transpose(ones, lt);
        for (double v : lt) CHECK(std::abs(v - 1.0) < 1e-12);
    }
}

TEST_CASE("transpose is the adjoint, including checkerboard ties") {
    std::vector<RuleCase> cases = small_cases();
    cases.push_back({{Rule::GlauberZeroT2D}, Lattice::torus(4, 2)});
    for (const auto& c : cases) {
        TransitionOperator op(c.rule, noise::NoiseModel(0.2, 0.1), c.lattice);
        const auto x = random_dist(op.dimension(), 5), z = random_dist(op.dimension(), 6);
        for (std::uint64_t step : {0, 1}) {
            std::vector<double> kx(op.dimension()), ktz(op.dimension());
            op.apply(x, kx, step);
            op.apply_transpose(z, ktz, step);
            double a = 0, b = 0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                a += z[i] * kx[i];
                b += ktz[i] * x[i];
            }
            CHECK(a == doctest::Approx(b).epsilon(1e-13));
        }
    }
}

TEST_CASE("checkerboard ties split mass evenly over coin outcomes") {
    const Lattice lat = Lattice::torus(2, 2);
    TransitionOperator op({Rule::GlauberZeroT2D}, noise::NoiseModel(0, 0), lat);
    for (std::uint64_t step : {0, 1})
        for (std::uint64_t b = 0; b < 16; ++b) {
            std::vector<double> expect(16, 0.0);
            const auto cfg = BitConfig::from_index(lat, b);
            // enumerate coins for the two updating sites
            std::vector<std::size_t> movers;
            for (std::size_t s = 0; s < 4; ++s)
                if ((s % 2 + s / 2 + step) % 2 == 0) movers.push_back(s);
            for (int coins = 0; coins < 4; ++coins) {
                BitConfig out = cfg;
                for (std::size_t k = 0; k < movers.size(); ++k)
                    out.set(movers[k], ca::apply_rule_at({Rule::GlauberZeroT2D}, cfg, movers[k], step,
                                                         static_cast<bool>((coins >> k) & 1)));
                expect[out.index()] += 0.25;
            }
            std::vector<double> x(16, 0.0), y(16);
            x[b] = 1.0;
            op.apply(x, y, step);
            for (std::size_t i = 0; i < 16; ++i) CHECK(y[i] == doctest::Approx(expect[i]));
        }
}

TEST_CASE("noiseless stavskaya erodes islands in the length of the longest one") {
    const Lattice lat = Lattice::chain(12);
    TransitionOperator op({Rule::Stavskaya}, noise::NoiseModel(0, 0), lat);
    const auto cfg = BitConfig::from_string(lat, "011100111110");
    const auto zero = BitConfig::zeros(lat).index();
    CHECK(evolve_dist(op, DistVector::point_mass(cfg), 4).p[zero] == 0.0);
    CHECK(evolve_dist(op, DistVector::point_mass(cfg), 5).p[zero] == 1.0);
    CHECK(evolve_dist(op, DistVector::point_mass(cfg), 0).p[cfg.index()] == 1.0);
}

TEST_CASE("exact evolution agrees with monte carlo within four sem") {
    struct Case {
        RuleSpec rule;
        Lattice lat;
        noise::NoiseModel nm;
        std::vector<std::size_t> sites;
    };
    const std::vector<Case> cases = {
        {{Rule::Stavskaya}, Lattice::chain(8), noise::NoiseModel::up_biased(0.1), {0, 5}},
        {{Rule::ToomLadder}, Lattice::ladder(8), noise::NoiseModel(0.12, 0.03), {1, 12}},
        {{Rule::GlauberZeroT2D}, Lattice::torus(4, 4), noise::NoiseModel(0.1, 0.05), {0, 6}},
        {{Rule::Soldier}, Lattice::chain(12), noise::NoiseModel(0.08, 0.02), {3}},
    };
    const std::uint64_t T = 20, n = 40000;
    for (const auto& c : cases) {
        CAPTURE(c.rule.name());
        TransitionOperator op(c.rule, c.nm, c.lat);
        std::vector<std::vector<double>> marg;
        std::vector<double> mag;
        DistVector d = DistVector::zeros_state(c.lat);
        for (std::uint64_t t = 0; t <= T; ++t) {
            if (t > 0) d = op.apply(d, t - 1);
            marg.push_back(d.marginals());
            mag.push_back(d.mean_magnetization());
        }
        const auto init = BitConfig::zeros(c.lat);
        auto check = [&](const mc::Observable& obs, auto exact_at) {
            auto r = mc::run_ensemble(c.rule, c.nm, init, T, n, obs, {.seed = 77});
            for (std::uint64_t t = 1; t <= T; ++t) {
                CAPTURE(t);
                const double sem = std::max(r.series.sem[t], 1e-9);
                CHECK(std::abs(r.series.mean[t] - exact_at(t)) <= 4.0 * sem);
            }
        };
        check(mc::Observable::magnetization(), [&](std::uint64_t t) { return mag[t]; });
        for (std::size_t s : c.sites)
            check(mc::Observable::site_occupation(s), [&](std::uint64_t t) { return marg[t][s]; });
    }
}

TEST_CASE("krylov-schur matches the dense eigensolver") {
    struct Case {
        RuleSpec rule;
        Lattice lat;
        noise::NoiseModel nm;
    };
    const std::vector<Case> cases = {
        {{Rule::Stavskaya}, Lattice::chain(8), noise::NoiseModel::up_biased(0.15)},
        {{Rule::Stavskaya}, Lattice::chain(10), noise::NoiseModel::up_biased(0.25)},
        {{Rule::Soldier}, Lattice::chain(9), noise::NoiseModel(0.1, 0.05)},
        {{Rule::ToomLadder}, Lattice::ladder(5), noise::NoiseModel::up_biased(0.1)},
        {{Rule::TwoLineVoting}, Lattice::ladder(5), noise::NoiseModel(0.05, 0.05)},
        // a square torus has the x <-> y symmetry and exactly repeated
        // eigenvalues, which a single-vector Krylov space sees only once
        {{Rule::ToomNEC2D}, Lattice::torus(5, 2), noise::NoiseModel(0.1, 0.02)},
    };
    for (const auto& c : cases) {
        CAPTURE(c.rule.name());
        TransitionOperator op(c.rule, c.nm, c.lat);
        const auto dense = dense_spectrum(op);
        const auto rep = leading_spectrum(op, 6);
        CHECK(std::abs(rep.eigenvalues[0] - 1.0) < 1e-10);
        for (std::size_t i = 0; i < 6; ++i) {
            CHECK(rep.residuals[i] <= 1e-8);
            CHECK(std::abs(std::abs(rep.eigenvalues[i]) - std::abs(dense[i])) < 1e-8);
            double nearest = 1e9;
            for (const auto& z : dense) nearest = std::min(nearest, std::abs(z - rep.eigenvalues[i]));
            CHECK(nearest < 1e-8);
        }
    }
}

TEST_CASE("noiseless stavskaya has eigenvalue one twice and is otherwise nilpotent") {
    for (std::size_t L : {3, 5, 8, 10}) {
        CAPTURE(L);
        const Lattice lat = Lattice::chain(L);
        TransitionOperator op({Rule::Stavskaya}, noise::NoiseModel(0, 0), lat);
        const auto ev = dense_spectrum(op);
        std::size_t unit = 0;
        for (const auto& z : ev) {
            if (std::abs(z - 1.0) < 1e-8) ++unit;
            else CHECK(std::abs(z) < 0.2);  // defective zero eigenvalue, perturbed by round-off
        }
        CHECK(unit == 2);
        // exact statement: f^L = f^{L+1} with exactly two fixed points
        std::size_t fixed = 0;
        for (std::uint64_t b = 0; b < op.dimension(); ++b) {
            std::uint64_t y = b;
            for (std::size_t s = 0; s < L; ++s) y = op.image(y);
            CHECK(op.image(y) == y);
            fixed += op.image(b) == b;
        }
        CHECK(fixed == 2);
    }
}

TEST_CASE("stable stavskaya has an exponentially near-degenerate leading pair") {
    TransitionOperator op({Rule::Stavskaya}, noise::NoiseModel::up_biased(0.15), Lattice::chain(10));
    const auto rep = leading_spectrum(op, 3);
    CHECK(std::abs(rep.eigenvalues[0] - 1.0) < 1e-10);
    CHECK(1.0 - std::abs(rep.eigenvalues[1]) <= 1e-3);
    CHECK(std::abs(rep.eigenvalues[2]) < 0.9);
    for (double r : rep.residuals) CHECK(r <= 1e-8);
}

TEST_CASE("leading spectrum refuses checkerboard dynamics and oversize lattices") {
    TransitionOperator op({Rule::GlauberZeroT2D}, noise::NoiseModel(0.1, 0.1), Lattice::torus(2, 2));
    CHECK_THROWS_AS(leading_spectrum(op, 2), std::invalid_argument);
    CHECK_THROWS_AS(TransitionOperator({Rule::Stavskaya}, noise::NoiseModel(0.1, 0), Lattice::chain(27)),
                    ResourceError);
}

TEST_CASE("krylov-schur reports non-convergence") {
    TransitionOperator op({Rule::Stavskaya}, noise::NoiseModel::up_biased(0.2), Lattice::chain(12));
    CHECK_THROWS_AS(leading_spectrum(op, 3, 1e-14, 0), ConvergenceError);
}

TEST_CASE("gap extrapolation") {
    std::vector<std::pair<double, double>> pts;
    for (double L : {8.0, 10.0, 12.0, 14.0}) pts.emplace_back(L, 0.2 + 3.0 / (L * L));
    const auto fit = gap_extrapolate(pts);
    CHECK(fit.delta == doctest::Approx(0.2).epsilon(1e-13));
    CHECK(fit.c == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(fit.rms < 1e-14);
    std::vector<std::pair<double, double>> same = {{8, 1.0}, {8, 1.1}, {8, 0.9}};
    CHECK_THROWS_AS(gap_extrapolate(same), std::invalid_argument);
}

TEST_CASE("spectrum json record") {
    SpectrumReport rep;
    rep.rule = "stavskaya";
    rep.epsilon = 0.15;
    rep.L = 8;
    rep.eigenvalues = {1.0, {0.5, 0.25}};
    rep.residuals = {1e-12, 2e-12};
    const auto s = spectrum_json(rep, GapFit{0.29, 1.5, 0.001});
    CHECK(s.find("\"eigenvalues\"") != std::string::npos);
    CHECK(s.find("\"delta\": 0.29") != std::string::npos);
    CHECK(s.find("\"im\": 0.25") != std::string::npos);
}

TEST_CASE("contour bound examples") {
    const std::size_t one[] = {5};
    const auto c0 = contour_bound_check(10, 0.003, 0, one);
    CHECK(c0.exact == 0.0);
    CHECK(c0.satisfied);
    const auto c1 = contour_bound_check(10, 0.003, 50, one);
    CHECK(c1.satisfied);
    CHECK(c1.exact <= 0.018);
    CHECK(c1.exact > 0.0);
    const std::size_t two[] = {3, 7};
    const auto c2 = contour_bound_check(10, 0.003, 50, two);
    CHECK(c2.satisfied);
    CHECK(c2.bound == doctest::Approx(0.018 * 0.018));
    CHECK(!c2.out_of_proven_regime);
    CHECK(contour_bound_check(10, 0.01, 3, one).out_of_proven_regime);
    const auto sw = contour_sweep(6, 0.003, 30);
    CHECK(sw.violations == 0);
    CHECK(sw.checked == 63 * 31);
}

TEST_CASE("first-order response closed forms") {
    const RuleSpec stav{Rule::Stavskaya};
    CHECK(first_order_response(stav, Bias::Down, 0, 0, 4) == 0.0);
    CHECK(first_order_response(stav, Bias::Down, 1, 6, 4) == -18.0);
    for (std::size_t L : {4, 6}) {
        for (std::uint64_t t = L; t <= 2 * L; ++t) {
            const double expect = 0.5 * L * (L + 1) + double(L) * double(t - L);
            CHECK(first_order_response(stav, Bias::Down, 2, t, L) == -expect);
        }
    }
    for (std::uint64_t t : {1, 2, 10, 50})
        CHECK(first_order_response(stav, Bias::Up, 3, t, 8) == 1.0);
}

TEST_CASE("first-order response: analytic equals finite difference") {
    struct Case {
        RuleSpec rule;
        std::size_t L;
    };
    for (const auto& c : {Case{{Rule::Stavskaya}, 6}, Case{{Rule::Soldier}, 8}, Case{{Rule::ToomLadder}, 4},
                          Case{{Rule::TwoLineVoting}, 4}, Case{{Rule::ToomNEC2D}, 3}}) {
        for (Bias bias : {Bias::Up, Bias::Down})
            for (std::uint64_t t : {1, 3, 9, 20}) {
                CAPTURE(c.rule.name());
                CAPTURE(t);
                const double a = first_order_response(c.rule, bias, 1, t, c.L);
                const double fd = first_order_response_fd(c.rule, bias, 1, t, c.L);
                CHECK(std::abs(a - fd) <= 1e-6 * std::max(1.0, std::abs(a)));
            }
    }
    CHECK_THROWS_AS(first_order_response({Rule::GlauberZeroT2D}, Bias::Up, 0, 3, 4), std::invalid_argument);
}

TEST_CASE("resolvent moment: zero perturbation and dense solve") {
    const Lattice lat = Lattice::chain(6);
    TransitionOperator op({Rule::Stavskaya}, noise::NoiseModel(0.3, 0.05), lat);
    const std::size_t n = op.dimension();
    const LinearMap k = [&](std::span<const double> x, std::span<double> y) { op.apply(x, y); };
    const LinearMap kt = [&](std::span<const double> x, std::span<double> y) { op.apply_transpose(x, y); };
    const LinearMap zero = [](std::span<const double>, std::span<double> y) { std::fill(y.begin(), y.end(), 0.0); };
    const auto obs = magnetization_observable(lat);
    const auto omega = evolve_dist(op, DistVector::zeros_state(lat), 400);
    ResolventOptions opt;
    opt.truncation = 600;
    CHECK(resolvent_moment(k, kt, zero, obs, omega.p, opt).value == 0.0);

    // unique steady state here: compare with (I - K + pi 1^T)^{-1} Q V omega
    const auto V = up_flip_generator(lat);
    const auto res = resolvent_moment(k, kt, V, obs, omega.p, opt);
    CHECK(res.projected == 1);
    CHECK(res.converged);
    const Eigen::MatrixXd K = dense_matrix(op);
    Eigen::VectorXd pi = Eigen::Map<const Eigen::VectorXd>(omega.p.data(), static_cast<Eigen::Index>(n));
    std::vector<double> vw(n);
    V(omega.p, vw);
    Eigen::VectorXd rhs = Eigen::Map<Eigen::VectorXd>(vw.data(), static_cast<Eigen::Index>(n));
    rhs -= pi * rhs.sum();
    const Eigen::MatrixXd Z = Eigen::MatrixXd::Identity(n, n) - K + pi * Eigen::RowVectorXd::Ones(n);
    const Eigen::VectorXd sol = Z.partialPivLu().solve(rhs);
    const double expect = Eigen::Map<const Eigen::VectorXd>(obs.data(), static_cast<Eigen::Index>(n)).dot(sol);
    CHECK(res.value == doctest::Approx(expect).epsilon(1e-8));
}

TEST_CASE("resolvent moment of stable stavskaya projects both near-unit states") {
    TransitionOperator op({Rule::Stavskaya}, noise::NoiseModel::up_biased(0.05), Lattice::chain(8));
    ResolventOptions opt;
    for (std::size_t order : {1, 2}) {
        opt.order = order;
        const auto r = stavskaya_resolvent_moment(op, opt);
        CHECK(r.projected == 2);
        CHECK(r.converged);
        CHECK(std::isfinite(r.value));
        CHECK(r.value != 0.0);
    }
}

TEST_CASE("metastable state and lppl probe") {
    const RuleSpec stav{Rule::Stavskaya};
    const auto nm = noise::NoiseModel::up_biased(0.1);
    TransitionOperator op(stav, nm, Lattice::chain(10));
    const auto meta = metastable_state(op);
    CHECK(std::abs(meta.sum() - 1.0) < 1e-12);
    CHECK(meta.mean_magnetization() < 0.2);

    const auto none = lppl_probe(stav, nm, 4, 0.0, 10);
    for (double d : none.change) CHECK(d == 0.0);

    const auto p = lppl_probe(stav, nm, 4, 0.05, 10);
    // the rule acts after the noise, so the perturbed site itself only
    // keeps a fraction of delta
    CHECK(p.table[0].max_change > 0.05 * 0.05);
    CHECK(p.table[0].max_change < 0.05);
    for (std::size_t d = 2; d < p.table.size(); ++d) CHECK(p.table[d].max_change < p.table[d - 1].max_change);
    CHECK(p.decay_length > 0.0);
    CHECK(lattice_distance(Lattice::chain(10), 1, 9) == 2);
    CHECK(lattice_distance(Lattice::torus(4, 4), 0, 15) == 2);
}
