#include "pcalab/markov/operator.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>

#include "pcalab/util/errors.hpp"

namespace pcalab::markov {

namespace {

// Index <-> kernel layout for lattices whose rows fit in one word.
struct IndexCodec {
    std::size_t rows = 0, len = 0;
    std::uint64_t row_mask = 0;

    explicit IndexCodec(const ca::Lattice& lat) : rows(lat.rows()), len(lat.length) {
        row_mask = len >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << len) - 1;
    }
    void load(std::uint64_t b, ca::PackedRows& pr) const {
        for (std::size_t r = 0; r < rows; ++r) pr.row(r)[0] = (b >> (r * len)) & row_mask;
    }
    std::uint64_t store(const ca::PackedRows& pr) const {
        std::uint64_t b = 0;
        for (std::size_t r = 0; r < rows; ++r) b |= pr.row(r)[0] << (r * len);
        return b;
    }
};

void check_exact_size(const ca::Lattice& lattice) {
    if (lattice.site_count() > kMaxExactSites)
        throw ResourceError("exact evolution needs at most " + std::to_string(kMaxExactSites) +
                            " sites, got " + std::to_string(lattice.site_count()));
}

}  // namespace

// ---- DistVector ----

DistVector DistVector::point_mass(const ca::BitConfig& config) {
    check_exact_size(config.lattice());
    DistVector d{config.lattice(), std::vector<double>(std::size_t{1} << config.size(), 0.0)};
    d.p[config.index()] = 1.0;
    return d;
}

DistVector DistVector::zeros_state(const ca::Lattice& lattice) {
    return point_mass(ca::BitConfig::zeros(lattice));
}

double DistVector::sum() const {
    double s = 0.0;
    for (double v : p) s += v;
    return s;
}

double DistVector::probability_of(const ca::BitConfig& config) const {
    if (!(config.lattice() == lattice)) throw std::invalid_argument("configuration lattice mismatch");
    return p.at(config.index());
}

double DistVector::marginal(std::size_t site) const {
    if (site >= lattice.site_count()) throw std::out_of_range("site out of range");
    const std::size_t stride = std::size_t{1} << site;
    double s = 0.0;
    for (std::size_t base = stride; base < p.size(); base += 2 * stride)
        for (std::size_t j = 0; j < stride; ++j) s += p[base + j];
    return s;
}

std::vector<double> DistVector::marginals() const {
    const std::size_t n = lattice.site_count();
    std::vector<double> m(n, 0.0);
    for (std::size_t b = 0; b < p.size(); ++b) {
        if (p[b] == 0.0) continue;
        for (std::uint64_t w = b; w != 0; w &= w - 1) m[std::countr_zero(w)] += p[b];
    }
    return m;
}

double DistVector::mean_magnetization() const {
    double s = 0.0;
    for (std::size_t b = 0; b < p.size(); ++b) s += p[b] * std::popcount(static_cast<std::uint64_t>(b));
    return s / static_cast<double>(lattice.site_count());
}

// ---- rule map ----

std::uint64_t rule_image(const ca::RuleSpec& rule, const ca::Lattice& lattice, std::uint64_t b,
                         std::uint64_t step, bool coins) {
    check_exact_size(lattice);
    ca::check_compatible(rule, lattice);
    IndexCodec codec(lattice);
    ca::PackedRows in(lattice), out(lattice), coin(lattice);
    coin.fill(coins);
    std::vector<std::uint64_t> scratch;
    codec.load(b, in);
    ca::apply_rule(rule, in, out, scratch, {step, rule.uses_tie_coins() ? &coin : nullptr});
    return codec.store(out);
}

// ---- TransitionOperator ----

TransitionOperator::TransitionOperator(const ca::RuleSpec& rule, const noise::NoiseModel& noise,
                                       const ca::Lattice& lattice)
    : rule_(rule), lattice_(lattice), noise_(noise) {
    lattice.validate();
    check_exact_size(lattice);
    ca::check_compatible(rule, lattice);
    n_ = lattice.site_count();
    for (const auto& [site, _] : noise.overrides())
        if (site >= n_) throw std::out_of_range("noise override outside lattice");
    kernels_.reserve(n_);
    for (std::size_t i = 0; i < n_; ++i) kernels_.push_back(noise::site_kernel(noise, i));
    build_maps();
}

TransitionOperator::TransitionOperator(const ca::RuleSpec& rule, std::vector<noise::SiteKernel> kernels,
                                       const ca::Lattice& lattice)
    : rule_(rule), lattice_(lattice), kernels_(std::move(kernels)) {
    lattice.validate();
    check_exact_size(lattice);
    ca::check_compatible(rule, lattice);
    n_ = lattice.site_count();
    if (kernels_.size() != n_) throw std::invalid_argument("need one kernel per site");
    build_maps();
}

void TransitionOperator::build_maps() {
    dim_ = std::size_t{1} << n_;
    identity_site_.assign(n_, false);
    for (std::size_t i = 0; i < n_; ++i) {
        const auto& k = kernels_[i].m;
        identity_site_[i] = k[0][0] == 1.0 && k[1][1] == 1.0 && k[0][1] == 0.0 && k[1][0] == 0.0;
    }

    IndexCodec codec(lattice_);
    ca::PackedRows in(lattice_), out(lattice_), ones(lattice_), zeros(lattice_);
    ones.fill(true);
    std::vector<std::uint64_t> scratch;
    const int phases = step_dependent() ? 2 : 1;
    for (int ph = 0; ph < phases; ++ph) {
        map_[ph].resize(dim_);
        if (step_dependent()) ties_[ph].resize(dim_);
        for (std::uint64_t b = 0; b < dim_; ++b) {
            codec.load(b, in);
            if (!step_dependent()) {
                ca::apply_rule(rule_, in, out, scratch, {});
                map_[ph][b] = static_cast<std::uint32_t>(codec.store(out));
                continue;
            }
            ca::apply_rule(rule_, in, out, scratch, {static_cast<std::uint64_t>(ph), &zeros});
            const std::uint64_t f0 = codec.store(out);
            ca::apply_rule(rule_, in, out, scratch, {static_cast<std::uint64_t>(ph), &ones});
            const std::uint64_t f1 = codec.store(out);
            map_[ph][b] = static_cast<std::uint32_t>(f0);
            ties_[ph][b] = static_cast<std::uint32_t>(f0 ^ f1);
        }
    }
}

void TransitionOperator::apply_noise(std::span<double> x) const {
    if (x.size() != dim_) throw std::invalid_argument("vector dimension mismatch");
    for (std::size_t i = 0; i < n_; ++i) {
        if (identity_site_[i]) continue;
        const auto& k = kernels_[i].m;
        const double k00 = k[0][0], k01 = k[0][1], k10 = k[1][0], k11 = k[1][1];
        const std::size_t stride = std::size_t{1} << i;
        for (std::size_t base = 0; base < dim_; base += 2 * stride) {
            double* lo = x.data() + base;
            double* hi = lo + stride;
            for (std::size_t j = 0; j < stride; ++j) {
                const double a = lo[j], b = hi[j];
                lo[j] = k00 * a + k01 * b;
                hi[j] = k10 * a + k11 * b;
            }
        }
    }
}

void TransitionOperator::push_forward(std::span<const double> x, std::span<double> y, std::uint64_t step) const {
    if (x.size() != dim_ || y.size() != dim_) throw std::invalid_argument("vector dimension mismatch");
    std::fill(y.begin(), y.end(), 0.0);
    const int ph = step_dependent() ? static_cast<int>(step % 2) : 0;
    const auto& f = map_[ph];
    if (!step_dependent()) {
        for (std::size_t b = 0; b < dim_; ++b) y[f[b]] += x[b];
        return;
    }
    const auto& ties = ties_[ph];
    for (std::size_t b = 0; b < dim_; ++b) {
        if (x[b] == 0.0) continue;
        const std::uint32_t m = ties[b];
        if (m == 0) {
            y[f[b]] += x[b];
            continue;
        }
        const double w = std::ldexp(x[b], -std::popcount(m));
        std::uint32_t s = m;
        while (true) {
            y[f[b] | s] += w;
            if (s == 0) break;
            s = (s - 1) & m;
        }
    }
}

void TransitionOperator::apply(std::span<const double> x, std::span<double> y, std::uint64_t step) const {
    if (x.size() != dim_ || y.size() != dim_) throw std::invalid_argument("vector dimension mismatch");
    std::vector<double> tmp(x.begin(), x.end());
    apply_noise(tmp);
    push_forward(tmp, y, step);
}

void TransitionOperator::apply_transpose(std::span<const double> x, std::span<double> y,
                                         std::uint64_t step) const {
    if (x.size() != dim_ || y.size() != dim_) throw std::invalid_argument("vector dimension mismatch");
    const int ph = step_dependent() ? static_cast<int>(step % 2) : 0;
    const auto& f = map_[ph];
    if (!step_dependent()) {
        for (std::size_t b = 0; b < dim_; ++b) y[b] = x[f[b]];
    } else {
        const auto& ties = ties_[ph];
        for (std::size_t b = 0; b < dim_; ++b) {
            const std::uint32_t m = ties[b];
            double acc = 0.0;
            std::uint32_t s = m;
            while (true) {
                acc += x[f[b] | s];
                if (s == 0) break;
                s = (s - 1) & m;
            }
            y[b] = std::ldexp(acc, -std::popcount(m));
        }
    }
    // transposed site kernels
    for (std::size_t i = 0; i < n_; ++i) {
        if (identity_site_[i]) continue;
        const auto& k = kernels_[i].m;
        const double k00 = k[0][0], k01 = k[1][0], k10 = k[0][1], k11 = k[1][1];
        const std::size_t stride = std::size_t{1} << i;
        for (std::size_t base = 0; base < dim_; base += 2 * stride) {
            double* lo = y.data() + base;
            double* hi = lo + stride;
            for (std::size_t j = 0; j < stride; ++j) {
                const double a = lo[j], b = hi[j];
                lo[j] = k00 * a + k01 * b;
                hi[j] = k10 * a + k11 * b;
            }
        }
    }
}

DistVector TransitionOperator::apply(const DistVector& x, std::uint64_t step) const {
    if (!(x.lattice == lattice_)) throw std::invalid_argument("distribution lattice mismatch");
    DistVector y{lattice_, std::vector<double>(dim_)};
    apply(x.p, y.p, step);
    double s = 0.0;
    for (double& v : y.p) {
        if (v < 0.0) {
            if (v < -1e-12) throw std::logic_error("negative probability " + std::to_string(v));
            v = 0.0;
        }
        s += v;
    }
    if (s > 0.0 && std::abs(s - 1.0) > 1e-12)
        for (double& v : y.p) v /= s;
    return y;
}

DistVector evolve_dist(const TransitionOperator& op, const DistVector& x0, std::uint64_t t,
                       std::uint64_t first_step) {
    DistVector x = x0;
    for (std::uint64_t s = 0; s < t; ++s) x = op.apply(x, first_step + s);
    return x;
}

}  // namespace pcalab::markov
