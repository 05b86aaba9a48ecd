#include "pcalab/markov/analysis.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pcalab::markov {

namespace {

constexpr double kProvenEps = 1.0 / 216.0;

TransitionOperator stavskaya_up(std::size_t L, double eps) {
    return {ca::RuleSpec{ca::Rule::Stavskaya}, noise::NoiseModel::up_biased(eps), ca::Lattice::chain(L)};
}

noise::SiteKernel bias_kernel(Bias bias, double eps) {
    noise::SiteKernel k;
    if (bias == Bias::Up) k.m = {{{1.0 - eps, 0.0}, {eps, 1.0}}};
    else k.m = {{{1.0, eps}, {0.0, 1.0 - eps}}};
    return k;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

// ---- contour bound ----

ContourCheck contour_bound_check(std::size_t L, double eps, std::uint64_t t, std::span<const std::size_t> lambda) {
    if (lambda.empty()) throw std::invalid_argument("contour_bound_check: Lambda must be nonempty");
    std::uint64_t mask = 0;
    for (std::size_t s : lambda) {
        if (s >= L) throw std::out_of_range("contour_bound_check: site outside chain");
        mask |= std::uint64_t{1} << s;
    }
    const auto op = stavskaya_up(L, eps);
    const DistVector d = evolve_dist(op, DistVector::zeros_state(op.lattice()), t);
    ContourCheck c;
    c.exact = d.p[mask];
    c.bound = std::pow(6.0 * eps, std::popcount(mask));
    c.satisfied = c.exact <= c.bound;
    c.out_of_proven_regime = eps >= kProvenEps;
    return c;
}

ContourSweep contour_sweep(std::size_t L, double eps, std::uint64_t t_max) {
    const auto op = stavskaya_up(L, eps);
    DistVector d = DistVector::zeros_state(op.lattice());
    ContourSweep sw;
    sw.out_of_proven_regime = eps >= kProvenEps;
    std::vector<double> bound(d.dimension());
    for (std::size_t m = 1; m < bound.size(); ++m) bound[m] = std::pow(6.0 * eps, std::popcount(m));
    for (std::uint64_t t = 0; t <= t_max; ++t) {
        if (t > 0) d = op.apply(d, t - 1);
        for (std::size_t m = 1; m < d.dimension(); ++m) {
            ++sw.checked;
            const double ratio = d.p[m] / bound[m];
            if (d.p[m] > bound[m]) ++sw.violations;
            if (ratio > sw.worst_ratio) {
                sw.worst_ratio = ratio;
                sw.worst_t = t;
                sw.worst_set = m;
            }
        }
    }
    return sw;
}

// ---- first-order response ----

ca::Lattice lattice_for(const ca::RuleSpec& rule, std::size_t L) {
    switch (rule.lattice_kind()) {
        case ca::LatticeKind::Chain1D: return ca::Lattice::chain(L);
        case ca::LatticeKind::Ladder2xL: return ca::Lattice::ladder(L);
        case ca::LatticeKind::Torus2D: return ca::Lattice::torus(L, L);
    }
    throw std::logic_error("unknown lattice kind");
}

double first_order_response(const ca::RuleSpec& rule, Bias bias, std::size_t x, std::uint64_t t, std::size_t L) {
    if (rule.uses_tie_coins())
        throw std::invalid_argument("first_order_response: " + rule.name() + " has random tie breaks");
    const ca::Lattice lat = lattice_for(rule, L);
    ca::check_compatible(rule, lat);
    const std::size_t n = lat.site_count();
    if (x >= n) throw std::out_of_range("first_order_response: site out of range");
    if (t == 0) return 0.0;

    // noiseless orbit of the reference: orbit[i] is the state before noise i
    std::vector<ca::BitConfig> orbit;
    orbit.push_back(bias == Bias::Up ? ca::BitConfig::zeros(lat) : ca::BitConfig::ones(lat));
    for (std::uint64_t i = 1; i < t; ++i) orbit.push_back(ca::apply_rule(rule, orbit.back()));
    const bool target = bias == Bias::Up;
    const double base = orbit.back().get(x) ? 1.0 : 0.0;

    double total = 0.0;
    for (std::uint64_t i = 0; i < t; ++i) {
        for (std::size_t y = 0; y < n; ++y) {
            if (orbit[i].get(y) == target) continue;  // v_y annihilates this state
            ca::BitConfig c = orbit[i];
            c.set(y, target);
            for (std::uint64_t s = i + 1; s < t; ++s) c = ca::apply_rule(rule, c);
            total += (c.get(x) ? 1.0 : 0.0) - base;
        }
    }
    return total;
}

double first_order_response_fd(const ca::RuleSpec& rule, Bias bias, std::size_t x, std::uint64_t t,
                               std::size_t L, double h) {
    const ca::Lattice lat = lattice_for(rule, L);
    const std::size_t n = lat.site_count();
    if (x >= n) throw std::out_of_range("first_order_response_fd: site out of range");
    auto occupation = [&](double eps) {
        const TransitionOperator op(rule, std::vector<noise::SiteKernel>(n, bias_kernel(bias, eps)), lat);
        DistVector d = bias == Bias::Up ? DistVector::zeros_state(lat) : DistVector::point_mass(ca::BitConfig::ones(lat));
        std::vector<double> tmp(d.dimension());
        for (std::uint64_t i = 0; i < t; ++i) {
            if (i > 0) {
                op.push_forward(d.p, tmp, i - 1);
                d.p.swap(tmp);
            }
            op.apply_noise(d.p);
        }
        return d.marginal(x);
    };
    return (occupation(h) - occupation(-h)) / (2.0 * h);
}

// ---- metastable states ----

double fast_gap(const TransitionOperator& op) {
    const SpectrumReport rep = leading_spectrum(op, 3);
    return rep.minus_log_modulus(2);
}

DistVector metastable_state(const TransitionOperator& op, std::uint64_t t_star) {
    if (t_star == 0) {
        const double g = fast_gap(op);
        t_star = std::isfinite(g) && g > 0.0 ? static_cast<std::uint64_t>(std::ceil(10.0 / g)) : 1;
        t_star = std::clamp<std::uint64_t>(t_star, 1, 1'000'000);
    }
    DistVector d = evolve_dist(op, DistVector::zeros_state(op.lattice()), t_star);
    const double s = d.sum();
    for (double& v : d.p) v /= s;
    return d;
}

// ---- resolvent moments ----

ResolventMoment resolvent_moment(const LinearMap& k, const LinearMap& k_transpose, const LinearMap& v,
                                 std::span<const double> observable, std::span<const double> omega0,
                                 const ResolventOptions& options) {
    const std::size_t n = omega0.size();
    if (observable.size() != n) throw std::invalid_argument("resolvent_moment: dimension mismatch");
    if (options.order == 0) throw std::invalid_argument("resolvent_moment: order must be >= 1");

    KrylovOptions ko;
    ko.k = std::min(options.probe, n);
    ko.want_vectors = true;
    ko.tol = 1e-11;
    const KrylovResult right = krylov_schur(k, n, ko);
    std::size_t r = 0;
    while (r < right.values.size() && std::abs(right.values[r]) > 1.0 - options.near_unit) ++r;
    if (r == right.values.size())
        throw std::invalid_argument("resolvent_moment: every probed eigenvalue is near 1; raise probe");

    ResolventMoment res;
    res.projected = r;
    res.gap_estimate = -std::log(std::abs(right.values[r]));

    Eigen::MatrixXcd R, WG;  // projector P = R (W^T R)^-1 W^T = R * WG^T
    if (r > 0) {
        const KrylovResult left = krylov_schur(k_transpose, n, ko);
        std::size_t rl = 0;
        while (rl < left.values.size() && std::abs(left.values[rl]) > 1.0 - options.near_unit) ++rl;
        if (rl != r) throw ConvergenceError("resolvent_moment: left and right near-unit clusters differ");
        R = right.schur_basis.leftCols(static_cast<Eigen::Index>(r));
        const Eigen::MatrixXcd W = left.schur_basis.leftCols(static_cast<Eigen::Index>(r));
        const Eigen::MatrixXcd G = (W.transpose() * R).inverse();
        WG = W * G.transpose();
    }
    auto project = [&](std::vector<double>& w) {
        if (r == 0) return;
        const Eigen::Map<const Eigen::VectorXd> wv(w.data(), static_cast<Eigen::Index>(n));
        const Eigen::VectorXcd coef = WG.transpose() * wv.cast<std::complex<double>>();
        const Eigen::VectorXcd comp = R * coef;
        for (std::size_t i = 0; i < n; ++i) w[i] -= comp(static_cast<Eigen::Index>(i)).real();
    };

    std::size_t T = options.truncation;
    if (T == 0) {
        const double est = 50.0 / std::max(res.gap_estimate, 1e-12);
        if (est > 1e7) throw ResourceError("resolvent_moment: truncation estimate too large");
        T = static_cast<std::size_t>(std::ceil(est));
    }
    res.truncation = T;

    auto evaluate = [&](std::size_t cut) {
        std::vector<double> w(omega0.begin(), omega0.end()), tmp(n), cur(n), acc(n);
        for (std::size_t order = 0; order < options.order; ++order) {
            v(w, tmp);
            project(tmp);
            cur = tmp;
            acc = tmp;
            for (std::size_t j = 1; j <= cut; ++j) {
                k(cur, tmp);
                cur.swap(tmp);
                for (std::size_t i = 0; i < n; ++i) acc[i] += cur[i];
            }
            w = acc;
        }
        return dot(observable, w);
    };
    res.value = evaluate(T);
    res.tail = std::abs(res.value - evaluate(T * 9 / 10));
    res.converged = res.tail <= 0.01 * std::abs(res.value) || (res.value == 0.0 && res.tail == 0.0);
    return res;
}

LinearMap up_flip_generator(const ca::Lattice& lattice) {
    const std::size_t n = lattice.site_count();
    return [n](std::span<const double> x, std::span<double> y) {
        std::fill(y.begin(), y.end(), 0.0);
        for (std::size_t b = 0; b < x.size(); ++b) {
            if (x[b] == 0.0) continue;
            for (std::size_t s = 0; s < n; ++s) {
                const std::size_t bit = std::size_t{1} << s;
                if (b & bit) continue;
                y[b | bit] += x[b];
                y[b] -= x[b];
            }
        }
    };
}

std::vector<double> magnetization_observable(const ca::Lattice& lattice) {
    const std::size_t n = lattice.site_count();
    std::vector<double> o(std::size_t{1} << n);
    for (std::size_t b = 0; b < o.size(); ++b)
        o[b] = std::popcount(static_cast<std::uint64_t>(b)) / static_cast<double>(n);
    return o;
}

ResolventMoment stavskaya_resolvent_moment(const TransitionOperator& op, const ResolventOptions& options) {
    const DistVector omega = metastable_state(op);
    const LinearMap k = [&op](std::span<const double> x, std::span<double> y) { op.apply(x, y); };
    const LinearMap kt = [&op](std::span<const double> x, std::span<double> y) { op.apply_transpose(x, y); };
    return resolvent_moment(k, kt, up_flip_generator(op.lattice()), magnetization_observable(op.lattice()),
                            omega.p, options);
}

// ---- local perturbations ----

std::size_t lattice_distance(const ca::Lattice& lattice, std::size_t a, std::size_t b) {
    const std::size_t L = lattice.length;
    const std::size_t ax = a % L, ay = a / L, bx = b % L, by = b / L;
    const std::size_t dx0 = ax > bx ? ax - bx : bx - ax;
    const std::size_t dx = std::min(dx0, L - dx0);
    std::size_t dy = ay > by ? ay - by : by - ay;
    if (lattice.kind == ca::LatticeKind::Torus2D) dy = std::min(dy, lattice.width - dy);
    return dx + dy;
}

LpplProbe lppl_probe(const ca::RuleSpec& rule, const noise::NoiseModel& noise, std::size_t perturb_site,
                     double delta, std::size_t L, std::uint64_t t_star) {
    const ca::Lattice lat = lattice_for(rule, L);
    if (perturb_site >= lat.site_count()) throw std::out_of_range("lppl_probe: site out of range");
    const TransitionOperator base(rule, noise, lat);
    noise::NoiseModel bumped = noise;
    const noise::SiteNoise s0 = noise.at(perturb_site);
    bumped.set_site(perturb_site, s0.p_up + delta, s0.p_down);
    const TransitionOperator pert(rule, bumped, lat);

    LpplProbe out;
    if (t_star == 0) {
        const double g = fast_gap(base);
        t_star = std::clamp<std::uint64_t>(static_cast<std::uint64_t>(std::ceil(10.0 / g)), 1, 1'000'000);
    }
    out.t_star = t_star;
    const auto mb = metastable_state(base, t_star).marginals();
    const auto mp = metastable_state(pert, t_star).marginals();

    out.change.resize(mb.size());
    std::size_t dmax = 0;
    for (std::size_t i = 0; i < mb.size(); ++i) {
        out.change[i] = std::abs(mp[i] - mb[i]);
        dmax = std::max(dmax, lattice_distance(lat, i, perturb_site));
    }
    out.table.resize(dmax + 1);
    for (std::size_t d = 0; d <= dmax; ++d) out.table[d].distance = d;
    for (std::size_t i = 0; i < mb.size(); ++i) {
        auto& row = out.table[lattice_distance(lat, i, perturb_site)];
        row.max_change = std::max(row.max_change, out.change[i]);
    }

    // log-linear least squares over distances with a nonzero change
    std::vector<double> xs, ys;
    for (const auto& row : out.table)
        if (row.max_change > 0.0) {
            xs.push_back(static_cast<double>(row.distance));
            ys.push_back(std::log(row.max_change));
        }
    if (xs.size() >= 3) {
        const double m = static_cast<double>(xs.size());
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            sx += xs[i];
            sy += ys[i];
            sxx += xs[i] * xs[i];
            sxy += xs[i] * ys[i];
        }
        const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
        const double icpt = (sy - slope * sx) / m;
        double ss_res = 0, ss_tot = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double r = ys[i] - (icpt + slope * xs[i]);
            ss_res += r * r;
            ss_tot += (ys[i] - sy / m) * (ys[i] - sy / m);
        }
        out.decay_length = slope < 0.0 ? -1.0 / slope : std::numeric_limits<double>::infinity();
        out.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    }
    return out;
}

}  // namespace pcalab::markov
