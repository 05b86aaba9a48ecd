#include "pcalab/asep/asep.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include <unsupported/Eigen/MatrixFunctions>

#include "pcalab/util/errors.hpp"

namespace pcalab::asep {

namespace {

using cd = std::complex<double>;

// Gauss-Legendre rule on (0, 1).
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    x.resize(n);
    w.resize(n);
    for (int i = 0; i < n; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = z;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (z * p1 - p0) / (z * z - 1.0);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        x[i] = 0.5 * (1.0 - z);
        w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
}

void check_vectors(const AsepMatrix& a, const Eigen::VectorXd& o, const Eigen::VectorXd& omega) {
    const auto n = static_cast<Eigen::Index>(a.L);
    if (o.size() != n || omega.size() != n) throw std::invalid_argument("asep: vector length must equal L");
}

}  // namespace

AsepMatrix build_asep(std::size_t L, double gamma_L, double gamma_R, double delta) {
    if (L < 2) throw std::invalid_argument("build_asep: need L >= 2");
    if (!(gamma_L >= 0.0) || !(gamma_R >= 0.0) || !(delta >= 0.0))
        throw std::invalid_argument("build_asep: rates must be non-negative");
    AsepMatrix a{L, gamma_L, gamma_R, delta, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(L))};
    auto hop = [&a](Eigen::Index from, Eigen::Index to, double rate) {
        a.m(to, from) += rate;
        a.m(from, from) -= rate;
    };
    const auto n = static_cast<Eigen::Index>(L);
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
        if (gamma_R > 0.0) hop(i, i + 1, gamma_R);
        if (gamma_L > 0.0) hop(i + 1, i, gamma_L);
    }
    if (delta > 0.0) {
        hop(n - 1, 0, delta);
        hop(0, n - 1, delta);
    }
    return a;
}

Eigen::VectorXd steady_state(const AsepMatrix& a) {
    const auto n = static_cast<Eigen::Index>(a.L);
    Eigen::VectorXd p(n);
    if (a.delta == 0.0 && a.gamma_L > 0.0 && a.gamma_R > 0.0) {
        // detailed balance, p_x ~ (gamma_R / gamma_L)^x, scaled to avoid overflow
        const double lr = std::log(a.gamma_R / a.gamma_L);
        const double top = lr > 0 ? lr * static_cast<double>(n - 1) : 0.0;
        for (Eigen::Index x = 0; x < n; ++x) p(x) = std::exp(lr * static_cast<double>(x) - top);
    } else {
        // replace one balance equation by the normalization
        Eigen::MatrixXd A = a.m;
        A.row(n - 1).setOnes();
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
        rhs(n - 1) = 1.0;
        p = A.fullPivLu().solve(rhs);
        for (auto& v : p)
            if (v < 0.0 && v > -1e-14) v = 0.0;
    }
    return p / p.sum();
}

double asep_gap(const AsepMatrix& a) {
    const auto n = static_cast<Eigen::Index>(a.L);
    std::vector<double> re;
    if (a.delta == 0.0 && (a.gamma_L == 0.0 || a.gamma_R == 0.0)) {
        for (Eigen::Index i = 0; i < n; ++i) re.push_back(a.m(i, i));  // triangular
    } else if (a.delta == 0.0) {
        // similar to a symmetric tridiagonal matrix with off-diagonal sqrt(gL gR)
        Eigen::VectorXd diag = a.m.diagonal();
        Eigen::VectorXd off = Eigen::VectorXd::Constant(n - 1, std::sqrt(a.gamma_L * a.gamma_R));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
        es.computeFromTridiagonal(diag, off, Eigen::EigenvaluesOnly);
        if (es.info() != Eigen::Success) throw ConvergenceError("asep_gap: tridiagonal eigensolve failed");
        re.assign(es.eigenvalues().begin(), es.eigenvalues().end());
    } else {
        Eigen::EigenSolver<Eigen::MatrixXd> es(a.m, false);
        if (es.info() != Eigen::Success) throw ConvergenceError("asep_gap: eigensolve failed");
        std::vector<cd> ev(es.eigenvalues().begin(), es.eigenvalues().end());
        const auto zero = std::min_element(ev.begin(), ev.end(), [](cd x, cd y) { return std::abs(x) < std::abs(y); });
        ev.erase(zero);
        double best = -std::numeric_limits<double>::infinity();
        for (cd z : ev) best = std::max(best, z.real());
        return -best;
    }
    const auto zero = std::min_element(re.begin(), re.end(), [](double x, double y) { return std::abs(x) < std::abs(y); });
    re.erase(zero);
    return -*std::max_element(re.begin(), re.end());
}

std::complex<double> asep_resolvent(const AsepMatrix& a, const Eigen::VectorXd& o, const Eigen::VectorXd& omega,
                                    std::complex<double> z) {
    check_vectors(a, o, omega);
    const auto n = static_cast<Eigen::Index>(a.L);
    const Eigen::VectorXd pi = steady_state(a);
    const Eigen::VectorXd q_omega = omega - pi * omega.sum();
    const Eigen::VectorXd q_o = o - Eigen::VectorXd::Constant(n, o.dot(pi));  // o Q

    if (z == cd(0.0)) {
        // [-m  pi; 1^T 0] [x; mu] = [Q omega; 0] gives x = (-m)^{-1} Q omega on range(Q)
        Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n + 1, n + 1);
        B.topLeftCorner(n, n) = -a.m;
        B.topRightCorner(n, 1) = pi;
        B.bottomLeftCorner(1, n).setOnes();
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
        rhs.head(n) = q_omega;
        const Eigen::FullPivLU<Eigen::MatrixXd> lu(B);
        if (!lu.isInvertible()) throw std::domain_error("asep_resolvent: singular bordered system");
        const Eigen::VectorXd x = lu.solve(rhs);
        return q_o.dot(x.head(n));
    }
    const Eigen::MatrixXcd A = z * Eigen::MatrixXcd::Identity(n, n) - a.m.cast<cd>();
    const Eigen::FullPivLU<Eigen::MatrixXcd> lu(A);
    if (!lu.isInvertible() || lu.rcond() < 1e-13) throw std::domain_error("asep_resolvent: z lies in the spectrum");
    const Eigen::VectorXcd x = lu.solve(q_omega.cast<cd>());
    return q_o.cast<cd>().transpose() * x;
}

std::complex<double> asep_resolvent_time_integral(const AsepMatrix& a, const Eigen::VectorXd& o,
                                                  const Eigen::VectorXd& omega, std::complex<double> z,
                                                  double tol) {
    check_vectors(a, o, omega);
    if (z.real() < 0.0) throw std::invalid_argument("time integral needs Re z >= 0");
    const double o_inf = o.dot(steady_state(a));
    const double gap = asep_gap(a);
    const double decay = z.real() + gap;
    if (!(decay > 0.0)) throw std::domain_error("time integral: no decay (gapless and Re z = 0)");

    const double rate = std::max(1.0, a.m.cwiseAbs().colwise().sum().maxCoeff());
    const double h = 1.0 / rate;
    std::vector<double> gx, gw;
    gauss_legendre(12, gx, gw);
    std::vector<Eigen::MatrixXd> node_prop;
    for (double x : gx) node_prop.push_back((a.m * (h * x)).exp());
    const Eigen::MatrixXd step = (a.m * h).exp();

    const double t_min = 4.0 * static_cast<double>(a.L) / std::max(std::min(rate, 1.0), 1e-3);
    Eigen::VectorXd p = omega;
    cd acc = 0.0;
    int quiet = 0;
    for (std::size_t k = 0;; ++k) {
        const double t0 = static_cast<double>(k) * h;
        for (std::size_t j = 0; j < gx.size(); ++j) {
            const double t = t0 + h * gx[j];
            acc += h * gw[j] * std::exp(-z * t) * (o.dot(node_prop[j] * p) - o_inf);
        }
        p = step * p;
        const double t1 = t0 + h;
        const double tail = std::exp(-z.real() * t1) * std::abs(o.dot(p) - o_inf) / decay;
        quiet = tail <= tol * std::max(std::abs(acc), 1e-300) ? quiet + 1 : 0;
        if (t1 > t_min && quiet >= 5) break;
        if (t1 > 1e7) throw ConvergenceError("time integral did not settle by t = 1e7");
    }
    return acc;
}

std::complex<double> tasep_closed_form(std::size_t L, double gamma_R, std::complex<double> s) {
    if (s == cd(0.0)) return static_cast<double>(L - 1) / gamma_R;
    return (std::pow(1.0 - s / gamma_R, 1.0 - static_cast<double>(L)) - 1.0) / s;
}

Eigen::VectorXd last_site_vacancy(std::size_t L) {
    Eigen::VectorXd o = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(L));
    o(static_cast<Eigen::Index>(L) - 1) = 0.0;
    return o;
}

Eigen::VectorXd first_site_mass(std::size_t L) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(L));
    w(0) = 1.0;
    return w;
}

double sigma_min(const AsepMatrix& a, std::complex<double> z) {
    const auto n = static_cast<Eigen::Index>(a.L);
    if (z.imag() == 0.0) {
        const Eigen::MatrixXd A = z.real() * Eigen::MatrixXd::Identity(n, n) - a.m;
        return Eigen::BDCSVD<Eigen::MatrixXd>(A).singularValues().minCoeff();
    }
    const Eigen::MatrixXcd A = z * Eigen::MatrixXcd::Identity(n, n) - a.m.cast<cd>();
    return Eigen::BDCSVD<Eigen::MatrixXcd>(A).singularValues().minCoeff();
}

std::vector<PseudoPoint> pseudospectrum_grid(const AsepMatrix& a, double re_lo, double re_hi, double im_lo,
                                             double im_hi, std::size_t nx, std::size_t ny) {
    if (nx == 0 || ny == 0) throw std::invalid_argument("pseudospectrum_grid: empty grid");
    auto axis = [](double lo, double hi, std::size_t n, std::size_t i) {
        return n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    };
    std::vector<PseudoPoint> out;
    out.reserve(nx * ny);
    for (std::size_t iy = 0; iy < ny; ++iy)
        for (std::size_t ix = 0; ix < nx; ++ix) {
            const cd z(axis(re_lo, re_hi, nx, ix), axis(im_lo, im_hi, ny, iy));
            out.push_back({z, sigma_min(a, z)});
        }
    return out;
}

void write_pseudospectrum_csv(std::ostream& out, const std::vector<PseudoPoint>& grid) {
    out << "z_re,z_im,sigma_min\n";
    out.precision(12);
    for (const auto& p : grid) out << p.z.real() << ',' << p.z.imag() << ',' << p.sigma_min << '\n';
}

std::vector<WeakLinkRow> weak_link_scan(double gamma_L, double gamma_R, const std::vector<double>& deltas,
                                        const std::vector<std::size_t>& sizes) {
    std::vector<WeakLinkRow> rows;
    for (double d : deltas) {
        if (!(d >= 0.0)) throw std::invalid_argument("weak_link_scan: delta must be >= 0");
        for (std::size_t L : sizes) rows.push_back({d, L, asep_gap(build_asep(L, gamma_L, gamma_R, d))});
    }
    return rows;
}

void write_weak_link_csv(std::ostream& out, const std::vector<WeakLinkRow>& rows) {
    out << "delta,L,gap\n";
    out.precision(12);
    for (const auto& r : rows) out << r.delta << ',' << r.L << ',' << r.gap << '\n';
}

markov::ResolventMoment tasep_resolvent_moment(std::size_t L, std::size_t order, std::size_t truncation) {
    const AsepMatrix tasep = build_asep(L, 0.0, 1.0, 0.0);
    const Eigen::MatrixXd K = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(L)) + tasep.m;
    const Eigen::MatrixXd V = build_asep(L, 0.0, 0.0, 1.0).m;
    auto dense = [](const Eigen::MatrixXd& A) {
        return markov::LinearMap([A](std::span<const double> x, std::span<double> y) {
            const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
            Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size())) = A * xv;
        });
    };
    const Eigen::VectorXd o = last_site_vacancy(L);
    const Eigen::VectorXd pi = steady_state(tasep);
    markov::ResolventOptions opt;
    opt.order = order;
    opt.truncation = truncation;
    opt.probe = std::min<std::size_t>(4, L);
    return markov::resolvent_moment(dense(K), dense(K.transpose()), dense(V),
                                    std::span<const double>(o.data(), L), std::span<const double>(pi.data(), L), opt);
}

}  // namespace pcalab::asep
