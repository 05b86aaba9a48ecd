#include "pcalab/markov/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "json.hpp"

#include "pcalab/noise/rng.hpp"

namespace pcalab::markov {

namespace {

using cd = std::complex<double>;

// Swaps diagonal entries k and k+1 of the upper triangular T, keeping A U = U T.
void swap_adjacent(Eigen::MatrixXcd& T, Eigen::MatrixXcd& U, Eigen::Index k) {
    const cd a = T(k, k), b = T(k + 1, k + 1), c = T(k, k + 1);
    const cd x = c, y = b - a;
    const double r = std::hypot(std::abs(x), std::abs(y));
    if (r == 0.0) return;
    Eigen::Matrix2cd Z;
    Z << x / r, -std::conj(y) / r, y / r, std::conj(x) / r;
    T.middleCols(k, 2) = T.middleCols(k, 2) * Z;
    T.middleRows(k, 2) = Z.adjoint() * T.middleRows(k, 2);
    U.middleCols(k, 2) = U.middleCols(k, 2) * Z;
    T(k + 1, k) = 0.0;
}

// Selection sort of the Schur form by descending modulus.
void sort_schur(Eigen::MatrixXcd& T, Eigen::MatrixXcd& U) {
    const Eigen::Index m = T.rows();
    for (Eigen::Index i = 0; i < m; ++i) {
        Eigen::Index best = i;
        for (Eigen::Index j = i + 1; j < m; ++j)
            if (std::abs(T(j, j)) > std::abs(T(best, best)) + 1e-15) best = j;
        for (Eigen::Index j = best; j > i; --j) swap_adjacent(T, U, j - 1);
    }
}

// Eigenvector of upper triangular T for its i-th diagonal entry, unit norm.
Eigen::VectorXcd triangular_eigvec(const Eigen::MatrixXcd& T, Eigen::Index i) {
    Eigen::VectorXcd y = Eigen::VectorXcd::Zero(T.rows());
    const cd lam = T(i, i);
    y(i) = 1.0;
    const double scale = std::max(T.norm(), 1e-300);
    for (Eigen::Index r = i - 1; r >= 0; --r) {
        cd acc = 0.0;
        for (Eigen::Index c = r + 1; c <= i; ++c) acc += T(r, c) * y(c);
        cd d = T(r, r) - lam;
        if (std::abs(d) < 1e-14 * scale) d = 1e-14 * scale;
        y(r) = -acc / d;
    }
    return y / y.norm();
}

struct ComplexApply {
    const LinearMap& op;
    std::size_t n;
    std::vector<double> xr, xi, yr, yi;
    std::size_t count = 0;

    ComplexApply(const LinearMap& o, std::size_t dim) : op(o), n(dim), xr(dim), xi(dim), yr(dim), yi(dim) {}

    void operator()(const Eigen::VectorXcd& x, Eigen::VectorXcd& y) {
        bool imag = false;
        for (std::size_t i = 0; i < n; ++i) {
            xr[i] = x(static_cast<Eigen::Index>(i)).real();
            xi[i] = x(static_cast<Eigen::Index>(i)).imag();
            imag = imag || xi[i] != 0.0;
        }
        op(xr, yr);
        if (imag) op(xi, yi);
        else std::fill(yi.begin(), yi.end(), 0.0);
        count += imag ? 2 : 1;
        y.resize(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) y(static_cast<Eigen::Index>(i)) = cd(yr[i], yi[i]);
    }
};

Eigen::VectorXcd random_vector(std::size_t n, noise::RngStream& rng) {
    Eigen::VectorXcd v(static_cast<Eigen::Index>(n));
    for (auto& e : v) e = rng.uniform() - 0.5;
    return v;
}

// Two passes of classical Gram-Schmidt against the first j columns of V.
Eigen::VectorXcd orthogonalize(const Eigen::MatrixXcd& V, Eigen::Index j, Eigen::VectorXcd& w) {
    Eigen::VectorXcd h = Eigen::VectorXcd::Zero(j);
    for (int pass = 0; pass < 2; ++pass) {
        const Eigen::VectorXcd c = V.leftCols(j).adjoint() * w;
        w -= V.leftCols(j) * c;
        h += c;
    }
    return h;
}

KrylovResult dense_fallback(const LinearMap& op, std::size_t n, const KrylovOptions& opt) {
    Eigen::MatrixXd A(n, n);
    std::vector<double> e(n, 0.0), col(n);
    for (std::size_t j = 0; j < n; ++j) {
        e[j] = 1.0;
        op(e, col);
        e[j] = 0.0;
        for (std::size_t i = 0; i < n; ++i) A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
    }
    Eigen::ComplexSchur<Eigen::MatrixXcd> schur(A.cast<cd>());
    Eigen::MatrixXcd T = schur.matrixT(), U = schur.matrixU();
    sort_schur(T, U);
    KrylovResult res;
    const auto k = static_cast<Eigen::Index>(opt.k);
    res.matvecs = n;
    if (opt.want_vectors) {
        res.vectors.resize(static_cast<Eigen::Index>(n), k);
        res.schur_basis = U.leftCols(k);
    }
    const Eigen::MatrixXcd Ac = A.cast<cd>();
    for (Eigen::Index i = 0; i < k; ++i) {
        const Eigen::VectorXcd x = U * triangular_eigvec(T, i);
        res.values.push_back(T(i, i));
        res.residuals.push_back((Ac * x - T(i, i) * x).norm());
        if (opt.want_vectors) res.vectors.col(i) = x;
    }
    return res;
}

}  // namespace

KrylovResult krylov_schur(const LinearMap& op, std::size_t n, const KrylovOptions& opt) {
    if (opt.k == 0 || opt.k > n) throw std::invalid_argument("krylov_schur: need 1 <= k <= dimension");
    std::size_t m = opt.subspace != 0 ? opt.subspace : std::max<std::size_t>(30, 3 * opt.k);
    if (m <= opt.k + 1) m = opt.k + 2;
    if (n <= m + 1) return dense_fallback(op, n, opt);

    const auto N = static_cast<Eigen::Index>(n);
    const auto M = static_cast<Eigen::Index>(m);
    const auto K = static_cast<Eigen::Index>(opt.k);
    noise::RngStream rng(opt.seed, 0x4b5);
    ComplexApply A(op, n);

    Eigen::MatrixXcd V(N, M + 1);
    Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(M + 1, M);
    Eigen::VectorXcd v = random_vector(n, rng);
    V.col(0) = v / v.norm();
    Eigen::Index p = 0;
    Eigen::VectorXcd w;

    Eigen::MatrixXcd T, U;
    Eigen::RowVectorXcd s;
    std::vector<double> est(opt.k);
    KrylovResult res;

    for (std::size_t restart = 0;; ++restart) {
        for (Eigen::Index j = p; j < M; ++j) {
            A(V.col(j), w);
            const double wnorm0 = w.norm();
            const Eigen::VectorXcd h = orthogonalize(V, j + 1, w);
            H.col(j).head(j + 1) = h;
            double beta = w.norm();
            if (beta <= 1e-12 * std::max(wnorm0, 1e-300)) {
                // invariant subspace: continue from a fresh orthogonal direction
                H(j + 1, j) = 0.0;
                w = random_vector(n, rng);
                orthogonalize(V, j + 1, w);
                beta = w.norm();
                V.col(j + 1) = w / beta;
            } else {
                H(j + 1, j) = beta;
                V.col(j + 1) = w / beta;
            }
        }

        Eigen::ComplexSchur<Eigen::MatrixXcd> schur(H.topLeftCorner(M, M));
        T = schur.matrixT();
        U = schur.matrixU();
        sort_schur(T, U);
        s = H.row(M) * U;

        // Schur-vector residuals; they bound the Ritz residuals and stay
        // meaningful inside clusters of nearly equal eigenvalues
        bool converged = true;
        for (Eigen::Index i = 0; i < K; ++i) {
            est[static_cast<std::size_t>(i)] = std::abs(s(i));
            if (est[static_cast<std::size_t>(i)] > opt.tol) converged = false;
        }
        res.restarts = restart;
        if (converged) break;
        if (restart >= opt.max_restarts)
            throw ConvergenceError("Krylov-Schur did not converge in " + std::to_string(opt.max_restarts) +
                                       " restarts",
                                   est);

        p = std::min<Eigen::Index>(K + (M - K) / 2, M - 1);
        const Eigen::MatrixXcd kept = V.leftCols(M) * U.leftCols(p);
        V.leftCols(p) = kept;
        V.col(p) = V.col(M);
        H.setZero();
        H.topLeftCorner(p, p) = T.topLeftCorner(p, p);
        H.row(p).head(p) = s.head(p);
    }

    const Eigen::MatrixXcd basis = V.leftCols(M) * U.leftCols(K);
    if (opt.want_vectors) {
        res.vectors.resize(N, K);
        res.schur_basis = basis;
    }
    for (Eigen::Index i = 0; i < K; ++i) {
        Eigen::VectorXcd x = V.leftCols(M) * (U * triangular_eigvec(T, i));
        x /= x.norm();
        Eigen::VectorXcd ax;
        A(x, ax);
        res.values.push_back(T(i, i));
        res.residuals.push_back((ax - T(i, i) * x).norm());
        if (opt.want_vectors) res.vectors.col(i) = x;
    }
    res.matvecs = A.count;
    return res;
}

double SpectrumReport::minus_log_modulus(std::size_t i) const {
    return -std::log(std::abs(eigenvalues.at(i)));
}

SpectrumReport leading_spectrum(const TransitionOperator& op, std::size_t k, double tol, std::size_t max_restarts) {
    if (op.step_dependent())
        throw std::invalid_argument("leading_spectrum: " + op.rule().name() +
                                    " alternates sublattices, so K depends on the step parity");
    KrylovOptions opt;
    opt.k = k;
    opt.tol = tol;
    opt.max_restarts = max_restarts;
    LinearMap map = [&op](std::span<const double> x, std::span<double> y) { op.apply(x, y); };
    KrylovResult kr = krylov_schur(map, op.dimension(), opt);
    SpectrumReport rep;
    rep.rule = op.rule().name();
    rep.epsilon = std::max(op.noise().p_up(), op.noise().p_down());
    rep.L = op.lattice().length;
    rep.eigenvalues = std::move(kr.values);
    rep.residuals = std::move(kr.residuals);
    rep.restarts = kr.restarts;
    return rep;
}

Eigen::MatrixXd dense_matrix(const TransitionOperator& op, std::uint64_t step) {
    if (op.sites() > 12) throw ResourceError("dense_matrix: at most 12 sites");
    const std::size_t n = op.dimension();
    Eigen::MatrixXd A(n, n);
    std::vector<double> e(n, 0.0), col(n);
    for (std::size_t j = 0; j < n; ++j) {
        e[j] = 1.0;
        op.apply(e, col, step);
        e[j] = 0.0;
        for (std::size_t i = 0; i < n; ++i) A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
    }
    return A;
}

std::vector<std::complex<double>> dense_spectrum(const TransitionOperator& op) {
    if (op.sites() > 10) throw ResourceError("dense_spectrum: at most 10 sites");
    if (op.step_dependent()) throw std::invalid_argument("dense_spectrum: step-dependent rule");
    Eigen::EigenSolver<Eigen::MatrixXd> es(dense_matrix(op), false);
    if (es.info() != Eigen::Success) throw ConvergenceError("dense eigensolve failed");
    std::vector<cd> ev(es.eigenvalues().begin(), es.eigenvalues().end());
    std::stable_sort(ev.begin(), ev.end(), [](cd a, cd b) { return std::abs(a) > std::abs(b); });
    return ev;
}

GapFit gap_extrapolate(std::span<const std::pair<double, double>> points) {
    std::set<double> distinct;
    for (const auto& [L, _] : points) {
        if (!(L > 0.0)) throw std::invalid_argument("gap_extrapolate: sizes must be positive");
        distinct.insert(1.0 / (L * L));
    }
    if (distinct.size() < 2) throw std::invalid_argument("gap_extrapolate: degenerate design (need two distinct sizes)");
    if (distinct.size() < 3) throw std::invalid_argument("gap_extrapolate: need at least three distinct sizes");
    const auto n = static_cast<Eigen::Index>(points.size());
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& [L, v] = points[static_cast<std::size_t>(i)];
        X(i, 0) = 1.0;
        X(i, 1) = 1.0 / (L * L);
        y(i) = v;
    }
    const Eigen::Vector2d beta = X.colPivHouseholderQr().solve(y);
    const Eigen::VectorXd r = y - X * beta;
    return {beta(0), beta(1), std::sqrt(r.squaredNorm() / static_cast<double>(n))};
}

std::string spectrum_json(const SpectrumReport& report, const std::optional<GapFit>& fit) {
    nlohmann::json j;
    j["rule"] = report.rule;
    j["epsilon"] = report.epsilon;
    j["L"] = report.L;
    auto& ev = j["eigenvalues"] = nlohmann::json::array();
    for (std::size_t i = 0; i < report.eigenvalues.size(); ++i)
        ev.push_back({{"re", report.eigenvalues[i].real()},
                      {"im", report.eigenvalues[i].imag()},
                      {"residual", i < report.residuals.size() ? report.residuals[i] : 0.0}});
    if (fit) j["fit"] = {{"delta", fit->delta}, {"c", fit->c}, {"rms", fit->rms}};
    else j["fit"] = nullptr;
    return j.dump(2);
}

}  // namespace pcalab::markov
