#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pcalab/markov/operator.hpp"
#include "pcalab/util/errors.hpp"

namespace pcalab::markov {

/// Real linear map y = A x on vectors of a fixed dimension.
using LinearMap = std::function<void(std::span<const double>, std::span<double>)>;

struct KrylovOptions {
    std::size_t k = 3;             ///< wanted eigenvalues (largest modulus)
    std::size_t subspace = 0;      ///< 0 -> max(30, 3k)
    double tol = 1e-10;            ///< on the Ritz residual estimate
    std::size_t max_restarts = 2000;
    std::uint64_t seed = 12345;    ///< start vector
    bool want_vectors = false;     ///< keep Ritz vectors and Schur basis
};

struct KrylovResult {
    std::vector<std::complex<double>> values;  ///< descending modulus
    std::vector<double> residuals;             ///< true ||A v - lambda v||, ||v|| = 1
    Eigen::MatrixXcd vectors;                  ///< Ritz vectors (if requested)
    Eigen::MatrixXcd schur_basis;              ///< orthonormal basis of the leading invariant subspace
    std::size_t restarts = 0;
    std::size_t matvecs = 0;
};

/// Restarted Krylov-Schur iteration (complex arithmetic, two-pass
/// Gram-Schmidt) for the k largest-modulus eigenvalues of a real map.
/// Throws ConvergenceError when max_restarts is exhausted.
KrylovResult krylov_schur(const LinearMap& op, std::size_t dim, const KrylovOptions& options);

struct SpectrumReport {
    std::string rule;
    double epsilon = 0.0;
    std::size_t L = 0;
    std::vector<std::complex<double>> eigenvalues;  ///< descending modulus
    std::vector<double> residuals;
    std::size_t restarts = 0;

    [[nodiscard]] double minus_log_modulus(std::size_t i) const;
};

/// k largest-modulus eigenvalues of K_eps. Refuses step-dependent rules.
SpectrumReport leading_spectrum(const TransitionOperator& op, std::size_t k, double tol = 1e-10,
                                std::size_t max_restarts = 2000);

/// Dense 2^N x 2^N matrix of the operator (oracle sizes only, N <= 12).
Eigen::MatrixXd dense_matrix(const TransitionOperator& op, std::uint64_t step = 0);
/// All eigenvalues by a dense nonsymmetric solve, descending modulus (N <= 10).
std::vector<std::complex<double>> dense_spectrum(const TransitionOperator& op);

struct GapFit {
    double delta = 0.0;
    double c = 0.0;
    double rms = 0.0;  ///< root-mean-square residual of the fit
};

/// Least squares of y = delta + c / L^2 over (L, y) points.
GapFit gap_extrapolate(std::span<const std::pair<double, double>> points);

/// {rule, epsilon, L, eigenvalues:[{re,im,residual}], fit:{delta,c,rms}}
std::string spectrum_json(const SpectrumReport& report, const std::optional<GapFit>& fit = std::nullopt);

}  // namespace pcalab::markov
