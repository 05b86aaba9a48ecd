#pragma once

#include <complex>
#include <cstddef>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "pcalab/markov/analysis.hpp"

namespace pcalab::asep {

/// Generator of a single particle hopping on sites 0..L-1: right at gamma_R,
/// left at gamma_L, no hopping off the ends, plus an optional weak link
/// 0 <-> L-1 at rate delta in both directions. Columns sum to zero.
struct AsepMatrix {
    std::size_t L = 0;
    double gamma_L = 0.0;
    double gamma_R = 0.0;
    double delta = 0.0;
    Eigen::MatrixXd m;
};

AsepMatrix build_asep(std::size_t L, double gamma_L, double gamma_R, double delta = 0.0);

/// Normalized null vector of the generator.
Eigen::VectorXd steady_state(const AsepMatrix& a);

/// -max Re(lambda) over the spectrum with the steady-state eigenvalue removed.
/// Exact for triangular generators, a symmetric tridiagonal solve for delta = 0,
/// and a dense nonsymmetric solve otherwise.
double asep_gap(const AsepMatrix& a);

/// <o| Q (z - m)^{-1} Q |omega> with Q = 1 - |pi><1|, by a dense solve
/// (a bordered system at z = 0). Throws std::domain_error when z is in the
/// spectrum.
std::complex<double> asep_resolvent(const AsepMatrix& a, const Eigen::VectorXd& o, const Eigen::VectorXd& omega,
                                    std::complex<double> z);

/// The same quantity as int_0^inf e^{-zt} (<o(t)> - <o>_inf) dt, integrated
/// with Gauss-Legendre panels on exact propagators exp(m h); the tail is cut
/// using the gap. Requires Re z >= 0.
std::complex<double> asep_resolvent_time_integral(const AsepMatrix& a, const Eigen::VectorXd& o,
                                                  const Eigen::VectorXd& omega, std::complex<double> z,
                                                  double tol = 1e-12);

/// (1/s) ((1 - s/gamma_R)^{1-L} - 1): TASEP value of <1 - n_L| R(-s) |site 0>.
std::complex<double> tasep_closed_form(std::size_t L, double gamma_R, std::complex<double> s);

/// o = 1 - n_{L-1} and omega = point mass at site 0.
Eigen::VectorXd last_site_vacancy(std::size_t L);
Eigen::VectorXd first_site_mass(std::size_t L);

double sigma_min(const AsepMatrix& a, std::complex<double> z);

struct PseudoPoint {
    std::complex<double> z;
    double sigma_min = 0.0;
};

/// sigma_min(z - m) over an nx x ny rectangle [re_lo, re_hi] x [im_lo, im_hi].
std::vector<PseudoPoint> pseudospectrum_grid(const AsepMatrix& a, double re_lo, double re_hi, double im_lo,
                                             double im_hi, std::size_t nx, std::size_t ny);
void write_pseudospectrum_csv(std::ostream& out, const std::vector<PseudoPoint>& grid);

struct WeakLinkRow {
    double delta = 0.0;
    std::size_t L = 0;
    double gap = 0.0;
};

std::vector<WeakLinkRow> weak_link_scan(double gamma_L, double gamma_R, const std::vector<double>& deltas,
                                        const std::vector<std::size_t>& sizes);
void write_weak_link_csv(std::ostream& out, const std::vector<WeakLinkRow>& rows);

/// Discrete-time embedding K = 1 + m of TASEP (gamma_R = 1) with the weak
/// link as perturbation V, o = 1 - n_{L-1} and omega0 = the steady state.
markov::ResolventMoment tasep_resolvent_moment(std::size_t L, std::size_t order, std::size_t truncation);

}  // namespace pcalab::asep
