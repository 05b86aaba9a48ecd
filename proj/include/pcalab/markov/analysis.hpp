#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pcalab/markov/operator.hpp"
#include "pcalab/markov/spectrum.hpp"

namespace pcalab::markov {

// ---- contour bound ----

struct ContourCheck {
    double exact = 0.0;   ///< P(errors exactly on Lambda at time t | all-zeros at 0)
    double bound = 0.0;   ///< (6 eps)^|Lambda|
    bool satisfied = false;
    bool out_of_proven_regime = false;  ///< eps >= 6^-3
};

/// Up-biased Stavskaya on a periodic chain of L sites. `lambda` lists sites.
ContourCheck contour_bound_check(std::size_t L, double eps, std::uint64_t t, std::span<const std::size_t> lambda);

struct ContourSweep {
    std::size_t checked = 0;
    std::size_t violations = 0;
    double worst_ratio = 0.0;  ///< max exact / bound
    std::uint64_t worst_t = 0;
    std::uint64_t worst_set = 0;  ///< bitmask of Lambda at the worst ratio
    bool out_of_proven_regime = false;
};

/// Every nonempty Lambda and every 0 <= t <= t_max from one evolution.
ContourSweep contour_sweep(std::size_t L, double eps, std::uint64_t t_max);

// ---- first-order response ----

enum class Bias { Up, Down };

/// Lattice of the rule's geometry with `L` columns (a torus is L x L).
ca::Lattice lattice_for(const ca::RuleSpec& rule, std::size_t L);

/// d<b_x>/d eps at eps = 0 after t noisy steps, started from all-zeros (Up)
/// or all-ones (Down). <b_x> is read right after the noise sub-step of step t.
/// Computed by pushing the one-site flips of the reference through the
/// noiseless rule. Refuses rules with tie coins.
double first_order_response(const ca::RuleSpec& rule, Bias bias, std::size_t x, std::uint64_t t, std::size_t L);

/// Same derivative by a central difference of exact evolution at eps = +-h
/// (signed kernels at negative eps).
double first_order_response_fd(const ca::RuleSpec& rule, Bias bias, std::size_t x, std::uint64_t t,
                               std::size_t L, double h = 1e-6);

// ---- metastable states ----

/// -log|lambda_2| of the operator, from three leading eigenvalues.
double fast_gap(const TransitionOperator& op);

/// K^{t_star} |all-zeros>, normalized. t_star = 0 selects 10 / fast_gap.
DistVector metastable_state(const TransitionOperator& op, std::uint64_t t_star = 0);

// ---- resolvent moments ----

struct ResolventOptions {
    std::size_t order = 1;
    std::size_t truncation = 0;   ///< 0 -> ceil(50 / gap estimate)
    double near_unit = 1e-6;      ///< eigenvalues with |lambda| > 1 - near_unit are projected out
    std::size_t probe = 4;        ///< eigenvalues computed to find the near-unit cluster
};

struct ResolventMoment {
    double value = 0.0;
    double tail = 0.0;           ///< |value(T) - value(floor(0.9 T))|
    bool converged = false;      ///< tail <= 1% of |value|
    std::size_t truncation = 0;
    std::size_t projected = 0;   ///< near-unit eigenvectors removed by Q
    double gap_estimate = 0.0;   ///< -log|lambda| of the first unprojected eigenvalue
};

/// <o| (S_T Q V)^n |omega0> with S_T = sum_{k=0}^T K^k and Q the spectral
/// projector that removes the near-unit eigenvalues of K.
/// `k_transpose` must be the transpose of `k` (used for left eigenvectors).
ResolventMoment resolvent_moment(const LinearMap& k, const LinearMap& k_transpose, const LinearMap& v,
                                 std::span<const double> observable, std::span<const double> omega0,
                                 const ResolventOptions& options);

/// V = sum_x v_x for up-flips: v_x|b> = |b + e_x> - |b> when b_x = 0.
LinearMap up_flip_generator(const ca::Lattice& lattice);

/// Mean magnetization as a vector over configurations.
std::vector<double> magnetization_observable(const ca::Lattice& lattice);

/// Moment for the operator `op` with V = up_flip_generator, o = mean
/// magnetization and omega0 = metastable_state(op).
ResolventMoment stavskaya_resolvent_moment(const TransitionOperator& op, const ResolventOptions& options);

// ---- local perturbations ----

struct LpplRow {
    std::size_t distance = 0;
    double max_change = 0.0;  ///< max |Delta <b_x>| over sites at this distance
};

struct LpplProbe {
    std::vector<double> change;  ///< |Delta <b_x>| per site
    std::vector<LpplRow> table;
    double decay_length = 0.0;   ///< from log max_change = a - d / xi
    double r_squared = 0.0;
    std::uint64_t t_star = 0;
};

/// Lattice distance (periodic along rows; rows wrap on a torus).
std::size_t lattice_distance(const ca::Lattice& lattice, std::size_t a, std::size_t b);

/// Compares metastable states of `noise` and of `noise` with p_up raised by
/// delta at `perturb_site`.
LpplProbe lppl_probe(const ca::RuleSpec& rule, const noise::NoiseModel& noise, std::size_t perturb_site,
                     double delta, std::size_t L, std::uint64_t t_star = 0);

}  // namespace pcalab::markov
