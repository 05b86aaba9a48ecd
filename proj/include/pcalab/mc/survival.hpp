#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "pcalab/mc/ensemble.hpp"

namespace pcalab::mc {

struct SurvivalCurve {
    std::size_t R = 0;
    double epsilon = 0.0;
    double c = 0.0;  ///< top-right-edge drift speed divided by epsilon
    std::uint64_t n_traj = 0;
    std::vector<std::uint64_t> delays;
    std::vector<double> prob;   ///< P(t_D >= n)
    std::vector<double> sem;
    std::vector<double> bound;  ///< product lower bound
    /// Mean top-right-edge position for t = 0..R.
    std::vector<double> edge_mean;

    /// Columns n,p,sem,bound.
    void write_csv(std::ostream& os) const;
};

/// prod_{k=0}^{n-1} (1 - (1-eps)^(R + floor(c*eps*k) + 1)).
double survival_bound(std::size_t R, double eps, double c, std::uint64_t n);

struct SurvivalRun {
    SurvivalCurve curve;
    std::uint64_t completed = 0;
    bool interrupted = false;
};

/// Toom-ladder island survival. Both rungs start as errors on [-R, R] of a
/// ring of L rungs and evolve under up-biased noise for at most T steps.
/// The bottom-right edge reaches the origin at t = R, so the origin site
/// empties at t = R + 1 without noise; the delay is
/// t_D = (first t with the bottom origin site empty) - (R + 1).
/// Delays are reported for n = 0 .. T - R - 1; a trajectory stops at detachment.
SurvivalRun island_survival(std::size_t R, double eps, std::size_t L, std::uint64_t T, std::uint64_t n_traj,
                            const EnsembleOptions& options = {});

}  // namespace pcalab::mc
