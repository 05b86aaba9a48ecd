#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "pcalab/ca/rules.hpp"

namespace pcalab::mc {

struct ErosionPoint {
    std::size_t R = 0;
    std::optional<double> steps;  ///< mean over samples; empty if any sample timed out
};

struct ErosionScaling {
    std::vector<ErosionPoint> points;
    /// Fit of log(steps) = log(a) + exponent * log(R) over the eroded points.
    double exponent = 0.0;
    double prefactor = 0.0;
    /// Columns R,steps.
    void write_csv(std::ostream& os) const;
};

/// Square R x R island (torus), R contiguous sites (chain) or R rungs on both
/// legs (ladder), placed on a lattice of the given extent.
ca::BitConfig square_island(const ca::RuleSpec& rule, std::size_t extent, std::size_t R);

/// Erosion times of islands of each size. Rules with random tie breaking are
/// averaged over `samples` tie seeds derived from `seed`.
ErosionScaling erosion_scaling(const ca::RuleSpec& rule, const std::vector<std::size_t>& sizes, std::size_t extent,
                               std::uint64_t max_steps, std::uint64_t seed = 0, unsigned samples = 1);

}  // namespace pcalab::mc
