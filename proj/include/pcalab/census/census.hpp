#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "pcalab/ca/rules.hpp"

namespace pcalab::census {

/// Largest site count for exhaustive enumeration (one mark byte per state).
inline constexpr std::size_t kMaxCensusSites = 28;

/// Periodic-orbit structure of a deterministic map on 2^N configurations.
struct CycleCensus {
    std::string rule;
    std::size_t L = 0;
    std::size_t sites = 0;
    std::uint64_t n_cycles = 0;           ///< N(lambda = 1)
    std::uint64_t n_periodic_states = 0;  ///< N(|lambda| = 1)
    std::uint64_t n_fixed_points = 0;
    std::uint64_t n_transient_states = 0;
    std::map<std::uint64_t, std::uint64_t> cycle_length_histogram;  ///< length -> count
};

using StateMap = std::function<std::uint64_t(std::uint64_t)>;

/// Three-colour traversal of the functional graph of `f` over 2^n_bits states.
CycleCensus census_of_map(std::size_t n_bits, const StateMap& f);

/// Index map of one deterministic update (rows packed as in BitConfig::index).
StateMap rule_map(const ca::RuleSpec& rule, const ca::Lattice& lattice);

/// Census of the rule on its lattice with L columns. Throws ResourceError above
/// kMaxCensusSites and std::invalid_argument for step-dependent rules.
CycleCensus enumerate_cycles(const ca::RuleSpec& rule, std::size_t L);

struct SpectrumComparison {
    CycleCensus census;
    std::uint64_t eig_unit = 0;     ///< eigenvalues within 1e-8 of 1
    std::uint64_t eig_modulus1 = 0; ///< eigenvalues with |lambda| within 1e-8 of 1
    std::size_t dimension = 0;
    [[nodiscard]] bool agrees() const noexcept {
        return eig_unit == census.n_cycles && eig_modulus1 == census.n_periodic_states;
    }
};

/// Dense eigenvalues of the 0/1 transition matrix of `f` compared with its census.
SpectrumComparison census_vs_spectrum(std::size_t n_bits, const StateMap& f);
SpectrumComparison census_vs_spectrum(const ca::RuleSpec& rule, std::size_t L);

/// rule,L,n_cycles,n_periodic_states,n_fixed_points
void write_census_csv_header(std::ostream& out);
void write_census_csv_row(std::ostream& out, const CycleCensus& c);
/// {rule, L, n_cycles, n_periodic_states, n_fixed_points, histogram:{length:count}}
std::string census_json(const CycleCensus& c);

}  // namespace pcalab::census
