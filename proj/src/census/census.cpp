#include "pcalab/census/census.hpp"

#include <cmath>
#include <complex>
#include <ostream>
#include <stdexcept>

#include <Eigen/Dense>

#include "json.hpp"
#include "pcalab/markov/analysis.hpp"
#include "pcalab/util/errors.hpp"

namespace pcalab::census {

namespace {

enum Mark : std::uint8_t { Unvisited = 0, InProgress = 1, Finished = 2 };

constexpr double kEigTol = 1e-8;

}  // namespace

CycleCensus census_of_map(std::size_t n_bits, const StateMap& f) {
    if (n_bits > kMaxCensusSites) {
        const double mib = std::ldexp(1.0, static_cast<int>(n_bits)) / (1024.0 * 1024.0);
        throw ResourceError("census of " + std::to_string(n_bits) + " sites needs " + std::to_string(mib) +
                            " MiB of marks; limit is " + std::to_string(kMaxCensusSites) + " sites");
    }
    const std::uint64_t n = std::uint64_t{1} << n_bits;
    std::vector<std::uint8_t> mark(n, Unvisited);
    std::vector<std::uint64_t> path;
    CycleCensus c;
    c.sites = n_bits;
    for (std::uint64_t s = 0; s < n; ++s) {
        if (mark[s] != Unvisited) continue;
        path.clear();
        std::uint64_t b = s;
        while (mark[b] == Unvisited) {
            mark[b] = InProgress;
            path.push_back(b);
            b = f(b);
            if (b >= n) throw std::out_of_range("state map left the state space");
        }
        std::uint64_t on_cycle = 0;
        if (mark[b] == InProgress) {
            // b closes a new cycle: it sits somewhere on the current path
            std::size_t k = path.size();
            while (path[k - 1] != b) --k;
            const std::uint64_t len = path.size() - (k - 1);
            ++c.n_cycles;
            c.n_periodic_states += len;
            c.n_fixed_points += len == 1;
            ++c.cycle_length_histogram[len];
            on_cycle = len;
        }
        c.n_transient_states += path.size() - on_cycle;
        for (std::uint64_t v : path) mark[v] = Finished;
    }
    return c;
}

StateMap rule_map(const ca::RuleSpec& rule, const ca::Lattice& lattice) {
    if (rule.uses_tie_coins())
        throw std::invalid_argument("census: " + rule.name() + " is step dependent and has no single map");
    ca::check_compatible(rule, lattice);
    const std::size_t n = lattice.site_count();
    if (n > 64) throw ResourceError("census: more than 64 sites");
    // one-word rows: move bits straight between the index and the kernel layout
    struct Ctx {
        ca::RuleSpec rule;
        ca::Lattice lat;
        ca::PackedRows in, out;
        std::vector<std::uint64_t> scratch;
    };
    auto ctx = std::make_shared<Ctx>(Ctx{rule, lattice, ca::PackedRows(lattice), ca::PackedRows(lattice), {}});
    const std::size_t len = lattice.length, rows = lattice.rows();
    const std::uint64_t mask = len >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << len) - 1;
    return [ctx, len, rows, mask](std::uint64_t b) {
        for (std::size_t r = 0; r < rows; ++r) ctx->in.row(r)[0] = (b >> (r * len)) & mask;
        ca::apply_rule(ctx->rule, ctx->in, ctx->out, ctx->scratch, {});
        std::uint64_t y = 0;
        for (std::size_t r = 0; r < rows; ++r) y |= ctx->out.row(r)[0] << (r * len);
        return y;
    };
}

CycleCensus enumerate_cycles(const ca::RuleSpec& rule, std::size_t L) {
    const ca::Lattice lat = markov::lattice_for(rule, L);
    lat.validate();
    if (lat.site_count() > kMaxCensusSites) {
        const double mib = std::ldexp(1.0, static_cast<int>(lat.site_count())) / (1024.0 * 1024.0);
        throw ResourceError(rule.name() + " at L=" + std::to_string(L) + " has " + std::to_string(lat.site_count()) +
                            " sites; enumeration needs " + std::to_string(mib) + " MiB (limit " +
                            std::to_string(kMaxCensusSites) + " sites)");
    }
    CycleCensus c = census_of_map(lat.site_count(), rule_map(rule, lat));
    c.rule = rule.name();
    c.L = L;
    return c;
}

SpectrumComparison census_vs_spectrum(std::size_t n_bits, const StateMap& f) {
    if (n_bits > 12) throw ResourceError("census_vs_spectrum: 2^N must be at most 4096");
    const auto n = static_cast<Eigen::Index>(std::size_t{1} << n_bits);
    SpectrumComparison cmp;
    cmp.census = census_of_map(n_bits, f);
    cmp.dimension = static_cast<std::size_t>(n);
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index b = 0; b < n; ++b) P(static_cast<Eigen::Index>(f(static_cast<std::uint64_t>(b))), b) = 1.0;
    Eigen::EigenSolver<Eigen::MatrixXd> es(P, false);
    if (es.info() != Eigen::Success) throw ConvergenceError("census_vs_spectrum: eigensolve failed");
    for (const std::complex<double>& z : es.eigenvalues()) {
        cmp.eig_unit += std::abs(z - 1.0) < kEigTol;
        cmp.eig_modulus1 += std::abs(std::abs(z) - 1.0) < kEigTol;
    }
    return cmp;
}

SpectrumComparison census_vs_spectrum(const ca::RuleSpec& rule, std::size_t L) {
    const ca::Lattice lat = markov::lattice_for(rule, L);
    lat.validate();
    if (lat.site_count() > 12) throw ResourceError("census_vs_spectrum: 2^N must be at most 4096");
    SpectrumComparison cmp = census_vs_spectrum(lat.site_count(), rule_map(rule, lat));
    cmp.census.rule = rule.name();
    cmp.census.L = L;
    return cmp;
}

void write_census_csv_header(std::ostream& out) { out << "rule,L,n_cycles,n_periodic_states,n_fixed_points\n"; }

void write_census_csv_row(std::ostream& out, const CycleCensus& c) {
    out << c.rule << ',' << c.L << ',' << c.n_cycles << ',' << c.n_periodic_states << ',' << c.n_fixed_points << '\n';
}

std::string census_json(const CycleCensus& c) {
    nlohmann::json j;
    j["rule"] = c.rule;
    j["L"] = c.L;
    j["n_cycles"] = c.n_cycles;
    j["n_periodic_states"] = c.n_periodic_states;
    j["n_fixed_points"] = c.n_fixed_points;
    auto& h = j["histogram"] = nlohmann::json::object();
    for (const auto& [len, count] : c.cycle_length_histogram) h[std::to_string(len)] = count;
    return j.dump(2);
}

}  // namespace pcalab::census
