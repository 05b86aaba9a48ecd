#include "pcalab/mc/erosion.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "pcalab/noise/rng.hpp"

namespace pcalab::mc {

ca::BitConfig square_island(const ca::RuleSpec& rule, std::size_t extent, std::size_t R) {
    using ca::LatticeKind;
    if (R == 0 || R >= extent) throw std::invalid_argument("island size must be in [1, extent)");
    const std::size_t x0 = (extent - R) / 2;
    switch (rule.lattice_kind()) {
        case LatticeKind::Chain1D: {
            auto c = ca::BitConfig::zeros(ca::Lattice::chain(extent));
            for (std::size_t x = x0; x < x0 + R; ++x) c.set(x, true);
            return c;
        }
        case LatticeKind::Ladder2xL: {
            auto c = ca::BitConfig::zeros(ca::Lattice::ladder(extent));
            for (std::size_t x = x0; x < x0 + R; ++x) {
                c.set(x, 0, true);
                c.set(x, 1, true);
            }
            return c;
        }
        case LatticeKind::Torus2D: {
            auto c = ca::BitConfig::zeros(ca::Lattice::torus(extent, extent));
            for (std::size_t y = x0; y < x0 + R; ++y)
                for (std::size_t x = x0; x < x0 + R; ++x) c.set(x, y, true);
            return c;
        }
    }
    throw std::logic_error("unreachable");
}

void ErosionScaling::write_csv(std::ostream& os) const {
    os << "R,steps\n";
    for (const auto& p : points) {
        os << p.R << ',';
        if (p.steps)
            os << *p.steps;
        else
            os << "timeout";
        os << '\n';
    }
}

ErosionScaling erosion_scaling(const ca::RuleSpec& rule, const std::vector<std::size_t>& sizes, std::size_t extent,
                               std::uint64_t max_steps, std::uint64_t seed, unsigned samples) {
    if (samples == 0) throw std::invalid_argument("samples must be positive");
    const unsigned reps = rule.uses_tie_coins() ? samples : 1;
    ErosionScaling out;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t m = 0;
    for (std::size_t R : sizes) {
        const auto island = square_island(rule, extent, R);
        ErosionPoint p{R, std::nullopt};
        double total = 0.0;
        bool ok = true;
        for (unsigned s = 0; s < reps && ok; ++s) {
            const auto steps = ca::erosion_step_count(rule, island, max_steps, noise::detail::mix64(seed + s));
            if (!steps) ok = false;
            else total += static_cast<double>(*steps);
        }
        if (ok) {
            p.steps = total / reps;
            if (*p.steps > 0) {
                const double x = std::log(static_cast<double>(R)), y = std::log(*p.steps);
                sx += x;
                sy += y;
                sxx += x * x;
                sxy += x * y;
                ++m;
            }
        }
        out.points.push_back(p);
    }
    if (m >= 2) {
        const double md = static_cast<double>(m);
        out.exponent = (md * sxy - sx * sy) / (md * sxx - sx * sx);
        out.prefactor = std::exp((sy - out.exponent * sx) / md);
    }
    return out;
}

}  // namespace pcalab::mc
