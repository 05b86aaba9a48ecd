#pragma once

#include <cstddef>
#include <string>

namespace pcalab::ca {

enum class LatticeKind { Chain1D, Ladder2xL, Torus2D };
enum class Boundary { Periodic, Open };

/// Geometry of a lattice of binary sites.
///
/// Sites are stored row-major: a chain is one row of `length` sites, a ladder
/// is two rows (bottom rung is row 0, top rung is row 1) and a torus has
/// `width` rows of `length` sites. Site index = row * length + column.
struct Lattice {
    LatticeKind kind = LatticeKind::Chain1D;
    std::size_t length = 1;  ///< sites per row
    std::size_t width = 1;   ///< rows of a torus; ignored otherwise
    Boundary boundary = Boundary::Periodic;

    static Lattice chain(std::size_t length, Boundary boundary = Boundary::Periodic);
    static Lattice ladder(std::size_t length);
    static Lattice torus(std::size_t length, std::size_t width);

    [[nodiscard]] std::size_t rows() const noexcept;
    [[nodiscard]] std::size_t site_count() const noexcept { return rows() * length; }
    [[nodiscard]] std::size_t site_index(std::size_t column, std::size_t row) const noexcept {
        return row * length + column;
    }

    /// Throws std::invalid_argument when extents or boundary are inconsistent.
    void validate() const;

    [[nodiscard]] std::string describe() const;

    friend bool operator==(const Lattice&, const Lattice&) = default;
};

std::string to_string(LatticeKind kind);

}  // namespace pcalab::ca
