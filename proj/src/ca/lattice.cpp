#include "pcalab/ca/lattice.hpp"

#include <stdexcept>

namespace pcalab::ca {

Lattice Lattice::chain(std::size_t length, Boundary boundary) {
    Lattice l{LatticeKind::Chain1D, length, 1, boundary};
    l.validate();
    return l;
}

Lattice Lattice::ladder(std::size_t length) {
    Lattice l{LatticeKind::Ladder2xL, length, 1, Boundary::Periodic};
    l.validate();
    return l;
}

Lattice Lattice::torus(std::size_t length, std::size_t width) {
    Lattice l{LatticeKind::Torus2D, length, width, Boundary::Periodic};
    l.validate();
    return l;
}

std::size_t Lattice::rows() const noexcept {
    switch (kind) {
        case LatticeKind::Chain1D: return 1;
        case LatticeKind::Ladder2xL: return 2;
        case LatticeKind::Torus2D: return width;
    }
    return 1;
}

void Lattice::validate() const {
    if (length == 0) throw std::invalid_argument("lattice length must be positive");
    if (kind == LatticeKind::Torus2D && width == 0)
        throw std::invalid_argument("torus width must be positive");
    if (boundary == Boundary::Open && kind != LatticeKind::Chain1D)
        throw std::invalid_argument("open boundary is only supported for Chain1D");
}

std::string Lattice::describe() const {
    std::string s = to_string(kind) + "(" + std::to_string(length);
    if (kind == LatticeKind::Torus2D) s += "x" + std::to_string(width);
    s += boundary == Boundary::Periodic ? ", periodic)" : ", open)";
    return s;
}

std::string to_string(LatticeKind kind) {
    switch (kind) {
        case LatticeKind::Chain1D: return "Chain1D";
        case LatticeKind::Ladder2xL: return "Ladder2xL";
        case LatticeKind::Torus2D: return "Torus2D";
    }
    return "?";
}

}  // namespace pcalab::ca
