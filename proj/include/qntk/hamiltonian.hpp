#pragma once

#include "qntk/pauli.hpp"
#include "qntk/state_vector.hpp"

#include <utility>
#include <vector>

namespace qntk {

/// Open-boundary rectangular lattice. Site (r, c) is qubit r * cols + c.
/// Bonds are listed site by site: (s, s+1) when a right neighbour exists,
/// then (s, s+cols) when a lower neighbour exists.
struct Lattice2D {
    int rows = 0;
    int cols = 0;
    std::vector<std::pair<int, int>> bonds;

    [[nodiscard]] int num_sites() const noexcept { return rows * cols; }
    friend bool operator==(const Lattice2D &, const Lattice2D &) = default;
};

Lattice2D make_lattice(int rows, int cols);

/// One coupling per lattice bond, in the lattice's bond order.
struct CouplingVector {
    std::vector<double> values;
    friend bool operator==(const CouplingVector &, const CouplingVector &) = default;
};

/// sum_<ij> x_ij (X_i X_j + Y_i Y_j + Z_i Z_j); three terms per bond.
PauliSum build_heisenberg(const Lattice2D &lattice, const CouplingVector &x);

inline constexpr int kDefaultSolverCap = 14;

struct GroundSolution {
    double energy = 0.0;
    double excited_energy = 0.0;
    double gap = 0.0;
    StateVector ground{1, {1.0, 0.0}};
    StateVector first_excited{1, {0.0, 1.0}};
    /// gap below 1e-10; the lowest-index eigenvector was taken.
    bool degenerate_ground = false;
};

/**
 * Lowest and second-lowest eigenpairs of the dense Hamiltonian matrix.
 *
 * When every matrix element connects basis states of equal Hamming weight
 * (total-Z conserving, as for Heisenberg models) the matrix is diagonalized
 * block by block over the weight sectors; otherwise the full matrix is
 * diagonalized. Both routes are exact dense solves.
 *
 * Ties within 1e-10 are broken toward the lower "index": sectors are ordered
 * by Hamming weight (the sector containing the smallest basis index first),
 * then by position in the sector's ascending spectrum. Eigenvector phases are
 * fixed so the first amplitude with modulus above 1e-6 is real positive.
 *
 * Throws CapacityError when num_qubits exceeds `cap`, NumericalError when
 * the residual |H psi - E psi| exceeds 1e-9.
 */
GroundSolution ground_state(const PauliSum &h, int num_qubits, int cap = kDefaultSolverCap);

/// Normalized (1 - delta) |ground> + delta |first_excited>. Fidelity with
/// the ground state is (1-delta)^2 / ((1-delta)^2 + delta^2).
StateVector make_guiding_state(const GroundSolution &sol, double delta);

/// Closed form of the fidelity above.
double guiding_fidelity(double delta);

/// Sparse action of a Pauli sum as an explicit (row, col, value) list;
/// exposed for residual checks.
struct SparseEntry {
    std::size_t row;
    std::size_t col;
    Complex value;
};
std::vector<SparseEntry> sparse_matrix(const PauliSum &h, int num_qubits);

} // namespace qntk
