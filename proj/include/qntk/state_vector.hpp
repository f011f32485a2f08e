#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

namespace qntk {

using Complex = std::complex<double>;

/// Single-qubit Pauli operator; doubles as a rotation axis.
enum class Pauli : std::uint8_t { X, Y, Z };
using Axis = Pauli;

char pauli_char(Pauli p);
Pauli pauli_from_char(char c);

/// Largest register the dense representation accepts.
inline constexpr int kMaxQubits = 30;

/**
 * Dense pure state of `n` qubits.
 *
 * Basis ordering is little-endian: qubit q is bit q of the basis index, so
 * qubit 0 is the least significant bit.
 *
 * Rotation convention: R_axis(angle) = exp(-i * angle * sigma_axis / 2).
 * Under this convention the +/- pi/2 parameter-shift rule is exact.
 */
class StateVector {
  public:
    /// Takes ownership of `amplitudes`; throws DomainError unless the length
    /// is 2^n and the 2-norm is 1 within 1e-10.
    StateVector(int num_qubits, std::vector<Complex> amplitudes);

    /// Rescales `amplitudes` to unit norm first. Throws on a zero vector.
    static StateVector normalized(int num_qubits, std::vector<Complex> amplitudes);

    [[nodiscard]] int num_qubits() const noexcept { return num_qubits_; }
    [[nodiscard]] std::size_t dimension() const noexcept { return amplitudes_.size(); }
    [[nodiscard]] std::span<const Complex> amplitudes() const noexcept { return amplitudes_; }
    [[nodiscard]] const Complex &operator[](std::size_t i) const { return amplitudes_[i]; }
    [[nodiscard]] double norm() const;

    // In-place gate application. All of these are unitary.
    void apply_rotation(int qubit, Axis axis, double angle);
    void apply_cz(int q1, int q2);
    void apply_pauli(int qubit, Pauli p);

    friend bool operator==(const StateVector &, const StateVector &) = default;

  private:
    int num_qubits_;
    std::vector<Complex> amplitudes_;
};

/// Raw kernels over an amplitude buffer of length 2^n. They do not check the
/// norm, so they also serve unnormalized vectors such as O|psi>.
namespace kernels {
void rotation(std::span<Complex> amps, int qubit, Axis axis, double angle);
void cz(std::span<Complex> amps, int q1, int q2);
void pauli(std::span<Complex> amps, int qubit, Pauli p);
/// Im <lhs| sigma_qubit |rhs>, the per-gate term of the reverse-sweep gradient.
double imag_pauli_matrix_element(std::span<const Complex> lhs, std::span<const Complex> rhs,
                                 int qubit, Pauli p);
} // namespace kernels

StateVector new_basis_state(int num_qubits, std::uint64_t index);
StateVector apply_rotation(StateVector state, int qubit, Axis axis, double angle);
StateVector apply_cz(StateVector state, int q1, int q2);

Complex inner_product(const StateVector &a, const StateVector &b);
Complex inner_product(std::span<const Complex> a, std::span<const Complex> b);

/// |<a|b>|^2.
double fidelity(const StateVector &a, const StateVector &b);

/// Trace distance between |a><a| and |b><b|, sqrt(1 - F) for pure states.
double trace_distance_pure(const StateVector &a, const StateVector &b);

class Rng;
/// Normalized vector of i.i.d. complex Gaussians (Haar-distributed state).
StateVector random_state(int num_qubits, Rng &rng);

} // namespace qntk
