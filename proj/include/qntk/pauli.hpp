#pragma once

#include "qntk/state_vector.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace qntk {

/// coefficient * (tensor product of single-qubit Paulis), identity elsewhere.
class PauliString {
  public:
    using Factor = std::pair<int, Pauli>;

    PauliString() = default;
    /// Factors are sorted by qubit; duplicate or negative qubit indices throw.
    PauliString(double coefficient, std::vector<Factor> factors);

    /// Parses "X0 Z3" style text (letter immediately followed by qubit index).
    static PauliString parse(double coefficient, const std::string &text);

    [[nodiscard]] double coefficient() const noexcept { return coefficient_; }
    [[nodiscard]] const std::vector<Factor> &factors() const noexcept { return factors_; }
    [[nodiscard]] int locality() const noexcept { return static_cast<int>(factors_.size()); }
    /// One past the largest qubit index, 0 for the identity string.
    [[nodiscard]] int min_register_size() const noexcept;
    [[nodiscard]] std::uint64_t support_mask() const noexcept { return support_mask_; }
    [[nodiscard]] std::string label() const;

    /// Action on a computational basis state:
    /// P|b> = phase(b) |b ^ flip_mask()>, with phase(b) = coefficient * i^{#Y} * (-1)^{popcount(b & sign_mask())}.
    [[nodiscard]] std::uint64_t flip_mask() const noexcept { return flip_mask_; }
    [[nodiscard]] std::uint64_t sign_mask() const noexcept { return sign_mask_; }
    [[nodiscard]] Complex basis_phase(std::uint64_t basis_index) const noexcept;

    /// out += scale * P * in
    void apply_add(std::span<const Complex> in, std::span<Complex> out, double scale = 1.0) const;

    friend bool operator==(const PauliString &, const PauliString &) = default;

  private:
    double coefficient_ = 1.0;
    std::vector<Factor> factors_;
    std::uint64_t flip_mask_ = 0;
    std::uint64_t sign_mask_ = 0;
    std::uint64_t support_mask_ = 0;
    int num_y_ = 0;
};

/// normalization * sum_l terms[l]. Observables and Hamiltonians share this type.
struct PauliSum {
    std::vector<PauliString> terms;
    double normalization = 1.0;

    [[nodiscard]] int min_register_size() const noexcept;

    /// |normalization| * sum |coefficient|; an upper bound on the operator norm.
    [[nodiscard]] double operator_norm_bound() const noexcept;

    /// Returns normalization * sum_l P_l |in>.
    [[nodiscard]] std::vector<Complex> apply(std::span<const Complex> in) const;
};

/// (1/scale) * sum_i Z_i on n qubits; scale = sqrt(n) reproduces the
/// experiment observable, scale = n gives the unit-norm 1/K convention.
PauliSum z_sum_observable(int num_qubits, double scale);

/// <psi| P |psi>, including the term coefficient.
double pauli_expectation(const StateVector &state, const PauliString &term);

/// normalization * sum_l <psi| P_l |psi>.
double observable_expectation(const StateVector &state, const PauliSum &obs);

} // namespace qntk
