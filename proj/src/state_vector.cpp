#include "qntk/state_vector.hpp"

#include "qntk/error.hpp"
#include "qntk/random.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace qntk {

char pauli_char(Pauli p) {
    switch (p) {
    case Pauli::X:
        return 'X';
    case Pauli::Y:
        return 'Y';
    case Pauli::Z:
        return 'Z';
    }
    return '?';
}

Pauli pauli_from_char(char c) {
    switch (c) {
    case 'X':
    case 'x':
        return Pauli::X;
    case 'Y':
    case 'y':
        return Pauli::Y;
    case 'Z':
    case 'z':
        return Pauli::Z;
    default:
        throw DomainError(std::string("unknown Pauli letter '") + c + "'");
    }
}

namespace {

double squared_norm(std::span<const Complex> amps) {
    double acc = 0.0;
    for (const auto &a : amps) {
        acc += std::norm(a);
    }
    return acc;
}

void check_qubit(int qubit, int num_qubits) {
    if (qubit < 0 || qubit >= num_qubits) {
        throw DomainError("qubit index " + std::to_string(qubit) + " out of range for " +
                          std::to_string(num_qubits) + "-qubit register");
    }
}

} // namespace

StateVector::StateVector(int num_qubits, std::vector<Complex> amplitudes)
    : num_qubits_(num_qubits), amplitudes_(std::move(amplitudes)) {
    if (num_qubits < 1 || num_qubits > kMaxQubits) {
        throw DomainError("qubit count must be in [1, " + std::to_string(kMaxQubits) + "]");
    }
    if (amplitudes_.size() != (std::size_t{1} << num_qubits)) {
        throw DomainError("amplitude count " + std::to_string(amplitudes_.size()) +
                          " does not match 2^" + std::to_string(num_qubits));
    }
    if (std::abs(std::sqrt(squared_norm(amplitudes_)) - 1.0) > 1e-10) {
        throw DomainError("state vector is not normalized");
    }
}

StateVector StateVector::normalized(int num_qubits, std::vector<Complex> amplitudes) {
    const double nrm = std::sqrt(squared_norm(amplitudes));
    if (!(nrm > 0.0) || !std::isfinite(nrm)) {
        throw DomainError("cannot normalize a zero or non-finite vector");
    }
    for (auto &a : amplitudes) {
        a /= nrm;
    }
    return StateVector(num_qubits, std::move(amplitudes));
}

double StateVector::norm() const { return std::sqrt(squared_norm(amplitudes_)); }

void StateVector::apply_rotation(int qubit, Axis axis, double angle) {
    check_qubit(qubit, num_qubits_);
    kernels::rotation(amplitudes_, qubit, axis, angle);
}

void StateVector::apply_cz(int q1, int q2) {
    check_qubit(q1, num_qubits_);
    check_qubit(q2, num_qubits_);
    if (q1 == q2) {
        throw DomainError("CZ needs two distinct qubits");
    }
    kernels::cz(amplitudes_, q1, q2);
}

void StateVector::apply_pauli(int qubit, Pauli p) {
    check_qubit(qubit, num_qubits_);
    kernels::pauli(amplitudes_, qubit, p);
}

namespace kernels {

void rotation(std::span<Complex> amps, int qubit, Axis axis, double angle) {
    const std::size_t stride = std::size_t{1} << qubit;
    const std::size_t dim = amps.size();
    const double c = std::cos(0.5 * angle);
    const double s = std::sin(0.5 * angle);
    switch (axis) {
    case Axis::X: {
        const Complex mis(0.0, -s);
        for (std::size_t base = 0; base < dim; base += 2 * stride) {
            for (std::size_t i = base; i < base + stride; ++i) {
                const Complex a0 = amps[i];
                const Complex a1 = amps[i + stride];
                amps[i] = c * a0 + mis * a1;
                amps[i + stride] = mis * a0 + c * a1;
            }
        }
        break;
    }
    case Axis::Y: {
        for (std::size_t base = 0; base < dim; base += 2 * stride) {
            for (std::size_t i = base; i < base + stride; ++i) {
                const Complex a0 = amps[i];
                const Complex a1 = amps[i + stride];
                amps[i] = c * a0 - s * a1;
                amps[i + stride] = s * a0 + c * a1;
            }
        }
        break;
    }
    case Axis::Z: {
        const Complex phase0(c, -s);
        const Complex phase1(c, s);
        for (std::size_t base = 0; base < dim; base += 2 * stride) {
            for (std::size_t i = base; i < base + stride; ++i) {
                amps[i] *= phase0;
                amps[i + stride] *= phase1;
            }
        }
        break;
    }
    }
}

void cz(std::span<Complex> amps, int q1, int q2) {
    const std::size_t mask = (std::size_t{1} << q1) | (std::size_t{1} << q2);
    for (std::size_t i = 0; i < amps.size(); ++i) {
        if ((i & mask) == mask) {
            amps[i] = -amps[i];
        }
    }
}

void pauli(std::span<Complex> amps, int qubit, Pauli p) {
    const std::size_t stride = std::size_t{1} << qubit;
    const std::size_t dim = amps.size();
    for (std::size_t base = 0; base < dim; base += 2 * stride) {
        for (std::size_t i = base; i < base + stride; ++i) {
            Complex &a0 = amps[i];
            Complex &a1 = amps[i + stride];
            switch (p) {
            case Pauli::X:
                std::swap(a0, a1);
                break;
            case Pauli::Y: {
                // Y|0> = i|1>, Y|1> = -i|0>
                const Complex t0 = a0;
                a0 = Complex(a1.imag(), -a1.real());
                a1 = Complex(-t0.imag(), t0.real());
                break;
            }
            case Pauli::Z:
                a1 = -a1;
                break;
            }
        }
    }
}

double imag_pauli_matrix_element(std::span<const Complex> lhs, std::span<const Complex> rhs,
                                 int qubit, Pauli p) {
    const std::size_t stride = std::size_t{1} << qubit;
    const std::size_t dim = lhs.size();
    Complex acc(0.0, 0.0);
    for (std::size_t base = 0; base < dim; base += 2 * stride) {
        for (std::size_t i = base; i < base + stride; ++i) {
            const std::size_t j = i + stride;
            switch (p) {
            case Pauli::X:
                acc += std::conj(lhs[i]) * rhs[j] + std::conj(lhs[j]) * rhs[i];
                break;
            case Pauli::Y:
                acc += std::conj(lhs[i]) * Complex(0.0, -1.0) * rhs[j] +
                       std::conj(lhs[j]) * Complex(0.0, 1.0) * rhs[i];
                break;
            case Pauli::Z:
                acc += std::conj(lhs[i]) * rhs[i] - std::conj(lhs[j]) * rhs[j];
                break;
            }
        }
    }
    return acc.imag();
}

} // namespace kernels

StateVector new_basis_state(int num_qubits, std::uint64_t index) {
    if (num_qubits < 1 || num_qubits > kMaxQubits) {
        throw DomainError("qubit count must be in [1, " + std::to_string(kMaxQubits) + "]");
    }
    const std::size_t dim = std::size_t{1} << num_qubits;
    if (index >= dim) {
        throw DomainError("basis index " + std::to_string(index) + " out of range for " +
                          std::to_string(num_qubits) + " qubits");
    }
    std::vector<Complex> amps(dim, Complex(0.0, 0.0));
    amps[index] = 1.0;
    return StateVector(num_qubits, std::move(amps));
}

StateVector apply_rotation(StateVector state, int qubit, Axis axis, double angle) {
    state.apply_rotation(qubit, axis, angle);
    return state;
}

StateVector apply_cz(StateVector state, int q1, int q2) {
    state.apply_cz(q1, q2);
    return state;
}

Complex inner_product(std::span<const Complex> a, std::span<const Complex> b) {
    if (a.size() != b.size()) {
        throw DomainError("inner product of vectors with different dimensions");
    }
    Complex acc(0.0, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += std::conj(a[i]) * b[i];
    }
    return acc;
}

Complex inner_product(const StateVector &a, const StateVector &b) {
    if (a.num_qubits() != b.num_qubits()) {
        throw DomainError("states have different qubit counts");
    }
    return inner_product(a.amplitudes(), b.amplitudes());
}

double fidelity(const StateVector &a, const StateVector &b) {
    return std::clamp(std::norm(inner_product(a, b)), 0.0, 1.0);
}

double trace_distance_pure(const StateVector &a, const StateVector &b) {
    return std::sqrt(1.0 - fidelity(a, b));
}

StateVector random_state(int num_qubits, Rng &rng) {
    const std::size_t dim = std::size_t{1} << num_qubits;
    std::vector<Complex> amps(dim);
    for (auto &a : amps) {
        const double re = rng.normal();
        a = Complex(re, rng.normal());
    }
    return StateVector::normalized(num_qubits, std::move(amps));
}

} // namespace qntk
