#include "qntk/pauli.hpp"

#include "qntk/error.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <sstream>

namespace qntk {

PauliString::PauliString(double coefficient, std::vector<Factor> factors)
    : coefficient_(coefficient), factors_(std::move(factors)) {
    std::sort(factors_.begin(), factors_.end(),
              [](const Factor &a, const Factor &b) { return a.first < b.first; });
    for (std::size_t i = 0; i < factors_.size(); ++i) {
        const int q = factors_[i].first;
        if (q < 0 || q >= 64) {
            throw DomainError("Pauli factor qubit index " + std::to_string(q) + " out of range");
        }
        if (i > 0 && factors_[i - 1].first == q) {
            throw DomainError("Pauli string acts twice on qubit " + std::to_string(q));
        }
        const std::uint64_t bit = std::uint64_t{1} << q;
        support_mask_ |= bit;
        switch (factors_[i].second) {
        case Pauli::X:
            flip_mask_ |= bit;
            break;
        case Pauli::Y:
            flip_mask_ |= bit;
            sign_mask_ |= bit;
            ++num_y_;
            break;
        case Pauli::Z:
            sign_mask_ |= bit;
            break;
        }
    }
}

PauliString PauliString::parse(double coefficient, const std::string &text) {
    std::istringstream in(text);
    std::string token;
    std::vector<Factor> factors;
    while (in >> token) {
        if (token.size() < 2 || !std::all_of(token.begin() + 1, token.end(),
                                             [](unsigned char c) { return std::isdigit(c); })) {
            throw DomainError("malformed Pauli factor '" + token + "'");
        }
        factors.emplace_back(std::stoi(token.substr(1)), pauli_from_char(token[0]));
    }
    return PauliString(coefficient, std::move(factors));
}

int PauliString::min_register_size() const noexcept {
    return factors_.empty() ? 0 : factors_.back().first + 1;
}

std::string PauliString::label() const {
    if (factors_.empty()) {
        return "I";
    }
    std::string out;
    for (const auto &[q, p] : factors_) {
        if (!out.empty()) {
            out += ' ';
        }
        out += pauli_char(p);
        out += std::to_string(q);
    }
    return out;
}

Complex PauliString::basis_phase(std::uint64_t basis_index) const noexcept {
    // Y = i X Z on each qubit, so the string contributes i^{#Y} overall.
    static constexpr Complex kIPow[4] = {{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}, {0.0, -1.0}};
    const double sign = (std::popcount(basis_index & sign_mask_) & 1) ? -1.0 : 1.0;
    return coefficient_ * sign * kIPow[num_y_ & 3];
}

void PauliString::apply_add(std::span<const Complex> in, std::span<Complex> out,
                            double scale) const {
    if (in.size() != out.size()) {
        throw DomainError("Pauli application buffers differ in size");
    }
    if (min_register_size() > 0 && (std::size_t{1} << (min_register_size() - 1)) >= in.size()) {
        throw DomainError("Pauli string " + label() + " exceeds register size");
    }
    for (std::size_t b = 0; b < in.size(); ++b) {
        out[b ^ flip_mask_] += scale * basis_phase(b) * in[b];
    }
}

int PauliSum::min_register_size() const noexcept {
    int n = 0;
    for (const auto &t : terms) {
        n = std::max(n, t.min_register_size());
    }
    return n;
}

double PauliSum::operator_norm_bound() const noexcept {
    double acc = 0.0;
    for (const auto &t : terms) {
        acc += std::abs(t.coefficient());
    }
    return std::abs(normalization) * acc;
}

std::vector<Complex> PauliSum::apply(std::span<const Complex> in) const {
    std::vector<Complex> out(in.size(), Complex(0.0, 0.0));
    for (const auto &t : terms) {
        t.apply_add(in, out, normalization);
    }
    return out;
}

PauliSum z_sum_observable(int num_qubits, double scale) {
    if (num_qubits < 1) {
        throw DomainError("observable needs at least one qubit");
    }
    if (!(scale > 0.0)) {
        throw DomainError("observable scale must be positive");
    }
    PauliSum obs;
    obs.normalization = 1.0 / scale;
    for (int q = 0; q < num_qubits; ++q) {
        obs.terms.emplace_back(1.0, std::vector<PauliString::Factor>{{q, Pauli::Z}});
    }
    return obs;
}

double pauli_expectation(const StateVector &state, const PauliString &term) {
    if (term.min_register_size() > state.num_qubits()) {
        throw DomainError("Pauli string " + term.label() + " exceeds " +
                          std::to_string(state.num_qubits()) + "-qubit state");
    }
    const auto amps = state.amplitudes();
    const std::uint64_t flip = term.flip_mask();
    Complex acc(0.0, 0.0);
    for (std::size_t b = 0; b < amps.size(); ++b) {
        acc += std::conj(amps[b ^ flip]) * term.basis_phase(b) * amps[b];
    }
    return acc.real();
}

double observable_expectation(const StateVector &state, const PauliSum &obs) {
    double acc = 0.0;
    for (const auto &t : obs.terms) {
        acc += pauli_expectation(state, t);
    }
    return obs.normalization * acc;
}

} // namespace qntk
