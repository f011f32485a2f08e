#include "qntk/hamiltonian.hpp"

#include "qntk/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <string>

namespace qntk {

Lattice2D make_lattice(int rows, int cols) {
    if (rows < 1 || cols < 1) {
        throw DomainError("lattice dimensions must be positive");
    }
    Lattice2D lat{rows, cols, {}};
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const int s = r * cols + c;
            if (c + 1 < cols) {
                lat.bonds.emplace_back(s, s + 1);
            }
            if (r + 1 < rows) {
                lat.bonds.emplace_back(s, s + cols);
            }
        }
    }
    return lat;
}

PauliSum build_heisenberg(const Lattice2D &lattice, const CouplingVector &x) {
    if (x.values.size() != lattice.bonds.size()) {
        throw DomainError("coupling vector has " + std::to_string(x.values.size()) +
                          " entries for " + std::to_string(lattice.bonds.size()) + " bonds");
    }
    PauliSum h;
    h.terms.reserve(3 * lattice.bonds.size());
    for (std::size_t b = 0; b < lattice.bonds.size(); ++b) {
        const auto [i, j] = lattice.bonds[b];
        for (Pauli p : {Pauli::X, Pauli::Y, Pauli::Z}) {
            h.terms.emplace_back(x.values[b], std::vector<PauliString::Factor>{{i, p}, {j, p}});
        }
    }
    return h;
}

std::vector<SparseEntry> sparse_matrix(const PauliSum &h, int num_qubits) {
    if (h.min_register_size() > num_qubits) {
        throw DomainError("Hamiltonian acts outside the " + std::to_string(num_qubits) +
                          "-qubit register");
    }
    // Terms with equal flip masks share a sparsity pattern; summing them first
    // lets cancellations (e.g. XX + YY on aligned spins) vanish exactly.
    std::map<std::uint64_t, std::vector<const PauliString *>> by_flip;
    for (const auto &t : h.terms) {
        by_flip[t.flip_mask()].push_back(&t);
    }
    const std::size_t dim = std::size_t{1} << num_qubits;
    std::vector<SparseEntry> entries;
    for (std::size_t col = 0; col < dim; ++col) {
        for (const auto &[flip, group] : by_flip) {
            Complex v(0.0, 0.0);
            for (const auto *t : group) {
                v += t->basis_phase(col);
            }
            v *= h.normalization;
            if (v != Complex(0.0, 0.0)) {
                entries.push_back({col ^ flip, col, v});
            }
        }
    }
    return entries;
}

namespace {

struct Candidate {
    double energy;
    int sector_order;
    int local_index;
    std::vector<Complex> vector;
};

void fix_phase(std::vector<Complex> &v) {
    for (const auto &a : v) {
        if (std::abs(a) > 1e-6) {
            const Complex rot = std::conj(a) / std::abs(a);
            for (auto &b : v) {
                b *= rot;
            }
            return;
        }
    }
}

template <typename Matrix>
void solve_sector(const Matrix &dense, const std::vector<std::size_t> &basis, std::size_t dim,
                  int sector_order, std::vector<Candidate> &out) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(dense);
    if (solver.info() != Eigen::Success) {
        throw NumericalError("dense eigensolver failed to converge");
    }
    const Eigen::Index keep = std::min<Eigen::Index>(2, dense.rows());
    for (Eigen::Index k = 0; k < keep; ++k) {
        std::vector<Complex> full(dim, Complex(0.0, 0.0));
        for (std::size_t r = 0; r < basis.size(); ++r) {
            full[basis[r]] = Complex(solver.eigenvectors()(static_cast<Eigen::Index>(r), k));
        }
        out.push_back({solver.eigenvalues()(k), sector_order, static_cast<int>(k), std::move(full)});
    }
}

bool before(const Candidate &a, const Candidate &b) {
    if (a.sector_order != b.sector_order) {
        return a.sector_order < b.sector_order;
    }
    return a.local_index < b.local_index;
}

// Lowest-energy candidate; among those within tol of the minimum, the one
// with the lowest (sector, index) order.
std::size_t pick_lowest(const std::vector<Candidate> &cands, const std::vector<bool> &used,
                        double tol, bool &tied) {
    double emin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cands.size(); ++i) {
        if (!used[i]) {
            emin = std::min(emin, cands[i].energy);
        }
    }
    std::size_t best = cands.size();
    int ties = 0;
    for (std::size_t i = 0; i < cands.size(); ++i) {
        if (used[i] || cands[i].energy > emin + tol) {
            continue;
        }
        ++ties;
        if (best == cands.size() || before(cands[i], cands[best])) {
            best = i;
        }
    }
    tied = ties > 1;
    return best;
}

} // namespace

GroundSolution ground_state(const PauliSum &h, int num_qubits, int cap) {
    if (num_qubits < 1) {
        throw DomainError("qubit count must be positive");
    }
    if (num_qubits > cap) {
        throw CapacityError("dense solver capped at " + std::to_string(cap) + " qubits, got " +
                            std::to_string(num_qubits));
    }
    const std::size_t dim = std::size_t{1} << num_qubits;
    if (dim < 2) {
        throw DomainError("need at least two basis states for an excited state");
    }
    const auto entries = sparse_matrix(h, num_qubits);

    bool conserving = true;
    bool real = true;
    for (const auto &e : entries) {
        if (std::popcount(e.row) != std::popcount(e.col)) {
            conserving = false;
        }
        if (e.value.imag() != 0.0) {
            real = false;
        }
    }

    std::vector<std::vector<std::size_t>> sectors;
    if (conserving) {
        sectors.resize(static_cast<std::size_t>(num_qubits) + 1);
        for (std::size_t b = 0; b < dim; ++b) {
            sectors[static_cast<std::size_t>(std::popcount(b))].push_back(b);
        }
    } else {
        sectors.emplace_back(dim);
        for (std::size_t b = 0; b < dim; ++b) {
            sectors[0][b] = b;
        }
    }
    std::vector<int> sector_of(dim);
    std::vector<int> local_of(dim);
    for (std::size_t s = 0; s < sectors.size(); ++s) {
        for (std::size_t r = 0; r < sectors[s].size(); ++r) {
            sector_of[sectors[s][r]] = static_cast<int>(s);
            local_of[sectors[s][r]] = static_cast<int>(r);
        }
    }
    std::vector<std::vector<const SparseEntry *>> sector_entries(sectors.size());
    for (const auto &e : entries) {
        sector_entries[static_cast<std::size_t>(sector_of[e.col])].push_back(&e);
    }

    std::vector<Candidate> candidates;
    for (std::size_t s = 0; s < sectors.size(); ++s) {
        const auto sdim = static_cast<Eigen::Index>(sectors[s].size());
        if (real) {
            Eigen::MatrixXd m = Eigen::MatrixXd::Zero(sdim, sdim);
            for (const auto *e : sector_entries[s]) {
                m(local_of[e->row], local_of[e->col]) += e->value.real();
            }
            solve_sector(m, sectors[s], dim, static_cast<int>(s), candidates);
        } else {
            Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(sdim, sdim);
            for (const auto *e : sector_entries[s]) {
                m(local_of[e->row], local_of[e->col]) += e->value;
            }
            solve_sector(m, sectors[s], dim, static_cast<int>(s), candidates);
        }
    }

    constexpr double kTieTol = 1e-10;
    std::vector<bool> used(candidates.size(), false);
    bool ground_tied = false;
    bool excited_tied = false;
    const std::size_t g = pick_lowest(candidates, used, kTieTol, ground_tied);
    used[g] = true;
    const std::size_t e = pick_lowest(candidates, used, kTieTol, excited_tied);

    auto ground_vec = candidates[g].vector;
    auto excited_vec = candidates[e].vector;
    fix_phase(ground_vec);
    fix_phase(excited_vec);

    GroundSolution sol;
    sol.energy = candidates[g].energy;
    sol.excited_energy = candidates[e].energy;
    sol.gap = std::max(0.0, sol.excited_energy - sol.energy);
    sol.degenerate_ground = sol.gap < kTieTol;
    sol.ground = StateVector::normalized(num_qubits, std::move(ground_vec));
    sol.first_excited = StateVector::normalized(num_qubits, std::move(excited_vec));

    // Residual against the sparse operator, independent of the dense blocks.
    std::vector<Complex> hpsi(dim, Complex(0.0, 0.0));
    const auto psi = sol.ground.amplitudes();
    for (const auto &en : entries) {
        hpsi[en.row] += en.value * psi[en.col];
    }
    double res = 0.0;
    for (std::size_t b = 0; b < dim; ++b) {
        res += std::norm(hpsi[b] - sol.energy * psi[b]);
    }
    if (!(std::sqrt(res) <= 1e-9)) {
        throw NumericalError("ground-state residual " + std::to_string(std::sqrt(res)) +
                             " exceeds 1e-9");
    }
    return sol;
}

double guiding_fidelity(double delta) {
    const double a = (1.0 - delta) * (1.0 - delta);
    return a / (a + delta * delta);
}

StateVector make_guiding_state(const GroundSolution &sol, double delta) {
    if (!(delta >= 0.0 && delta < 1.0)) {
        throw DomainError("guiding-state delta must lie in [0, 1), got " + std::to_string(delta));
    }
    if (std::abs(inner_product(sol.ground, sol.first_excited)) > 1e-10) {
        throw DomainError("excited state is not orthogonal to the ground state");
    }
    const auto g = sol.ground.amplitudes();
    const auto e = sol.first_excited.amplitudes();
    std::vector<Complex> amps(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        amps[i] = (1.0 - delta) * g[i] + delta * e[i];
    }
    return StateVector::normalized(sol.ground.num_qubits(), std::move(amps));
}

} // namespace qntk
