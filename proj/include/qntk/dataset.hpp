#pragma once

#include "qntk/hamiltonian.hpp"
#include "qntk/pauli.hpp"
#include "qntk/state_vector.hpp"

#include "json.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace qntk {

struct Sample {
    CouplingVector couplings;
    StateVector guiding{1, {1.0, 0.0}};
    /// <psi(x)| O |psi(x)> on the exact ground state.
    double label = 0.0;
    double ground_energy = 0.0;
    double gap = 0.0;
    bool degenerate = false;
};

struct Dataset {
    Lattice2D lattice;
    PauliSum observable;
    double delta = 0.0;
    std::uint64_t seed = 0;
    std::vector<Sample> samples;

    [[nodiscard]] std::size_t size() const noexcept { return samples.size(); }
    [[nodiscard]] bool empty() const noexcept { return samples.empty(); }
    [[nodiscard]] int num_qubits() const noexcept { return lattice.num_sites(); }
    [[nodiscard]] std::vector<double> labels() const;
};

struct DatasetOptions {
    int threads = 1;
    int solver_cap = kDefaultSolverCap;
};

/// Solves H(x) and builds the guided sample for one coupling vector.
Sample solve_sample(const Lattice2D &lattice, const PauliSum &obs, const CouplingVector &x,
                    double delta, int solver_cap = kDefaultSolverCap);

/// Couplings i.i.d. uniform on [0, 2]. Training sample i draws from substream
/// (seed, TrainSamples, i) and test sample i from (seed, TestSamples, i), so
/// the test split does not depend on m_train.
std::pair<Dataset, Dataset> generate_dataset(const Lattice2D &lattice, const PauliSum &obs,
                                             std::size_t m_train, std::size_t m_test,
                                             double delta, std::uint64_t seed,
                                             const DatasetOptions &opts = {});

/// Couplings for one sample, as drawn by generate_dataset.
CouplingVector sample_couplings(const Lattice2D &lattice, std::uint64_t seed, bool test_split,
                                std::size_t index);

inline constexpr const char *kDatasetFormat = "qntk-dataset-v1";

/// Self-describing document with both splits. Amplitudes are stored as
/// [re, im] pairs unless `include_amplitudes` is false.
nlohmann::json datasets_to_json(const Dataset &train, const Dataset &test,
                                bool include_amplitudes);

/// Inverse of datasets_to_json; samples without amplitudes are re-solved
/// from their couplings.
std::pair<Dataset, Dataset> datasets_from_json(const nlohmann::json &doc,
                                               const DatasetOptions &opts = {});

nlohmann::json pauli_sum_to_json(const PauliSum &obs);
PauliSum pauli_sum_from_json(const nlohmann::json &j);

} // namespace qntk
