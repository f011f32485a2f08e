#include "qntk/dataset.hpp"

#include "qntk/error.hpp"
#include "qntk/parallel.hpp"
#include "qntk/random.hpp"

namespace qntk {

using nlohmann::json;

std::vector<double> Dataset::labels() const {
    std::vector<double> y;
    y.reserve(samples.size());
    for (const auto &s : samples) {
        y.push_back(s.label);
    }
    return y;
}

Sample solve_sample(const Lattice2D &lattice, const PauliSum &obs, const CouplingVector &x,
                    double delta, int solver_cap) {
    const int n = lattice.num_sites();
    const auto sol = ground_state(build_heisenberg(lattice, x), n, solver_cap);
    Sample s;
    s.couplings = x;
    s.guiding = make_guiding_state(sol, delta);
    s.label = observable_expectation(sol.ground, obs);
    s.ground_energy = sol.energy;
    s.gap = sol.gap;
    s.degenerate = sol.degenerate_ground;
    return s;
}

CouplingVector sample_couplings(const Lattice2D &lattice, std::uint64_t seed, bool test_split,
                                std::size_t index) {
    Rng rng(derive_seed(seed, test_split ? Stream::TestSamples : Stream::TrainSamples, index));
    CouplingVector x;
    x.values.resize(lattice.bonds.size());
    for (auto &v : x.values) {
        v = rng.uniform(0.0, 2.0);
    }
    return x;
}

std::pair<Dataset, Dataset> generate_dataset(const Lattice2D &lattice, const PauliSum &obs,
                                             std::size_t m_train, std::size_t m_test,
                                             double delta, std::uint64_t seed,
                                             const DatasetOptions &opts) {
    if (m_train < 1 || m_test < 1) {
        throw DomainError("train and test splits need at least one sample each");
    }
    if (!(delta >= 0.0 && delta < 1.0)) {
        throw DomainError("delta must lie in [0, 1)");
    }
    const int n = lattice.num_sites();
    if (n > opts.solver_cap) {
        throw CapacityError("dense solver capped at " + std::to_string(opts.solver_cap) +
                            " qubits, lattice has " + std::to_string(n));
    }
    if (obs.min_register_size() > n) {
        throw DomainError("observable acts outside the lattice");
    }
    Dataset train{lattice, obs, delta, seed, {}};
    Dataset test{lattice, obs, delta, seed, {}};
    train.samples.resize(m_train);
    test.samples.resize(m_test);
    parallel_for(m_train + m_test, opts.threads, [&](std::size_t k) {
        const bool is_test = k >= m_train;
        const std::size_t idx = is_test ? k - m_train : k;
        const auto x = sample_couplings(lattice, seed, is_test, idx);
        auto s = solve_sample(lattice, obs, x, delta, opts.solver_cap);
        (is_test ? test.samples[idx] : train.samples[idx]) = std::move(s);
    });
    return {std::move(train), std::move(test)};
}

json pauli_sum_to_json(const PauliSum &obs) {
    json terms = json::array();
    for (const auto &t : obs.terms) {
        terms.push_back({{"coefficient", t.coefficient()}, {"paulis", t.label()}});
    }
    return {{"normalization", obs.normalization}, {"terms", terms}};
}

PauliSum pauli_sum_from_json(const json &j) {
    PauliSum obs;
    obs.normalization = j.at("normalization").get<double>();
    for (const auto &t : j.at("terms")) {
        const auto text = t.at("paulis").get<std::string>();
        obs.terms.push_back(
            PauliString::parse(t.at("coefficient").get<double>(), text == "I" ? "" : text));
    }
    return obs;
}

namespace {

json sample_to_json(const Sample &s, bool include_amplitudes) {
    json j{{"couplings", s.couplings.values},
           {"label", s.label},
           {"ground_energy", s.ground_energy},
           {"gap", s.gap},
           {"degenerate", s.degenerate}};
    if (include_amplitudes) {
        json amps = json::array();
        for (const auto &a : s.guiding.amplitudes()) {
            amps.push_back({a.real(), a.imag()});
        }
        j["guiding"] = std::move(amps);
    }
    return j;
}

Sample sample_from_json(const json &j, const Dataset &meta, int solver_cap) {
    CouplingVector x{j.at("couplings").get<std::vector<double>>()};
    if (!j.contains("guiding")) {
        return solve_sample(meta.lattice, meta.observable, x, meta.delta, solver_cap);
    }
    Sample s;
    s.couplings = std::move(x);
    std::vector<Complex> amps;
    for (const auto &a : j.at("guiding")) {
        amps.emplace_back(a.at(0).get<double>(), a.at(1).get<double>());
    }
    s.guiding = StateVector(meta.num_qubits(), std::move(amps));
    s.label = j.at("label").get<double>();
    s.ground_energy = j.value("ground_energy", 0.0);
    s.gap = j.value("gap", 0.0);
    s.degenerate = j.value("degenerate", false);
    return s;
}

} // namespace

json datasets_to_json(const Dataset &train, const Dataset &test, bool include_amplitudes) {
    json doc{{"format", kDatasetFormat},
             {"lattice", {{"rows", train.lattice.rows}, {"cols", train.lattice.cols}}},
             {"num_qubits", train.num_qubits()},
             {"seed", train.seed},
             {"delta", train.delta},
             {"observable", pauli_sum_to_json(train.observable)},
             {"amplitudes_included", include_amplitudes}};
    json tr = json::array();
    for (const auto &s : train.samples) {
        tr.push_back(sample_to_json(s, include_amplitudes));
    }
    json te = json::array();
    for (const auto &s : test.samples) {
        te.push_back(sample_to_json(s, include_amplitudes));
    }
    doc["splits"] = {{"train", std::move(tr)}, {"test", std::move(te)}};
    return doc;
}

std::pair<Dataset, Dataset> datasets_from_json(const json &doc, const DatasetOptions &opts) {
    if (doc.value("format", std::string{}) != kDatasetFormat) {
        throw DomainError("not a " + std::string(kDatasetFormat) + " document");
    }
    Dataset meta;
    meta.lattice = make_lattice(doc.at("lattice").at("rows").get<int>(),
                                doc.at("lattice").at("cols").get<int>());
    meta.seed = doc.at("seed").get<std::uint64_t>();
    meta.delta = doc.at("delta").get<double>();
    meta.observable = pauli_sum_from_json(doc.at("observable"));

    auto load = [&](const json &arr) {
        Dataset d = meta;
        d.samples.resize(arr.size());
        parallel_for(arr.size(), opts.threads, [&](std::size_t i) {
            d.samples[i] = sample_from_json(arr.at(i), meta, opts.solver_cap);
        });
        return d;
    };
    const auto &splits = doc.at("splits");
    return {load(splits.at("train")), load(splits.at("test"))};
}

} // namespace qntk
