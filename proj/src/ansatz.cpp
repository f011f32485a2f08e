#include "qntk/ansatz.hpp"

#include "qntk/error.hpp"
#include "qntk/random.hpp"

#include <algorithm>
#include <bit>
#include <string>

namespace qntk {

using nlohmann::json;

namespace {

void add_block(AlaCircuit &c, int layer, int first, int last) {
    Block b{layer, first, last, c.num_params, 0};
    for (int s = 0; s < c.r; ++s) {
        const Axis axis = (s % 2 == 0) ? Axis::Y : Axis::Z;
        for (int q = first; q <= last; ++q) {
            c.gates.push_back({Gate::Kind::Rotation, axis, q, 0, c.num_params});
            ++c.num_params;
            ++b.num_params;
        }
        for (int q = first; q < last; ++q) {
            c.gates.push_back({Gate::Kind::CZ, Axis::Z, q, q + 1, -1});
        }
    }
    c.blocks.push_back(b);
}

} // namespace

AlaCircuit build_ala(int n, int m, int r, int L) {
    if (m < 2 || m % 2 != 0) {
        throw DomainError("block width m must be even and at least 2 (got " + std::to_string(m) +
                          ")");
    }
    if (n < m || n % m != 0) {
        throw DomainError("block width m=" + std::to_string(m) + " must divide n=" +
                          std::to_string(n));
    }
    if (n > 64) {
        throw DomainError("at most 64 qubits supported");
    }
    if (r < 1 || L < 1) {
        throw DomainError("sublayers r and layers L must be positive");
    }
    AlaCircuit c{n, m, r, L, {}, {}, 0};
    const int half = m / 2;
    for (int layer = 0; layer < L; ++layer) {
        if (layer % 2 == 0) {
            for (int i = 0; i < n / m; ++i) {
                add_block(c, layer, m * i, m * (i + 1) - 1);
            }
        } else {
            add_block(c, layer, 0, half - 1);
            for (int i = 0; i + 1 < n / m; ++i) {
                add_block(c, layer, m * i + half, m * (i + 1) + half - 1);
            }
            add_block(c, layer, n - half, n - 1);
        }
    }
    return c;
}

ParamTensor init_params(const AlaCircuit &circuit, double kappa, std::uint64_t seed) {
    if (!(kappa > 0.0 && kappa <= 1.0)) {
        throw DomainError("initialization scale kappa must lie in (0, 1], got " +
                          std::to_string(kappa));
    }
    Rng rng(derive_seed(seed, Stream::ParamInit, 0));
    ParamTensor p;
    p.values.resize(static_cast<std::size_t>(circuit.num_params));
    for (auto &v : p.values) {
        v = kappa * rng.normal();
    }
    return p;
}

namespace {

void apply_gate(const Gate &g, const ParamTensor &params, StateVector &state) {
    if (g.kind == Gate::Kind::Rotation) {
        state.apply_rotation(g.qubit, g.axis, params.values[static_cast<std::size_t>(g.param)]);
    } else {
        state.apply_cz(g.qubit, g.qubit2);
    }
}

void check_shapes(const AlaCircuit &circuit, const ParamTensor &params, const StateVector &s) {
    if (params.size() != static_cast<std::size_t>(circuit.num_params)) {
        throw DomainError("parameter tensor has " + std::to_string(params.size()) +
                          " entries, circuit expects " + std::to_string(circuit.num_params));
    }
    if (s.num_qubits() != circuit.n) {
        throw DomainError("state has " + std::to_string(s.num_qubits()) +
                          " qubits, circuit acts on " + std::to_string(circuit.n));
    }
}

} // namespace

StateVector apply_circuit(const AlaCircuit &circuit, const ParamTensor &params,
                          StateVector input) {
    check_shapes(circuit, params, input);
    for (const auto &g : circuit.gates) {
        apply_gate(g, params, input);
    }
    return input;
}

StateVector apply_gates(const AlaCircuit &circuit, const std::vector<int> &gate_subset,
                        const ParamTensor &params, StateVector input) {
    check_shapes(circuit, params, input);
    for (int k : gate_subset) {
        apply_gate(circuit.gates.at(static_cast<std::size_t>(k)), params, input);
    }
    return input;
}

LightCone light_cone(const AlaCircuit &circuit, std::uint64_t support) {
    if (circuit.n < 64 && (support >> circuit.n) != 0) {
        throw DomainError("light-cone support exceeds the circuit register");
    }
    LightCone cone;
    std::uint64_t live = support;
    for (int k = static_cast<int>(circuit.gates.size()) - 1; k >= 0; --k) {
        const Gate &g = circuit.gates[static_cast<std::size_t>(k)];
        const std::uint64_t b1 = std::uint64_t{1} << g.qubit;
        if (g.kind == Gate::Kind::CZ) {
            const std::uint64_t b2 = std::uint64_t{1} << g.qubit2;
            if (live & (b1 | b2)) {
                live |= b1 | b2;
                cone.gates.push_back(k);
            }
        } else if (live & b1) {
            cone.gates.push_back(k);
            cone.params.push_back(g.param);
        }
    }
    std::reverse(cone.gates.begin(), cone.gates.end());
    std::sort(cone.params.begin(), cone.params.end());
    cone.qubits = live;
    return cone;
}

std::shared_ptr<const LightCone> LightConeCache::get(std::uint64_t support) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = memo_.find(support);
    if (it != memo_.end()) {
        return it->second;
    }
    auto cone = std::make_shared<const LightCone>(light_cone(*circuit_, support));
    memo_.emplace(support, cone);
    return cone;
}

json circuit_to_json(const AlaCircuit &circuit) {
    json gates = json::array();
    for (const auto &g : circuit.gates) {
        if (g.kind == Gate::Kind::Rotation) {
            gates.push_back({{"kind", "rotation"},
                             {"axis", std::string(1, pauli_char(g.axis))},
                             {"qubit", g.qubit},
                             {"param", g.param}});
        } else {
            gates.push_back({{"kind", "cz"}, {"qubits", {g.qubit, g.qubit2}}});
        }
    }
    return {{"n", circuit.n},
            {"m", circuit.m},
            {"r", circuit.r},
            {"L", circuit.L},
            {"num_params", circuit.num_params},
            {"layout", kParamLayoutVersion},
            {"gates", std::move(gates)}};
}

AlaCircuit circuit_from_json(const json &j) {
    auto c = build_ala(j.at("n").get<int>(), j.at("m").get<int>(), j.at("r").get<int>(),
                       j.at("L").get<int>());
    if (j.contains("gates") && circuit_to_json(c).at("gates") != j.at("gates")) {
        throw DomainError("gate list does not match the ALA structure it declares");
    }
    return c;
}

json params_to_json(const ParamTensor &params) {
    return {{"layout", kParamLayoutVersion}, {"values", params.values}};
}

ParamTensor params_from_json(const json &j, const AlaCircuit &circuit) {
    if (j.at("layout").get<std::string>() != kParamLayoutVersion) {
        throw DomainError("unsupported parameter layout '" + j.at("layout").get<std::string>() +
                          "'");
    }
    ParamTensor p{j.at("values").get<std::vector<double>>()};
    if (p.size() != static_cast<std::size_t>(circuit.num_params)) {
        throw DomainError("parameter file has " + std::to_string(p.size()) +
                          " values, circuit expects " + std::to_string(circuit.num_params));
    }
    return p;
}

} // namespace qntk
