#pragma once

#include "qntk/pauli.hpp"
#include "qntk/state_vector.hpp"

#include "json.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

namespace qntk {

struct Gate {
    enum class Kind : std::uint8_t { Rotation, CZ };
    Kind kind = Kind::Rotation;
    Axis axis = Axis::Y;
    int qubit = 0;  // rotation target, or first CZ qubit
    int qubit2 = 0; // second CZ qubit
    int param = -1; // rotation parameter index; -1 for CZ

    friend bool operator==(const Gate &, const Gate &) = default;
};

struct Block {
    int layer = 0;      // 0-based
    int first = 0;      // first qubit (0-based, inclusive)
    int last = 0;       // last qubit (inclusive)
    int first_param = 0;
    int num_params = 0;

    [[nodiscard]] int width() const noexcept { return last - first + 1; }
    friend bool operator==(const Block &, const Block &) = default;
};

/**
 * Alternating layered ansatz on n qubits with block width m, r sublayers per
 * block and L layers.
 *
 * Layers 0, 2, ... tile the register with n/m blocks of width m. Layers
 * 1, 3, ... are offset by m/2: a half-width block on the first m/2 qubits,
 * n/m - 1 full blocks, and a half-width block on the last m/2 qubits.
 *
 * Inside a block each sublayer s applies one rotation per qubit (axis Y for
 * even s, Z for odd s), then a CZ chain between neighbouring qubits of the
 * block. With r even the CZ chains pair up, so U(0) is the identity; with r
 * odd U(0) is a product of CZs, which is diagonal.
 *
 * Parameter index order is (layer, block, sublayer, qubit-within-block),
 * row-major. A full block carries r*m parameters, a half block r*m/2.
 */
struct AlaCircuit {
    int n = 0;
    int m = 0;
    int r = 0;
    int L = 0;
    std::vector<Block> blocks;
    std::vector<Gate> gates;
    int num_params = 0;

    friend bool operator==(const AlaCircuit &, const AlaCircuit &) = default;
};

inline constexpr const char *kParamLayoutVersion = "ala-layer-block-sublayer-qubit-v1";

struct ParamTensor {
    std::vector<double> values;

    [[nodiscard]] std::size_t size() const noexcept { return values.size(); }
    friend bool operator==(const ParamTensor &, const ParamTensor &) = default;
};

AlaCircuit build_ala(int n, int m, int r, int L);

/// theta_j ~ N(0, kappa^2) i.i.d., drawn from substream (seed, ParamInit, 0).
ParamTensor init_params(const AlaCircuit &circuit, double kappa, std::uint64_t seed);

/// Applies the gates in declared order.
StateVector apply_circuit(const AlaCircuit &circuit, const ParamTensor &params,
                          StateVector input);

/// Applies only gates[k] for k in `gate_subset` (ascending), in order.
StateVector apply_gates(const AlaCircuit &circuit, const std::vector<int> &gate_subset,
                        const ParamTensor &params, StateVector input);

struct LightCone {
    std::vector<int> params; // ascending parameter indices
    std::vector<int> gates;  // ascending gate indices inside the cone
    std::uint64_t qubits = 0; // qubits touched by the cone
};

/**
 * Backward light cone of a set of qubits: sweeping the gate list from the
 * end, a CZ touching the current support adds both its qubits, and a
 * rotation on a supported qubit joins the cone. Gates outside the cone
 * commute through the observable, so
 *   <U^dag P U> = <U_cone^dag P U_cone>
 * and the derivative with respect to any parameter outside the cone is
 * identically zero.
 */
LightCone light_cone(const AlaCircuit &circuit, std::uint64_t support);
inline LightCone light_cone(const AlaCircuit &circuit, const PauliString &term) {
    return light_cone(circuit, term.support_mask());
}

/// Thread-safe memo of light cones keyed by support mask. The circuit must
/// outlive the cache.
class LightConeCache {
  public:
    explicit LightConeCache(const AlaCircuit &circuit) : circuit_(&circuit) {}
    std::shared_ptr<const LightCone> get(std::uint64_t support);
    std::shared_ptr<const LightCone> get(const PauliString &term) {
        return get(term.support_mask());
    }

  private:
    const AlaCircuit *circuit_;
    std::mutex mu_;
    std::map<std::uint64_t, std::shared_ptr<const LightCone>> memo_;
};

nlohmann::json circuit_to_json(const AlaCircuit &circuit);
AlaCircuit circuit_from_json(const nlohmann::json &j);
nlohmann::json params_to_json(const ParamTensor &params);
ParamTensor params_from_json(const nlohmann::json &j, const AlaCircuit &circuit);

} // namespace qntk
