#include "doctest.h"
#include "oracles.hpp"

#include "qntk/ansatz.hpp"
#include "qntk/error.hpp"
#include "qntk/random.hpp"

#include <bit>
#include <cmath>
#include <set>

using namespace qntk;
using oracle::to_vec;

namespace {

int count_cz(const AlaCircuit &c) {
    int k = 0;
    for (const auto &g : c.gates) {
        k += g.kind == Gate::Kind::CZ ? 1 : 0;
    }
    return k;
}

ParamTensor random_params(const AlaCircuit &c, Rng &rng) {
    ParamTensor p;
    for (int j = 0; j < c.num_params; ++j) {
        p.values.push_back(rng.uniform(-3.2, 3.2));
    }
    return p;
}

} // namespace

TEST_CASE("single layer counting") {
    const auto c = build_ala(4, 2, 1, 1);
    CHECK(c.blocks.size() == 2);
    CHECK(c.num_params == 4);
    CHECK(count_cz(c) == 2);
}

TEST_CASE("even layers start and end with half blocks") {
    const auto c = build_ala(4, 2, 1, 2);
    REQUIRE(c.blocks.size() == 5);
    CHECK(c.blocks[2].layer == 1);
    CHECK(c.blocks[2].first == 0);
    CHECK(c.blocks[2].width() == 1);
    CHECK(c.blocks[3].first == 1);
    CHECK(c.blocks[3].width() == 2);
    CHECK(c.blocks[4].first == 3);
    CHECK(c.blocks[4].width() == 1);
    CHECK(c.num_params == 8);
}

TEST_CASE("twenty-qubit circuit with width-four blocks") {
    const auto c = build_ala(20, 4, 2, 2);
    // Layer 1: 5 blocks of 8 params; layer 2: two half blocks of 4 and 4 full blocks of 8.
    CHECK(c.blocks.size() == 5 + 6);
    CHECK(c.num_params == 5 * 8 + 2 * 4 + 4 * 8);
    int slots = 0;
    for (const auto &b : c.blocks) {
        CHECK(b.num_params == c.r * b.width());
        CHECK(b.first_param == slots);
        slots += b.num_params;
        if (b.layer == 0) {
            CHECK(b.width() == 4);
        }
    }
    CHECK(slots == c.num_params);
}

TEST_CASE("every parameter drives exactly one rotation in layout order") {
    const auto c = build_ala(12, 4, 3, 3);
    std::vector<int> seen;
    for (const auto &g : c.gates) {
        if (g.kind == Gate::Kind::Rotation) {
            seen.push_back(g.param);
        }
    }
    REQUIRE(static_cast<int>(seen.size()) == c.num_params);
    for (int j = 0; j < c.num_params; ++j) {
        CHECK(seen[static_cast<std::size_t>(j)] == j);
    }
    // Sublayer axes alternate Y, Z within each block.
    for (const auto &b : c.blocks) {
        for (int s = 0; s < c.r; ++s) {
            for (int q = 0; q < b.width(); ++q) {
                const int param = b.first_param + s * b.width() + q;
                for (const auto &g : c.gates) {
                    if (g.param == param) {
                        CHECK(g.qubit == b.first + q);
                        CHECK(g.axis == (s % 2 == 0 ? Axis::Y : Axis::Z));
                    }
                }
            }
        }
    }
}

TEST_CASE("invalid shapes") {
    CHECK_THROWS_AS(build_ala(6, 3, 1, 1), DomainError);
    CHECK_THROWS_AS(build_ala(6, 4, 1, 1), DomainError);
    CHECK_THROWS_AS(build_ala(4, 0, 1, 1), DomainError);
    CHECK_THROWS_AS(build_ala(4, 2, 0, 1), DomainError);
    CHECK_THROWS_AS(build_ala(4, 2, 1, 0), DomainError);
}

TEST_CASE("gaussian initialization") {
    const auto c = build_ala(8, 2, 2, 2);
    const auto a = init_params(c, 0.3, 77);
    CHECK(a.size() == static_cast<std::size_t>(c.num_params));
    CHECK(init_params(c, 0.3, 77).values == a.values);
    CHECK(init_params(c, 0.3, 78).values != a.values);
    CHECK_THROWS_AS(init_params(c, 0.0, 1), DomainError);
    CHECK_THROWS_AS(init_params(c, 1.5, 1), DomainError);
    CHECK_NOTHROW(init_params(c, 1.0, 1));

    const auto big = build_ala(64, 2, 160, 1); // 10240 parameters
    const auto p = init_params(big, 0.5, 3);
    double mean = 0.0;
    for (double v : p.values) {
        mean += v;
    }
    mean /= static_cast<double>(p.size());
    double var = 0.0;
    for (double v : p.values) {
        var += (v - mean) * (v - mean);
    }
    var /= static_cast<double>(p.size() - 1);
    CHECK(std::abs(var - 0.25) < 0.05 * 0.25);
}

TEST_CASE("zero parameters give the identity for even r") {
    Rng rng(6);
    for (int r : {2, 4}) {
        const auto c = build_ala(6, 2, r, 3);
        const auto psi = random_state(6, rng);
        const ParamTensor zero{std::vector<double>(static_cast<std::size_t>(c.num_params), 0.0)};
        CHECK((to_vec(apply_circuit(c, zero, psi)) - to_vec(psi)).cwiseAbs().maxCoeff() < 1e-15);
    }
    // Small kappa keeps the circuit close to the identity.
    const auto c = build_ala(6, 2, 2, 2);
    const auto psi = random_state(6, rng);
    CHECK(fidelity(apply_circuit(c, init_params(c, 1e-6, 1), psi), psi) > 1.0 - 1e-9);
}

TEST_CASE("circuit application matches the dense unitary") {
    Rng rng(31);
    for (auto [n, m, r, L] : {std::array{2, 2, 1, 1}, {2, 2, 2, 2}, {4, 2, 2, 2}, {4, 4, 3, 2}}) {
        const auto c = build_ala(n, m, r, L);
        const auto p = random_params(c, rng);
        const auto psi = random_state(n, rng);
        const oracle::Vec want = oracle::circuit_unitary(c, p.values) * to_vec(psi);
        CHECK((to_vec(apply_circuit(c, p, psi)) - want).cwiseAbs().maxCoeff() < 1e-13);
    }
    const auto c = build_ala(4, 2, 1, 1);
    CHECK_THROWS_AS(apply_circuit(c, ParamTensor{{0.1}}, new_basis_state(4, 0)), DomainError);
    CHECK_THROWS_AS(apply_circuit(c, ParamTensor{{0, 0, 0, 0}}, new_basis_state(3, 0)),
                    DomainError);
}

TEST_CASE("circuits are unitary") {
    Rng rng(8);
    const auto c = build_ala(6, 2, 2, 3);
    for (int trial = 0; trial < 10; ++trial) {
        const auto p = random_params(c, rng);
        const auto a = random_state(6, rng);
        const auto b = random_state(6, rng);
        const Complex before = inner_product(a, b);
        const Complex after = inner_product(apply_circuit(c, p, a), apply_circuit(c, p, b));
        CHECK(std::abs(before - after) < 1e-10);
    }
}

TEST_CASE("applying layers one by one equals the whole circuit") {
    Rng rng(10);
    const auto c = build_ala(8, 4, 2, 3);
    const auto p = random_params(c, rng);
    const auto psi = random_state(8, rng);
    auto state = psi;
    for (int layer = 0; layer < c.L; ++layer) {
        std::vector<int> subset;
        for (std::size_t k = 0; k < c.gates.size(); ++k) {
            const auto &g = c.gates[k];
            const int param = g.kind == Gate::Kind::Rotation ? g.param : -1;
            int owner = -1;
            if (param >= 0) {
                for (const auto &b : c.blocks) {
                    if (param >= b.first_param && param < b.first_param + b.num_params) {
                        owner = b.layer;
                    }
                }
            } else {
                // A CZ belongs to the layer of the nearest preceding rotation.
                for (std::size_t j = k; j-- > 0;) {
                    if (c.gates[j].kind == Gate::Kind::Rotation) {
                        for (const auto &b : c.blocks) {
                            if (c.gates[j].param >= b.first_param &&
                                c.gates[j].param < b.first_param + b.num_params) {
                                owner = b.layer;
                            }
                        }
                        break;
                    }
                }
            }
            if (owner == layer) {
                subset.push_back(static_cast<int>(k));
            }
        }
        state = apply_gates(c, subset, p, state);
    }
    CHECK(state == apply_circuit(c, p, psi));
}

TEST_CASE("light cones") {
    const auto one = build_ala(8, 4, 2, 1);
    const auto cone = light_cone(one, PauliString::parse(1.0, "Z1 Z2"));
    std::vector<int> want;
    for (int j = 0; j < one.blocks[0].num_params; ++j) {
        want.push_back(j);
    }
    CHECK(cone.params == want);
    CHECK(cone.qubits == 0b1111);

    const auto two = build_ala(8, 2, 2, 2);
    const auto z0 = light_cone(two, PauliString::parse(1.0, "Z0"));
    CHECK(std::popcount(z0.qubits) <= 1 + 2 * two.m * two.L);
    // The last layer's half block on qubit 0 has no entangler.
    CHECK(z0.qubits == 0b11);

    const auto full = light_cone(two, (std::uint64_t{1} << 8) - 1);
    CHECK(static_cast<int>(full.params.size()) == two.num_params);
    CHECK(full.gates.size() == two.gates.size());
    CHECK_THROWS_AS(light_cone(two, std::uint64_t{1} << 8), DomainError);
}

TEST_CASE("cone size bound holds structurally") {
    for (auto [n, m, L] : {std::array{8, 2, 1}, {8, 2, 3}, {12, 4, 2}, {16, 4, 3}, {12, 2, 5}}) {
        const auto c = build_ala(n, m, 2, L);
        for (int k = 1; k <= 2; ++k) {
            for (int q = 0; q + k <= n; ++q) {
                const std::uint64_t support = ((std::uint64_t{1} << k) - 1) << q;
                const auto cone = light_cone(c, support);
                CHECK(std::popcount(cone.qubits) <= k + 2 * m * L);
            }
        }
    }
}

TEST_CASE("cone-only simulation reproduces the term expectation") {
    Rng rng(41);
    const auto c = build_ala(8, 2, 2, 2);
    const auto p = random_params(c, rng);
    const auto psi = random_state(8, rng);
    LightConeCache cache(c);
    for (const char *t : {"Z0", "X3 Y4", "Z7"}) {
        const auto term = PauliString::parse(1.0, t);
        const auto cone = cache.get(term);
        CHECK(cache.get(term) == cone);
        const double full = pauli_expectation(apply_circuit(c, p, psi), term);
        const double part = pauli_expectation(apply_gates(c, cone->gates, p, psi), term);
        CHECK(std::abs(full - part) < 1e-12);
    }
}

TEST_CASE("circuit and parameter json") {
    const auto c = build_ala(8, 4, 2, 2);
    const auto doc = circuit_to_json(c);
    CHECK(circuit_from_json(nlohmann::json::parse(doc.dump())) == c);
    auto tampered = doc;
    tampered["gates"][0]["qubit"] = 5;
    CHECK_THROWS_AS(circuit_from_json(tampered), DomainError);

    const auto p = init_params(c, 0.2, 4);
    const auto pj = params_to_json(p);
    CHECK(params_from_json(nlohmann::json::parse(pj.dump()), c).values == p.values);
    auto wrong_layout = pj;
    wrong_layout["layout"] = "other";
    CHECK_THROWS_AS(params_from_json(wrong_layout, c), DomainError);
    CHECK_THROWS_AS(params_from_json(pj, build_ala(4, 2, 1, 1)), DomainError);
}
