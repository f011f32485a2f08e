// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include "../oracles.hpp"

#include "qntk/experiments.hpp"
#include "qntk/ntk.hpp"
#include "qntk/random.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <string>

using namespace qntk;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 7;

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char *f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

AlaCircuit random_circuit(int n, Rng &rng) {
    std::vector<int> widths;
    for (int m = 2; m <= n; m += 2) {
        if (n % m == 0) {
            widths.push_back(m);
        }
    }
    const int m = widths[static_cast<std::size_t>(rng.uniform() * static_cast<double>(widths.size()))];
    const int r = 1 + static_cast<int>(rng.uniform() * 3);
    const int L = 1 + static_cast<int>(rng.uniform() * 3);
    return build_ala(n, m, r, L);
}

ParamTensor random_params(const AlaCircuit &c, Rng &rng) {
    ParamTensor p;
    for (int j = 0; j < c.num_params; ++j) {
        p.values.push_back(rng.uniform(-std::numbers::pi, std::numbers::pi));
    }
    return p;
}

double norm(const std::vector<double> &v) {
    double s = 0.0;
    for (double x : v) {
        s += x * x;
    }
    return std::sqrt(s);
}

Outcome gradients_agree() {
    const auto start = Clock::now();
    Rng rng(derive_seed(kSeed, Stream::Experiment, 1));
    double worst_fd = 0.0;
    double worst_adj = 0.0;
    for (int k = 0; k < 100; ++k) {
        const int n = 2 * (1 + k % 3);
        const auto c = random_circuit(n, rng);
        const auto lattice = make_lattice(1, n);
        const auto obs = z_sum_observable(n, std::sqrt(n));
        const auto m = static_cast<std::size_t>(1 + rng.uniform() * 4);
        const double delta = rng.uniform(0.0, 0.5);
        const auto data = generate_dataset(lattice, obs, m, 1, delta, rng.next_u64()).first;
        const auto p = random_params(c, rng);

        const auto ps = gradient_parameter_shift(c, p, data);
        const auto adj = gradient_adjoint(c, p, data);
        const auto fd = oracle::fd_loss_gradient(c, p.values, data, 1e-5);
        std::vector<double> diff(ps.size());
        for (std::size_t j = 0; j < ps.size(); ++j) {
            diff[j] = ps[j] - fd[j];
            worst_adj = std::max(worst_adj, std::abs(ps[j] - adj[j]));
        }
        worst_fd = std::max(worst_fd, norm(diff) / std::max(norm(fd), 1e-300));
    }
    const double secs = seconds_since(start);
    return {worst_fd <= 1e-6 && worst_adj <= 1e-10 && secs < 60.0,
            fmt("shift vs FD rel %.2e (<=1e-6), adjoint vs shift %.2e (<=1e-10), %.1fs (<60s)",
                worst_fd, worst_adj, secs)};
}

Outcome two_qubit_heisenberg() {
    const auto lattice = make_lattice(1, 2);
    const auto sol = ground_state(build_heisenberg(lattice, CouplingVector{{1.0}}), 2);
    const double s = 1.0 / std::sqrt(2.0);
    const oracle::Vec singlet = (oracle::Vec(4) << 0, s, -s, 0).finished();
    const double fid = std::norm(singlet.dot(oracle::to_vec(sol.ground)));
    double spec_err = 0.0;
    for (double x : {0.5, 1.5}) {
        const auto eig = oracle::dense_spectrum(build_heisenberg(lattice, CouplingVector{{x}}), 2);
        const double want[4] = {-3 * x, x, x, x};
        for (int i = 0; i < 4; ++i) {
            spec_err = std::max(spec_err, std::abs(eig.eigenvalues()(i) - want[i]));
        }
        const auto lib = ground_state(build_heisenberg(lattice, CouplingVector{{x}}), 2);
        spec_err = std::max({spec_err, std::abs(lib.energy + 3 * x), std::abs(lib.excited_energy - x)});
    }
    const double e_err = std::abs(sol.energy + 3.0);
    return {e_err <= 1e-12 && fid > 1.0 - 1e-12 && spec_err <= 1e-12,
            fmt("|E+3| %.1e, singlet fidelity 1-%.1e, spectrum err %.1e", e_err, 1.0 - fid,
                spec_err)};
}

Outcome light_cone_gradients() {
    Rng rng(derive_seed(kSeed, Stream::Experiment, 3));
    double worst = 0.0;
    long outside = 0;
    for (int k = 0; k < 200; ++k) {
        const int n = 2 * (1 + k % 4);
        const auto c = random_circuit(n, rng);
        const int locality = 1 + static_cast<int>(rng.uniform() * std::min(n, 3));
        std::vector<int> qubits(static_cast<std::size_t>(n));
        for (int q = 0; q < n; ++q) {
            qubits[static_cast<std::size_t>(q)] = q;
        }
        std::vector<PauliString::Factor> factors;
        for (int f = 0; f < locality; ++f) {
            const auto pick = static_cast<std::size_t>(rng.uniform() * static_cast<double>(qubits.size()));
            const auto axis = static_cast<int>(rng.uniform() * 3);
            factors.emplace_back(qubits[pick], axis == 0 ? Pauli::X : axis == 1 ? Pauli::Y : Pauli::Z);
            qubits.erase(qubits.begin() + static_cast<std::ptrdiff_t>(pick));
        }
        PauliSum obs;
        obs.terms.emplace_back(1.0, factors);
        const auto cone = light_cone(c, obs.terms[0]);
        const auto p = random_params(c, rng);
        const auto psi = random_state(n, rng);
        const auto grad = model_value_and_gradient_adjoint(c, p, psi, obs).second;
        for (int j = 0; j < c.num_params; ++j) {
            if (!std::binary_search(cone.params.begin(), cone.params.end(), j)) {
                worst = std::max(worst, std::abs(grad[static_cast<std::size_t>(j)]));
                ++outside;
            }
        }
    }
    return {worst <= 1e-12 && outside > 0,
            fmt("max |grad| outside cone %.1e over %ld parameters (<=1e-12)", worst, outside)};
}

Outcome initial_loss_bound() {
    const int n = 8;
    const double delta = 1.0 / 64;
    const double kappa = auto_kappa(delta, 0.05, n);
    const auto c = build_ala(n, 4, 2, 2);
    const auto obs = z_sum_observable(n, std::sqrt(n));
    const auto data = generate_dataset(make_lattice(2, 4), obs, 80, 1, delta, kSeed).first;
    const double xi = c.num_params;
    double worst_ratio = 0.0;
    for (int k = 0; k < 50; ++k) {
        const auto p = init_params(c, kappa, derive_seed(kSeed, Stream::ParamInit, 100 + k));
        const double l0 = loss(c, p, data);
        const double b = 2 * delta * obs.operator_norm_bound() + std::sqrt(xi) * norm(p.values);
        worst_ratio = std::max(worst_ratio, l0 / (0.5 * b * b));
    }
    return {worst_ratio <= 1.0,
            fmt("max L(theta0)/bound %.3e over 50 initializations (<=1)", worst_ratio)};
}

Outcome linearized_dynamics() {
    double worst_lib = 0.0;
    double worst_eig = 0.0;
    int bound_failures = 0;
    const auto c = build_ala(4, 2, 2, 2);
    const auto obs = z_sum_observable(4, 2.0);
    for (int k = 0; k < 20; ++k) {
        const auto m = static_cast<std::size_t>(5 + k % 16);
        const auto data =
            generate_dataset(make_lattice(2, 2), obs, m, 1, 1.0 / 16, derive_seed(kSeed, Stream::Experiment, 500 + k)).first;
        const auto p = init_params(c, 1.0, derive_seed(kSeed, Stream::ParamInit, 500 + k));
        const auto k0 = tangent_kernel(c, p, data);
        const auto spec = kernel_spectrum(k0);
        const double eta = 1.0 / spec.lambda_max();
        const auto f0 = predictions(c, p, data);
        const auto y = data.labels();
        const auto run = linearized_trajectory(k0, f0, y, eta, 500);

        const Eigen::VectorXd f0v = Eigen::Map<const Eigen::VectorXd>(f0.data(), static_cast<Eigen::Index>(m));
        const Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(m));
        for (int t = 0; t <= 500; ++t) {
            const auto &ft = run.predictions[static_cast<std::size_t>(t)];
            worst_lib = std::max(worst_lib, (ft - linearized_closed_form(k0, f0, y, eta, t)).cwiseAbs().maxCoeff());
            Eigen::VectorXd decay(static_cast<Eigen::Index>(m));
            for (Eigen::Index i = 0; i < decay.size(); ++i) {
                decay(i) = std::pow(1.0 - eta * spec.eigenvalues(i), t);
            }
            const Eigen::VectorXd want =
                spec.eigenvectors * decay.asDiagonal() * spec.eigenvectors.transpose() * (f0v - yv) + yv;
            worst_eig = std::max(worst_eig, (ft - want).cwiseAbs().maxCoeff());
        }
        if (!convergence_bound_check(spec, eta, run.losses[0], run.losses).holds) {
            ++bound_failures;
        }
    }
    return {worst_lib <= 1e-8 && worst_eig <= 1e-8 && bound_failures == 0,
            fmt("recurrence vs closed form %.1e, vs eigenbasis %.1e (<=1e-8); bound violated in %d/20 runs",
                worst_lib, worst_eig, bound_failures)};
}

ExperimentConfig config(const json &doc) { return config_from_json(doc); }

Outcome kernel_concentration() {
    const auto start = Clock::now();
    const auto rows = run_concentration(config({{"experiment", "kernel-concentration"}, {"seed", kSeed}}));
    const double secs = seconds_since(start);
    double v4 = 0.0;
    double v12 = 0.0;
    for (const auto &r : rows) {
        if (r.n == 4) {
            v4 = r.variance;
        } else if (r.n == 12) {
            v12 = r.variance;
        }
    }
    return {v12 < v4 && secs < 600.0,
            fmt("Var K at n=4 %.3e, n=12 %.3e, %.1fs (<600s)", v4, v12, secs)};
}

Outcome lazy_training() {
    const auto res = run_lazy_training(config({{"experiment", "lazy-training"},
                                               {"seed", kSeed},
                                               {"T", 100},
                                               {"M_train", 20},
                                               {"M_test", 1},
                                               {"eta", "inv-lambda-max"},
                                               {"sweep", {{"ns", {4, 8, 12}}}}}));
    std::map<int, double> med;
    for (const auto &[n, report] : res.per_n) {
        med[n] = report.pooled.median;
    }
    return {med.at(12) < med.at(4),
            fmt("median per-step |dK| n=4 %.3e, n=8 %.3e, n=12 %.3e", med.at(4), med.at(8),
                med.at(12))};
}

Outcome lin_vs_true() {
    const auto res = run_lin_vs_true(config({{"experiment", "lin-vs-true"},
                                             {"seed", kSeed},
                                             {"lattice", {{"rows", 2}, {"cols", 4}}},
                                             {"ansatz", {{"m", 4}, {"r", 2}, {"L", 2}}},
                                             {"T", 100},
                                             {"M_train", 20},
                                             {"eta", "inv-lambda-max"}}));
    const auto &s = res.gap.series;
    bool nonneg = true;
    double worst = 0.0;
    for (const auto &p : s) {
        nonneg = nonneg && p.gap >= 0.0;
        if (p.t > 0 && p.envelope > 0.0) {
            worst = std::max(worst, p.gap / p.envelope);
        } else if (p.t > 0 && p.gap > 0.0) {
            worst = INFINITY;
        }
    }
    const double first = res.trace.records.front().loss;
    const double last = res.trace.records.back().loss;
    const bool ok = s.size() == 101 && s.front().gap == 0.0 && nonneg && worst <= 10.0 &&
                    last < 0.25 * first;
    return {ok, fmt("gap(0) %.1e, nonnegative %s, max gap/envelope %.2f (<=10), final/initial loss %.4f (<0.25)",
                    s.front().gap, nonneg ? "yes" : "no", worst, last / first)};
}

Outcome generalization() {
    const auto start = Clock::now();
    const auto res = run_generalization(config({{"experiment", "generalization"},
                                                {"seed", kSeed},
                                                {"lattice", {{"rows", 2}, {"cols", 4}}},
                                                {"ansatz", {{"m", 4}, {"r", 2}, {"L", 2}}},
                                                {"eta", "inv-lambda-max"},
                                                {"sweep", {{"Ms", {10, 20, 40}}, {"seeds", 10}}}}));
    const double secs = seconds_since(start);
    bool monotone = true;
    std::string medians;
    for (std::size_t i = 0; i < res.median_by_M.size(); ++i) {
        medians += fmt("%sM=%zu %.3e", i ? ", " : "", res.median_by_M[i].first, res.median_by_M[i].second);
        if (i > 0 && res.median_by_M[i].second > res.median_by_M[i - 1].second) {
            monotone = false;
        }
    }
    return {monotone && secs < 1800.0, fmt("median gen error %s, %.1fs (<1800s)", medians.c_str(), secs)};
}

std::string slurp(const fs::path &p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// Blanks the wallclock_ms column of a trace so only deterministic columns remain.
std::string mask_wallclock(const std::string &csv) {
    std::istringstream in(csv);
    std::string out;
    std::string line;
    while (std::getline(in, line)) {
        out += line.substr(0, line.rfind(',')) + "\n";
    }
    return out;
}

std::map<std::string, std::string> csv_bodies(const fs::path &dir) {
    std::map<std::string, std::string> out;
    for (const auto &e : fs::recursive_directory_iterator(dir)) {
        if (e.path().extension() == ".csv") {
            auto body = slurp(e.path());
            if (e.path().filename() == "trace.csv") {
                body = mask_wallclock(body);
            }
            out[fs::relative(e.path(), dir).string()] = body;
        }
    }
    return out;
}

Outcome reproducibility() {
    const json base = {{"seed", kSeed},
                       {"lattice", {{"rows", 2}, {"cols", 3}}},
                       {"ansatz", {{"m", 2}, {"r", 2}, {"L", 2}}},
                       {"T", 20},
                       {"M_train", 8},
                       {"M_test", 4},
                       {"eta", "inv-lambda-max"},
                       {"sweep", {{"ns", {4, 6}}, {"trials", 10}, {"Ms", {4, 8}}, {"seeds", 3}}}};
    const auto root = fs::temp_directory_path() / "qntk_acceptance_repro";
    int compared = 0;
    std::string mismatch;
    for (const char *name : {"train", "kernel-concentration", "lazy-training", "lin-vs-true", "generalization"}) {
        std::vector<std::map<std::string, std::string>> runs;
        for (int threads : {1, 1, 4}) {
            json doc = base;
            doc["experiment"] = name;
            doc["threads"] = threads;
            doc["out"] = (root / fmt("%s_%zu", name, runs.size())).string();
            fs::remove_all(doc["out"].get<std::string>());
            (void)run_experiment(config(doc));
            runs.push_back(csv_bodies(doc["out"].get<std::string>()));
        }
        for (std::size_t i = 1; i < runs.size(); ++i) {
            if (runs[i] != runs[0] || runs[0].empty()) {
                mismatch += std::string(mismatch.empty() ? "" : ",") + name;
            }
        }
        compared += static_cast<int>(runs[0].size());
    }
    fs::remove_all(root);
    return {mismatch.empty(),
            mismatch.empty() ? fmt("%d csv files identical across repeat runs and 1 vs 4 threads", compared)
                             : "mismatch in " + mismatch};
}

} // namespace

int main() {
    const std::pair<const char *, std::function<Outcome()>> criteria[] = {
        {"gradient methods agree", gradients_agree},
        {"two-qubit Heisenberg ground state", two_qubit_heisenberg},
        {"light-cone gradients vanish", light_cone_gradients},
        {"initial loss bound", initial_loss_bound},
        {"linearized dynamics and convergence bound", linearized_dynamics},
        {"kernel concentration", kernel_concentration},
        {"lazy training", lazy_training},
        {"linearized vs true loss", lin_vs_true},
        {"generalization vs M", generalization},
        {"reproducibility", reproducibility},
    };
    int failures = 0;
    int index = 0;
    for (const auto &[name, check] : criteria) {
        ++index;
        Outcome o;
        try {
            o = check();
        } catch (const std::exception &e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += o.pass ? 0 : 1;
        std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", index, name,
                    o.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
