#include "qntk/experiments.hpp"

#include "qntk/random.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

namespace qntk {

using nlohmann::json;
namespace fs = std::filesystem;

const char *to_string(Experiment e) {
    switch (e) {
    case Experiment::GenData: return "gen-data";
    case Experiment::Train: return "train";
    case Experiment::KernelConcentration: return "kernel-concentration";
    case Experiment::LazyTraining: return "lazy-training";
    case Experiment::LinVsTrue: return "lin-vs-true";
    case Experiment::Generalization: return "generalization";
    }
    return "?";
}

Experiment experiment_from_string(const std::string &s) {
    for (auto e : {Experiment::GenData, Experiment::Train, Experiment::KernelConcentration,
                   Experiment::LazyTraining, Experiment::LinVsTrue, Experiment::Generalization}) {
        if (s == to_string(e)) {
            return e;
        }
    }
    throw ConfigError("unknown experiment '" + s + "'");
}

double ExperimentConfig::delta_for(int n) const {
    return delta ? *delta : 1.0 / (static_cast<double>(n) * n);
}

double ExperimentConfig::kappa_for(int n) const {
    return kappa ? *kappa : auto_kappa(delta_for(n), gamma, n);
}

void apply_override(json &doc, const std::string &assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override '" + assignment + "' is not of the form KEY=VAL");
    }
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) {
        value = raw;
    }
    json *node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot - start);
        if (part.empty()) {
            throw ConfigError("override key '" + key + "' has an empty component");
        }
        if (!node->is_object()) {
            throw ConfigError("override key '" + key + "' descends into a non-object");
        }
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        node = &(*node)[part];
        if (node->is_null()) {
            *node = json::object();
        }
        start = dot + 1;
    }
}

namespace {

std::pair<std::size_t, std::size_t> line_col(const std::string &text, std::size_t offset) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

} // namespace

json parse_config_text(const std::string &text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error &e) {
        const auto [line, col] = line_col(text, e.byte == 0 ? 0 : e.byte - 1);
        std::string what = e.what();
        const auto pos = what.find(": ");
        throw ConfigError("line " + std::to_string(line) + ", column " + std::to_string(col) +
                          ": " + (pos == std::string::npos ? what : what.substr(pos + 2)));
    }
}

namespace {

class Reader {
  public:
    Reader(const json &doc, const std::string &text) : doc_(doc), text_(text) {}

    [[noreturn]] void fail(const std::string &path, const std::string &msg) const {
        throw ConfigError(where(path) + path + ": " + msg);
    }

    const json *find(const std::string &path) const {
        const json *node = &doc_;
        std::size_t start = 0;
        while (true) {
            const auto dot = path.find('.', start);
            const std::string part = path.substr(start, dot - start);
            if (!node->is_object() || !node->contains(part)) {
                return nullptr;
            }
            node = &(*node)[part];
            if (dot == std::string::npos) {
                return node;
            }
            start = dot + 1;
        }
    }

    template <class T> T integer(const std::string &path, T fallback, T lo, T hi) const {
        const json *v = find(path);
        if (!v) {
            return fallback;
        }
        if (!v->is_number_integer()) {
            fail(path, "expected an integer");
        }
        if (v->is_number_unsigned()) {
            const auto u = v->get<std::uint64_t>();
            if (u > static_cast<std::uint64_t>(hi)) {
                fail(path, "must be at most " + std::to_string(hi));
            }
            const T x = static_cast<T>(u);
            if (x < lo) {
                fail(path, "must be at least " + std::to_string(lo));
            }
            return x;
        }
        const auto s = v->get<std::int64_t>();
        if (s < static_cast<std::int64_t>(lo)) {
            fail(path, "must be at least " + std::to_string(lo));
        }
        if (static_cast<std::uint64_t>(s) > static_cast<std::uint64_t>(hi)) {
            fail(path, "must be at most " + std::to_string(hi));
        }
        return static_cast<T>(s);
    }

    double number(const std::string &path, double fallback) const {
        const json *v = find(path);
        if (!v) {
            return fallback;
        }
        if (!v->is_number()) {
            fail(path, "expected a number");
        }
        const double x = v->get<double>();
        if (!std::isfinite(x)) {
            fail(path, "must be finite");
        }
        return x;
    }

    bool boolean(const std::string &path, bool fallback) const {
        const json *v = find(path);
        if (!v) {
            return fallback;
        }
        if (!v->is_boolean()) {
            fail(path, "expected true or false");
        }
        return v->get<bool>();
    }

    std::string string(const std::string &path, const std::string &fallback) const {
        const json *v = find(path);
        if (!v) {
            return fallback;
        }
        if (!v->is_string()) {
            fail(path, "expected a string");
        }
        return v->get<std::string>();
    }

    void only_keys(const std::string &path, const std::set<std::string> &allowed) const {
        const json *node = path.empty() ? &doc_ : find(path);
        if (!node) {
            return;
        }
        if (!node->is_object()) {
            fail(path.empty() ? "config" : path, "expected an object");
        }
        for (const auto &[k, _] : node->items()) {
            if (!allowed.count(k)) {
                fail(path.empty() ? k : path + "." + k, "unknown field");
            }
        }
    }

  private:
    std::string where(const std::string &path) const {
        if (text_.empty()) {
            return "";
        }
        const auto leaf = path.substr(path.rfind('.') == std::string::npos ? 0 : path.rfind('.') + 1);
        const auto pos = text_.find("\"" + leaf + "\"");
        if (pos == std::string::npos) {
            return "";
        }
        const auto [line, col] = line_col(text_, pos);
        return "line " + std::to_string(line) + ", column " + std::to_string(col) + ": ";
    }

    const json &doc_;
    const std::string &text_;
};

template <class T>
std::vector<T> int_list(const Reader &rd, const std::string &path, std::vector<T> fallback,
                        T lo) {
    const json *v = rd.find(path);
    if (!v) {
        return fallback;
    }
    if (!v->is_array() || v->empty()) {
        rd.fail(path, "expected a non-empty list of integers");
    }
    std::vector<T> out;
    for (const auto &e : *v) {
        if (!e.is_number_integer() || e.get<std::int64_t>() < static_cast<std::int64_t>(lo)) {
            rd.fail(path, "entries must be integers >= " + std::to_string(lo));
        }
        out.push_back(e.get<T>());
    }
    return out;
}

void check_ansatz(const Reader &rd, const ExperimentConfig &c, int n) {
    if (c.m % 2 != 0) {
        rd.fail("ansatz.m", "block width must be even, since alternate layers are offset by "
                            "half a block (got " + std::to_string(c.m) + ")");
    }
    try {
        (void)build_ala(n, c.m, c.r, c.L);
    } catch (const DomainError &e) {
        rd.fail("ansatz", std::string(e.what()) + " (n=" + std::to_string(n) + ")");
    }
}

void check_capacity(const ExperimentConfig &c, int n) {
    if (n > c.solver_cap) {
        throw CapacityError("dense ground-state solver is capped at " +
                            std::to_string(c.solver_cap) + " qubits; n=" + std::to_string(n) +
                            " requested");
    }
}

} // namespace

ExperimentConfig config_from_json(const json &doc, const std::string &text) {
    if (!doc.is_object()) {
        throw ConfigError("config must be a JSON object");
    }
    Reader rd(doc, text);
    rd.only_keys("", {"experiment", "lattice", "ansatz", "delta", "kappa", "eta", "eta_scale",
                      "gamma", "T", "M_train", "M_test", "seed", "observable", "threads",
                      "gradient_method", "out", "solver_cap", "save_dataset", "save_amplitudes",
                      "param_stride", "sweep"});
    rd.only_keys("lattice", {"rows", "cols"});
    rd.only_keys("ansatz", {"m", "r", "L"});
    rd.only_keys("observable", {"kind", "scale"});
    rd.only_keys("sweep", {"ns", "trials", "Ms", "seeds", "T_cap"});

    ExperimentConfig c;
    if (!rd.find("experiment")) {
        rd.fail("experiment", "missing required field");
    }
    try {
        c.experiment = experiment_from_string(rd.string("experiment", ""));
    } catch (const ConfigError &e) {
        rd.fail("experiment", e.what());
    }
    if (!rd.find("seed")) {
        rd.fail("seed", "missing required field");
    }
    c.seed = rd.integer<std::uint64_t>("seed", 0, 0, UINT64_MAX);

    c.rows = rd.integer<int>("lattice.rows", c.rows, 1, 64);
    c.cols = rd.integer<int>("lattice.cols", c.cols, 1, 64);
    c.m = rd.integer<int>("ansatz.m", c.m, 2, 64);
    c.r = rd.integer<int>("ansatz.r", c.r, 1, 1000);
    c.L = rd.integer<int>("ansatz.L", c.L, 1, 1000);
    c.solver_cap = rd.integer<int>("solver_cap", c.solver_cap, 1, 20);

    if (const json *d = rd.find("delta")) {
        if (d->is_string()) {
            if (d->get<std::string>() != "1/n^2") {
                rd.fail("delta", "expected a number or \"1/n^2\"");
            }
        } else {
            c.delta = rd.number("delta", 0.0);
            if (!(*c.delta >= 0.0 && *c.delta < 1.0)) {
                rd.fail("delta", "must lie in [0, 1)");
            }
        }
    }
    c.gamma = rd.number("gamma", c.gamma);
    if (!(c.gamma > 0.0 && c.gamma < 1.0)) {
        rd.fail("gamma", "must lie in (0, 1)");
    }
    if (const json *k = rd.find("kappa")) {
        if (k->is_string()) {
            if (k->get<std::string>() != "auto") {
                rd.fail("kappa", "expected a number or \"auto\"");
            }
        } else {
            c.kappa = rd.number("kappa", 0.0);
        }
    } else if (c.experiment == Experiment::KernelConcentration) {
        c.kappa = 1.0;
    }
    if (c.kappa && !(*c.kappa > 0.0 && *c.kappa <= 1.0)) {
        rd.fail("kappa", "must lie in (0, 1]");
    }

    const double eta_scale = rd.number("eta_scale", 1.0);
    if (!(eta_scale > 0.0)) {
        rd.fail("eta_scale", "must be positive");
    }
    if (const json *e = rd.find("eta")) {
        if (e->is_string()) {
            const auto s = e->get<std::string>();
            if (s == "auto") {
                c.eta = {EtaRule::Kind::Auto, 1.0};
            } else if (s == "inv-lambda-max") {
                c.eta = {EtaRule::Kind::InverseLambdaMax, eta_scale};
            } else {
                rd.fail("eta", "expected a number, \"auto\" or \"inv-lambda-max\"");
            }
        } else {
            c.eta = {EtaRule::Kind::Fixed, rd.number("eta", 0.0)};
            if (c.eta.value < 0.0) {
                rd.fail("eta", "must be non-negative");
            }
        }
    }

    c.T = rd.integer<int>("T", c.T, 0, 1000000);
    c.m_train = rd.integer<std::size_t>("M_train", c.m_train, 1, 1000000);
    c.m_test = rd.integer<std::size_t>("M_test", c.m_test, 1, 1000000);
    c.threads = rd.integer<int>("threads", c.threads, 0, 1024);
    c.param_stride = rd.integer<int>("param_stride", c.param_stride, 0, 1000000);
    c.save_dataset = rd.boolean("save_dataset", c.save_dataset);
    c.save_amplitudes = rd.boolean("save_amplitudes", c.save_amplitudes);
    c.out = rd.string("out", c.out);
    if (c.out.empty()) {
        rd.fail("out", "output directory must not be empty");
    }
    try {
        c.gradient_method =
            gradient_method_from_string(rd.string("gradient_method", to_string(c.gradient_method)));
    } catch (const DomainError &e) {
        rd.fail("gradient_method", e.what());
    }
    if (rd.string("observable.kind", "z-sum") != "z-sum") {
        rd.fail("observable.kind", "only \"z-sum\" is supported");
    }
    if (const json *s = rd.find("observable.scale")) {
        if (s->is_string()) {
            if (s->get<std::string>() != "sqrt(n)") {
                rd.fail("observable.scale", "expected a number or \"sqrt(n)\"");
            }
        } else {
            c.obs_scale = rd.number("observable.scale", 0.0);
            if (!(c.obs_scale > 0.0)) {
                rd.fail("observable.scale", "must be positive");
            }
        }
    }

    c.ns = int_list<int>(rd, "sweep.ns", c.ns, 1);
    c.trials = rd.integer<int>("sweep.trials", c.trials, 1, 1000000);
    c.Ms = int_list<std::size_t>(rd, "sweep.Ms", c.Ms, 1);
    c.seeds = rd.integer<int>("sweep.seeds", c.seeds, 1, 100000);
    c.T_cap = rd.integer<int>("sweep.T_cap", c.T_cap, 0, 1000000);

    // Module preconditions, checked before any compute starts.
    std::vector<int> sizes;
    if (c.experiment == Experiment::KernelConcentration ||
        c.experiment == Experiment::LazyTraining) {
        for (int n : c.ns) {
            if (n % c.rows != 0) {
                rd.fail("sweep.ns", "n=" + std::to_string(n) + " is not a multiple of " +
                                        "lattice.rows=" + std::to_string(c.rows));
            }
            sizes.push_back(n);
        }
    } else {
        sizes.push_back(c.num_qubits());
    }
    for (int n : sizes) {
        if (c.experiment != Experiment::GenData) {
            check_ansatz(rd, c, n);
        }
        if (!c.kappa) {
            (void)c.kappa_for(n);
        }
    }
    for (int n : sizes) {
        check_capacity(c, n);
    }
    return c;
}

json config_to_json(const ExperimentConfig &c) {
    json eta;
    switch (c.eta.kind) {
    case EtaRule::Kind::Auto: eta = "auto"; break;
    case EtaRule::Kind::InverseLambdaMax: eta = "inv-lambda-max"; break;
    case EtaRule::Kind::Fixed: eta = c.eta.value; break;
    }
    return {{"experiment", to_string(c.experiment)},
            {"seed", c.seed},
            {"lattice", {{"rows", c.rows}, {"cols", c.cols}}},
            {"ansatz", {{"m", c.m}, {"r", c.r}, {"L", c.L}}},
            {"delta", c.delta ? json(*c.delta) : json("1/n^2")},
            {"kappa", c.kappa ? json(*c.kappa) : json("auto")},
            {"eta", eta},
            {"eta_scale", c.eta.kind == EtaRule::Kind::InverseLambdaMax ? c.eta.value : 1.0},
            {"gamma", c.gamma},
            {"T", c.T},
            {"M_train", c.m_train},
            {"M_test", c.m_test},
            {"observable",
             {{"kind", "z-sum"},
              {"scale", c.obs_scale > 0.0 ? json(c.obs_scale) : json("sqrt(n)")}}},
            {"threads", c.threads},
            {"gradient_method", to_string(c.gradient_method)},
            {"out", c.out},
            {"solver_cap", c.solver_cap},
            {"save_dataset", c.save_dataset},
            {"save_amplitudes", c.save_amplitudes},
            {"param_stride", c.param_stride},
            {"sweep",
             {{"ns", c.ns}, {"trials", c.trials}, {"Ms", c.Ms}, {"seeds", c.seeds},
              {"T_cap", c.T_cap}}}};
}

std::string describe_resolution(const ExperimentConfig &c) {
    std::ostringstream os;
    std::vector<int> sizes = (c.experiment == Experiment::KernelConcentration ||
                              c.experiment == Experiment::LazyTraining)
                                 ? c.ns
                                 : std::vector<int>{c.num_qubits()};
    os << "experiment: " << to_string(c.experiment) << "\n";
    for (int n : sizes) {
        os << "n=" << n << ":\n";
        os << "  delta = " << format_double(c.delta_for(n))
           << (c.delta ? " (fixed)" : " (rule 1/n^2)") << "\n";
        os << "  kappa = " << format_double(c.kappa_for(n))
           << (c.kappa ? " (fixed)" : " (rule delta*sqrt(gamma)/n, gamma=" +
                                          format_double(c.gamma) + ")")
           << "\n";
        os << "  observable = sum_i Z_i / "
           << format_double(c.obs_scale > 0.0 ? c.obs_scale : std::sqrt(n)) << "\n";
    }
    switch (c.eta.kind) {
    case EtaRule::Kind::Auto:
        os << "eta = lambda_min(K0)/M^2, clamped to [1e-6, 1/lambda_max(K0)]; resolved at "
              "training start\n";
        break;
    case EtaRule::Kind::InverseLambdaMax:
        os << "eta = " << format_double(c.eta.value)
           << " / lambda_max(K0); resolved at training start\n";
        break;
    case EtaRule::Kind::Fixed: os << "eta = " << format_double(c.eta.value) << " (fixed)\n"; break;
    }
    if (c.experiment == Experiment::Generalization) {
        os << "T = min(ceil(log_{1-eta lambda_min}(1/M)), " << c.T_cap
           << "), falling back to the cap when lambda_min <= 0\n";
    } else {
        os << "T = " << c.T << "\n";
    }
    return os.str();
}

std::uint64_t fnv1a64(const std::string &bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

PauliSum observable_for(const ExperimentConfig &c, int n) {
    return z_sum_observable(n, c.obs_scale > 0.0 ? c.obs_scale : std::sqrt(n));
}

std::pair<Dataset, Dataset> dataset_for(const ExperimentConfig &c, int rows, int n,
                                        std::size_t m_train, std::size_t m_test,
                                        std::uint64_t seed) {
    return generate_dataset(make_lattice(rows, n / rows), observable_for(c, n), m_train, m_test,
                            c.delta_for(n), seed, {c.threads, c.solver_cap});
}

TrainingConfig training_config(const ExperimentConfig &c, int n, std::uint64_t seed) {
    TrainingConfig tc;
    tc.eta = c.eta;
    tc.T = c.T;
    tc.kappa = c.kappa_for(n);
    tc.gamma = c.gamma;
    tc.seed = seed;
    tc.gradient_method = c.gradient_method;
    tc.threads = c.threads;
    tc.param_stride = c.param_stride;
    return tc;
}

double median(std::vector<double> v) { return quantiles(std::move(v)).median; }

} // namespace

TrainResult run_train(const ExperimentConfig &c) {
    const int n = c.num_qubits();
    auto [train_set, test_set] = dataset_for(c, c.rows, n, c.m_train, c.m_test, c.seed);
    auto circuit = build_ala(n, c.m, c.r, c.L);
    auto trace = qntk::train(circuit, train_set, training_config(c, n, c.seed));
    return {std::move(train_set), std::move(test_set), std::move(circuit), std::move(trace)};
}

std::vector<ConcentrationRow> run_concentration(const ExperimentConfig &c) {
    ConcentrationSettings s;
    s.ns = c.ns;
    s.rows = c.rows;
    s.trials = c.trials;
    s.seed = c.seed;
    s.m = c.m;
    s.r = c.r;
    s.L = c.L;
    s.delta = c.delta ? *c.delta : -1.0;
    s.obs_scale = c.obs_scale;
    s.threads = c.threads;
    s.solver_cap = c.solver_cap;
    if (c.kappa) {
        s.kappa = *c.kappa;
        return concentration_stats(s);
    }
    // The auto rule depends on n, so each size runs on its own.
    std::vector<ConcentrationRow> rows;
    for (int n : c.ns) {
        s.ns = {n};
        s.kappa = c.kappa_for(n);
        const auto one = concentration_stats(s);
        rows.push_back(one.front());
    }
    return rows;
}

LazyResult run_lazy_training(const ExperimentConfig &c) {
    LazyResult out;
    for (int n : c.ns) {
        const auto data = dataset_for(c, c.rows, n, c.m_train, c.m_test, c.seed).first;
        const auto circuit = build_ala(n, c.m, c.r, c.L);
        auto report = lazy_drift(circuit, data, training_config(c, n, c.seed), c.T);
        out.per_n.emplace_back(n, std::move(report));
    }
    return out;
}

LinVsTrueResult run_lin_vs_true(const ExperimentConfig &c) {
    const int n = c.num_qubits();
    LinVsTrueResult out;
    out.train = dataset_for(c, c.rows, n, c.m_train, c.m_test, c.seed).first;
    const auto circuit = build_ala(n, c.m, c.r, c.L);
    out.trace = qntk::train(circuit, out.train, training_config(c, n, c.seed));
    if (out.trace.aborted) {
        throw NumericalError("true training diverged: " + out.trace.diagnostic);
    }
    const auto k0 = tangent_kernel(circuit, out.trace.initial_params, out.train,
                                   c.gradient_method, c.threads);
    out.spectrum = kernel_spectrum(k0);
    out.lin = linearized_trajectory(k0, out.trace.records.front().predictions,
                                    out.train.labels(), out.trace.eta, c.T);
    out.gap = loss_gap(out.trace, out.lin.losses, out.spectrum, out.trace.eta, out.train.delta, n,
                       static_cast<int>(out.train.observable.terms.size()));
    return out;
}

GeneralizationResult run_generalization(const ExperimentConfig &c) {
    const int n = c.num_qubits();
    const auto circuit = build_ala(n, c.m, c.r, c.L);
    const std::size_t m_max = *std::max_element(c.Ms.begin(), c.Ms.end());
    GeneralizationResult out;
    std::vector<std::vector<GeneralizationRow>> by_seed(static_cast<std::size_t>(c.seeds));
    for (int s = 0; s < c.seeds; ++s) {
        const auto seed = derive_seed(c.seed, Stream::Experiment, static_cast<std::uint64_t>(s));
        // Training sets for smaller M are prefixes of the largest one; the
        // test set is shared by every M.
        const auto [full, test] = dataset_for(c, c.rows, n, m_max, c.m_test, seed);
        const auto theta0 = init_params(circuit, c.kappa_for(n), seed);
        for (std::size_t M : c.Ms) {
            Dataset train_set = full;
            train_set.samples.resize(M);
            const auto spectrum = kernel_spectrum(
                tangent_kernel(circuit, theta0, train_set, c.gradient_method, c.threads));
            const double eta =
                resolve_eta(c.eta, spectrum.lambda_min(), spectrum.lambda_max(), M);
            GeneralizationRow row;
            row.M = M;
            row.seed_index = s;
            row.eta = eta;
            row.bounds = bound_diagnostics(spectrum, eta, M);
            row.T = row.bounds.t_star
                        ? static_cast<int>(std::min<long long>(*row.bounds.t_star, c.T_cap))
                        : c.T_cap;
            auto tc = training_config(c, n, seed);
            tc.T = row.T;
            tc.eta = {EtaRule::Kind::Fixed, eta};
            tc.initial_params = theta0;
            const auto trace = qntk::train(circuit, train_set, tc);
            if (trace.aborted) {
                throw NumericalError("training diverged at M=" + std::to_string(M) + ": " +
                                     trace.diagnostic);
            }
            row.train_loss = trace.records.back().loss;
            row.gen_error =
                generalization_error(circuit, trace.final_params, train_set, test, c.threads);
            by_seed[static_cast<std::size_t>(s)].push_back(row);
        }
    }
    for (std::size_t k = 0; k < c.Ms.size(); ++k) {
        std::vector<double> errs;
        for (const auto &rows : by_seed) {
            out.rows.push_back(rows[k]);
            errs.push_back(rows[k].gen_error);
        }
        out.median_by_M.emplace_back(c.Ms[k], median(errs));
    }
    return out;
}

namespace {

class OutputDir {
  public:
    explicit OutputDir(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

    template <class F> void write(const std::string &name, F &&emit) {
        const fs::path path = root_ / name;
        fs::create_directories(path.parent_path());
        std::ofstream f(path, std::ios::binary);
        if (!f) {
            throw std::runtime_error("cannot open " + path.string() + " for writing");
        }
        emit(f);
        f.close();
        if (!f) {
            throw std::runtime_error("failed writing " + path.string());
        }
        files_.push_back({{"name", name}, {"bytes", fs::file_size(path)}});
    }

    void write_json(const std::string &name, const json &doc) {
        write(name, [&](std::ostream &os) { os << doc.dump(2) << '\n'; });
    }

    [[nodiscard]] const json &files() const { return files_; }
    [[nodiscard]] const fs::path &root() const { return root_; }

  private:
    fs::path root_;
    json files_ = json::array();
};

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_params(OutputDir &dir, const TrainingTrace &trace) {
    dir.write_json("params_initial.json", params_to_json(trace.initial_params));
    dir.write_json("params_final.json", params_to_json(trace.final_params));
    for (const auto &[t, p] : trace.param_snapshots) {
        dir.write_json("params/theta_" + std::to_string(t) + ".json", params_to_json(p));
    }
}

} // namespace

json run_experiment(const ExperimentConfig &c) {
    const auto started = std::chrono::steady_clock::now();
    const std::string started_utc = utc_now();
    const json resolved = config_to_json(c);
    OutputDir dir(c.out);
    json summary = json::object();

    switch (c.experiment) {
    case Experiment::GenData: {
        const auto [train_set, test_set] =
            dataset_for(c, c.rows, c.num_qubits(), c.m_train, c.m_test, c.seed);
        dir.write_json("dataset.json", datasets_to_json(train_set, test_set, c.save_amplitudes));
        summary = {{"train_samples", train_set.size()},
                   {"test_samples", test_set.size()},
                   {"degenerate_samples",
                    std::count_if(train_set.samples.begin(), train_set.samples.end(),
                                  [](const Sample &s) { return s.degenerate; }) +
                        std::count_if(test_set.samples.begin(), test_set.samples.end(),
                                      [](const Sample &s) { return s.degenerate; })}};
        break;
    }
    case Experiment::Train: {
        const auto res = run_train(c);
        dir.write("trace.csv", [&](std::ostream &os) { write_trace_csv(os, res.trace); });
        write_params(dir, res.trace);
        dir.write_json("circuit.json", circuit_to_json(res.circuit));
        if (c.save_dataset) {
            dir.write_json("dataset.json",
                           datasets_to_json(res.train, res.test, c.save_amplitudes));
        }
        summary = {{"eta", res.trace.eta},
                   {"lambda_min0", res.trace.lambda_min0},
                   {"lambda_max0", res.trace.lambda_max0},
                   {"initial_loss", res.trace.records.front().loss},
                   {"final_loss", res.trace.records.back().loss},
                   {"retried", res.trace.retried},
                   {"aborted", res.trace.aborted},
                   {"generalization_error",
                    generalization_error(res.circuit, res.trace.final_params, res.train, res.test,
                                         c.threads)}};
        if (res.trace.aborted) {
            summary["diagnostic"] = res.trace.diagnostic;
        }
        break;
    }
    case Experiment::KernelConcentration: {
        const auto rows = run_concentration(c);
        dir.write("concentration.csv",
                  [&](std::ostream &os) { write_concentration_csv(os, rows); });
        for (const auto &r : rows) {
            summary["variance"][std::to_string(r.n)] = r.variance;
        }
        break;
    }
    case Experiment::LazyTraining: {
        const auto res = run_lazy_training(c);
        dir.write("drift.csv", [&](std::ostream &os) {
            bool header = true;
            for (const auto &[n, rep] : res.per_n) {
                write_drift_csv(os, n, rep, header);
                header = false;
            }
        });
        dir.write("drift_pooled.csv", [&](std::ostream &os) {
            bool header = true;
            for (const auto &[n, rep] : res.per_n) {
                write_drift_pooled_csv(os, n, rep, header);
                header = false;
            }
        });
        for (const auto &[n, rep] : res.per_n) {
            std::vector<double> medians;
            for (const auto &q : rep.per_step_stats) {
                medians.push_back(q.median);
            }
            summary["median_step_delta"][std::to_string(n)] =
                medians.empty() ? 0.0 : median(medians);
            summary["max_step_delta"][std::to_string(n)] = rep.max_delta;
        }
        break;
    }
    case Experiment::LinVsTrue: {
        const auto res = run_lin_vs_true(c);
        dir.write("trace.csv", [&](std::ostream &os) { write_trace_csv(os, res.trace); });
        dir.write("gap.csv", [&](std::ostream &os) { write_gap_csv(os, res.gap); });
        double max_gap = 0.0;
        for (const auto &p : res.gap.series) {
            max_gap = std::max(max_gap, p.gap);
        }
        summary = {{"eta", res.trace.eta},
                   {"eta_exceeds_stability", res.lin.eta_exceeds_stability},
                   {"initial_loss", res.trace.records.front().loss},
                   {"final_loss", res.trace.records.back().loss},
                   {"final_lin_loss", res.lin.losses.back()},
                   {"max_gap", max_gap},
                   {"fitted_constant", res.gap.fitted_constant},
                   {"envelope_scale", res.gap.scale}};
        break;
    }
    case Experiment::Generalization: {
        const auto res = run_generalization(c);
        dir.write("generalization.csv", [&](std::ostream &os) {
            os << "M,seed_index,T,eta,train_loss,gen_error\n";
            for (const auto &r : res.rows) {
                os << r.M << ',' << r.seed_index << ',' << r.T << ',' << format_double(r.eta)
                   << ',' << format_double(r.train_loss) << ',' << format_double(r.gen_error)
                   << '\n';
            }
        });
        dir.write("generalization_median.csv", [&](std::ostream &os) {
            os << "M,median_gen_error\n";
            for (const auto &[M, med] : res.median_by_M) {
                os << M << ',' << format_double(med) << '\n';
            }
        });
        dir.write("bounds.csv", [&](std::ostream &os) {
            std::vector<BoundDiagnostics> b;
            for (const auto &r : res.rows) {
                b.push_back(r.bounds);
            }
            write_bounds_csv(os, b);
        });
        for (const auto &[M, med] : res.median_by_M) {
            summary["median_gen_error"][std::to_string(M)] = med;
        }
        break;
    }
    }

    const double wall =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
            .count();
    char hash[17];
    std::snprintf(hash, sizeof(hash), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(resolved.dump())));
    json manifest = {
        {"tool", "qntk"},
        {"version", kVersion},
        {"versions",
         {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                        std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"compiler", __VERSION__},
          {"param_layout", kParamLayoutVersion},
          {"dataset_format", kDatasetFormat}}},
        {"experiment", to_string(c.experiment)},
        {"config", resolved},
        {"config_hash", std::string("fnv1a64:") + hash},
        {"started_utc", started_utc},
        {"wallclock_ms", wall},
        {"files", dir.files()},
        {"summary", summary}};
    std::ofstream f(dir.root() / "manifest.json", std::ios::binary);
    f << manifest.dump(2) << '\n';
    if (!f) {
        throw std::runtime_error("failed writing manifest.json");
    }
    return manifest;
}

} // namespace qntk
