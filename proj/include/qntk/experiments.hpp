#pragma once

#include "qntk/ansatz.hpp"
#include "qntk/dataset.hpp"
#include "qntk/error.hpp"
#include "qntk/ntk.hpp"
#include "qntk/training.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace qntk {

inline constexpr const char *kVersion = "0.1.0";

/// Invalid configuration. Messages carry the offending field and, when the
/// config came from a file, its line and column.
class ConfigError : public DomainError {
  public:
    using DomainError::DomainError;
};

enum class Experiment { GenData, Train, KernelConcentration, LazyTraining, LinVsTrue, Generalization };

const char *to_string(Experiment e);
Experiment experiment_from_string(const std::string &s);

struct ExperimentConfig {
    Experiment experiment = Experiment::Train;
    int rows = 2;
    int cols = 4;
    int m = 2;
    int r = 2;
    int L = 1;
    std::optional<double> delta;  // empty: 1/n^2
    std::optional<double> kappa;  // empty: delta sqrt(gamma) / n
    EtaRule eta;
    double gamma = 0.05;
    int T = 100;
    std::size_t m_train = 80;
    std::size_t m_test = 20;
    std::uint64_t seed = 0;
    double obs_scale = 0.0; // 0: sqrt(n)
    int threads = 1;
    GradientMethod gradient_method = GradientMethod::Adjoint;
    std::string out = "out";
    int solver_cap = kDefaultSolverCap;
    bool save_dataset = false;
    bool save_amplitudes = true;
    int param_stride = 0;

    // Sweeps.
    std::vector<int> ns{4, 8, 12};
    int trials = 100;
    std::vector<std::size_t> Ms{10, 20, 40};
    int seeds = 10;
    int T_cap = 100;

    [[nodiscard]] int num_qubits() const { return rows * cols; }
    [[nodiscard]] double delta_for(int n) const;
    [[nodiscard]] double kappa_for(int n) const;
};

/// Applies a dotted KEY=VAL override to a raw config document. VAL is read
/// as JSON when it parses, otherwise as a string.
void apply_override(nlohmann::json &doc, const std::string &assignment);

/// Parses JSON text; syntax errors report line and column.
nlohmann::json parse_config_text(const std::string &text);

/// Validates every field and the module preconditions they imply. `text`
/// (the original file contents) is only used to locate fields in messages.
ExperimentConfig config_from_json(const nlohmann::json &doc, const std::string &text = {});

/// Canonical resolved form, written into the manifest.
nlohmann::json config_to_json(const ExperimentConfig &c);

/// Human-readable account of the auto rules as they resolve for `c`.
std::string describe_resolution(const ExperimentConfig &c);

std::uint64_t fnv1a64(const std::string &bytes);

struct TrainResult {
    Dataset train;
    Dataset test;
    AlaCircuit circuit;
    TrainingTrace trace;
};

struct LazyResult {
    std::vector<std::pair<int, DriftReport>> per_n;
};

struct LinVsTrueResult {
    Dataset train;
    TrainingTrace trace;
    Spectrum spectrum;
    LinearizedRun lin;
    GapReport gap;
};

struct GeneralizationRow {
    std::size_t M = 0;
    int seed_index = 0;
    int T = 0;
    double eta = 0.0;
    double train_loss = 0.0;
    double gen_error = 0.0;
    BoundDiagnostics bounds;
};

struct GeneralizationResult {
    std::vector<GeneralizationRow> rows;
    std::vector<std::pair<std::size_t, double>> median_by_M;
};

TrainResult run_train(const ExperimentConfig &c);
std::vector<ConcentrationRow> run_concentration(const ExperimentConfig &c);
LazyResult run_lazy_training(const ExperimentConfig &c);
LinVsTrueResult run_lin_vs_true(const ExperimentConfig &c);
GeneralizationResult run_generalization(const ExperimentConfig &c);

/// Runs the configured experiment, writes its files and manifest.json into
/// `c.out`, and returns the manifest.
nlohmann::json run_experiment(const ExperimentConfig &c);

} // namespace qntk
