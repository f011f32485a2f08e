#pragma once

#include "qntk/ansatz.hpp"
#include "qntk/dataset.hpp"
#include "qntk/training.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

namespace qntk {

/// M x M tangent kernel K(x_i, x_j) = (1/M) grad f(x_i) . grad f(x_j).
/// The 1/M prefactor is always included; every learning-rate rule and bound
/// in this library assumes it.
struct KernelMatrix {
    Eigen::MatrixXd entries;
    bool includes_1_over_M = true;

    [[nodiscard]] std::size_t size() const noexcept {
        return static_cast<std::size_t>(entries.rows());
    }
};

struct Spectrum {
    Eigen::VectorXd eigenvalues;  // ascending
    Eigen::MatrixXd eigenvectors; // columns, orthonormal

    [[nodiscard]] double lambda_min() const { return eigenvalues.size() ? eigenvalues(0) : 0.0; }
    [[nodiscard]] double lambda_max() const {
        return eigenvalues.size() ? eigenvalues(eigenvalues.size() - 1) : 0.0;
    }
};

/// Gram matrix of Jacobian rows with the 1/M prefactor; exactly symmetric.
KernelMatrix kernel_from_jacobian(const Eigen::MatrixXd &jacobian_rows);

KernelMatrix tangent_kernel(const AlaCircuit &circuit, const ParamTensor &params,
                            const Dataset &data,
                            GradientMethod method = GradientMethod::Adjoint, int threads = 1);

/// Symmetric eigendecomposition. Eigenvalues in [-1e-9, 0) are clamped to 0;
/// asymmetry above 1e-10 throws DomainError.
Spectrum kernel_spectrum(const KernelMatrix &k);

struct LinearizedRun {
    std::vector<Eigen::VectorXd> predictions; // t = 0..T
    std::vector<double> losses;               // (1/2M) |f(t) - y|^2
    bool eta_exceeds_stability = false;       // eta > 1/lambda_max
};

/// Iterates f(t+1) = f(t) - eta K0 (f(t) - y).
LinearizedRun linearized_trajectory(const KernelMatrix &k0, const std::vector<double> &f0,
                                    const std::vector<double> &y, double eta, int T);

/// Closed form (I - eta K0)^t (f0 - y) + y by explicit matrix powers.
Eigen::VectorXd linearized_closed_form(const KernelMatrix &k0, const std::vector<double> &f0,
                                       const std::vector<double> &y, double eta, int t);

struct BoundCheck {
    bool holds = true;
    std::optional<int> first_violation;
    std::vector<double> bound; // sum_j (1 - eta lambda_j)^{2t} L(0), per t
};

/// Checks L(t) <= sum_j (1 - eta lambda_j)^{2t} |L(0)| at every t, with a
/// relative slack of 1e-12 for rounding.
BoundCheck convergence_bound_check(const Spectrum &spectrum, double eta, double initial_loss,
                                   const std::vector<double> &losses);

/// Sample variance (N - 1 denominator) of K(x, x') for x, x' the first two
/// samples of `pair`, one parameter draw per seed. Zero for a single seed.
struct EntryStats {
    double mean = 0.0;
    double variance = 0.0;
};
EntryStats kernel_entry_stats(const AlaCircuit &circuit, const Dataset &pair, double kappa,
                              const std::vector<std::uint64_t> &trial_seeds,
                              GradientMethod method = GradientMethod::Adjoint, int threads = 1);

struct ConcentrationSettings {
    std::vector<int> ns{4, 8, 12};
    int rows = 2;
    int trials = 100;
    std::uint64_t seed = 0;
    int m = 2;
    int r = 2;
    int L = 1;
    double kappa = 1.0;
    /// Negative selects delta = 1/n^2.
    double delta = -1.0;
    /// Observable normalization scale: 0 selects sqrt(n).
    double obs_scale = 0.0;
    int threads = 1;
    int solver_cap = kDefaultSolverCap;
};

struct ConcentrationRow {
    int n = 0;
    int trials = 0;
    double mean = 0.0;
    double variance = 0.0;
};

/// For each n: a rows x (n/rows) Heisenberg lattice, one fixed sample pair
/// drawn from `seed`, and `trials` parameter initializations.
std::vector<ConcentrationRow> concentration_stats(const ConcentrationSettings &s);

struct Quantiles {
    double min = 0.0, q25 = 0.0, median = 0.0, q75 = 0.0, max = 0.0;
};
/// Linear-interpolation quantiles of an unsorted sample; throws when empty.
Quantiles quantiles(std::vector<double> values);

struct DriftReport {
    /// |K(t) - K(t-1)| over the upper triangle (with diagonal), t = 1..T.
    std::vector<std::vector<double>> per_step;
    std::vector<Quantiles> per_step_stats;
    Quantiles pooled;
    double max_delta = 0.0;
};

/// Trains with a kernel snapshot every step and reports the entrywise steps.
DriftReport lazy_drift(const AlaCircuit &circuit, const Dataset &data, TrainingConfig config,
                       int T);

/// Same report from an existing trace with kernel_stride 1.
DriftReport drift_from_trace(const TrainingTrace &trace);

struct GapPoint {
    int t = 0;
    double true_loss = 0.0;
    double lin_loss = 0.0;
    double gap = 0.0;
    double envelope = 0.0;
};

struct GapReport {
    std::vector<GapPoint> series;
    /// Fitted hidden constant C of C (n/K^3) eta^2 t^2 L(0)^{3/2}.
    double fitted_constant = 0.0;
    double scale = 0.0; // (n/K^3) eta^2 L(0)^{3/2}
    double delta = 0.0;
};

/// Pairs the true and linearized loss curves. The envelope's constant is
/// fitted so it matches the gap at t = 1. Throws DomainError when the series
/// lengths differ.
GapReport loss_gap(const TrainingTrace &true_trace, const std::vector<double> &lin_losses,
                   const Spectrum &spectrum, double eta, double delta, int n, int k_terms);

/// sum_j exp(-eta t lambda_j).
double trace_exp(const Spectrum &spectrum, double eta, double t);

struct BoundDiagnostics {
    std::size_t m = 0;
    double eta = 0.0;
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    std::optional<long long> t_star; // ceil(log_{1 - eta lambda_min}(1/M))
    double trace_exp = 0.0;          // at t_star
    double b1 = 0.0;                 // min of trace_exp over [t*/2, 2 t*]
    double b2 = 0.0;                 // max over the same window
    bool flag = false;               // see bound_diagnostics
};

/// lambda_min at or below this fraction of lambda_max counts as zero.
inline constexpr double kSingularRelTol = 1e-12;

/// Flags (and leaves t_star empty) when lambda_min <= kSingularRelTol *
/// lambda_max, when eta lambda_min is outside (0, 1), or when T* would
/// exceed 1e15 iterations.

BoundDiagnostics bound_diagnostics(const Spectrum &spectrum, double eta, std::size_t m);

// CSV emitters; each writes its header row first.
void write_concentration_csv(std::ostream &out, const std::vector<ConcentrationRow> &rows);
void write_drift_csv(std::ostream &out, int n, const DriftReport &report, bool header = true);
void write_drift_pooled_csv(std::ostream &out, int n, const DriftReport &report,
                            bool header = true);
void write_gap_csv(std::ostream &out, const GapReport &report);
void write_bounds_csv(std::ostream &out, const std::vector<BoundDiagnostics> &rows);

} // namespace qntk
