#pragma once

#include "qntk/ansatz.hpp"
#include "qntk/dataset.hpp"
#include "qntk/pauli.hpp"
#include "qntk/state_vector.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace qntk {

enum class GradientMethod { ParameterShift, Adjoint };

const char *to_string(GradientMethod m);
GradientMethod gradient_method_from_string(const std::string &s);

/// f_theta(x) = <psi0(x)| U^dag O U |psi0(x)>.
double model_value(const AlaCircuit &circuit, const ParamTensor &params,
                   const StateVector &guiding, const PauliSum &obs);

/// f_theta over every sample of the dataset, in sample order.
std::vector<double> predictions(const AlaCircuit &circuit, const ParamTensor &params,
                                const Dataset &data, int threads = 1);

/// (1/2M) sum_i (f_i - y_i)^2.
double loss_from_predictions(const std::vector<double> &f, const std::vector<double> &y);
double loss(const AlaCircuit &circuit, const ParamTensor &params, const Dataset &data,
            int threads = 1);

/**
 * d f / d theta for one input via the +/- pi/2 shift rule. Each observable
 * term is differentiated only over its light cone, and only the cone's gates
 * are simulated; entries outside every cone stay exactly zero.
 */
std::vector<double> model_gradient_parameter_shift(const AlaCircuit &circuit,
                                                   const ParamTensor &params,
                                                   const StateVector &guiding,
                                                   const PauliSum &obs,
                                                   LightConeCache *cache = nullptr);

/// d f / d theta for one input by a reverse sweep over the gate list:
/// with phi the output state and lambda = O phi, each rotation with
/// generator sigma contributes Im <lambda| sigma |phi> before both vectors
/// are pulled back through the gate. Returns (f, gradient).
std::pair<double, std::vector<double>> model_value_and_gradient_adjoint(
    const AlaCircuit &circuit, const ParamTensor &params, const StateVector &guiding,
    const PauliSum &obs);

/// Per-sample model values and the M x P Jacobian of f.
struct Jacobian {
    std::vector<double> values;
    Eigen::MatrixXd rows;
};

Jacobian model_jacobian(const AlaCircuit &circuit, const ParamTensor &params, const Dataset &data,
                        GradientMethod method, int threads = 1);

/// grad L = (1/M) sum_i (f_i - y_i) grad f_i, reduced in a fixed order.
std::vector<double> loss_gradient(const Jacobian &jac, const std::vector<double> &labels);

/// Loss gradients by the shift rule applied to each model output and
/// combined through the chain rule above.
std::vector<double> gradient_parameter_shift(const AlaCircuit &circuit, const ParamTensor &params,
                                             const Dataset &data, int threads = 1);
std::vector<double> gradient_adjoint(const AlaCircuit &circuit, const ParamTensor &params,
                                     const Dataset &data, int threads = 1);

struct EtaRule {
    enum class Kind {
        Fixed,          // value is the learning rate
        Auto,           // lambda_min(K0) / M^2 clamped to [1e-6, 1/lambda_max]
        InverseLambdaMax // value / lambda_max(K0)
    };
    Kind kind = Kind::Auto;
    double value = 1.0;
};

/// Resolves the rule against the tangent kernel at the initial parameters.
double resolve_eta(const EtaRule &rule, double lambda_min, double lambda_max, std::size_t m);

/// delta * sqrt(gamma) / n.
double auto_kappa(double delta, double gamma, int n);

struct TrainingConfig {
    EtaRule eta;
    int T = 100;
    double kappa = 0.01;
    double gamma = 0.05;
    std::uint64_t seed = 0;
    GradientMethod gradient_method = GradientMethod::Adjoint;
    int threads = 1;
    /// Keep a copy of theta every `param_stride` iterations (0: never).
    int param_stride = 0;
    /// Keep K_theta(t) every `kernel_stride` iterations (0: never).
    int kernel_stride = 0;
    /// When the auto learning rate lets the loss rise on more than 5% of the
    /// steps, rerun once with half the rate.
    bool retry_on_increase = true;
    /// Overrides the Gaussian initialization when set.
    std::optional<ParamTensor> initial_params;
};

struct TrainingRecord {
    int t = 0;
    double loss = 0.0;
    double grad_norm = 0.0;
    double eta = 0.0;
    double wallclock_ms = 0.0;
    std::vector<double> predictions;
};

struct TrainingTrace {
    std::vector<TrainingRecord> records; // T + 1 entries unless aborted
    std::vector<std::pair<int, ParamTensor>> param_snapshots;
    std::vector<std::pair<int, Eigen::MatrixXd>> kernel_snapshots;
    ParamTensor initial_params;
    ParamTensor final_params;
    double eta = 0.0;
    double lambda_min0 = 0.0;
    double lambda_max0 = 0.0;
    bool retried = false;
    bool aborted = false;
    std::string diagnostic;
};

/// Gradient descent on the dataset loss: Gaussian initialization, then T
/// updates theta <- theta - eta grad L. Records t = 0..T.
TrainingTrace train(const AlaCircuit &circuit, const Dataset &data, const TrainingConfig &config);

/// | mean_test |f - y| - mean_train |f - y| |.
double generalization_error(const AlaCircuit &circuit, const ParamTensor &params,
                            const Dataset &train, const Dataset &test, int threads = 1);

/// CSV columns: iter,loss,grad_norm,eta,wallclock_ms.
void write_trace_csv(std::ostream &out, const TrainingTrace &trace);

/// Formats a double with 17 significant digits (round-trip exact).
std::string format_double(double v);

} // namespace qntk
