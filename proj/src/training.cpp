#include "qntk/training.hpp"

#include "qntk/error.hpp"
#include "qntk/ntk.hpp"
#include "qntk/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>

namespace qntk {

const char *to_string(GradientMethod m) {
    return m == GradientMethod::Adjoint ? "adjoint" : "parameter_shift";
}

GradientMethod gradient_method_from_string(const std::string &s) {
    if (s == "adjoint") {
        return GradientMethod::Adjoint;
    }
    if (s == "parameter_shift" || s == "parameter-shift") {
        return GradientMethod::ParameterShift;
    }
    throw DomainError("unknown gradient method '" + s + "'");
}

double model_value(const AlaCircuit &circuit, const ParamTensor &params,
                   const StateVector &guiding, const PauliSum &obs) {
    return observable_expectation(apply_circuit(circuit, params, guiding), obs);
}

std::vector<double> predictions(const AlaCircuit &circuit, const ParamTensor &params,
                                const Dataset &data, int threads) {
    std::vector<double> f(data.size());
    parallel_for(data.size(), threads, [&](std::size_t i) {
        f[i] = model_value(circuit, params, data.samples[i].guiding, data.observable);
    });
    return f;
}

double loss_from_predictions(const std::vector<double> &f, const std::vector<double> &y) {
    if (f.empty()) {
        throw DomainError("loss of an empty dataset");
    }
    if (f.size() != y.size()) {
        throw DomainError("prediction and label counts differ");
    }
    std::vector<double> sq(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double r = f[i] - y[i];
        sq[i] = r * r;
    }
    return tree_sum(sq) / (2.0 * static_cast<double>(f.size()));
}

double loss(const AlaCircuit &circuit, const ParamTensor &params, const Dataset &data,
            int threads) {
    if (data.empty()) {
        throw DomainError("loss of an empty dataset");
    }
    return loss_from_predictions(predictions(circuit, params, data, threads), data.labels());
}

std::vector<double> model_gradient_parameter_shift(const AlaCircuit &circuit,
                                                   const ParamTensor &params,
                                                   const StateVector &guiding,
                                                   const PauliSum &obs, LightConeCache *cache) {
    std::optional<LightConeCache> local;
    if (cache == nullptr) {
        local.emplace(circuit);
        cache = &*local;
    }
    std::vector<double> grad(static_cast<std::size_t>(circuit.num_params), 0.0);
    constexpr double kShift = std::numbers::pi / 2.0;
    ParamTensor shifted = params;
    for (const auto &term : obs.terms) {
        const auto cone = cache->get(term);
        for (int j : cone->params) {
            const auto ju = static_cast<std::size_t>(j);
            const double orig = params.values[ju];
            shifted.values[ju] = orig + kShift;
            const double plus =
                pauli_expectation(apply_gates(circuit, cone->gates, shifted, guiding), term);
            shifted.values[ju] = orig - kShift;
            const double minus =
                pauli_expectation(apply_gates(circuit, cone->gates, shifted, guiding), term);
            shifted.values[ju] = orig;
            grad[ju] += obs.normalization * 0.5 * (plus - minus);
        }
    }
    return grad;
}

std::pair<double, std::vector<double>> model_value_and_gradient_adjoint(
    const AlaCircuit &circuit, const ParamTensor &params, const StateVector &guiding,
    const PauliSum &obs) {
    StateVector out = apply_circuit(circuit, params, guiding);
    std::vector<Complex> phi(out.amplitudes().begin(), out.amplitudes().end());
    std::vector<Complex> lambda = obs.apply(phi);
    const double value = inner_product(phi, lambda).real();

    std::vector<double> grad(static_cast<std::size_t>(circuit.num_params), 0.0);
    for (auto it = circuit.gates.rbegin(); it != circuit.gates.rend(); ++it) {
        const Gate &g = *it;
        if (g.kind == Gate::Kind::Rotation) {
            const double theta = params.values[static_cast<std::size_t>(g.param)];
            grad[static_cast<std::size_t>(g.param)] =
                kernels::imag_pauli_matrix_element(lambda, phi, g.qubit, g.axis);
            kernels::rotation(phi, g.qubit, g.axis, -theta);
            kernels::rotation(lambda, g.qubit, g.axis, -theta);
        } else {
            kernels::cz(phi, g.qubit, g.qubit2);
            kernels::cz(lambda, g.qubit, g.qubit2);
        }
    }
    return {value, std::move(grad)};
}

Jacobian model_jacobian(const AlaCircuit &circuit, const ParamTensor &params, const Dataset &data,
                        GradientMethod method, int threads) {
    if (data.empty()) {
        throw DomainError("Jacobian of an empty dataset");
    }
    const std::size_t m = data.size();
    const auto p = static_cast<Eigen::Index>(circuit.num_params);
    Jacobian jac{std::vector<double>(m), Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), p)};
    LightConeCache cache(circuit);
    parallel_for(m, threads, [&](std::size_t i) {
        const auto &s = data.samples[i];
        std::vector<double> g;
        if (method == GradientMethod::Adjoint) {
            auto [v, grad] = model_value_and_gradient_adjoint(circuit, params, s.guiding,
                                                              data.observable);
            jac.values[i] = v;
            g = std::move(grad);
        } else {
            jac.values[i] = model_value(circuit, params, s.guiding, data.observable);
            g = model_gradient_parameter_shift(circuit, params, s.guiding, data.observable,
                                               &cache);
        }
        for (Eigen::Index j = 0; j < p; ++j) {
            jac.rows(static_cast<Eigen::Index>(i), j) = g[static_cast<std::size_t>(j)];
        }
    });
    return jac;
}

std::vector<double> loss_gradient(const Jacobian &jac, const std::vector<double> &labels) {
    const auto m = static_cast<std::size_t>(jac.rows.rows());
    if (labels.size() != m || jac.values.size() != m) {
        throw DomainError("label count does not match the Jacobian");
    }
    std::vector<double> grad(static_cast<std::size_t>(jac.rows.cols()));
    std::vector<double> terms(m);
    for (std::size_t j = 0; j < grad.size(); ++j) {
        for (std::size_t i = 0; i < m; ++i) {
            terms[i] = (jac.values[i] - labels[i]) *
                       jac.rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
        grad[j] = tree_sum(terms) / static_cast<double>(m);
    }
    return grad;
}

std::vector<double> gradient_parameter_shift(const AlaCircuit &circuit, const ParamTensor &params,
                                             const Dataset &data, int threads) {
    return loss_gradient(
        model_jacobian(circuit, params, data, GradientMethod::ParameterShift, threads),
        data.labels());
}

std::vector<double> gradient_adjoint(const AlaCircuit &circuit, const ParamTensor &params,
                                     const Dataset &data, int threads) {
    return loss_gradient(model_jacobian(circuit, params, data, GradientMethod::Adjoint, threads),
                         data.labels());
}

double resolve_eta(const EtaRule &rule, double lambda_min, double lambda_max, std::size_t m) {
    switch (rule.kind) {
    case EtaRule::Kind::Fixed:
        if (!(rule.value >= 0.0) || !std::isfinite(rule.value)) {
            throw DomainError("learning rate must be finite and non-negative");
        }
        return rule.value;
    case EtaRule::Kind::InverseLambdaMax:
        if (!(lambda_max > 0.0)) {
            throw NumericalError("initial tangent kernel is zero; 1/lambda_max undefined");
        }
        return rule.value / lambda_max;
    case EtaRule::Kind::Auto: {
        const double md = static_cast<double>(m);
        double eta = std::max(lambda_min, 0.0) / (md * md);
        eta = std::max(eta, 1e-6);
        if (lambda_max > 0.0) {
            eta = std::min(eta, 1.0 / lambda_max);
        }
        return eta;
    }
    }
    return rule.value;
}

double auto_kappa(double delta, double gamma, int n) {
    if (!(gamma > 0.0 && gamma < 1.0)) {
        throw DomainError("confidence gamma must lie in (0, 1)");
    }
    return delta * std::sqrt(gamma) / static_cast<double>(n);
}

namespace {

double l2(const std::vector<double> &v) {
    double acc = 0.0;
    for (double x : v) {
        acc += x * x;
    }
    return std::sqrt(acc);
}

TrainingTrace run_descent(const AlaCircuit &circuit, const Dataset &data,
                          const TrainingConfig &config, const ParamTensor &theta0,
                          const Jacobian &jac0, double eta) {
    using Clock = std::chrono::steady_clock;
    const auto start = Clock::now();
    const auto labels = data.labels();
    TrainingTrace trace;
    trace.initial_params = theta0;
    trace.eta = eta;
    ParamTensor theta = theta0;
    for (int t = 0; t <= config.T; ++t) {
        Jacobian jac = t == 0 ? jac0
                              : model_jacobian(circuit, theta, data, config.gradient_method,
                                               config.threads);
        TrainingRecord rec;
        rec.t = t;
        rec.loss = loss_from_predictions(jac.values, labels);
        rec.eta = eta;
        rec.predictions = jac.values;
        if (!std::isfinite(rec.loss)) {
            rec.wallclock_ms =
                std::chrono::duration<double, std::milli>(Clock::now() - start).count();
            trace.records.push_back(std::move(rec));
            trace.aborted = true;
            trace.diagnostic = "non-finite loss at iteration " + std::to_string(t);
            break;
        }
        const auto grad = loss_gradient(jac, labels);
        rec.grad_norm = l2(grad);
        if (config.kernel_stride > 0 && t % config.kernel_stride == 0) {
            trace.kernel_snapshots.emplace_back(t, kernel_from_jacobian(jac.rows).entries);
        }
        if (config.param_stride > 0 && t % config.param_stride == 0) {
            trace.param_snapshots.emplace_back(t, theta);
        }
        if (t < config.T) {
            for (std::size_t j = 0; j < grad.size(); ++j) {
                theta.values[j] -= eta * grad[j];
            }
        }
        rec.wallclock_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
        trace.records.push_back(std::move(rec));
    }
    trace.final_params = theta;
    return trace;
}

} // namespace

TrainingTrace train(const AlaCircuit &circuit, const Dataset &data, const TrainingConfig &config) {
    if (data.empty()) {
        throw DomainError("training needs a non-empty dataset");
    }
    if (config.T < 0) {
        throw DomainError("iteration count T must be non-negative");
    }
    if (data.num_qubits() != circuit.n) {
        throw DomainError("dataset and circuit disagree on the qubit count");
    }
    const ParamTensor theta0 = config.initial_params
                                   ? *config.initial_params
                                   : init_params(circuit, config.kappa, config.seed);
    if (theta0.size() != static_cast<std::size_t>(circuit.num_params)) {
        throw DomainError("initial parameters do not match the circuit");
    }
    const Jacobian jac0 =
        model_jacobian(circuit, theta0, data, config.gradient_method, config.threads);
    const bool finite = jac0.rows.allFinite() &&
                        std::all_of(jac0.values.begin(), jac0.values.end(),
                                    [](double v) { return std::isfinite(v); });
    if (!finite) {
        // Nothing to diagonalize; record the starting point and stop.
        TrainingTrace trace = run_descent(circuit, data, config, theta0, jac0, NAN);
        if (!trace.aborted) {
            trace.aborted = true;
            trace.diagnostic = "non-finite gradient at iteration 0";
        }
        return trace;
    }
    const auto spec = kernel_spectrum(kernel_from_jacobian(jac0.rows));
    const double lmin = spec.lambda_min();
    const double lmax = spec.lambda_max();
    const double eta = resolve_eta(config.eta, lmin, lmax, data.size());

    TrainingTrace trace = run_descent(circuit, data, config, theta0, jac0, eta);
    if (config.eta.kind == EtaRule::Kind::Auto && config.retry_on_increase && !trace.aborted &&
        config.T > 0) {
        int rises = 0;
        for (std::size_t t = 1; t < trace.records.size(); ++t) {
            rises += trace.records[t].loss > trace.records[t - 1].loss ? 1 : 0;
        }
        if (rises > 0.05 * config.T) {
            trace = run_descent(circuit, data, config, theta0, jac0, 0.5 * eta);
            trace.retried = true;
        }
    }
    trace.lambda_min0 = lmin;
    trace.lambda_max0 = lmax;
    return trace;
}

double generalization_error(const AlaCircuit &circuit, const ParamTensor &params,
                            const Dataset &train, const Dataset &test, int threads) {
    if (train.empty() || test.empty()) {
        throw DomainError("generalization error needs non-empty train and test sets");
    }
    auto mean_abs = [&](const Dataset &d) {
        const auto f = predictions(circuit, params, d, threads);
        std::vector<double> err(f.size());
        for (std::size_t i = 0; i < f.size(); ++i) {
            err[i] = std::abs(f[i] - d.samples[i].label);
        }
        return tree_sum(err) / static_cast<double>(err.size());
    };
    return std::abs(mean_abs(test) - mean_abs(train));
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_trace_csv(std::ostream &out, const TrainingTrace &trace) {
    out << "iter,loss,grad_norm,eta,wallclock_ms\n";
    for (const auto &r : trace.records) {
        out << r.t << ',' << format_double(r.loss) << ',' << format_double(r.grad_norm) << ','
            << format_double(r.eta) << ',' << format_double(r.wallclock_ms) << '\n';
    }
}

} // namespace qntk
