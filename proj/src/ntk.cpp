#include "qntk/ntk.hpp"

#include "qntk/error.hpp"
#include "qntk/parallel.hpp"
#include "qntk/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace qntk {

KernelMatrix kernel_from_jacobian(const Eigen::MatrixXd &jacobian_rows) {
    const Eigen::Index m = jacobian_rows.rows();
    if (m == 0) {
        throw DomainError("tangent kernel of an empty dataset");
    }
    KernelMatrix k{Eigen::MatrixXd::Zero(m, m), true};
    const double inv_m = 1.0 / static_cast<double>(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = i; j < m; ++j) {
            double acc = 0.0;
            for (Eigen::Index p = 0; p < jacobian_rows.cols(); ++p) {
                acc += jacobian_rows(i, p) * jacobian_rows(j, p);
            }
            k.entries(i, j) = acc * inv_m;
            k.entries(j, i) = acc * inv_m;
        }
    }
    return k;
}

KernelMatrix tangent_kernel(const AlaCircuit &circuit, const ParamTensor &params,
                            const Dataset &data, GradientMethod method, int threads) {
    return kernel_from_jacobian(model_jacobian(circuit, params, data, method, threads).rows);
}

Spectrum kernel_spectrum(const KernelMatrix &k) {
    const auto &a = k.entries;
    if (a.rows() != a.cols()) {
        throw DomainError("kernel matrix is not square");
    }
    if (a.size() > 0 && (a - a.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
        throw DomainError("kernel matrix is not symmetric within 1e-10");
    }
    Spectrum s;
    if (a.rows() == 0) {
        return s;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
    if (solver.info() != Eigen::Success) {
        throw NumericalError("kernel eigendecomposition failed");
    }
    s.eigenvalues = solver.eigenvalues();
    s.eigenvectors = solver.eigenvectors();
    for (Eigen::Index i = 0; i < s.eigenvalues.size(); ++i) {
        if (s.eigenvalues(i) < 0.0 && s.eigenvalues(i) >= -1e-9) {
            s.eigenvalues(i) = 0.0;
        }
    }
    return s;
}

namespace {

Eigen::VectorXd to_vec(const std::vector<double> &v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void check_linear_inputs(const KernelMatrix &k0, const std::vector<double> &f0,
                         const std::vector<double> &y) {
    if (f0.size() != k0.size() || y.size() != k0.size()) {
        throw DomainError("kernel, predictions and labels must share the dataset size");
    }
    if (f0.empty()) {
        throw DomainError("linearized dynamics of an empty dataset");
    }
}

} // namespace

LinearizedRun linearized_trajectory(const KernelMatrix &k0, const std::vector<double> &f0,
                                    const std::vector<double> &y, double eta, int T) {
    check_linear_inputs(k0, f0, y);
    if (T < 0) {
        throw DomainError("iteration count must be non-negative");
    }
    LinearizedRun run;
    const double lmax = kernel_spectrum(k0).lambda_max();
    run.eta_exceeds_stability = lmax > 0.0 && eta > 1.0 / lmax;
    const Eigen::VectorXd yv = to_vec(y);
    Eigen::VectorXd f = to_vec(f0);
    const double inv_2m = 1.0 / (2.0 * static_cast<double>(f0.size()));
    for (int t = 0; t <= T; ++t) {
        run.predictions.push_back(f);
        run.losses.push_back((f - yv).squaredNorm() * inv_2m);
        if (t < T) {
            f -= eta * (k0.entries * (f - yv));
        }
    }
    return run;
}

Eigen::VectorXd linearized_closed_form(const KernelMatrix &k0, const std::vector<double> &f0,
                                       const std::vector<double> &y, double eta, int t) {
    check_linear_inputs(k0, f0, y);
    const auto m = static_cast<Eigen::Index>(k0.size());
    const Eigen::MatrixXd step = Eigen::MatrixXd::Identity(m, m) - eta * k0.entries;
    // Binary powering, independent of the step-by-step recurrence.
    Eigen::MatrixXd power = Eigen::MatrixXd::Identity(m, m);
    Eigen::MatrixXd base = step;
    for (int e = t; e > 0; e >>= 1) {
        if (e & 1) {
            power = power * base;
        }
        base = base * base;
    }
    return power * (to_vec(f0) - to_vec(y)) + to_vec(y);
}

BoundCheck convergence_bound_check(const Spectrum &spectrum, double eta, double initial_loss,
                                   const std::vector<double> &losses) {
    BoundCheck out;
    out.bound.reserve(losses.size());
    for (std::size_t t = 0; t < losses.size(); ++t) {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < spectrum.eigenvalues.size(); ++j) {
            acc += std::pow(1.0 - eta * spectrum.eigenvalues(j), 2.0 * static_cast<double>(t));
        }
        const double b = acc * std::abs(initial_loss);
        out.bound.push_back(b);
        if (!(std::abs(losses[t]) <= b * (1.0 + 1e-12) + std::numeric_limits<double>::min())) {
            if (out.holds) {
                out.first_violation = static_cast<int>(t);
            }
            out.holds = false;
        }
    }
    return out;
}

EntryStats kernel_entry_stats(const AlaCircuit &circuit, const Dataset &pair, double kappa,
                              const std::vector<std::uint64_t> &trial_seeds,
                              GradientMethod method, int threads) {
    if (pair.size() < 2) {
        throw DomainError("kernel entry needs a pair of samples");
    }
    if (trial_seeds.empty()) {
        throw DomainError("at least one trial is required");
    }
    Dataset two = pair;
    two.samples.resize(2);
    std::vector<double> entries(trial_seeds.size());
    parallel_for(trial_seeds.size(), threads, [&](std::size_t k) {
        const auto params = init_params(circuit, kappa, trial_seeds[k]);
        const auto jac = model_jacobian(circuit, params, two, method, 1);
        entries[k] = jac.rows.row(0).dot(jac.rows.row(1)) / 2.0;
    });
    EntryStats s;
    const double nd = static_cast<double>(entries.size());
    s.mean = tree_sum(entries) / nd;
    if (entries.size() > 1) {
        std::vector<double> dev(entries.size());
        for (std::size_t k = 0; k < entries.size(); ++k) {
            dev[k] = (entries[k] - s.mean) * (entries[k] - s.mean);
        }
        s.variance = tree_sum(dev) / (nd - 1.0);
    }
    return s;
}

std::vector<ConcentrationRow> concentration_stats(const ConcentrationSettings &s) {
    if (s.trials < 1) {
        throw DomainError("trial count must be positive");
    }
    for (int n : s.ns) {
        if (n < 1 || n % s.rows != 0) {
            throw DomainError("n=" + std::to_string(n) + " does not fit a lattice with " +
                              std::to_string(s.rows) + " rows");
        }
        if (n % s.m != 0) {
            throw DomainError("block width m=" + std::to_string(s.m) + " does not divide n=" +
                              std::to_string(n));
        }
        if (n > s.solver_cap) {
            throw CapacityError("dense solver capped at " + std::to_string(s.solver_cap) +
                                " qubits, requested n=" + std::to_string(n));
        }
    }
    std::vector<std::uint64_t> seeds(static_cast<std::size_t>(s.trials));
    for (std::size_t k = 0; k < seeds.size(); ++k) {
        seeds[k] = derive_seed(s.seed, Stream::Experiment, k);
    }
    std::vector<ConcentrationRow> rows;
    for (int n : s.ns) {
        const auto lattice = make_lattice(s.rows, n / s.rows);
        const double delta = s.delta < 0.0 ? 1.0 / (n * n) : s.delta;
        const auto obs = z_sum_observable(n, s.obs_scale > 0.0 ? s.obs_scale : std::sqrt(n));
        Dataset pair{lattice, obs, delta, s.seed, {}};
        pair.samples.resize(2);
        parallel_for(2, s.threads, [&](std::size_t i) {
            pair.samples[i] = solve_sample(lattice, obs, sample_couplings(lattice, s.seed, false, i),
                                           delta, s.solver_cap);
        });
        const auto circuit = build_ala(n, s.m, s.r, s.L);
        const auto st = kernel_entry_stats(circuit, pair, s.kappa, seeds,
                                           GradientMethod::Adjoint, s.threads);
        rows.push_back({n, s.trials, st.mean, st.variance});
    }
    return rows;
}

Quantiles quantiles(std::vector<double> values) {
    if (values.empty()) {
        throw DomainError("quantiles of an empty sample");
    }
    std::sort(values.begin(), values.end());
    auto at = [&](double p) {
        const double h = p * static_cast<double>(values.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(h));
        const std::size_t hi = std::min(lo + 1, values.size() - 1);
        return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
    };
    return {values.front(), at(0.25), at(0.5), at(0.75), values.back()};
}

DriftReport drift_from_trace(const TrainingTrace &trace) {
    DriftReport rep;
    const auto &snaps = trace.kernel_snapshots;
    std::vector<double> pooled;
    for (std::size_t s = 1; s < snaps.size(); ++s) {
        if (snaps[s].first != snaps[s - 1].first + 1) {
            throw DomainError("drift needs kernel snapshots at every iteration");
        }
        const auto &a = snaps[s - 1].second;
        const auto &b = snaps[s].second;
        std::vector<double> d;
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
            for (Eigen::Index j = i; j < a.cols(); ++j) {
                d.push_back(std::abs(b(i, j) - a(i, j)));
            }
        }
        rep.per_step_stats.push_back(quantiles(d));
        rep.max_delta = std::max(rep.max_delta, rep.per_step_stats.back().max);
        pooled.insert(pooled.end(), d.begin(), d.end());
        rep.per_step.push_back(std::move(d));
    }
    if (!pooled.empty()) {
        rep.pooled = quantiles(std::move(pooled));
    }
    return rep;
}

DriftReport lazy_drift(const AlaCircuit &circuit, const Dataset &data, TrainingConfig config,
                       int T) {
    config.T = T;
    config.kernel_stride = 1;
    return drift_from_trace(train(circuit, data, config));
}

GapReport loss_gap(const TrainingTrace &true_trace, const std::vector<double> &lin_losses,
                   const Spectrum &spectrum, double eta, double delta, int n, int k_terms) {
    (void)spectrum;
    if (true_trace.records.size() != lin_losses.size()) {
        throw DomainError("true and linearized traces have different lengths");
    }
    if (k_terms < 1) {
        throw DomainError("observable must have at least one term");
    }
    GapReport rep;
    rep.delta = delta;
    const double l0 = true_trace.records.empty() ? 0.0 : true_trace.records[0].loss;
    const double k = static_cast<double>(k_terms);
    rep.scale = static_cast<double>(n) / (k * k * k) * eta * eta * std::pow(std::abs(l0), 1.5);
    for (std::size_t t = 0; t < lin_losses.size(); ++t) {
        if (true_trace.records[t].t != static_cast<int>(t)) {
            throw DomainError("true trace is not aligned on t");
        }
        GapPoint p;
        p.t = static_cast<int>(t);
        p.true_loss = true_trace.records[t].loss;
        p.lin_loss = lin_losses[t];
        p.gap = std::abs(p.true_loss - p.lin_loss);
        rep.series.push_back(p);
    }
    if (rep.series.size() > 1 && rep.scale > 0.0) {
        rep.fitted_constant = rep.series[1].gap / rep.scale;
    }
    for (auto &p : rep.series) {
        const double t = static_cast<double>(p.t);
        p.envelope = rep.fitted_constant * rep.scale * t * t;
    }
    return rep;
}

double trace_exp(const Spectrum &spectrum, double eta, double t) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < spectrum.eigenvalues.size(); ++j) {
        acc += std::exp(-eta * t * spectrum.eigenvalues(j));
    }
    return acc;
}

BoundDiagnostics bound_diagnostics(const Spectrum &spectrum, double eta, std::size_t m) {
    BoundDiagnostics d;
    d.m = m;
    d.eta = eta;
    d.lambda_min = spectrum.lambda_min();
    d.lambda_max = spectrum.lambda_max();
    const double rate = eta * d.lambda_min;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    // Eigenvalues this far below lambda_max are rounding noise of a singular kernel.
    const bool singular = !(d.lambda_min > kSingularRelTol * d.lambda_max);
    const double steps = std::log(1.0 / static_cast<double>(m)) / std::log1p(-rate);
    if (singular || !(rate > 0.0) || rate >= 1.0 || m < 1 || !(steps < 1e15)) {
        d.flag = true;
        d.trace_exp = d.b1 = d.b2 = nan;
        return d;
    }
    const long long t_star = static_cast<long long>(std::ceil(steps - 1e-12));
    d.t_star = t_star;
    d.trace_exp = trace_exp(spectrum, eta, static_cast<double>(t_star));
    // trace_exp is non-increasing in t, so the window extremes sit at its ends.
    const double lo_t = std::ceil(static_cast<double>(t_star) / 2.0);
    const double hi_t = 2.0 * static_cast<double>(t_star);
    d.b1 = trace_exp(spectrum, eta, hi_t);
    d.b2 = trace_exp(spectrum, eta, lo_t);
    return d;
}

void write_concentration_csv(std::ostream &out, const std::vector<ConcentrationRow> &rows) {
    out << "n,trial_count,variance\n";
    for (const auto &r : rows) {
        out << r.n << ',' << r.trials << ',' << format_double(r.variance) << '\n';
    }
}

void write_drift_csv(std::ostream &out, int n, const DriftReport &report, bool header) {
    if (header) {
        out << "n,t,min,q25,median,q75,max\n";
    }
    for (std::size_t s = 0; s < report.per_step_stats.size(); ++s) {
        const auto &q = report.per_step_stats[s];
        out << n << ',' << s + 1 << ',' << format_double(q.min) << ',' << format_double(q.q25)
            << ',' << format_double(q.median) << ',' << format_double(q.q75) << ','
            << format_double(q.max) << '\n';
    }
}

void write_drift_pooled_csv(std::ostream &out, int n, const DriftReport &report, bool header) {
    if (header) {
        out << "n,steps,min,q25,median,q75,max\n";
    }
    const auto &q = report.pooled;
    out << n << ',' << report.per_step.size() << ',' << format_double(q.min) << ','
        << format_double(q.q25) << ',' << format_double(q.median) << ',' << format_double(q.q75)
        << ',' << format_double(q.max) << '\n';
}

void write_gap_csv(std::ostream &out, const GapReport &report) {
    out << "t,true_loss,lin_loss,gap,envelope\n";
    for (const auto &p : report.series) {
        out << p.t << ',' << format_double(p.true_loss) << ',' << format_double(p.lin_loss) << ','
            << format_double(p.gap) << ',' << format_double(p.envelope) << '\n';
    }
}

void write_bounds_csv(std::ostream &out, const std::vector<BoundDiagnostics> &rows) {
    out << "M,eta,lambda_min,lambda_max,T_star,trace_exp,B1,B2\n";
    for (const auto &d : rows) {
        out << d.m << ',' << format_double(d.eta) << ',' << format_double(d.lambda_min) << ','
            << format_double(d.lambda_max) << ',' << (d.t_star ? std::to_string(*d.t_star) : "")
            << ',' << format_double(d.trace_exp) << ',' << format_double(d.b1) << ','
            << format_double(d.b2) << '\n';
    }
}

} // namespace qntk
