#include "mixdyn/sindy.hpp"

#include "mixdyn/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mixdyn {

namespace {

/// Column scales; zero columns get scale 0 and are excluded from every solve.
Eigen::VectorXd column_scales(const Eigen::MatrixXd& theta, bool rms) {
    Eigen::VectorXd s = theta.colwise().norm().transpose();
    if (rms && theta.rows() > 0) s /= std::sqrt(static_cast<double>(theta.rows()));
    return s;
}

Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& a, const std::vector<Eigen::Index>& cols) {
    Eigen::MatrixXd out(a.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = a.col(cols[k]);
    return out;
}

struct LsResult {
    Eigen::VectorXd x;
    bool rank_deficient = false;
};

/// Pivots below this fraction of the largest count as zero. Columns are unit scaled, so
/// this catches exact library identities such as x^2 + y^2 = 1 on a clean sinusoid.
constexpr double kRankTolerance = 1e-8;

/// Minimum-norm least squares.
LsResult least_squares(const Eigen::MatrixXd& a, const Eigen::VectorXd& y) {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
    cod.setThreshold(kRankTolerance);
    cod.compute(a);
    return {cod.solve(y), cod.rank() < a.cols()};
}

void check_shapes(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& targets) {
    if (theta.rows() != targets.rows()) {
        throw InputError("sparse regression: library has " + std::to_string(theta.rows()) + " rows but targets have " +
                         std::to_string(targets.rows()));
    }
    if (theta.cols() == 0) throw InputError("sparse regression: empty library");
    if (!theta.allFinite() || !targets.allFinite()) throw NumericError("sparse regression: non-finite data");
}

}  // namespace

void SolverConfig::validate() const {
    if (!(lambda >= 0.0)) throw InputError("solver: lambda must be >= 0");
    if (max_iter < 1) throw InputError("solver: max_iter must be >= 1");
    if (!(tol > 0.0)) throw InputError("solver: tol must be > 0");
}

bool SolverDiagnostics::converged() const {
    return std::all_of(columns.begin(), columns.end(), [](const auto& c) { return c.converged; });
}
bool SolverDiagnostics::rank_deficient() const {
    return std::any_of(columns.begin(), columns.end(), [](const auto& c) { return c.rank_deficient; });
}
bool SolverDiagnostics::any_empty() const {
    return std::any_of(columns.begin(), columns.end(), [](const auto& c) { return c.empty_support; });
}
bool SolverDiagnostics::all_empty() const {
    return !columns.empty() && std::all_of(columns.begin(), columns.end(), [](const auto& c) { return c.empty_support; });
}

std::size_t CoefficientMatrix::sparsity() const {
    return static_cast<std::size_t>((entries.array() != 0.0).count());
}

CoefficientMatrix stlsq(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& targets, const SolverConfig& cfg) {
    cfg.validate();
    check_shapes(theta, targets);
    const Eigen::Index p = theta.cols();
    const Eigen::VectorXd scale = column_scales(theta, /*rms=*/true);
    Eigen::MatrixXd normalized = theta;
    for (Eigen::Index j = 0; j < p; ++j) {
        if (scale(j) > 0.0) normalized.col(j) /= scale(j);
    }

    CoefficientMatrix result{Eigen::MatrixXd::Zero(p, targets.cols()), {}};
    for (Eigen::Index s = 0; s < targets.cols(); ++s) {
        ColumnDiagnostics diag;
        std::vector<Eigen::Index> active;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (scale(j) > 0.0) active.push_back(j);
        }
        Eigen::VectorXd coef = Eigen::VectorXd::Zero(p);
        const Eigen::VectorXd y = targets.col(s);
        while (!active.empty() && diag.iterations < cfg.max_iter) {
            ++diag.iterations;
            if (cfg.record_history) diag.support_sizes.push_back(active.size());
            auto ls = least_squares(gather_columns(normalized, active), y);
            diag.rank_deficient = diag.rank_deficient || ls.rank_deficient;

            std::vector<Eigen::Index> kept;
            coef.setZero();
            for (std::size_t k = 0; k < active.size(); ++k) {
                const double c = ls.x(static_cast<Eigen::Index>(k));
                if (std::abs(c) >= cfg.lambda) {
                    kept.push_back(active[k]);
                    coef(active[k]) = c;
                }
            }
            if (kept.size() == active.size()) {
                diag.converged = true;
                break;
            }
            active = std::move(kept);
        }
        if (active.empty()) {
            coef.setZero();
            diag.empty_support = true;
            diag.converged = true;
            if (cfg.record_history) diag.support_sizes.push_back(0);
        }
        for (Eigen::Index j = 0; j < p; ++j) {
            result.entries(j, s) = scale(j) > 0.0 ? coef(j) / scale(j) : 0.0;
        }
        result.diagnostics.columns.push_back(std::move(diag));
    }
    return result;
}

CoefficientMatrix stlsq(const LibraryMatrix& theta, const DerivativeMatrix& vdot, const SolverConfig& cfg) {
    return stlsq(theta.entries, vdot.values, cfg);
}

double l1_objective(const Eigen::MatrixXd& a, const Eigen::VectorXd& y, const Eigen::VectorXd& x, double lambda) {
    return 0.5 * (y - a * x).squaredNorm() + lambda * x.lpNorm<1>();
}

CoefficientMatrix lasso_ista(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& targets, const SolverConfig& cfg) {
    cfg.validate();
    check_shapes(theta, targets);
    const Eigen::Index p = theta.cols();
    const Eigen::VectorXd scale = column_scales(theta, /*rms=*/false);
    Eigen::MatrixXd a = theta;
    for (Eigen::Index j = 0; j < p; ++j) {
        if (scale(j) > 0.0) a.col(j) /= scale(j);
    }
    const Eigen::MatrixXd gram = a.transpose() * a;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
    const double lipschitz = eig.eigenvalues().maxCoeff();
    CoefficientMatrix result{Eigen::MatrixXd::Zero(p, targets.cols()), {}};
    if (!(lipschitz > 0.0)) {
        for (Eigen::Index s = 0; s < targets.cols(); ++s) result.diagnostics.columns.push_back({0, true, false, true, {}, {}});
        return result;
    }
    const double step = 1.0 / lipschitz;
    const double shrink = cfg.lambda * step;

    for (Eigen::Index s = 0; s < targets.cols(); ++s) {
        ColumnDiagnostics diag;
        const Eigen::VectorXd y = targets.col(s);
        const Eigen::VectorXd aty = a.transpose() * y;
        Eigen::VectorXd x = Eigen::VectorXd::Zero(p);
        if (cfg.record_history) diag.objective.push_back(l1_objective(a, y, x, cfg.lambda));
        for (int it = 0; it < cfg.max_iter; ++it) {
            ++diag.iterations;
            const Eigen::VectorXd z = x - step * (gram * x - aty);
            Eigen::VectorXd next = z.unaryExpr([shrink](double v) {
                return v > shrink ? v - shrink : (v < -shrink ? v + shrink : 0.0);
            });
            const double change = (next - x).lpNorm<Eigen::Infinity>();
            x = std::move(next);
            if (cfg.record_history) diag.objective.push_back(l1_objective(a, y, x, cfg.lambda));
            if (change <= cfg.tol * std::max(1.0, x.lpNorm<Eigen::Infinity>())) {
                diag.converged = true;
                break;
            }
        }

        std::vector<Eigen::Index> support;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (x(j) != 0.0) support.push_back(j);
        }
        diag.empty_support = support.empty();
        if (cfg.debias && !support.empty()) {
            auto ls = least_squares(gather_columns(a, support), y);
            diag.rank_deficient = ls.rank_deficient;
            x.setZero();
            for (std::size_t k = 0; k < support.size(); ++k) x(support[k]) = ls.x(static_cast<Eigen::Index>(k));
        }
        for (Eigen::Index j = 0; j < p; ++j) result.entries(j, s) = scale(j) > 0.0 ? x(j) / scale(j) : 0.0;
        result.diagnostics.columns.push_back(std::move(diag));
    }
    return result;
}

CoefficientMatrix lasso_ista(const LibraryMatrix& theta, const DerivativeMatrix& vdot, const SolverConfig& cfg) {
    return lasso_ista(theta.entries, vdot.values, cfg);
}

CoefficientMatrix solve_sparse(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& targets, const SolverConfig& cfg) {
    return cfg.method == SolverMethod::Stlsq ? stlsq(theta, targets, cfg) : lasso_ista(theta, targets, cfg);
}

double SparseModel::coefficient(const std::string& state, const std::string& term) const {
    auto s = std::find(state_labels.begin(), state_labels.end(), state);
    if (s == state_labels.end()) throw InputError("unknown state label '" + state + "'");
    auto t = std::find(term_labels.begin(), term_labels.end(), term);
    Eigen::Index row = 0;
    if (t != term_labels.end()) {
        row = t - term_labels.begin();
    } else {
        auto u = std::find(input_labels.begin(), input_labels.end(), term);
        if (u == input_labels.end()) throw InputError("unknown term label '" + term + "'");
        row = static_cast<Eigen::Index>(term_labels.size()) + (u - input_labels.begin());
    }
    return xi.entries(row, s - state_labels.begin());
}

void SparseModel::validate() const {
    const auto rows = static_cast<Eigen::Index>(term_labels.size() + input_labels.size());
    if (xi.entries.rows() != rows || xi.entries.cols() != static_cast<Eigen::Index>(state_labels.size())) {
        throw InputError("model: coefficient matrix shape does not match labels");
    }
    if (term_count(spec, state_labels.size()) != term_labels.size()) {
        throw InputError("model: term labels do not match the library spec");
    }
}

ModelRhs::ModelRhs(const SparseModel& model)
    : model_(&model), eval_(model.spec, model.n_states()),
      terms_(static_cast<Eigen::Index>(eval_.size() + model.n_inputs())) {
    model.validate();
}

void ModelRhs::operator()(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& inputs,
                          Eigen::Ref<Eigen::VectorXd> dx) const {
    const auto nt = static_cast<Eigen::Index>(eval_.size());
    eval_.evaluate(x, terms_.head(nt));
    if (inputs.size() > 0) terms_.tail(inputs.size()) = inputs;
    dx.noalias() = model_->xi.entries.transpose() * terms_;
}

namespace {

std::vector<std::string> labels_or_default(const StateMatrix& v) {
    return v.labels.size() == static_cast<std::size_t>(v.cols()) ? v.labels
                                                                  : default_state_labels(static_cast<std::size_t>(v.cols()));
}

SparseModel assemble(const LibrarySpec& spec, const std::vector<std::string>& names, const Eigen::MatrixXd& states,
                     const Eigen::MatrixXd& targets, const SolverConfig& cfg) {
    auto lib = build_library(spec, states, names);
    SparseModel model{spec, solve_sparse(lib.entries, targets, cfg), names, std::move(lib.term_labels), {}};
    return model;
}

}  // namespace

SparseModel identify(const StateMatrix& v, const DerivativeMatrix& vdot, const LibrarySpec& spec,
                     const SolverConfig& cfg) {
    if (v.rows() != vdot.rows() || v.cols() != vdot.cols()) throw InputError("identify: derivative shape mismatch");
    return assemble(spec, labels_or_default(v), v.values, vdot.values, cfg);
}

SparseModel identify(const StateMatrix& v, const LibrarySpec& spec, const SolverConfig& cfg) {
    return identify(v, differentiate(v), spec, cfg);
}

SparseModel identify_stacked(const std::vector<StateMatrix>& records, const LibrarySpec& spec,
                             const SolverConfig& cfg) {
    if (records.empty()) throw InputError("identify_stacked: no records");
    Eigen::Index rows = 0;
    const Eigen::Index n = records.front().cols();
    for (const auto& r : records) {
        if (r.cols() != n) throw InputError("identify_stacked: records disagree on state count");
        rows += r.rows();
    }
    Eigen::MatrixXd states(rows, n);
    Eigen::MatrixXd targets(rows, n);
    Eigen::Index at = 0;
    for (const auto& r : records) {
        states.middleRows(at, r.rows()) = r.values;
        targets.middleRows(at, r.rows()) = differentiate(r).values;
        at += r.rows();
    }
    return assemble(spec, labels_or_default(records.front()), states, targets, cfg);
}

SimulationResult simulate_model(const SparseModel& model, const Eigen::VectorXd& x0, double duration, double dt) {
    if (!(dt > 0.0)) throw InputError("simulate_model: dt must be positive");
    if (duration < 0.0) throw InputError("simulate_model: negative duration");
    if (model.n_inputs() != 0) throw InputError("simulate_model: model has exogenous inputs; use a forced integrator");
    if (x0.size() != static_cast<Eigen::Index>(model.n_states())) throw InputError("simulate_model: x0 has wrong size");
    ModelRhs f(model);
    const auto steps = static_cast<Eigen::Index>(std::floor(duration / dt + 1e-9));
    const Eigen::Index n = x0.size();
    SimulationResult out{{0.0, dt, Eigen::MatrixXd(steps + 1, n), model.state_labels}, false, 0.0};
    const Eigen::VectorXd none(0);
    Eigen::VectorXd x = x0, k1(n), k2(n), k3(n), k4(n), tmp(n);
    out.states.values.row(0) = x.transpose();
    for (Eigen::Index i = 0; i < steps; ++i) {
        f(x, none, k1);
        tmp = x + 0.5 * dt * k1;
        f(tmp, none, k2);
        tmp = x + 0.5 * dt * k2;
        f(tmp, none, k3);
        tmp = x + dt * k3;
        f(tmp, none, k4);
        x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!x.allFinite()) {
            out.blew_up = true;
            out.failure_time = static_cast<double>(i + 1) * dt;
            out.states.values.conservativeResize(i + 1, n);
            return out;
        }
        out.states.values.row(i + 1) = x.transpose();
    }
    return out;
}

double nrmse(std::span<const double> predicted, std::span<const double> actual) {
    if (predicted.size() != actual.size()) {
        throw InputError("nrmse: length mismatch (" + std::to_string(predicted.size()) + " vs " +
                         std::to_string(actual.size()) + ")");
    }
    if (actual.empty()) throw InputError("nrmse: empty series");
    double sq = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        const double d = predicted[i] - actual[i];
        sq += d * d;
    }
    const double err = std::sqrt(sq / static_cast<double>(actual.size()));
    const auto [lo, hi] = std::minmax_element(actual.begin(), actual.end());
    double norm = *hi - *lo;
    if (norm == 0.0) norm = rms(actual);
    if (norm == 0.0) throw InputError("nrmse: actual signal is identically zero");
    return err / norm;
}

double nrmse(const TimeSeries& predicted, const TimeSeries& actual) {
    if (std::abs(predicted.dt - actual.dt) > 1e-9 * actual.dt) throw InputError("nrmse: sample steps differ");
    return nrmse(std::span<const double>(predicted.values), std::span<const double>(actual.values));
}

const ErrorEntry& ErrorReport::at(const std::string& scenario) const {
    for (const auto& e : entries) {
        if (e.scenario == scenario) return e;
    }
    throw InputError("error report: no scenario '" + scenario + "'");
}

ErrorReport error_report(const std::vector<std::pair<std::string, double>>& errors, const std::string& reference) {
    auto ref = std::find_if(errors.begin(), errors.end(), [&](const auto& e) { return e.first == reference; });
    if (ref == errors.end()) throw InputError("error report: reference scenario '" + reference + "' missing");
    ErrorReport report{{}, reference, ref->second};
    for (const auto& [name, err] : errors) {
        if (err < 0.0 || !std::isfinite(err)) throw NumericError("error report: invalid error for " + name);
        double ratio = 1.0;
        if (name != reference) {
            if (report.base_error == 0.0) throw NumericError("error report: base error is zero; ratios undefined");
            ratio = err / report.base_error;
        }
        report.entries.push_back({name, err, ratio});
    }
    return report;
}

ErrorReport error_report(const std::vector<ScenarioRun>& runs, const std::string& reference) {
    std::vector<std::pair<std::string, double>> errors;
    errors.reserve(runs.size());
    for (const auto& r : runs) errors.emplace_back(r.scenario, nrmse(r.predicted, r.actual));
    return error_report(errors, reference);
}

}  // namespace mixdyn
