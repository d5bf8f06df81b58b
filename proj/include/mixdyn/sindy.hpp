#pragma once

#include "mixdyn/funclib.hpp"
#include "mixdyn/timeseries.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace mixdyn {

enum class SolverMethod { Stlsq, IstaL1 };

/// Sparse-regression settings. For STLSQ, `lambda` is a hard threshold on coefficients
/// expressed against library columns scaled to unit RMS; for ISTA it is the L1 weight
/// against columns scaled to unit L2 norm.
struct SolverConfig {
    SolverMethod method = SolverMethod::Stlsq;
    double lambda = 0.8;
    int max_iter = 20;
    double tol = 1e-10;
    /// ISTA only: refit least squares on the selected support.
    bool debias = true;
    /// Keep per-iteration support sizes / objective values in the diagnostics.
    bool record_history = false;

    void validate() const;
};

struct ColumnDiagnostics {
    int iterations = 0;
    bool converged = false;
    bool rank_deficient = false;
    bool empty_support = false;
    std::vector<std::size_t> support_sizes;
    std::vector<double> objective;
};

struct SolverDiagnostics {
    std::vector<ColumnDiagnostics> columns;

    [[nodiscard]] bool converged() const;
    [[nodiscard]] bool rank_deficient() const;
    [[nodiscard]] bool any_empty() const;
    [[nodiscard]] bool all_empty() const;
};

/// Coefficients: one row per library term (plus exogenous inputs), one column per state.
struct CoefficientMatrix {
    Eigen::MatrixXd entries;
    SolverDiagnostics diagnostics;

    [[nodiscard]] std::size_t sparsity() const;
};

CoefficientMatrix stlsq(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& targets, const SolverConfig& cfg);
CoefficientMatrix stlsq(const LibraryMatrix& theta, const DerivativeMatrix& vdot, const SolverConfig& cfg);

CoefficientMatrix lasso_ista(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& targets, const SolverConfig& cfg);
CoefficientMatrix lasso_ista(const LibraryMatrix& theta, const DerivativeMatrix& vdot, const SolverConfig& cfg);

/// Dispatches on cfg.method.
CoefficientMatrix solve_sparse(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& targets, const SolverConfig& cfg);

/// 0.5*||y - A x||^2 + lambda*||x||_1, the objective ISTA decreases.
double l1_objective(const Eigen::MatrixXd& a, const Eigen::VectorXd& y, const Eigen::VectorXd& x, double lambda);

/// Identified dynamics xdot = Theta(x) Xi (+ linear terms in exogenous inputs).
/// Rows of xi.entries are the library terms followed by one row per input.
struct SparseModel {
    LibrarySpec spec;
    CoefficientMatrix xi;
    std::vector<std::string> state_labels;
    std::vector<std::string> term_labels;
    std::vector<std::string> input_labels;

    [[nodiscard]] std::size_t n_states() const noexcept { return state_labels.size(); }
    [[nodiscard]] std::size_t n_inputs() const noexcept { return input_labels.size(); }
    /// Coefficient of `term` in the equation for `state`; throws on unknown labels.
    [[nodiscard]] double coefficient(const std::string& state, const std::string& term) const;
    void validate() const;
};

/// Evaluates a model's right-hand side without allocating per call.
class ModelRhs {
public:
    explicit ModelRhs(const SparseModel& model);
    void operator()(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& inputs,
                    Eigen::Ref<Eigen::VectorXd> dx) const;

private:
    const SparseModel* model_;
    LibraryEvaluator eval_;
    mutable Eigen::VectorXd terms_;
};

/// Full pipeline on states: differentiate -> build library -> sparse solve.
SparseModel identify(const StateMatrix& v, const LibrarySpec& spec, const SolverConfig& cfg);

/// Same, with derivatives supplied by the caller.
SparseModel identify(const StateMatrix& v, const DerivativeMatrix& vdot, const LibrarySpec& spec,
                     const SolverConfig& cfg);

/// Stacks the rows of several disjoint records (e.g. bursts); each is differentiated on its own.
SparseModel identify_stacked(const std::vector<StateMatrix>& records, const LibrarySpec& spec,
                             const SolverConfig& cfg);

struct SimulationResult {
    StateMatrix states;
    bool blew_up = false;
    double failure_time = 0.0;
};

/// Fixed-step RK4 from x0. Produces floor(duration/dt)+1 rows including x0.
SimulationResult simulate_model(const SparseModel& model, const Eigen::VectorXd& x0, double duration, double dt);

/// sqrt(mean((p-a)^2)) / (max(a) - min(a)); falls back to RMS(a) for flat `actual`.
double nrmse(std::span<const double> predicted, std::span<const double> actual);
double nrmse(const TimeSeries& predicted, const TimeSeries& actual);

struct ScenarioRun {
    std::string scenario;
    TimeSeries predicted;
    TimeSeries actual;
};

struct ErrorEntry {
    std::string scenario;
    double nrmse = 0.0;
    double ratio = 0.0;
};

struct ErrorReport {
    std::vector<ErrorEntry> entries;
    std::string reference;
    double base_error = 0.0;

    [[nodiscard]] const ErrorEntry& at(const std::string& scenario) const;
};

ErrorReport error_report(const std::vector<ScenarioRun>& runs, const std::string& reference);
ErrorReport error_report(const std::vector<std::pair<std::string, double>>& errors, const std::string& reference);

}  // namespace mixdyn
