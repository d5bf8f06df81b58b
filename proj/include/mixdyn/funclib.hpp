#pragma once

#include "mixdyn/timeseries.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace mixdyn {

/// Declarative description of the candidate-function library.
struct LibrarySpec {
    int poly_order = 3;
    bool include_trig = false;
    std::vector<double> trig_frequencies{1.0};
    bool include_constant = true;

    static constexpr int kMaxPolyOrder = 5;

    /// Throws InputError when the spec is unusable.
    void validate() const;
};

struct LibraryMatrix {
    Eigen::MatrixXd entries;  ///< samples x terms
    std::vector<std::string> term_labels;
};

/// Number of columns build_library would produce for `n_states` states.
std::size_t term_count(const LibrarySpec& spec, std::size_t n_states);

/// Labels in column order: constant, graded-lex monomials by ascending degree, sin terms, cos terms.
std::vector<std::string> term_labels(const LibrarySpec& spec, const std::vector<std::string>& state_labels);

LibraryMatrix build_library(const LibrarySpec& spec, const StateMatrix& states);
LibraryMatrix build_library(const LibrarySpec& spec, const Eigen::MatrixXd& states,
                            const std::vector<std::string>& state_labels);

/// Evaluates every term at a single state; `out` must have term_count entries.
/// Used on the hot path of model simulation, so it avoids allocation.
class LibraryEvaluator {
public:
    LibraryEvaluator(const LibrarySpec& spec, std::size_t n_states);

    [[nodiscard]] std::size_t size() const noexcept { return count_; }
    void evaluate(const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::Ref<Eigen::VectorXd> out) const;

private:
    LibrarySpec spec_;
    std::size_t n_states_;
    std::size_t count_;
    // Monomials are stored as index lists with non-decreasing state indices.
    std::vector<std::vector<int>> monomials_;
};

/// Default state names: "x" for one state, "x1".."xn" otherwise.
std::vector<std::string> default_state_labels(std::size_t n_states);

}  // namespace mixdyn
