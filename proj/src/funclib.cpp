#include "mixdyn/funclib.hpp"

#include "mixdyn/error.hpp"

#include <cmath>
#include <sstream>

namespace mixdyn {

namespace {

/// Combinations with repetition of `n` indices taken `degree` at a time, in lexicographic order.
void enumerate_monomials(std::size_t n, int degree, std::vector<std::vector<int>>& out) {
    std::vector<int> idx(static_cast<std::size_t>(degree), 0);
    while (true) {
        out.push_back(idx);
        int pos = degree - 1;
        while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == static_cast<int>(n) - 1) --pos;
        if (pos < 0) return;
        const int next = idx[static_cast<std::size_t>(pos)] + 1;
        for (int k = pos; k < degree; ++k) idx[static_cast<std::size_t>(k)] = next;
    }
}

std::vector<std::vector<int>> all_monomials(std::size_t n, int order) {
    std::vector<std::vector<int>> out;
    for (int d = 1; d <= order; ++d) enumerate_monomials(n, d, out);
    return out;
}

std::string monomial_label(const std::vector<int>& mono, const std::vector<std::string>& names) {
    std::ostringstream os;
    std::size_t i = 0;
    bool first = true;
    while (i < mono.size()) {
        std::size_t j = i;
        while (j < mono.size() && mono[j] == mono[i]) ++j;
        if (!first) os << '*';
        os << names[static_cast<std::size_t>(mono[i])];
        if (j - i > 1) os << '^' << (j - i);
        first = false;
        i = j;
    }
    return os.str();
}

std::string trig_label(const char* fn, double freq, const std::string& name) {
    std::ostringstream os;
    os << fn << '(';
    if (freq != 1.0) os << freq << '*';
    os << name << ')';
    return os.str();
}

std::size_t binomial(std::size_t n, std::size_t k) {
    std::size_t r = 1;
    for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

}  // namespace

void LibrarySpec::validate() const {
    if (poly_order < 0) throw InputError("library: poly_order must be >= 0");
    if (poly_order > kMaxPolyOrder) {
        throw InputError("library: poly_order " + std::to_string(poly_order) + " exceeds maximum " +
                         std::to_string(kMaxPolyOrder));
    }
    if (include_trig && trig_frequencies.empty()) throw InputError("library: trig enabled with no frequencies");
}

std::vector<std::string> default_state_labels(std::size_t n_states) {
    if (n_states == 1) return {"x"};
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n_states; ++i) out.push_back("x" + std::to_string(i + 1));
    return out;
}

std::size_t term_count(const LibrarySpec& spec, std::size_t n_states) {
    spec.validate();
    const auto d = static_cast<std::size_t>(spec.poly_order);
    std::size_t count = binomial(n_states + d, d);
    if (!spec.include_constant) --count;
    if (spec.include_trig) count += 2 * n_states * spec.trig_frequencies.size();
    return count;
}

std::vector<std::string> term_labels(const LibrarySpec& spec, const std::vector<std::string>& names) {
    spec.validate();
    std::vector<std::string> labels;
    if (spec.include_constant) labels.emplace_back("1");
    for (const auto& mono : all_monomials(names.size(), spec.poly_order)) labels.push_back(monomial_label(mono, names));
    if (spec.include_trig) {
        for (double f : spec.trig_frequencies)
            for (const auto& name : names) labels.push_back(trig_label("sin", f, name));
        for (double f : spec.trig_frequencies)
            for (const auto& name : names) labels.push_back(trig_label("cos", f, name));
    }
    return labels;
}

LibraryEvaluator::LibraryEvaluator(const LibrarySpec& spec, std::size_t n_states)
    : spec_(spec), n_states_(n_states), count_(term_count(spec, n_states)),
      monomials_(all_monomials(n_states, spec.poly_order)) {}

void LibraryEvaluator::evaluate(const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::Ref<Eigen::VectorXd> out) const {
    Eigen::Index k = 0;
    if (spec_.include_constant) out(k++) = 1.0;
    for (const auto& mono : monomials_) {
        double v = 1.0;
        for (int i : mono) v *= x(i);
        out(k++) = v;
    }
    if (spec_.include_trig) {
        for (double f : spec_.trig_frequencies)
            for (std::size_t i = 0; i < n_states_; ++i) out(k++) = std::sin(f * x(static_cast<Eigen::Index>(i)));
        for (double f : spec_.trig_frequencies)
            for (std::size_t i = 0; i < n_states_; ++i) out(k++) = std::cos(f * x(static_cast<Eigen::Index>(i)));
    }
}

LibraryMatrix build_library(const LibrarySpec& spec, const Eigen::MatrixXd& states,
                            const std::vector<std::string>& state_labels) {
    const auto n = static_cast<std::size_t>(states.cols());
    if (n == 0 || states.rows() == 0) throw InputError("build_library: need at least one state and one sample");
    auto names = state_labels.size() == n ? state_labels : default_state_labels(n);
    LibraryEvaluator eval(spec, n);
    LibraryMatrix lib{Eigen::MatrixXd(states.rows(), static_cast<Eigen::Index>(eval.size())), term_labels(spec, names)};
    Eigen::VectorXd row(static_cast<Eigen::Index>(eval.size()));
    for (Eigen::Index i = 0; i < states.rows(); ++i) {
        eval.evaluate(states.row(i).transpose(), row);
        lib.entries.row(i) = row.transpose();
    }
    return lib;
}

LibraryMatrix build_library(const LibrarySpec& spec, const StateMatrix& states) {
    return build_library(spec, states.values, states.labels);
}

}  // namespace mixdyn
