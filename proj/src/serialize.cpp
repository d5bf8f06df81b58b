#include "mixdyn/serialize.hpp"

#include "mixdyn/error.hpp"

#include <fstream>

namespace mixdyn {

using nlohmann::json;

namespace {

json rows_of(const Eigen::MatrixXd& m) {
    json out = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        out.push_back(std::move(row));
    }
    return out;
}

json vector_of(const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

template <class T>
T field(const json& doc, const char* key) {
    if (!doc.contains(key)) throw InputError(std::string("model document lacks '") + key + "'");
    try {
        return doc.at(key).get<T>();
    } catch (const json::exception& e) {
        throw InputError(std::string("model document field '") + key + "': " + e.what());
    }
}

}  // namespace

json to_json(const LibrarySpec& spec) {
    return {{"poly_order", spec.poly_order},
            {"include_trig", spec.include_trig},
            {"trig_frequencies", spec.trig_frequencies},
            {"include_constant", spec.include_constant}};
}

json to_json(const SparseModel& model) {
    return {{"library", to_json(model.spec)},
            {"states", model.state_labels},
            {"terms", model.term_labels},
            {"inputs", model.input_labels},
            {"xi", rows_of(model.xi.entries)},
            {"nonzero", model.xi.sparsity()},
            {"converged", model.xi.diagnostics.converged()},
            {"rank_deficient", model.xi.diagnostics.rank_deficient()}};
}

json to_json(const DelayPairModel& model) {
    json doc = to_json(model.model);
    doc["lag"] = model.lag;
    return doc;
}

json to_json(const HavokModel& model) {
    return {{"m", model.m},
            {"tau_steps", model.tau_steps},
            {"r", model.r},
            {"dt", model.dt},
            {"A", rows_of(model.A)},
            {"B", rows_of(model.B)},
            {"singular_values", vector_of(model.sigma)},
            {"r_squared", model.r_squared},
            {"notation",
             "H = Y diag(sigma) U^T with one embedding column per time instant; u_1..u_r are columns of U "
             "(time-evolving delay coordinates), columns of Y are delay-shape modes; u_r is the forcing"}};
}

json to_json(const MixedModel& model) {
    json split{{"degenerate", model.split.degenerate},
               {"threshold_count", model.split.threshold_count},
               {"mode_frequency_hz", model.split.mode_frequency},
               {"slow_modes", model.split.slow_modes},
               {"fast_fraction", model.split.fast_fraction()}};
    json doc{{"method", "mixed"},
             {"fallback", model.fallback},
             {"target", model.config.target == MixedTarget::DelayCoordinates ? "delay_coordinates" : "slow_signal"},
             {"integrator", model.config.integrator == Integrator::Leapfrog ? "leapfrog" : "rk4"},
             {"records", model.training.size()},
             {"split", std::move(split)}};
    if (!model.split.degenerate) doc["havok"] = to_json(model.split.havok);
    if (model.fallback || model.config.target == MixedTarget::SlowSignal) {
        doc["signal_model"] = to_json(model.signal_model);
    } else {
        doc["slow_model"] = to_json(model.slow_model);
    }
    return doc;
}

LibrarySpec library_from_json(const json& doc) {
    LibrarySpec spec;
    spec.poly_order = field<int>(doc, "poly_order");
    spec.include_trig = field<bool>(doc, "include_trig");
    spec.trig_frequencies = field<std::vector<double>>(doc, "trig_frequencies");
    spec.include_constant = field<bool>(doc, "include_constant");
    spec.validate();
    return spec;
}

SparseModel sparse_model_from_json(const json& doc) {
    SparseModel model;
    model.spec = library_from_json(field<json>(doc, "library"));
    model.state_labels = field<std::vector<std::string>>(doc, "states");
    model.term_labels = field<std::vector<std::string>>(doc, "terms");
    model.input_labels = field<std::vector<std::string>>(doc, "inputs");
    const auto rows = field<std::vector<std::vector<double>>>(doc, "xi");
    const auto cols = static_cast<Eigen::Index>(model.state_labels.size());
    model.xi.entries.resize(static_cast<Eigen::Index>(rows.size()), cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (static_cast<Eigen::Index>(rows[i].size()) != cols) throw InputError("model document: ragged xi");
        for (Eigen::Index j = 0; j < cols; ++j) model.xi.entries(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
    }
    model.validate();
    return model;
}

void write_json(const std::filesystem::path& path, const json& doc) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << doc.dump(2) << '\n';
}

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

}  // namespace mixdyn
