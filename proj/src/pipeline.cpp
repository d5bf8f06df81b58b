#include "mixdyn/pipeline.hpp"

#include "mixdyn/error.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mixdyn {

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(field);
    return out;
}

}  // namespace

Method parse_method(const std::string& name) {
    if (name == "sindy") return Method::Sindy;
    if (name == "havok") return Method::Havok;
    if (name == "mixed") return Method::Mixed;
    throw InputError("unknown method '" + name + "' (expected sindy, havok or mixed)");
}

std::string to_string(Method m) {
    switch (m) {
        case Method::Sindy: return "sindy";
        case Method::Havok: return "havok";
        case Method::Mixed: return "mixed";
    }
    return "unknown";
}

void EvalConfig::validate() const {
    if (!(window_end > window_start)) throw InputError("evaluation window must have positive length");
    if (!(fundamental_hz > 0.0)) throw InputError("fundamental must be positive");
    spec.validate();
    solver.validate();
    mixed.validate();
}

std::vector<TimeSeries> segments(const TimeSeries& x, std::size_t len) {
    if (len == 0) return {x};
    if (len > x.size()) {
        throw InputError("segment length " + std::to_string(len) + " exceeds the " + std::to_string(x.size()) +
                         " available samples");
    }
    std::vector<TimeSeries> out;
    for (std::size_t start = 0; start + len <= x.size(); start += len) {
        out.push_back({x.time(start), x.dt,
                       std::vector<double>(x.values.begin() + static_cast<std::ptrdiff_t>(start),
                                           x.values.begin() + static_cast<std::ptrdiff_t>(start + len)),
                       x.label});
    }
    return out;
}

std::vector<TimeSeries> evaluation_segments(const TimeSeries& x, const EvalConfig& cfg) {
    return segments(window(x, cfg.window_start, cfg.window_end), cfg.burst_len);
}

TimeSeries concatenate(const std::vector<TimeSeries>& parts) {
    if (parts.empty()) throw InputError("concatenate: nothing to join");
    TimeSeries out{parts.front().t0, parts.front().dt, {}, parts.front().label};
    for (const auto& p : parts) out.values.insert(out.values.end(), p.values.begin(), p.values.end());
    return out;
}

MixedConfig havok_config(const EvalConfig& cfg) {
    MixedConfig m = cfg.mixed;
    m.spec = LibrarySpec{1};
    m.solver = SolverConfig{SolverMethod::Stlsq, 0.0};
    m.target = MixedTarget::DelayCoordinates;
    m.allow_fallback = false;
    return m;
}

MethodResult run_method(Method method, const std::vector<TimeSeries>& segs, const EvalConfig& cfg) {
    cfg.validate();
    if (segs.empty()) throw InputError("no segments to evaluate");
    MethodResult res;
    res.method = method;
    res.actual = segs;
    if (method == Method::Sindy) {
        const auto lag = quarter_period_lag(segs.front().dt, cfg.fundamental_hz);
        const auto model = identify_delay_pair(segs, lag, cfg.spec, cfg.solver);
        for (const auto& s : segs) {
            auto p = replay_delay_pair(model, s);
            if (p.truncated) throw NumericError("sindy reconstruction blew up at t = " + fmt(p.series.end_time()));
            res.predicted.push_back(std::move(p.series));
        }
    } else {
        MixedConfig mc = method == Method::Havok ? havok_config(cfg) : cfg.mixed;
        mc.generic_spec = cfg.spec;
        mc.generic_solver = cfg.solver;
        mc.fundamental_hz = cfg.fundamental_hz;
        const auto model = identify_mixed(segs, mc);
        res.fallback = model.fallback;
        for (auto& p : predict_mixed_records(model)) {
            if (p.truncated) throw NumericError(to_string(method) + " reconstruction blew up at t = " + fmt(p.series.end_time()));
            res.predicted.push_back(std::move(p.series));
        }
    }
    res.nrmse = nrmse(concatenate(res.predicted), concatenate(res.actual));
    return res;
}

std::vector<ErrorRow> ratio_table(std::vector<ErrorRow> rows, const std::string& reference) {
    const ErrorRow* base = nullptr;
    for (const auto& r : rows) {
        if (r.scenario != reference) continue;
        if (!base || (r.method == "sindy" && base->method != "sindy")) base = &r;
    }
    if (!base) throw InputError("reference scenario '" + reference + "' is not in the error table");
    const double e = base->nrmse;
    if (!(e > 0.0)) throw NumericError("reference error is zero; ratios undefined");
    for (auto& r : rows) {
        if (!std::isfinite(r.nrmse) || r.nrmse < 0.0) throw NumericError("invalid error for " + r.scenario);
        r.ratio = r.nrmse / e;
    }
    return rows;
}

void write_error_csv(const std::filesystem::path& path, const std::vector<ErrorRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << "scenario,method,nrmse,ratio\n";
    for (const auto& r : rows) out << r.scenario << ',' << r.method << ',' << fmt(r.nrmse) << ',' << fmt(r.ratio) << '\n';
}

std::vector<ErrorRow> read_error_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    std::string line;
    std::vector<ErrorRow> rows;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (lineno == 1 && line.rfind("scenario,", 0) == 0) continue;
        const auto f = split_fields(line);
        if (f.size() < 3) throw InputError(path.string() + ": row " + std::to_string(lineno) + " needs scenario,method,nrmse");
        ErrorRow r{f[0], f[1], 0.0, 0.0};
        const auto [ptr, ec] = std::from_chars(f[2].data(), f[2].data() + f[2].size(), r.nrmse);
        if (ec != std::errc() || ptr != f[2].data() + f[2].size()) {
            throw InputError(path.string() + ": row " + std::to_string(lineno) + ", column 3 is not a number");
        }
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw InputError(path.string() + ": no error rows");
    return rows;
}

}  // namespace mixdyn
