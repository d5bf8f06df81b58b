#include "mixdyn/timeseries.hpp"

#include "mixdyn/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace mixdyn {

namespace {

constexpr double kGridTolerance = 1e-9;

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string_view rest(line);
    while (true) {
        auto pos = rest.find(',');
        out.push_back(trim(rest.substr(0, pos)));
        if (pos == std::string_view::npos) break;
        rest.remove_prefix(pos + 1);
    }
    return out;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* first = s.data();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(out);
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<double> times;
    std::vector<std::vector<double>> columns;
};

CsvTable read_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());

    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    std::size_t data_row = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split_fields(line);
        if (width == 0) {
            width = fields.size();
            if (width < 2) throw InputError(path.string() + ": need a time column and at least one value column");
            table.columns.resize(width - 1);
            double probe = 0.0;
            if (!parse_double(fields[0], probe)) {
                table.header = fields;
                continue;
            }
        }
        if (fields.size() != width) {
            throw InputError(path.string() + ": row " + std::to_string(data_row + 1) + " has " +
                             std::to_string(fields.size()) + " columns, expected " + std::to_string(width));
        }
        ++data_row;
        for (std::size_t c = 0; c < width; ++c) {
            double v = 0.0;
            if (!parse_double(fields[c], v)) {
                throw InputError(path.string() + ": parse error at row " + std::to_string(data_row) + ", column " +
                                 std::to_string(c + 1) + " ('" + fields[c] + "')");
            }
            if (c == 0) {
                table.times.push_back(v);
            } else {
                table.columns[c - 1].push_back(v);
            }
        }
    }
    if (table.times.empty()) throw InputError(path.string() + ": no data rows");
    return table;
}

/// Validates a strictly increasing uniform grid and returns its median step.
double uniform_step(const std::vector<double>& t) {
    if (t.size() < 2) return 1.0;
    std::vector<double> steps(t.size() - 1);
    for (std::size_t i = 1; i < t.size(); ++i) {
        steps[i - 1] = t[i] - t[i - 1];
        if (steps[i - 1] <= 0.0) throw InputError("time column not strictly increasing at row " + std::to_string(i + 1));
    }
    auto sorted = steps;
    // lower median, so a single bad step in a short file is the one reported
    const std::size_t mid = (sorted.size() - 1) / 2;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid), sorted.end());
    const double median = sorted[mid];
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (std::abs(steps[i] - median) > kGridTolerance * median) {
            throw InputError("non-uniform grid at row " + std::to_string(i + 2));
        }
    }
    return median;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

TimeSeries StateMatrix::column(Eigen::Index j) const {
    TimeSeries s{t0, dt, {}, j < static_cast<Eigen::Index>(labels.size()) ? labels[static_cast<std::size_t>(j)] : ""};
    s.values.resize(static_cast<std::size_t>(rows()));
    Eigen::Map<Eigen::VectorXd>(s.values.data(), rows()) = values.col(j);
    return s;
}

std::variant<TimeSeries, StateMatrix> load_csv(const std::filesystem::path& path) {
    auto table = read_table(path);
    const double dt = uniform_step(table.times);
    const double t0 = table.times.front();
    auto label_of = [&](std::size_t c) {
        return c + 1 < table.header.size() ? table.header[c + 1] : std::string("x") + std::to_string(c + 1);
    };

    if (table.columns.size() == 1) {
        TimeSeries s{t0, dt, std::move(table.columns[0]), table.header.empty() ? "x" : table.header[1]};
        return s;
    }
    StateMatrix m;
    m.t0 = t0;
    m.dt = dt;
    m.values.resize(static_cast<Eigen::Index>(table.times.size()), static_cast<Eigen::Index>(table.columns.size()));
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        m.values.col(static_cast<Eigen::Index>(c)) =
            Eigen::Map<const Eigen::VectorXd>(table.columns[c].data(), static_cast<Eigen::Index>(table.columns[c].size()));
        m.labels.push_back(label_of(c));
    }
    return m;
}

TimeSeries load_series_csv(const std::filesystem::path& path) {
    auto data = load_csv(path);
    if (auto* s = std::get_if<TimeSeries>(&data)) return std::move(*s);
    throw InputError(path.string() + ": expected a single value column");
}

StateMatrix load_states_csv(const std::filesystem::path& path) {
    auto data = load_csv(path);
    if (auto* m = std::get_if<StateMatrix>(&data)) return std::move(*m);
    auto s = std::get<TimeSeries>(std::move(data));
    StateMatrix m{s.t0, s.dt, Eigen::Map<const Eigen::VectorXd>(s.values.data(), static_cast<Eigen::Index>(s.size())), {s.label}};
    return m;
}

void write_csv(const std::filesystem::path& path, const TimeSeries& x) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << "time," << (x.label.empty() ? "value" : x.label) << '\n';
    for (std::size_t i = 0; i < x.size(); ++i) {
        out << format_double(x.time(i)) << ',' << format_double(x.values[i]) << '\n';
    }
}

void write_csv(const std::filesystem::path& path, const StateMatrix& x) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << "time";
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        out << ',' << (c < static_cast<Eigen::Index>(x.labels.size()) ? x.labels[static_cast<std::size_t>(c)]
                                                                       : "x" + std::to_string(c + 1));
    }
    out << '\n';
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        out << format_double(x.time(i));
        for (Eigen::Index c = 0; c < x.cols(); ++c) out << ',' << format_double(x.values(i, c));
        out << '\n';
    }
}

std::vector<double> differentiate(std::span<const double> v, double dt) {
    const std::size_t n = v.size();
    if (n < 3) throw InputError("differentiate: insufficient samples (need >= 3, got " + std::to_string(n) + ")");
    if (!(dt > 0.0)) throw InputError("differentiate: dt must be positive");
    std::vector<double> d(n);
    const double h2 = 2.0 * dt;
    d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / h2;
    for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (v[i + 1] - v[i - 1]) / h2;
    d[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / h2;
    return d;
}

TimeSeries differentiate(const TimeSeries& x) {
    return {x.t0, x.dt, differentiate(std::span<const double>(x.values), x.dt), x.label.empty() ? "" : "d" + x.label};
}

DerivativeMatrix differentiate(const StateMatrix& x) {
    DerivativeMatrix d{x.t0, x.dt, Eigen::MatrixXd(x.rows(), x.cols()), {}};
    std::vector<double> col(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        Eigen::Map<Eigen::VectorXd>(col.data(), x.rows()) = x.values.col(c);
        auto dc = differentiate(std::span<const double>(col), x.dt);
        d.values.col(c) = Eigen::Map<const Eigen::VectorXd>(dc.data(), x.rows());
        d.labels.push_back("d" + (c < static_cast<Eigen::Index>(x.labels.size()) ? x.labels[static_cast<std::size_t>(c)]
                                                                                 : "x" + std::to_string(c + 1)));
    }
    return d;
}

TimeSeries window(const TimeSeries& x, double t_start, double t_end) {
    if (!(t_start < t_end)) throw InputError("window: empty window (t_start >= t_end)");
    const double slack = kGridTolerance * x.dt;
    if (t_start < x.t0 - slack || t_end > x.end_time() + 1e-6 * x.dt) {
        throw InputError("window: [" + format_double(t_start) + ", " + format_double(t_end) + ") outside series");
    }
    const double offset = (t_start - x.t0) / x.dt;
    auto first = static_cast<std::size_t>(std::max(0.0, std::ceil(offset - 1e-6)));
    auto count = static_cast<std::size_t>(std::floor((t_end - t_start) / x.dt + 1e-6));
    count = std::min(count, x.size() - std::min(first, x.size()));
    if (count == 0) throw InputError("window: no samples in window");
    TimeSeries out{x.time(first), x.dt, {}, x.label};
    out.values.assign(x.values.begin() + static_cast<std::ptrdiff_t>(first),
                      x.values.begin() + static_cast<std::ptrdiff_t>(first + count));
    return out;
}

BurstSet burst_sample(const TimeSeries& x, std::size_t burst_len, double period) {
    if (burst_len < 3) throw InputError("burst_sample: burst_len must be >= 3");
    if (period < static_cast<double>(burst_len) * x.dt * (1.0 - kGridTolerance)) {
        throw InputError("burst_sample: overlapping bursts (period < burst_len * dt)");
    }
    BurstSet set{{}, burst_len, period};
    for (std::size_t k = 0;; ++k) {
        const auto start = static_cast<std::size_t>(std::llround(static_cast<double>(k) * period / x.dt));
        if (start + burst_len > x.size()) break;
        TimeSeries b{x.time(start), x.dt, {}, x.label};
        b.values.assign(x.values.begin() + static_cast<std::ptrdiff_t>(start),
                        x.values.begin() + static_cast<std::ptrdiff_t>(start + burst_len));
        set.bursts.push_back(std::move(b));
    }
    return set;
}

StateMatrix delay_pair(const TimeSeries& x, std::size_t lag) {
    if (lag == 0) throw InputError("delay_pair: lag must be >= 1");
    if (x.size() <= lag + 2) throw InputError("delay_pair: series shorter than lag + 3 samples");
    const auto rows = static_cast<Eigen::Index>(x.size() - lag);
    StateMatrix s{x.time(lag), x.dt, Eigen::MatrixXd(rows, 2), {}};
    for (Eigen::Index i = 0; i < rows; ++i) {
        s.values(i, 0) = x.values[static_cast<std::size_t>(i) + lag];
        s.values(i, 1) = x.values[static_cast<std::size_t>(i)];
    }
    const std::string base = x.label.empty() ? "v" : x.label;
    s.labels = {base, base + "_lag"};
    return s;
}

std::size_t quarter_period_lag(double dt, double frequency) {
    const auto lag = std::llround(0.25 / (frequency * dt));
    return static_cast<std::size_t>(std::max<long long>(1, lag));
}

double rms(std::span<const double> v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double a : v) s += a * a;
    return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace mixdyn
