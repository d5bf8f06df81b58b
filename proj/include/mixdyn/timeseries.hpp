#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace mixdyn {

/// Uniformly sampled scalar signal.
struct TimeSeries {
    double t0 = 0.0;
    double dt = 1.0;
    std::vector<double> values;
    std::string label;

    [[nodiscard]] std::size_t size() const noexcept { return values.size(); }
    [[nodiscard]] double time(std::size_t i) const noexcept { return t0 + static_cast<double>(i) * dt; }
    /// Exclusive end of the sampled interval, t0 + n*dt.
    [[nodiscard]] double end_time() const noexcept { return time(values.size()); }
};

/// m samples by n states on a uniform grid; row i is the state at t0 + i*dt.
struct StateMatrix {
    double t0 = 0.0;
    double dt = 1.0;
    Eigen::MatrixXd values;
    std::vector<std::string> labels;

    [[nodiscard]] Eigen::Index rows() const noexcept { return values.rows(); }
    [[nodiscard]] Eigen::Index cols() const noexcept { return values.cols(); }
    [[nodiscard]] double time(Eigen::Index i) const noexcept { return t0 + static_cast<double>(i) * dt; }
    [[nodiscard]] TimeSeries column(Eigen::Index j) const;
};

/// Derivative estimates with the same shape and grid as their source states.
using DerivativeMatrix = StateMatrix;

struct BurstSet {
    std::vector<TimeSeries> bursts;
    std::size_t burst_len = 0;
    double period = 0.0;

    [[nodiscard]] std::size_t retained_samples() const noexcept { return bursts.size() * burst_len; }
};

/// Reads `time,value[,value...]`. One value column yields a TimeSeries, more yield a StateMatrix.
/// A non-numeric first row is treated as a header and supplies labels.
std::variant<TimeSeries, StateMatrix> load_csv(const std::filesystem::path& path);

/// Convenience wrappers that reject the other shape.
TimeSeries load_series_csv(const std::filesystem::path& path);
StateMatrix load_states_csv(const std::filesystem::path& path);

void write_csv(const std::filesystem::path& path, const TimeSeries& x);
void write_csv(const std::filesystem::path& path, const StateMatrix& x);

/// Second-order central differences inside, second-order one-sided stencils at the ends.
TimeSeries differentiate(const TimeSeries& x);
std::vector<double> differentiate(std::span<const double> values, double dt);
DerivativeMatrix differentiate(const StateMatrix& x);

/// Sub-series starting at the first sample >= t_start holding floor((t_end - t_start)/dt) samples.
TimeSeries window(const TimeSeries& x, double t_start, double t_end);

/// Dense bursts of `burst_len` samples starting every `period` seconds from t0.
BurstSet burst_sample(const TimeSeries& x, std::size_t burst_len, double period);

/// Two-state embedding (x(t), x(t - lag*dt)) used to give a scalar oscillation a planar state.
/// Row i corresponds to sample i + lag of the input.
StateMatrix delay_pair(const TimeSeries& x, std::size_t lag);

/// Sample count closest to a quarter period of `frequency` at the series step.
std::size_t quarter_period_lag(double dt, double frequency);

double rms(std::span<const double> v);

}  // namespace mixdyn
