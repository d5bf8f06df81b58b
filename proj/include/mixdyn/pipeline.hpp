#pragma once

#include "mixdyn/gridsim.hpp"
#include "mixdyn/mixed.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace mixdyn {

enum class Method { Sindy, Havok, Mixed };

Method parse_method(const std::string& name);
std::string to_string(Method m);

/// Everything needed to go from a waveform to a reconstruction error.
struct EvalConfig {
    double window_start = 1.0;
    double window_end = 2.0;
    /// Consecutive segments of this many samples; 0 keeps the window whole.
    std::size_t burst_len = 1000;
    double fundamental_hz = 60.0;
    LibrarySpec spec;     ///< generic SINDy library
    SolverConfig solver;  ///< generic SINDy solver
    MixedConfig mixed;

    void validate() const;
};

/// Cuts `x` into consecutive non-overlapping pieces of `len` samples, dropping a short tail.
std::vector<TimeSeries> segments(const TimeSeries& x, std::size_t len);

struct MethodResult {
    Method method = Method::Sindy;
    std::vector<TimeSeries> actual;
    std::vector<TimeSeries> predicted;
    double nrmse = 0.0;  ///< over all segments concatenated
    bool fallback = false;
};

/// Identifies one model on all segments and reconstructs each of them.
MethodResult run_method(Method method, const std::vector<TimeSeries>& segs, const EvalConfig& cfg);

/// The configured window of `x`, cut into segments.
std::vector<TimeSeries> evaluation_segments(const TimeSeries& x, const EvalConfig& cfg);

/// MixedConfig for the plain forced linear model: linear library, least squares.
MixedConfig havok_config(const EvalConfig& cfg);

/// Concatenation of consecutive segments back into one series.
TimeSeries concatenate(const std::vector<TimeSeries>& parts);

struct ErrorRow {
    std::string scenario;
    std::string method;
    double nrmse = 0.0;
    double ratio = 0.0;
};

/// Ratios against the reference scenario's sindy row (or its first row when there is none).
std::vector<ErrorRow> ratio_table(std::vector<ErrorRow> rows, const std::string& reference);

void write_error_csv(const std::filesystem::path& path, const std::vector<ErrorRow>& rows);
std::vector<ErrorRow> read_error_csv(const std::filesystem::path& path);

}  // namespace mixdyn
