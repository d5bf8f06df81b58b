#pragma once

#include "mixdyn/havok.hpp"
#include "mixdyn/sindy.hpp"

#include <optional>
#include <vector>

namespace mixdyn {

/// Slow/fast separation of one or more records sharing a delay basis.
struct ScaleSplit {
    std::vector<TimeSeries> slow;  ///< one per record, same grid as the input
    std::vector<TimeSeries> fast;  ///< input minus slow
    HavokModel havok;              ///< r == 0 when the embedding is rank-deficient
    Eigen::MatrixXd modes;         ///< leading r delay-shape modes (columns of Y)
    std::vector<double> mode_frequency;  ///< Hz, per retained coordinate
    std::vector<std::size_t> slow_modes;
    std::vector<Eigen::Index> record_cols;  ///< embedding columns per record
    std::size_t threshold_count = 0;  ///< unclamped hard-threshold count
    bool degenerate = false;          ///< embedding of rank < 2: slow = x, fast = 0

    /// RMS of all fast samples over RMS of all input samples.
    [[nodiscard]] double fast_fraction() const;
};

/// Modes whose frequencies sit above the largest gap of at least this factor are fast.
inline constexpr double kScaleSeparation = 4.0;

ScaleSplit decompose_scales(const TimeSeries& x, const HankelConfig& cfg,
                            std::optional<std::size_t> rank_override = std::nullopt);
ScaleSplit decompose_scales(const std::vector<TimeSeries>& records, const HankelConfig& cfg,
                            std::optional<std::size_t> rank_override = std::nullopt);

/// Generic SINDy on a scalar signal: planar state (x(t), x(t - lag)), RK4 replay from the first state.
struct DelayPairModel {
    SparseModel model;
    std::size_t lag = 1;
};

DelayPairModel identify_delay_pair(const std::vector<TimeSeries>& records, std::size_t lag, const LibrarySpec& spec,
                                   const SolverConfig& solver);

struct Prediction {
    TimeSeries series;
    bool truncated = false;  ///< integration blew up; series stops early
};

/// Rebuilds `record` from its first `lag + 1` samples only.
Prediction replay_delay_pair(const DelayPairModel& model, const TimeSeries& record);

enum class MixedTarget {
    DelayCoordinates,  ///< SINDy over u_1..u_{r-1} with u_r as an exogenous input
    SlowSignal,        ///< generic delay-pair SINDy on the slow reconstruction; fast part replayed
};

enum class Integrator { Leapfrog, Rk4 };

struct MixedConfig {
    HankelConfig hankel;
    SolverConfig solver{SolverMethod::Stlsq, 0.0};
    LibrarySpec spec{1};
    std::optional<std::size_t> slow_rank_override;
    MixedTarget target = MixedTarget::DelayCoordinates;
    Integrator integrator = Integrator::Leapfrog;
    /// Fundamental used to pick the delay-pair lag for SlowSignal and for the fallback.
    double fundamental_hz = 60.0;
    /// Library and solver of the delay-pair model (SlowSignal target and fallback).
    LibrarySpec generic_spec;
    SolverConfig generic_solver;
    /// Without fast content, use the delay-pair model instead; a degenerate split always does.
    bool allow_fallback = true;

    void validate() const;
};

struct MixedModel {
    MixedConfig config;
    ScaleSplit split;
    SparseModel slow_model;        ///< DelayCoordinates target
    DelayPairModel signal_model;   ///< SlowSignal target or fallback
    std::vector<TimeSeries> training;
    bool fallback = false;
};

MixedModel identify_mixed(const TimeSeries& x, const MixedConfig& cfg);
/// Several disjoint records (bursts) share one delay basis and one model.
MixedModel identify_mixed(const std::vector<TimeSeries>& records, const MixedConfig& cfg);

/// Reconstruction of the first training record over its first `duration` seconds.
Prediction predict_mixed(const MixedModel& model, double duration);
/// Full reconstruction of every training record.
std::vector<Prediction> predict_mixed_records(const MixedModel& model);

}  // namespace mixdyn
