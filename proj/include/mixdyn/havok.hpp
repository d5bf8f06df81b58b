#pragma once

#include "mixdyn/timeseries.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace mixdyn {

struct HankelConfig {
    std::size_t m = 100;
    std::size_t tau_steps = 1;

    /// Shortest series that yields at least two embedding columns.
    [[nodiscard]] std::size_t min_length() const noexcept { return (m - 1) * tau_steps + 2; }
    void validate() const;
};

/// Delay embedding. Column j is [x(t_j), x(t_j - tau), ..., x(t_j - (m-1)tau)],
/// where t_j is the time of sample j + (m-1)*tau_steps of the source series.
struct HankelMatrix {
    Eigen::MatrixXd entries;
    double t0 = 0.0;  ///< time of column 0
    double dt = 1.0;
    std::size_t tau_steps = 1;
    std::size_t series_length = 0;
    /// Column count of each record for stacked embeddings; a single entry otherwise.
    std::vector<Eigen::Index> record_cols;

    [[nodiscard]] Eigen::Index m() const noexcept { return entries.rows(); }
    [[nodiscard]] Eigen::Index k() const noexcept { return entries.cols(); }
};

HankelMatrix hankel(const TimeSeries& x, const HankelConfig& cfg);

/// Hankel matrix of several records placed side by side. Each record contributes its own
/// columns; no column straddles two records.
HankelMatrix hankel_stacked(const std::vector<TimeSeries>& records, const HankelConfig& cfg);

/// Thin SVD H = Y diag(sigma) U^T. Y holds delay-shape modes, columns of U are the
/// time-evolving delay coordinates.
struct SvdResult {
    Eigen::MatrixXd Y;
    Eigen::VectorXd sigma;
    Eigen::MatrixXd U;
    double t0 = 0.0;
    double dt = 1.0;
    std::size_t tau_steps = 1;
    std::size_t series_length = 0;
    std::vector<Eigen::Index> record_cols;

    [[nodiscard]] Eigen::Index q() const noexcept { return sigma.size(); }
};

/// Deterministic: the largest-magnitude entry of every column of Y is positive
/// (lowest index wins ties), with U flipped to match.
SvdResult svd(const HankelMatrix& h);
SvdResult svd(const Eigen::MatrixXd& a);

/// Optimal hard-threshold coefficient for known noise, lambda*(beta); 4/sqrt(3) at beta = 1.
double threshold_lambda(double beta);
/// Median of the Marchenko-Pastur law with aspect ratio beta in (0, 1].
double marchenko_pastur_median(double beta);
/// Coefficient applied to the median singular value when the noise level is unknown.
double threshold_omega(double beta);

/// Number of singular values above omega(beta)*median (and above the roundoff floor
/// sigma_max*eps*max(m,k)), without clamping.
std::size_t hard_threshold_count(std::span<const double> sigma, std::size_t m, std::size_t k);
/// hard_threshold_count clamped to at least 2.
std::size_t hard_threshold_rank(std::span<const double> sigma, std::size_t m, std::size_t k);
std::size_t hard_threshold_rank(const SvdResult& s);

/// d/dt u = A u + B u_r on the leading r delay coordinates.
struct HavokModel {
    std::size_t m = 0;
    std::size_t tau_steps = 1;
    std::size_t r = 0;
    double dt = 1.0;
    Eigen::MatrixXd A;       ///< (r-1) x (r-1)
    Eigen::MatrixXd B;       ///< (r-1) x 1
    StateMatrix coords;      ///< raw columns u_1..u_r of U
    Eigen::VectorXd sigma;   ///< all singular values of the embedding
    std::vector<double> r_squared;  ///< per linear coordinate
    /// Fewer than two singular values clear the hard threshold: nothing distinguishes the
    /// embedding from noise, whatever the R^2 of the fit.
    bool noise_only = false;

    [[nodiscard]] double mean_r_squared() const;
    /// Mean R^2 below 0.5: the coordinates show no usable linear delay dynamics.
    [[nodiscard]] bool poor_fit() const { return mean_r_squared() < 0.5; }
};

HavokModel fit_linear_forced(const SvdResult& s, std::size_t r);

/// u_r aligned to the embedding column times.
TimeSeries forcing(const HavokModel& model);

/// Rank-r approximation mapped back to a series by averaging every entry that
/// refers to the same sample.
TimeSeries reconstruct(const SvdResult& s, std::size_t r, const HankelConfig& cfg);

/// Same averaging applied to explicit coordinates: columns of `coords` replace U_r.
TimeSeries reconstruct_from_coords(const Eigen::MatrixXd& Y, const Eigen::VectorXd& sigma,
                                   const Eigen::MatrixXd& coords, const HankelConfig& cfg, double series_t0,
                                   double dt);

}  // namespace mixdyn
