#include "mixdyn/mixed.hpp"

#include "mixdyn/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace mixdyn {

namespace {

Eigen::MatrixXd gather(const Eigen::MatrixXd& a, const std::vector<std::size_t>& cols) {
    Eigen::MatrixXd out(a.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = a.col(static_cast<Eigen::Index>(cols[j]));
    return out;
}

Eigen::MatrixXd differentiate_columns(const Eigen::MatrixXd& block, double dt) {
    Eigen::MatrixXd out(block.rows(), block.cols());
    std::vector<double> col(static_cast<std::size_t>(block.rows()));
    for (Eigen::Index j = 0; j < block.cols(); ++j) {
        Eigen::Map<Eigen::VectorXd>(col.data(), block.rows()) = block.col(j);
        auto d = differentiate(std::span<const double>(col), dt);
        out.col(j) = Eigen::Map<const Eigen::VectorXd>(d.data(), block.rows());
    }
    return out;
}

void check_records(const std::vector<TimeSeries>& records) {
    if (records.empty()) throw InputError("no records");
    for (const auto& r : records) {
        if (std::abs(r.dt - records.front().dt) > 1e-12 * records.front().dt) {
            throw InputError("records have different sample steps");
        }
    }
}

// Slow modes: the dominant mode plus everything below the widest frequency gap above it,
// when that gap reaches kScaleSeparation.
std::vector<std::size_t> select_slow(const std::vector<double>& freq) {
    const std::size_t r = freq.size();
    std::vector<std::size_t> all(r);
    std::iota(all.begin(), all.end(), 0);
    std::vector<double> sorted;
    for (double f : freq) {
        if (f >= freq[0]) sorted.push_back(f);
    }
    std::sort(sorted.begin(), sorted.end());
    double best = 1.0, cut = 0.0;
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        const double ratio = sorted[i - 1] > 0.0 ? sorted[i] / sorted[i - 1] : 0.0;
        if (ratio > best) {
            best = ratio;
            cut = std::sqrt(sorted[i] * sorted[i - 1]);
        }
    }
    if (best < kScaleSeparation) return all;
    std::vector<std::size_t> slow;
    for (std::size_t i = 0; i < r; ++i) {
        if (freq[i] < cut) slow.push_back(i);
    }
    return slow;
}

std::size_t delay_lag(const MixedModel& model) {
    return quarter_period_lag(model.training.front().dt, model.config.fundamental_hz);
}

Eigen::MatrixXd record_block(const ScaleSplit& split, std::size_t record) {
    Eigen::Index start = 0;
    for (std::size_t i = 0; i < record; ++i) start += split.record_cols[i];
    return split.havok.coords.values.middleRows(start, split.record_cols[record]);
}

// Integrates the delay-coordinate model on one record with u_r replayed.
// Returns the coordinate rows that stayed finite and bounded.
Eigen::MatrixXd integrate_coords(const MixedModel& model, const Eigen::MatrixXd& c, bool& truncated) {
    const Eigen::Index k = c.rows();
    const Eigen::Index n = c.cols() - 1;
    ModelRhs f(model.slow_model);
    const double dt = model.split.havok.dt;
    const double bound = 1e6 * std::max(c.cwiseAbs().maxCoeff(), 1e-300);
    Eigen::MatrixXd p(k, c.cols());
    p.col(n) = c.col(n);
    Eigen::VectorXd dx(n), u(1);
    truncated = false;
    auto bad = [&](Eigen::Index row) {
        return !p.row(row).head(n).allFinite() || p.row(row).head(n).cwiseAbs().maxCoeff() > bound;
    };
    if (model.config.integrator == Integrator::Leapfrog) {
        p.row(0).head(n) = c.row(0).head(n);
        if (k > 1) p.row(1).head(n) = c.row(1).head(n);
        for (Eigen::Index i = 1; i + 1 < k; ++i) {
            u(0) = c(i, n);
            f(p.row(i).head(n).transpose(), u, dx);
            p.row(i + 1).head(n) = p.row(i - 1).head(n) + 2.0 * dt * dx.transpose();
            if (bad(i + 1)) {
                truncated = true;
                return p.topRows(i + 1);
            }
        }
    } else {
        Eigen::VectorXd x = c.row(0).head(n).transpose(), k1(n), k2(n), k3(n), k4(n);
        p.row(0).head(n) = x.transpose();
        for (Eigen::Index i = 0; i + 1 < k; ++i) {
            u(0) = c(i, n);
            f(x, u, k1);
            u(0) = 0.5 * (c(i, n) + c(i + 1, n));
            f(x + 0.5 * dt * k1, u, k2);
            f(x + 0.5 * dt * k2, u, k3);
            u(0) = c(i + 1, n);
            f(x + dt * k3, u, k4);
            x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            p.row(i + 1).head(n) = x.transpose();
            if (bad(i + 1)) {
                truncated = true;
                return p.topRows(i + 1);
            }
        }
    }
    return p;
}

Prediction add_fast(Prediction slow, const TimeSeries& fast) {
    for (std::size_t i = 0; i < slow.series.size(); ++i) slow.series.values[i] += fast.values[i];
    return slow;
}

}  // namespace

double ScaleSplit::fast_fraction() const {
    double fast_sq = 0.0, total_sq = 0.0;
    for (std::size_t r = 0; r < fast.size(); ++r) {
        for (std::size_t i = 0; i < fast[r].size(); ++i) {
            const double x = slow[r].values[i] + fast[r].values[i];
            fast_sq += fast[r].values[i] * fast[r].values[i];
            total_sq += x * x;
        }
    }
    return total_sq > 0.0 ? std::sqrt(fast_sq / total_sq) : 0.0;
}

ScaleSplit decompose_scales(const TimeSeries& x, const HankelConfig& cfg, std::optional<std::size_t> rank_override) {
    return decompose_scales(std::vector<TimeSeries>{x}, cfg, rank_override);
}

ScaleSplit decompose_scales(const std::vector<TimeSeries>& records, const HankelConfig& cfg,
                            std::optional<std::size_t> rank_override) {
    check_records(records);
    const HankelMatrix h = records.size() == 1 ? hankel(records.front(), cfg) : hankel_stacked(records, cfg);
    const SvdResult s = svd(h);
    ScaleSplit out;
    out.record_cols = s.record_cols;
    const std::span<const double> sigma(s.sigma.data(), static_cast<std::size_t>(s.q()));
    out.threshold_count = hard_threshold_count(sigma, static_cast<std::size_t>(h.m()), static_cast<std::size_t>(h.k()));
    if (s.q() < 2 || s.sigma(1) <= 1e-12 * s.sigma(0)) {
        out.degenerate = true;
        out.slow = records;
        for (const auto& r : records) out.fast.push_back({r.t0, r.dt, std::vector<double>(r.size(), 0.0), r.label});
        return out;
    }

    std::size_t r = hard_threshold_rank(s);
    if (rank_override) {
        r = *rank_override;
        if (r < 2 || r > static_cast<std::size_t>(s.q())) {
            throw InputError("decompose_scales: rank override " + std::to_string(r) + " outside [2, " +
                             std::to_string(s.q()) + "]");
        }
    }
    out.havok = fit_linear_forced(s, r);
    const auto ri = static_cast<Eigen::Index>(r);
    out.modes = s.Y.leftCols(ri);

    std::vector<double> num(r, 0.0), den(r, 0.0);
    for (std::size_t rec = 0; rec < records.size(); ++rec) {
        const Eigen::MatrixXd c = record_block(out, rec);
        const Eigen::MatrixXd d = differentiate_columns(c, s.dt);
        for (std::size_t i = 0; i < r; ++i) {
            num[i] += d.col(static_cast<Eigen::Index>(i)).squaredNorm();
            den[i] += c.col(static_cast<Eigen::Index>(i)).squaredNorm();
        }
    }
    for (std::size_t i = 0; i < r; ++i) {
        out.mode_frequency.push_back(den[i] > 0.0 ? std::sqrt(num[i] / den[i]) / (2.0 * std::numbers::pi) : 0.0);
    }
    out.slow_modes = select_slow(out.mode_frequency);

    std::vector<std::size_t> slow_idx = out.slow_modes;
    const Eigen::MatrixXd y_slow = gather(s.Y, slow_idx);
    Eigen::VectorXd sig_slow(static_cast<Eigen::Index>(slow_idx.size()));
    for (std::size_t j = 0; j < slow_idx.size(); ++j) sig_slow(static_cast<Eigen::Index>(j)) = s.sigma(static_cast<Eigen::Index>(slow_idx[j]));
    for (std::size_t rec = 0; rec < records.size(); ++rec) {
        const Eigen::MatrixXd c = gather(record_block(out, rec), slow_idx);
        TimeSeries slow = reconstruct_from_coords(y_slow, sig_slow, c, cfg, records[rec].t0, s.dt);
        slow.label = records[rec].label;
        TimeSeries fast = records[rec];
        for (std::size_t i = 0; i < fast.size(); ++i) fast.values[i] -= slow.values[i];
        out.slow.push_back(std::move(slow));
        out.fast.push_back(std::move(fast));
    }
    return out;
}

DelayPairModel identify_delay_pair(const std::vector<TimeSeries>& records, std::size_t lag, const LibrarySpec& spec,
                                   const SolverConfig& solver) {
    check_records(records);
    if (lag < 1) throw InputError("delay pair: lag must be >= 1");
    std::vector<StateMatrix> states;
    for (const auto& r : records) {
        if (r.size() < lag + 3) {
            throw InputError("delay pair: record of " + std::to_string(r.size()) + " samples is too short for lag " +
                             std::to_string(lag));
        }
        states.push_back(delay_pair(r, lag));
    }
    return {identify_stacked(states, spec, solver), lag};
}

Prediction replay_delay_pair(const DelayPairModel& model, const TimeSeries& record) {
    const std::size_t lag = model.lag;
    const std::size_t n = record.size();
    if (n < lag + 2) throw InputError("delay pair: record too short to replay");
    Eigen::Vector2d x0(record.values[lag], record.values[0]);
    const auto sim = simulate_model(model.model, x0, static_cast<double>(n - lag - 1) * record.dt, record.dt);
    const auto rows = static_cast<std::size_t>(sim.states.rows());
    Prediction out{{record.t0, record.dt, std::vector<double>(n, 0.0), record.label}, sim.blew_up};
    for (std::size_t i = 0; i < rows && i + lag < n; ++i) out.series.values[i + lag] = sim.states.values(static_cast<Eigen::Index>(i), 0);
    for (std::size_t i = 0; i < lag && i < rows; ++i) out.series.values[i] = sim.states.values(static_cast<Eigen::Index>(i), 1);
    if (rows < n - lag) out.series.values.resize(rows >= lag ? lag + rows : rows);
    return out;
}

void MixedConfig::validate() const {
    hankel.validate();
    solver.validate();
    spec.validate();
    generic_spec.validate();
    generic_solver.validate();
    if (slow_rank_override && *slow_rank_override < 2) throw InputError("mixed: rank override must be >= 2");
    if (!(fundamental_hz > 0.0)) throw InputError("mixed: fundamental must be positive");
}

MixedModel identify_mixed(const TimeSeries& x, const MixedConfig& cfg) {
    return identify_mixed(std::vector<TimeSeries>{x}, cfg);
}

MixedModel identify_mixed(const std::vector<TimeSeries>& records, const MixedConfig& cfg) {
    cfg.validate();
    check_records(records);
    MixedModel model;
    model.config = cfg;
    model.training = records;
    model.split = decompose_scales(records, cfg.hankel, cfg.slow_rank_override);

    if (model.split.degenerate || (cfg.allow_fallback && model.split.fast_fraction() < 1e-6)) {
        model.fallback = true;
        model.signal_model = identify_delay_pair(records, delay_lag(model), cfg.generic_spec, cfg.generic_solver);
        return model;
    }
    if (cfg.target == MixedTarget::SlowSignal) {
        model.signal_model = identify_delay_pair(model.split.slow, delay_lag(model), cfg.generic_spec, cfg.generic_solver);
        return model;
    }

    // Rows come from the interior of each record: the one-sided end stencils are less
    // accurate than the central stencil the leapfrog replay inverts.
    const HavokModel& hv = model.split.havok;
    const auto r = static_cast<Eigen::Index>(hv.r);
    const Eigen::Index n = r - 1;
    Eigen::Index rows = 0;
    for (auto len : model.split.record_cols) {
        if (len < 3) throw InputError("mixed: each record needs at least 3 embedding columns");
        rows += len - 2;
    }
    Eigen::MatrixXd states(rows, n), inputs(rows, 1), targets(rows, n);
    Eigen::Index at = 0;
    for (std::size_t rec = 0; rec < model.split.record_cols.size(); ++rec) {
        const Eigen::MatrixXd c = record_block(model.split, rec);
        const Eigen::MatrixXd d = differentiate_columns(c.leftCols(n), hv.dt);
        const Eigen::Index len = c.rows() - 2;
        states.middleRows(at, len) = c.block(1, 0, len, n);
        inputs.middleRows(at, len) = c.block(1, n, len, 1);
        targets.middleRows(at, len) = d.middleRows(1, len);
        at += len;
    }
    std::vector<std::string> names(hv.coords.labels.begin(), hv.coords.labels.begin() + n);
    auto lib = build_library(cfg.spec, states, names);
    Eigen::MatrixXd theta(rows, lib.entries.cols() + 1);
    theta << lib.entries, inputs;
    model.slow_model = SparseModel{cfg.spec, solve_sparse(theta, targets, cfg.solver), names, std::move(lib.term_labels),
                                   {hv.coords.labels.back()}};
    return model;
}

std::vector<Prediction> predict_mixed_records(const MixedModel& model) {
    std::vector<Prediction> out;
    for (std::size_t rec = 0; rec < model.training.size(); ++rec) {
        const TimeSeries& x = model.training[rec];
        if (model.fallback) {
            out.push_back(replay_delay_pair(model.signal_model, x));
        } else if (model.config.target == MixedTarget::SlowSignal) {
            out.push_back(add_fast(replay_delay_pair(model.signal_model, model.split.slow[rec]), model.split.fast[rec]));
        } else {
            bool truncated = false;
            const Eigen::MatrixXd p = integrate_coords(model, record_block(model.split, rec), truncated);
            const auto& hv = model.split.havok;
            if (p.rows() < static_cast<Eigen::Index>(model.config.hankel.tau_steps)) {
                out.push_back({{x.t0, x.dt, {}, x.label}, true});
                continue;
            }
            TimeSeries series = reconstruct_from_coords(model.split.modes, hv.sigma, p, model.config.hankel, x.t0, x.dt);
            series.label = x.label;
            out.push_back({std::move(series), truncated});
        }
    }
    return out;
}

Prediction predict_mixed(const MixedModel& model, double duration) {
    if (duration < 0.0) throw InputError("predict_mixed: negative duration");
    if (model.training.empty()) throw InputError("predict_mixed: model has no training record");
    const TimeSeries& x = model.training.front();
    const auto want = std::min(x.size(), static_cast<std::size_t>(std::floor(duration / x.dt + 1e-9)));
    if (want == 0) return {{x.t0, x.dt, {}, x.label}, false};
    Prediction p = predict_mixed_records(model).front();
    if (p.series.size() > want) p.series.values.resize(want);
    return p;
}

}  // namespace mixdyn
