#include "mixdyn/havok.hpp"

#include "mixdyn/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace mixdyn {

namespace {

void check_records(const std::vector<Eigen::Index>& record_cols, Eigen::Index total) {
    Eigen::Index sum = 0;
    for (auto c : record_cols) sum += c;
    if (sum != total) throw InputError("record column counts do not add up to the embedding width");
}

// Cumulative Marchenko-Pastur mass on [a, x(theta)] with x = a + (b-a)(1-cos theta)/2.
// The substitution removes the square-root endpoint singularities.
double mp_cdf(double beta, double theta) {
    const double a = std::pow(1.0 - std::sqrt(beta), 2);
    const double b = std::pow(1.0 + std::sqrt(beta), 2);
    const double h = 0.5 * (b - a);
    auto f = [&](double th) {
        const double x = a + h * (1.0 - std::cos(th));
        const double s = std::sin(th);
        if (x <= 0.0) return h / (2.0 * std::numbers::pi * beta) * 2.0;  // limit at beta = 1, theta -> 0
        return h * h * s * s / (2.0 * std::numbers::pi * beta * x);
    };
    constexpr int n = 2000;  // Simpson panels, even
    const double step = theta / n;
    double acc = f(0.0) + f(theta);
    for (int i = 1; i < n; ++i) acc += (i % 2 ? 4.0 : 2.0) * f(i * step);
    return acc * step / 3.0;
}

}  // namespace

void HankelConfig::validate() const {
    if (m < 2) throw InputError("hankel: m must be >= 2");
    if (tau_steps < 1) throw InputError("hankel: tau_steps must be >= 1");
}

HankelMatrix hankel(const TimeSeries& x, const HankelConfig& cfg) {
    cfg.validate();
    if (x.size() < cfg.min_length()) {
        throw InputError("hankel: series has " + std::to_string(x.size()) + " samples, need at least " +
                         std::to_string(cfg.min_length()));
    }
    const std::size_t span = (cfg.m - 1) * cfg.tau_steps;
    const auto m = static_cast<Eigen::Index>(cfg.m);
    const auto k = static_cast<Eigen::Index>(x.size() - span);
    HankelMatrix h{Eigen::MatrixXd(m, k), x.time(span), x.dt, cfg.tau_steps, x.size(), {k}};
    for (Eigen::Index i = 0; i < m; ++i) {
        const std::size_t offset = (cfg.m - 1 - static_cast<std::size_t>(i)) * cfg.tau_steps;
        h.entries.row(i) = Eigen::Map<const Eigen::RowVectorXd>(x.values.data() + offset, k);
    }
    return h;
}

HankelMatrix hankel_stacked(const std::vector<TimeSeries>& records, const HankelConfig& cfg) {
    if (records.empty()) throw InputError("hankel_stacked: no records");
    std::vector<HankelMatrix> parts;
    Eigen::Index total = 0;
    for (const auto& r : records) {
        if (std::abs(r.dt - records.front().dt) > 1e-9 * records.front().dt) {
            throw InputError("hankel_stacked: records have different sample steps");
        }
        parts.push_back(hankel(r, cfg));
        total += parts.back().k();
    }
    HankelMatrix h{Eigen::MatrixXd(static_cast<Eigen::Index>(cfg.m), total), parts.front().t0, records.front().dt,
                   cfg.tau_steps, 0, {}};
    Eigen::Index col = 0;
    for (const auto& p : parts) {
        h.entries.middleCols(col, p.k()) = p.entries;
        col += p.k();
        h.series_length += p.series_length;
        h.record_cols.push_back(p.k());
    }
    return h;
}

SvdResult svd(const Eigen::MatrixXd& a) {
    if (a.size() == 0) throw InputError("svd: empty matrix");
    if (!a.allFinite()) throw InputError("svd: matrix has non-finite entries");

    SvdResult out;
    const Eigen::Index rows = a.rows();
    const Eigen::Index cols = a.cols();
    // Reduce the long dimension with a QR first so the Jacobi sweep works on a small square factor.
    if (cols > rows) {
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(a.transpose());
        const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(cols, rows);
        const Eigen::MatrixXd rt = qr.matrixQR().topRows(rows).triangularView<Eigen::Upper>().transpose();
        Eigen::JacobiSVD<Eigen::MatrixXd> js(rt, Eigen::ComputeFullU | Eigen::ComputeFullV);
        out.Y = js.matrixU();
        out.sigma = js.singularValues();
        out.U = q * js.matrixV();
    } else if (rows > cols) {
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
        const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
        const Eigen::MatrixXd r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
        Eigen::JacobiSVD<Eigen::MatrixXd> js(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
        out.Y = q * js.matrixU();
        out.sigma = js.singularValues();
        out.U = js.matrixV();
    } else {
        Eigen::JacobiSVD<Eigen::MatrixXd> js(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
        out.Y = js.matrixU();
        out.sigma = js.singularValues();
        out.U = js.matrixV();
    }

    for (Eigen::Index j = 0; j < out.Y.cols(); ++j) {
        Eigen::Index best = 0;
        for (Eigen::Index i = 1; i < out.Y.rows(); ++i) {
            if (std::abs(out.Y(i, j)) > std::abs(out.Y(best, j))) best = i;
        }
        if (out.Y(best, j) < 0.0) {
            out.Y.col(j) *= -1.0;
            out.U.col(j) *= -1.0;
        }
    }
    out.record_cols = {cols};
    return out;
}

SvdResult svd(const HankelMatrix& h) {
    check_records(h.record_cols, h.k());
    SvdResult out = svd(h.entries);
    out.t0 = h.t0;
    out.dt = h.dt;
    out.tau_steps = h.tau_steps;
    out.series_length = h.series_length;
    out.record_cols = h.record_cols;
    return out;
}

double threshold_lambda(double beta) {
    if (!(beta > 0.0 && beta <= 1.0)) throw InputError("aspect ratio must lie in (0, 1]");
    return std::sqrt(2.0 * (beta + 1.0) + 8.0 * beta / ((beta + 1.0) + std::sqrt(beta * beta + 14.0 * beta + 1.0)));
}

double marchenko_pastur_median(double beta) {
    if (!(beta > 0.0 && beta <= 1.0)) throw InputError("aspect ratio must lie in (0, 1]");
    double lo = 0.0;
    double hi = std::numbers::pi;
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (mp_cdf(beta, mid) < 0.5 ? lo : hi) = mid;
    }
    const double a = std::pow(1.0 - std::sqrt(beta), 2);
    const double b = std::pow(1.0 + std::sqrt(beta), 2);
    return a + 0.5 * (b - a) * (1.0 - std::cos(0.5 * (lo + hi)));
}

double threshold_omega(double beta) { return threshold_lambda(beta) / std::sqrt(marchenko_pastur_median(beta)); }

std::size_t hard_threshold_count(std::span<const double> sigma, std::size_t m, std::size_t k) {
    if (sigma.empty()) throw InputError("hard threshold: no singular values");
    if (m == 0 || k == 0) throw InputError("hard threshold: empty matrix shape");
    for (std::size_t i = 0; i < sigma.size(); ++i) {
        if (!(sigma[i] >= 0.0) || !std::isfinite(sigma[i])) throw InputError("hard threshold: invalid singular value");
        if (i > 0 && sigma[i] > sigma[i - 1]) throw InputError("hard threshold: singular values not descending");
    }
    if (sigma.front() == 0.0) throw NumericError("hard threshold: all singular values are zero (no signal)");

    const double beta = static_cast<double>(std::min(m, k)) / static_cast<double>(std::max(m, k));
    std::vector<double> sorted(sigma.begin(), sigma.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    // Below sigma_max*eps*max(m,k) singular values are roundoff; on noise-free input the median
    // lands there and would otherwise admit roundoff modes.
    const double tol = sigma.front() * std::numeric_limits<double>::epsilon() * static_cast<double>(std::max(m, k));
    const double cut = std::max(threshold_omega(beta) * median, tol);
    return static_cast<std::size_t>(std::count_if(sigma.begin(), sigma.end(), [&](double s) { return s > cut; }));
}

std::size_t hard_threshold_rank(std::span<const double> sigma, std::size_t m, std::size_t k) {
    return std::max<std::size_t>(2, hard_threshold_count(sigma, m, k));
}

std::size_t hard_threshold_rank(const SvdResult& s) {
    return hard_threshold_rank(std::span<const double>(s.sigma.data(), static_cast<std::size_t>(s.sigma.size())),
                               static_cast<std::size_t>(s.Y.rows()), static_cast<std::size_t>(s.U.rows()));
}

double HavokModel::mean_r_squared() const {
    if (r_squared.empty()) return 0.0;
    double s = 0.0;
    for (double v : r_squared) s += v;
    return s / static_cast<double>(r_squared.size());
}

HavokModel fit_linear_forced(const SvdResult& s, std::size_t r) {
    if (r < 2) throw InputError("fit_linear_forced: r must be >= 2");
    if (r > static_cast<std::size_t>(s.q())) {
        throw InputError("fit_linear_forced: r = " + std::to_string(r) + " exceeds the " + std::to_string(s.q()) +
                         " available singular values");
    }
    const auto ri = static_cast<Eigen::Index>(r);
    if (!(s.sigma(ri - 1) > 0.0)) throw NumericError("fit_linear_forced: r exceeds the rank of the embedding");
    check_records(s.record_cols, s.U.rows());

    const Eigen::MatrixXd coords = s.U.leftCols(ri);
    const Eigen::Index n = ri - 1;
    Eigen::MatrixXd deriv(coords.rows(), n);
    {
        std::vector<double> col;
        Eigen::Index start = 0;
        for (auto len : s.record_cols) {
            if (len < 3) throw InputError("fit_linear_forced: each record needs at least 3 embedding columns");
            col.resize(static_cast<std::size_t>(len));
            for (Eigen::Index j = 0; j < n; ++j) {
                Eigen::Map<Eigen::VectorXd>(col.data(), len) = coords.col(j).segment(start, len);
                auto d = differentiate(std::span<const double>(col), s.dt);
                deriv.col(j).segment(start, len) = Eigen::Map<const Eigen::VectorXd>(d.data(), len);
            }
            start += len;
        }
    }

    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(coords);
    const Eigen::MatrixXd c = cod.solve(deriv);  // r x (r-1)

    HavokModel model;
    model.m = static_cast<std::size_t>(s.Y.rows());
    model.tau_steps = s.tau_steps;
    model.r = r;
    model.dt = s.dt;
    model.A = c.topRows(n).transpose();
    model.B = c.bottomRows(1).transpose();
    model.sigma = s.sigma;
    model.noise_only = hard_threshold_count(std::span<const double>(s.sigma.data(), static_cast<std::size_t>(s.q())),
                                            static_cast<std::size_t>(s.Y.rows()), static_cast<std::size_t>(s.U.rows())) < 2;
    model.coords.t0 = s.t0;
    model.coords.dt = s.dt;
    model.coords.values = coords;
    for (std::size_t i = 1; i <= r; ++i) model.coords.labels.push_back("u" + std::to_string(i));

    const Eigen::MatrixXd resid = deriv - coords * c;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double ss_res = resid.col(j).squaredNorm();
        const double ss_tot = (deriv.col(j).array() - deriv.col(j).mean()).matrix().squaredNorm();
        model.r_squared.push_back(ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0));
    }
    return model;
}

TimeSeries forcing(const HavokModel& model) {
    if (model.r < 2 || model.coords.cols() < static_cast<Eigen::Index>(model.r)) {
        throw InputError("forcing: model has no forcing coordinate");
    }
    TimeSeries out = model.coords.column(static_cast<Eigen::Index>(model.r) - 1);
    out.label = "u" + std::to_string(model.r);
    return out;
}

TimeSeries reconstruct_from_coords(const Eigen::MatrixXd& Y, const Eigen::VectorXd& sigma, const Eigen::MatrixXd& coords,
                                   const HankelConfig& cfg, double series_t0, double dt) {
    cfg.validate();
    const Eigen::Index r = coords.cols();
    if (r < 1) throw InputError("reconstruct: rank must be >= 1");
    if (Y.cols() < r || sigma.size() < r) throw InputError("reconstruct: rank exceeds the available modes");
    if (Y.rows() != static_cast<Eigen::Index>(cfg.m)) throw InputError("reconstruct: embedding dimension mismatch");
    const Eigen::Index k = coords.rows();
    if (k < static_cast<Eigen::Index>(cfg.tau_steps)) {
        throw InputError("reconstruct: too few columns to cover every sample");
    }
    const std::size_t span = (cfg.m - 1) * cfg.tau_steps;
    const std::size_t n = static_cast<std::size_t>(k) + span;

    std::vector<double> acc(n, 0.0);
    std::vector<int> count(n, 0);
    const Eigen::MatrixXd weighted = Y.leftCols(r) * sigma.head(r).asDiagonal();  // m x r
    Eigen::VectorXd row(k);
    for (Eigen::Index i = 0; i < Y.rows(); ++i) {
        row.noalias() = coords * weighted.row(i).transpose();
        const std::size_t offset = (cfg.m - 1 - static_cast<std::size_t>(i)) * cfg.tau_steps;
        for (Eigen::Index j = 0; j < k; ++j) {
            acc[offset + static_cast<std::size_t>(j)] += row(j);
            ++count[offset + static_cast<std::size_t>(j)];
        }
    }
    TimeSeries out{series_t0, dt, std::vector<double>(n), ""};
    for (std::size_t i = 0; i < n; ++i) out.values[i] = acc[i] / count[i];
    return out;
}

TimeSeries reconstruct(const SvdResult& s, std::size_t r, const HankelConfig& cfg) {
    if (r == 0) throw InputError("reconstruct: r must be >= 1");
    if (r > static_cast<std::size_t>(s.q())) {
        throw InputError("reconstruct: r = " + std::to_string(r) + " exceeds " + std::to_string(s.q()));
    }
    if (s.record_cols.size() > 1) throw InputError("reconstruct: stacked embeddings are reconstructed per record");
    const auto ri = static_cast<Eigen::Index>(r);
    const double series_t0 = s.t0 - static_cast<double>((cfg.m - 1) * cfg.tau_steps) * s.dt;
    return reconstruct_from_coords(s.Y, s.sigma, s.U.leftCols(ri), cfg, series_t0, s.dt);
}

}  // namespace mixdyn
