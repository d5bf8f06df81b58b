#include "doctest.h"
#include "test_util.hpp"

#include "mixdyn/error.hpp"
#include "mixdyn/havok.hpp"
#include "mixdyn/sindy.hpp"

#include <complex>

using namespace mixdyn;

namespace {

Eigen::MatrixXd gaussian(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double s = 1.0) {
    std::normal_distribution<double> g(0.0, s);
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i) m(i, j) = g(rng);
    return m;
}

TimeSeries lorenz_x(std::size_t n, double dt) {
    const Eigen::MatrixXd x = testutil::lorenz(n, dt);
    TimeSeries s{0.0, dt, std::vector<double>(n), "x"};
    for (std::size_t i = 0; i < n; ++i) s.values[i] = x(static_cast<Eigen::Index>(i), 0);
    return s;
}

double kurtosis(const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double m2 = 0.0, m4 = 0.0;
    for (double x : v) {
        const double d = (x - mean) * (x - mean);
        m2 += d;
        m4 += d * d;
    }
    m2 /= static_cast<double>(v.size());
    m4 /= static_cast<double>(v.size());
    return m4 / (m2 * m2);
}

}  // namespace

TEST_CASE("hankel examples") {
    TimeSeries x{0.0, 1.0, {1, 2, 3, 4, 5}, ""};
    auto h = hankel(x, {3, 1});
    Eigen::MatrixXd expect(3, 3);
    expect << 3, 4, 5, 2, 3, 4, 1, 2, 3;
    CHECK(h.entries == expect);
    CHECK(h.t0 == 2.0);

    auto h2 = hankel(x, {2, 2});
    Eigen::MatrixXd expect2(2, 3);
    expect2 << 3, 4, 5, 1, 2, 3;
    CHECK(h2.entries == expect2);

    CHECK_THROWS_WITH_AS(hankel(x, {6, 1}), doctest::Contains("at least 7"), InputError);
    CHECK_THROWS_AS(hankel(x, {1, 1}), InputError);
    CHECK_THROWS_AS(hankel(x, {2, 0}), InputError);
}

TEST_CASE("property: every hankel entry is x at one sample index") {
    // newest-first rows: entries(i, j) = x[j + (m-1-i)*tau], so entries along each diagonal agree
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 10; ++trial) {
        const auto n = static_cast<std::size_t>(30 + trial * 7);
        TimeSeries x{0.0, 1.0, std::vector<double>(n), ""};
        for (auto& v : x.values) v = g(rng);
        const auto m = static_cast<std::size_t>(3 + trial);
        auto h = hankel(x, {m, 1});
        for (Eigen::Index i = 0; i < h.m(); ++i)
            for (Eigen::Index j = 0; j < h.k(); ++j)
                CHECK(h.entries(i, j) == x.values[static_cast<std::size_t>(j) + m - 1 - static_cast<std::size_t>(i)]);
        for (Eigen::Index i = 0; i + 1 < h.m(); ++i)
            for (Eigen::Index j = 0; j + 1 < h.k(); ++j) CHECK(h.entries(i + 1, j + 1) == h.entries(i, j));
    }
}

TEST_CASE("stacked hankel keeps records apart") {
    TimeSeries a{0.0, 1.0, {1, 2, 3, 4}, ""}, b{10.0, 1.0, {5, 6, 7, 8, 9}, ""};
    auto h = hankel_stacked({a, b}, {2, 1});
    CHECK(h.k() == 3 + 4);
    CHECK(h.record_cols == std::vector<Eigen::Index>{3, 4});
    CHECK(h.entries(0, 2) == 4.0);
    CHECK(h.entries(0, 3) == 6.0);
    CHECK(h.entries(1, 3) == 5.0);
}

TEST_CASE("svd examples") {
    TimeSeries c{0.0, 1.0, std::vector<double>(200, 2.5), ""};
    auto sc = svd(hankel(c, {20, 1}));
    CHECK(sc.sigma(0) > 0.0);
    CHECK(sc.sigma(1) / sc.sigma(0) < 1e-12);

    auto sine = testutil::sampled(1000, 1e-3, [](double t) { return std::sin(2 * std::numbers::pi * 7 * t); });
    auto ss = svd(hankel(sine, {50, 1}));
    int above = 0;
    for (Eigen::Index i = 0; i < ss.q(); ++i) above += ss.sigma(i) > 1e-10 * ss.sigma(0);
    CHECK(above == 2);

    std::mt19937_64 rng(2);
    Eigen::MatrixXd a = gaussian(20, 100, rng);
    auto s = svd(a);
    CHECK((s.Y * s.sigma.asDiagonal() * s.U.transpose() - a).norm() / a.norm() < 1e-10);
    Eigen::MatrixXd bad = a;
    bad(3, 4) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(svd(bad), InputError);
}

TEST_CASE("property: svd invariants on random and tall matrices") {
    std::mt19937_64 rng(3);
    for (auto [r, c] : {std::pair{20, 100}, {60, 15}, {30, 30}, {5, 400}}) {
        Eigen::MatrixXd a = gaussian(r, c, rng, 3.0);
        auto s = svd(a);
        const Eigen::Index q = std::min(r, c);
        REQUIRE(s.q() == q);
        for (Eigen::Index i = 1; i < q; ++i) CHECK(s.sigma(i) <= s.sigma(i - 1));
        CHECK(s.sigma.minCoeff() >= 0.0);
        CHECK((s.Y.transpose() * s.Y - Eigen::MatrixXd::Identity(q, q)).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((s.U.transpose() * s.U - Eigen::MatrixXd::Identity(q, q)).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((s.Y * s.sigma.asDiagonal() * s.U.transpose() - a).norm() / a.norm() < 1e-8);
        CHECK(std::abs(s.sigma.squaredNorm() - a.squaredNorm()) / a.squaredNorm() < 1e-8);
        for (Eigen::Index j = 0; j < q; ++j) {
            Eigen::Index best = 0;
            s.Y.col(j).cwiseAbs().maxCoeff(&best);
            CHECK(s.Y(best, j) > 0.0);
        }
        auto again = svd(a);
        CHECK(again.Y == s.Y);
        CHECK(again.U == s.U);
        CHECK(again.sigma == s.sigma);
    }
}

TEST_CASE("threshold coefficients") {
    CHECK(threshold_lambda(1.0) == doctest::Approx(4.0 / std::sqrt(3.0)).epsilon(1e-12));
    // oracle values from scipy quad + brentq on the beta = 1 density sqrt(x(4-x))/(2 pi x)
    CHECK(marchenko_pastur_median(1.0) == doctest::Approx(0.6527759416).epsilon(1e-6));
    CHECK(threshold_omega(1.0) == doctest::Approx(2.8583624241).epsilon(1e-6));
    CHECK(threshold_omega(0.1) < threshold_omega(0.5));
    CHECK(threshold_omega(0.5) < threshold_omega(1.0));
}

TEST_CASE("hard_threshold_rank examples") {
    std::vector<double> s{100, 90, 80, 1, 1, 1, 1};
    CHECK(hard_threshold_rank(s, 7, 7) == 3);
    std::vector<double> dominant{50, 1e-9, 1e-9, 1e-9, 1e-9};
    CHECK(hard_threshold_count(dominant, 5, 5) == 1);
    CHECK(hard_threshold_rank(dominant, 5, 5) == 2);
    std::vector<double> zero(5, 0.0);
    CHECK_THROWS_AS(hard_threshold_rank(zero, 5, 5), NumericError);
    // m > k is swapped
    CHECK(hard_threshold_rank(s, 70, 7) == hard_threshold_rank(s, 7, 70));
}

TEST_CASE("hard_threshold_rank recovers a rank-3 matrix at 20 dB") {
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        std::mt19937_64 rng(1000 + seed);
        Eigen::MatrixXd x = gaussian(200, 3, rng) * gaussian(3, 200, rng);
        const double noise = x.norm() / 10.0 / 200.0;  // ||X||/||N|| = 10
        auto s = svd(Eigen::MatrixXd(x + gaussian(200, 200, rng, noise)));
        hits += hard_threshold_rank(s) == 3;
    }
    CHECK(hits >= 45);
}

TEST_CASE("property: hard_threshold_rank is scale invariant") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> s(40);
        for (auto& v : s) v = std::exp(6.0 * u(rng));
        std::sort(s.begin(), s.end(), std::greater<>());
        const std::size_t r = hard_threshold_rank(s, 40, 90);
        for (double c : {1e-6, 0.37, 2.0, 1e9}) {
            std::vector<double> scaled = s;
            for (auto& v : scaled) v *= c;
            CHECK(hard_threshold_rank(scaled, 40, 90) == r);
        }
        for (double c : {0.5, 4.0, 1024.0}) {  // powers of two scale exactly
            std::vector<double> scaled = s;
            for (auto& v : scaled) v *= c;
            CHECK(hard_threshold_count(scaled, 40, 90) == hard_threshold_count(s, 40, 90));
        }
    }
}

TEST_CASE("forced linear fit on a pure sinusoid") {
    const double f = 60.0, dt = 1.0 / 20000.0;
    auto x = testutil::sampled(4000, dt, [&](double t) { return std::sin(2 * std::numbers::pi * f * t + 0.4); });
    auto s = svd(hankel(x, {50, 1}));
    auto model = fit_linear_forced(s, 3);
    REQUIRE(model.A.rows() == 2);
    Eigen::EigenSolver<Eigen::MatrixXd> es(model.A);
    const double w = 2 * std::numbers::pi * f;
    for (Eigen::Index i = 0; i < 2; ++i) {
        CHECK(std::abs(std::abs(es.eigenvalues()(i).imag()) / w - 1.0) < 0.005);
        CHECK(std::abs(es.eigenvalues()(i).real()) < 0.005 * w);
    }
    CHECK(model.B.cwiseAbs().maxCoeff() < 1e-3 * model.A.cwiseAbs().maxCoeff());

    // the forcing carries no share of the signal
    auto u = forcing(model);
    CHECK(u.size() == static_cast<std::size_t>(s.U.rows()));
    CHECK(model.sigma(2) * rms(u.values) < 1e-6 * model.sigma(0) * rms(model.coords.column(0).values));
    CHECK(u.t0 == doctest::Approx(x.time(49)));

    CHECK_THROWS_AS(fit_linear_forced(s, 1), InputError);
    CHECK_THROWS_AS(fit_linear_forced(s, 51), InputError);
}

TEST_CASE("forced linear fit on Lorenz x(t)") {
    const double dt = 1e-3;
    auto x = lorenz_x(100000, dt);
    auto s = svd(hankel(x, {100, 1}));
    const std::size_t r = hard_threshold_rank(s);
    auto model = fit_linear_forced(s, r);
    CHECK(model.r == r);
    CHECK(model.A.rows() == static_cast<Eigen::Index>(r - 1));
    CHECK(model.coords.cols() == static_cast<Eigen::Index>(r));
    CHECK(model.mean_r_squared() >= 0.95);
    CHECK_FALSE(model.poor_fit());
    CHECK_FALSE(model.noise_only);
    CHECK(kurtosis(forcing(model).values) > 3.0);

    auto again = fit_linear_forced(svd(hankel(x, {100, 1})), r);
    for (std::size_t i = 0; i < model.r_squared.size(); ++i) CHECK(std::abs(again.r_squared[i] - model.r_squared[i]) <= 1e-10);
}

TEST_CASE("white noise has no linear delay dynamics") {
    auto x = testutil::add_noise(TimeSeries{0.0, 1e-3, std::vector<double>(5000, 0.0), ""}, 1.0, 5);
    auto s = svd(hankel(x, {40, 1}));
    auto model = fit_linear_forced(s, 4);
    // narrowband delay coordinates of noise fit well in-sample, so the flag comes from the threshold
    CHECK(model.noise_only);
    CHECK(hard_threshold_count(std::span<const double>(s.sigma.data(), 40), 40, 4961) < 2);
}

TEST_CASE("reconstruct examples") {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> g;
    TimeSeries x{0.5, 0.01, std::vector<double>(300), ""};
    for (auto& v : x.values) v = g(rng);
    HankelConfig cfg{30, 1};
    auto s = svd(hankel(x, cfg));
    auto full = reconstruct(s, static_cast<std::size_t>(s.q()), cfg);
    REQUIRE(full.size() == x.size());
    CHECK(full.t0 == doctest::Approx(x.t0));
    double err = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        err += std::pow(full.values[i] - x.values[i], 2);
        norm += x.values[i] * x.values[i];
    }
    CHECK(std::sqrt(err / norm) < 1e-8);
    CHECK_THROWS_AS(reconstruct(s, 0, cfg), InputError);
    CHECK_THROWS_AS(reconstruct(s, 31, cfg), InputError);

    auto clean = testutil::sampled(2000, 1e-3, [](double t) { return std::sin(2 * std::numbers::pi * 5 * t); });
    auto noisy = testutil::add_noise(clean, 0.1, 7);
    auto sn = svd(hankel(noisy, {100, 1}));
    auto denoised = reconstruct(sn, 2, {100, 1});
    CHECK(nrmse(denoised, clean) < nrmse(noisy, clean));
}

TEST_CASE("property: full-rank reconstruct inverts hankel") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g;
    for (std::size_t tau : {1u, 2u, 3u}) {
        for (int trial = 0; trial < 4; ++trial) {
            TimeSeries x{0.0, 1.0, std::vector<double>(120 + 13 * static_cast<std::size_t>(trial)), ""};
            for (auto& v : x.values) v = 5.0 * g(rng) + 2.0;
            HankelConfig cfg{static_cast<std::size_t>(8 + trial), tau};
            auto s = svd(hankel(x, cfg));
            auto back = reconstruct(s, static_cast<std::size_t>(s.q()), cfg);
            REQUIRE(back.size() == x.size());
            double err = 0.0, norm = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                err += std::pow(back.values[i] - x.values[i], 2);
                norm += x.values[i] * x.values[i];
            }
            CHECK(std::sqrt(err / norm) < 1e-8);
        }
    }
}
