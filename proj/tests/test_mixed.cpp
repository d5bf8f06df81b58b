#include "doctest.h"
#include "test_util.hpp"

#include "mixdyn/error.hpp"
#include "mixdyn/mixed.hpp"
#include "mixdyn/pipeline.hpp"

#include <complex>

using namespace mixdyn;

namespace {

constexpr double kDt = 50e-6;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

TimeSeries tone(std::size_t n, double f, double amp = 1.0, double phase = 0.3) {
    return testutil::sampled(n, kDt, [=](double t) { return amp * std::sin(kTwoPi * f * t + phase); });
}

TimeSeries plus(TimeSeries a, const TimeSeries& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a.values[i] += b.values[i];
    return a;
}

// Squared magnitude of the projection onto exp(i 2 pi f t) over a Hann window.
double tone_energy(const TimeSeries& x, double f) {
    std::complex<double> acc = 0.0;
    const auto n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double w = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(i) / (n - 1));
        acc += w * x.values[i] * std::polar(1.0, -kTwoPi * f * x.time(i));
    }
    return std::norm(acc);
}

double rms_of(const TimeSeries& x) { return rms(x.values); }

TimeSeries noisy(TimeSeries x, std::uint64_t seed) {
    return testutil::add_noise(std::move(x), 1e-3 * rms(x.values), seed);
}

double generic_error(const TimeSeries& x) {
    EvalConfig cfg;
    cfg.burst_len = 0;
    return run_method(Method::Sindy, {x}, cfg).nrmse;
}

double mixed_error(const TimeSeries& x, MixedConfig mc = {}) {
    auto model = identify_mixed(x, mc);
    auto p = predict_mixed_records(model).front();
    REQUIRE_FALSE(p.truncated);
    return nrmse(p.series, x);
}

}  // namespace

TEST_CASE("decompose_scales on a pure 60 Hz sinusoid leaves nothing fast") {
    auto x = tone(4000, 60.0);
    auto split = decompose_scales(x, {});
    REQUIRE(split.slow.size() == 1);
    CHECK(rms_of(split.fast.front()) < 1e-6 * rms_of(split.slow.front()));
    CHECK(split.havok.r == 2);
}

TEST_CASE("decompose_scales separates a 2 kHz tone from 60 Hz") {
    auto x = plus(tone(4000, 60.0), tone(4000, 2000.0, 0.1, 1.0));
    auto split = decompose_scales(x, {});
    const auto& slow = split.slow.front();
    const auto& fast = split.fast.front();
    CHECK(tone_energy(slow, 60.0) / tone_energy(x, 60.0) >= 0.99);
    CHECK(tone_energy(fast, 2000.0) / tone_energy(x, 2000.0) >= 0.90);
    CHECK(split.slow_modes.size() == 2);
    CHECK(split.havok.r == 4);
}

TEST_CASE("decompose_scales on a constant signal") {
    TimeSeries c{0.0, kDt, std::vector<double>(500, 0.7), "v"};
    auto split = decompose_scales(c, {});
    CHECK(split.degenerate);
    CHECK(split.slow.front().values == c.values);
    for (double v : split.fast.front().values) CHECK(v == 0.0);

    TimeSeries z{0.0, kDt, std::vector<double>(500, 0.0), "v"};
    CHECK_THROWS_AS(decompose_scales(z, {}), NumericError);
    CHECK_THROWS_AS(decompose_scales(TimeSeries{0.0, kDt, std::vector<double>(50, 1.0), ""}, {}), InputError);
}

TEST_CASE("property: slow + fast reproduces the input") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 8; ++trial) {
        const double f1 = 20.0 + 100.0 * u(rng), f2 = 1000.0 + 3000.0 * u(rng), a2 = 0.3 * u(rng);
        auto x = noisy(plus(tone(1500 + 100 * static_cast<std::size_t>(trial), f1), tone(1500 + 100 * static_cast<std::size_t>(trial), f2, a2)),
                       static_cast<std::uint64_t>(trial));
        HankelConfig cfg{static_cast<std::size_t>(20 + 10 * trial), 1};
        auto split = decompose_scales(x, cfg);
        const double scale = rms_of(x);
        for (std::size_t i = 0; i < x.size(); ++i) {
            CHECK(std::abs(split.slow[0].values[i] + split.fast[0].values[i] - x.values[i]) <= 1e-8 * scale);
        }
    }
}

TEST_CASE("property: a second pass on the slow part finds little fast content") {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        auto x = noisy(plus(tone(4000, 60.0), tone(4000, 1800.0, 0.05 * static_cast<double>(seed), 0.2)), seed);
        auto first = decompose_scales(x, {});
        auto second = decompose_scales(first.slow.front(), {});
        CHECK(rms_of(second.fast.front()) <= 0.05 * rms_of(first.fast.front()));
    }
}

TEST_CASE("stacked decomposition shares one basis across records") {
    auto x = noisy(plus(tone(6000, 60.0), tone(6000, 2000.0, 0.1)), 3);
    auto parts = segments(x, 1000);
    auto split = decompose_scales(parts, {});
    REQUIRE(split.slow.size() == 6);
    CHECK(split.record_cols.size() == 6);
    for (std::size_t r = 0; r < 6; ++r) {
        CHECK(split.slow[r].t0 == parts[r].t0);
        for (std::size_t i = 0; i < 1000; ++i) {
            CHECK(std::abs(split.slow[r].values[i] + split.fast[r].values[i] - parts[r].values[i]) < 1e-10);
        }
    }
}

TEST_CASE("predict_mixed: sinusoid, zero duration and Lorenz replay") {
    auto x = noisy(tone(4000, 60.0), 21);
    auto model = identify_mixed(x, {});
    auto p = predict_mixed(model, 4000 * kDt);
    CHECK(p.series.size() == 4000);
    CHECK(nrmse(p.series, x) < 0.01);
    CHECK(predict_mixed(model, 0.0).series.size() == 0);
    CHECK(predict_mixed(model, 100 * kDt).series.size() == 100);
    CHECK_THROWS_AS(predict_mixed(model, -1.0), InputError);

    const double dt = 1e-3;
    const Eigen::MatrixXd lz = testutil::lorenz(20000, dt);
    TimeSeries lx{0.0, dt, std::vector<double>(20000), "x"};
    for (Eigen::Index i = 0; i < 20000; ++i) lx.values[static_cast<std::size_t>(i)] = lz(i, 0);
    MixedConfig mc;
    mc.integrator = Integrator::Rk4;  // the leapfrog parasitic mode grows on damped coordinates
    mc.allow_fallback = false;
    auto lm = identify_mixed(lx, mc);
    CHECK_FALSE(lm.fallback);
    auto lp = predict_mixed(lm, 20.0);
    REQUIRE_FALSE(lp.truncated);
    CHECK(nrmse(lp.series, lx) < 0.05);
}

TEST_CASE("identify_mixed falls back on single-scale input") {
    auto x = tone(4000, 60.0);
    auto model = identify_mixed(x, {});
    CHECK(model.fallback);
    const double ratio = mixed_error(x) / generic_error(x);
    CHECK(ratio >= 0.9);
    CHECK(ratio <= 1.1);

    TimeSeries c{0.0, kDt, std::vector<double>(3000, 1.0), "v"};
    CHECK(identify_mixed(c, {}).fallback);
}

TEST_CASE("property: no harm on noisy single-scale inputs") {
    for (double f : {50.0, 60.0, 75.0}) {
        auto x = noisy(tone(6000, f, 0.9, 0.1 * f), static_cast<std::uint64_t>(f));
        MixedConfig mc;
        mc.fundamental_hz = f;
        EvalConfig cfg;
        cfg.burst_len = 0;
        cfg.fundamental_hz = f;
        const double generic = run_method(Method::Sindy, {x}, cfg).nrmse;
        CHECK(mixed_error(x, mc) <= 1.1 * generic);
    }
}

TEST_CASE("two-tone oracle: mixed beats generic") {
    auto base = noisy(tone(6000, 60.0), 31);
    const double eps = generic_error(base);
    auto x = noisy(plus(tone(6000, 60.0), tone(6000, 2000.0, 0.1, 1.0)), 32);
    const double generic = generic_error(x);
    const double mixed = mixed_error(x);
    CHECK(mixed / eps < generic / eps);
}

TEST_CASE("slow-signal target reconstructs through the generic model") {
    auto x = noisy(plus(tone(6000, 60.0), tone(6000, 2000.0, 0.1, 1.0)), 33);
    MixedConfig mc;
    mc.target = MixedTarget::SlowSignal;
    auto model = identify_mixed(x, mc);
    CHECK_FALSE(model.fallback);
    auto p = predict_mixed_records(model).front();
    REQUIRE(p.series.size() == x.size());
    const auto slow = replay_delay_pair(model.signal_model, model.split.slow.front()).series;
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(p.series.values[i] == doctest::Approx(slow.values[i] + model.split.fast.front().values[i]).epsilon(1e-12));
    }
    CHECK(nrmse(p.series, x) < 0.6);
}

TEST_CASE("mixed config validation") {
    MixedConfig mc;
    mc.slow_rank_override = 1;
    CHECK_THROWS_AS(mc.validate(), InputError);
    mc = {};
    mc.fundamental_hz = 0.0;
    CHECK_THROWS_AS(mc.validate(), InputError);
    mc = {};
    mc.slow_rank_override = 500;
    CHECK_THROWS_AS(identify_mixed(tone(2000, 60.0), mc), InputError);
}
