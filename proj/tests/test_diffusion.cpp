#include <cmath>
#include <vector>

#include "doctest.h"
#include "gard/denoiser.hpp"
#include "gard/diffusion.hpp"
#include "gard/types.hpp"
#include "test_util.hpp"

using testutil::ks_two_sample;
using testutil::ks_two_sample_crit_1pct;
using testutil::moments;
using testutil::smooth_field;

static gard::NoiseSchedule default_schedule() {
    return gard::build_linear_schedule(1000, 1e-4, 0.02, 0.1);
}

// Counts backend evaluations so trajectories can be audited.
struct CountingOracle : gard::DenoiserBackend {
    gard::OracleBackend inner;
    int calls = 0;
    CountingOracle(gard::NoiseSchedule s, gard::ImageField x0)
        : inner(std::move(s), std::move(x0)) {}
    std::vector<double> predict(const gard::ImageField& x_t, int t) override {
        ++calls;
        return inner.predict(x_t, t);
    }
};

TEST_SUITE("diffusion") {

TEST_CASE("forward step from zeros has variance beta_1 and damped mean") {
    const auto s = default_schedule();
    const gard::ImageField zeros(400, 250, gard::Domain::Normalized, 0.0);
    const auto x1 = gard::forward_step(s, zeros, 1, 17);
    const auto m = moments(x1.values);
    const double n = static_cast<double>(x1.size());
    CHECK(std::abs(m.mean) < 6.0 * std::sqrt(s.beta_at(1) / n));
    CHECK(std::abs(m.var - s.beta_at(1)) < 0.10 * s.beta_at(1));

    const gard::ImageField half(400, 250, gard::Domain::Normalized, 0.5);
    const auto y1 = gard::forward_step(s, half, 1, 18);
    const auto my = moments(y1.values);
    const double want = std::sqrt(1.0 - s.beta_at(1)) * 0.5;
    CHECK(std::abs(my.mean - want) < 6.0 * std::sqrt(s.beta_at(1) / n));
}

TEST_CASE("iterated forward steps match the closed-form marginal (KS at 1%)") {
    const auto s = default_schedule();
    const int t_target = 5;
    const size_t n = 4000;
    // n independent single-pixel chains stepped t times
    std::vector<double> iterated(n);
    for (size_t i = 0; i < n; ++i) {
        gard::ImageField x(1, 1, gard::Domain::Normalized, 0.0);
        for (int t = 1; t <= t_target; ++t)
            x = gard::forward_step(s, x, t, 1000 + i * 16 + t);
        iterated[i] = x.at(0, 0);
    }
    const gard::ImageField zeros(1, n, gard::Domain::Normalized, 0.0);
    const auto closed = gard::forward_marginal(s, zeros, t_target, 555);
    // quantized comparison: both laws pile up at -k_cum*theta, and the two
    // paths round that point one ulp apart (see testutil::quantize)
    const double d =
        ks_two_sample(testutil::quantize(iterated, 1e-9), testutil::quantize(closed.x_t.values, 1e-9));
    CHECK(d < ks_two_sample_crit_1pct(n, n));
}

TEST_CASE("forward marginal has the schedule moments at t=1000") {
    const auto s = default_schedule();
    const gard::ImageField zeros(400, 250, gard::Domain::Normalized, 0.0);
    const auto fm = gard::forward_marginal(s, zeros, 1000, 9);
    const auto m = moments(fm.x_t.values);
    const double want_var = 0.99995964170234619;  // frozen 1 - alpha_bar_1000
    CHECK(std::abs(m.var - want_var) < 0.02 * want_var);
    CHECK(std::abs(m.mean) < 0.02);
    // eps_true is standardized
    const auto me = moments(fm.eps_true.values);
    CHECK(std::abs(me.mean) < 0.02);
    CHECK(std::abs(me.var - 1.0) < 0.03);
}

TEST_CASE("forward marginal centers on sqrt(alpha_bar)*x0") {
    const auto s = default_schedule();
    const gard::ImageField c(400, 250, gard::Domain::Normalized, 0.7);
    for (int t : {10, 100, 500}) {
        const auto fm = gard::forward_marginal(s, c, t, 33 + t);
        const auto m = moments(fm.x_t.values);
        const double want = std::sqrt(s.alpha_bar_at(t)) * 0.7;
        const double se = gard::marginal_std(s, t) / std::sqrt(static_cast<double>(c.size()));
        CAPTURE(t);
        CHECK(std::abs(m.mean - want) < 8.0 * se);
    }
}

TEST_CASE("predict_x0 inverts the forward marginal exactly") {
    const auto s = default_schedule();
    const auto x0 = smooth_field(64, 64, 3);
    for (int t : {5, 70, 500}) {
        const auto fm = gard::forward_marginal(s, x0, t, 100 + t);
        const auto rec = gard::predict_x0(s, fm.x_t, fm.eps_true.values, t);
        double worst = 0.0;
        for (size_t i = 0; i < rec.size(); ++i)
            worst = std::max(worst, std::abs(rec.values[i] - x0.values[i]));
        CAPTURE(t);
        CHECK(worst < 1e-9);
    }
}

TEST_CASE("predict_x0 frozen constant at t=1000") {
    // x_t = 0, eps_hat = 1 -> x0 = -sqrt((1-alpha_bar)/alpha_bar)
    const auto s = default_schedule();
    const gard::ImageField xt(2, 2, gard::Domain::Normalized, 0.0);
    const std::vector<double> eps(4, 1.0);
    const auto x0 = gard::predict_x0(s, xt, eps, 1000);
    CHECK(x0.at(0, 0) == doctest::Approx(-157.40728081040757).epsilon(1e-12));
}

TEST_CASE("predict_x0 with zero eps rescales by sqrt(alpha_bar)") {
    const auto s = default_schedule();
    const gard::ImageField xt(2, 2, gard::Domain::Normalized, 0.25);
    const std::vector<double> eps(4, 0.0);
    const auto x0 = gard::predict_x0(s, xt, eps, 50);
    CHECK(x0.at(1, 1) ==
          doctest::Approx(0.25 / std::sqrt(s.alpha_bar_at(50))).epsilon(1e-13));
}

TEST_CASE("deterministic reverse step at t=1 recovers x0") {
    // at t=1 alpha_bar = alpha, so one noiseless reverse step undoes the marginal
    const auto s = default_schedule();
    const auto x0 = smooth_field(32, 32, 8);
    const auto fm = gard::forward_marginal(s, x0, 1, 77);
    const auto rec = gard::reverse_step_stochastic(s, fm.x_t, fm.eps_true.values, 1, 0.0,
                                                   gard::NoiseFamily::Gamma, 0);
    double worst = 0.0;
    for (size_t i = 0; i < rec.size(); ++i)
        worst = std::max(worst, std::abs(rec.values[i] - x0.values[i]));
    CHECK(worst < 1e-9);
}

TEST_CASE("reverse step stochastic term has variance sigma^2") {
    const auto s = default_schedule();
    const gard::ImageField xt(400, 250, gard::Domain::Normalized, 0.0);
    const std::vector<double> eps(xt.size(), 0.0);
    for (const auto family : {gard::NoiseFamily::Gamma, gard::NoiseFamily::Gaussian}) {
        const auto x = gard::reverse_step_stochastic(s, xt, eps, 100, 0.25, family, 6);
        const auto m = moments(x.values);
        CHECK(std::abs(m.mean) < 0.01);
        CHECK(std::abs(m.var - 0.0625) < 0.03 * 0.0625);
    }
}

TEST_CASE("ddim trajectory with the oracle backend recovers x0") {
    const auto s = default_schedule();
    struct Grid {
        int t_start, stride;
    };
    for (const Grid g : {Grid{70, 10}, Grid{70, 7}, Grid{50, 50}}) {
        const auto x0 = smooth_field(48, 48, 400 + g.stride);
        const auto fm = gard::forward_marginal(s, x0, g.t_start, 900 + g.stride);
        gard::OracleBackend oracle(s, x0);
        gard::InferenceConfig cfg;
        cfg.t_start = g.t_start;
        cfg.stride = g.stride;
        const auto out = gard::ddim_trajectory(s, fm.x_t, oracle, cfg);
        double worst = 0.0;
        for (size_t i = 0; i < out.size(); ++i)
            worst = std::max(worst, std::abs(out.values[i] - x0.values[i]));
        CAPTURE(g.t_start);
        CAPTURE(g.stride);
        CHECK(worst < 1e-6);
    }
}

TEST_CASE("ddim trajectory evaluates the backend once per grid point") {
    const auto s = default_schedule();
    const auto x0 = smooth_field(16, 16, 5);
    const auto fm = gard::forward_marginal(s, x0, 70, 44);
    CountingOracle oracle(s, x0);
    gard::InferenceConfig cfg;  // t_start=70, stride=10 -> grid {70,60,...,10}
    const auto out = gard::ddim_trajectory(s, fm.x_t, oracle, cfg);
    CHECK(oracle.calls == 7);
    (void)out;
}

TEST_CASE("ddim trajectory output is clamped to [-1,1]") {
    const auto s = default_schedule();
    gard::ImageField x0(8, 8, gard::Domain::Normalized, 0.0);
    for (int i = 0; i < 64; ++i) x0.values[i] = (i % 2 == 0) ? 3.0 : -3.0;  // out of range
    const auto fm = gard::forward_marginal(s, x0, 70, 13);
    gard::OracleBackend oracle(s, x0);
    gard::InferenceConfig cfg;
    const auto out = gard::ddim_trajectory(s, fm.x_t, oracle, cfg);
    for (double v : out.values) {
        CHECK(v <= 1.0);
        CHECK(v >= -1.0);
    }
}

TEST_CASE("ddim trajectory applies the fidelity hook after every step") {
    const auto s = default_schedule();
    const auto x0 = smooth_field(16, 16, 6);
    const auto fm = gard::forward_marginal(s, x0, 70, 21);
    gard::OracleBackend oracle(s, x0);
    gard::InferenceConfig cfg;
    cfg.fidelity = gard::FidelityKind::Raw;
    int hook_calls = 0;
    const auto hook = [&](const gard::ImageField& x) {
        ++hook_calls;
        return x;
    };
    (void)gard::ddim_trajectory(s, fm.x_t, oracle, cfg, hook);
    CHECK(hook_calls == 7);  // grid {70,...,10} plus terminal jump share the grid points
}

TEST_CASE("gaussian family trajectory also recovers x0 with the oracle") {
    const auto s = default_schedule();
    const auto x0 = smooth_field(32, 32, 9);
    const auto fm = gard::forward_marginal(s, x0, 70, 31, gard::NoiseFamily::Gaussian);
    gard::OracleBackend oracle(s, x0);
    gard::InferenceConfig cfg;
    cfg.noise_family = gard::NoiseFamily::Gaussian;
    const auto out = gard::ddim_trajectory(s, fm.x_t, oracle, cfg);
    double worst = 0.0;
    for (size_t i = 0; i < out.size(); ++i)
        worst = std::max(worst, std::abs(out.values[i] - x0.values[i]));
    CHECK(worst < 1e-6);
}

TEST_CASE("trajectory is deterministic") {
    const auto s = default_schedule();
    const auto x0 = smooth_field(24, 24, 10);
    const auto fm = gard::forward_marginal(s, x0, 70, 3);
    gard::OracleBackend oracle(s, x0);
    gard::InferenceConfig cfg;
    const auto a = gard::ddim_trajectory(s, fm.x_t, oracle, cfg);
    const auto b = gard::ddim_trajectory(s, fm.x_t, oracle, cfg);
    CHECK(a.values == b.values);
}

TEST_CASE("inference config validation") {
    gard::InferenceConfig cfg;
    CHECK_NOTHROW(cfg.validate(1000));
    auto bad = cfg;
    bad.t_start = 0;
    CHECK_THROWS_AS(bad.validate(1000), gard::config_error);
    bad = cfg;
    bad.t_start = 1001;
    CHECK_THROWS_AS(bad.validate(1000), gard::config_error);
    bad = cfg;
    bad.stride = 0;
    CHECK_THROWS_AS(bad.validate(1000), gard::config_error);
    bad = cfg;
    bad.stride = 80;  // stride > t_start
    CHECK_THROWS_AS(bad.validate(1000), gard::config_error);
    bad = cfg;
    bad.mu = -1.0;
    CHECK_THROWS_AS(bad.validate(1000), gard::config_error);
}

TEST_CASE("fidelity hook required when fidelity is enabled") {
    const auto s = default_schedule();
    const auto x0 = smooth_field(16, 16, 2);
    const auto fm = gard::forward_marginal(s, x0, 70, 1);
    gard::OracleBackend oracle(s, x0);
    gard::InferenceConfig cfg;
    cfg.fidelity = gard::FidelityKind::Nrft;
    CHECK_THROWS_AS(gard::ddim_trajectory(s, fm.x_t, oracle, cfg, nullptr), gard::config_error);
}

}  // TEST_SUITE
