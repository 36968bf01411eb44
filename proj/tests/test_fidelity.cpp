#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "gard/fidelity.hpp"
#include "gard/rng.hpp"
#include "gard/types.hpp"
#include "test_util.hpp"

using testutil::moments;
using testutil::random_field;
using testutil::smooth_field;

// Independent bisection oracle for f(z) = 1 - exp(y - z) + 2 mu (z - x).
static double bisect_root(double y, double x, double mu) {
    double lo = std::min(y, x) - 5.0, hi = std::max(y, x) + 5.0;
    auto f = [&](double z) { return 1.0 - std::exp(y - z) + 2.0 * mu * (z - x); };
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) hi = mid; else lo = mid;
    }
    return 0.5 * (lo + hi);
}

static gard::ImageField mirror_pad_oracle(const gard::ImageField& y, int pad) {
    gard::ImageField out(y.height + 2 * pad, y.width + 2 * pad, y.domain);
    auto reflect = [](int i, int n) {
        while (i < 0 || i >= n) {
            if (i < 0) i = -i - 1;
            if (i >= n) i = 2 * n - 1 - i;
        }
        return i;
    };
    for (int r = 0; r < out.height; ++r)
        for (int c = 0; c < out.width; ++c)
            out.at(r, c) = y.at(reflect(r - pad, y.height), reflect(c - pad, y.width));
    return out;
}

TEST_SUITE("fidelity") {

TEST_CASE("noise std estimate on gaussian noise") {
    gard::ImageField img(128, 128, gard::Domain::Normalized, 0.0);
    gard::SplitMix64 rng(4);
    for (double& v : img.values) v = 0.1 * gard::sample_normal(rng);
    const double sigma = gard::estimate_noise_std(img);
    CHECK(sigma == doctest::Approx(0.1).epsilon(0.15));
}

TEST_CASE("noise std estimate ignores smooth structure") {
    auto img = smooth_field(128, 128, 9);
    gard::SplitMix64 rng(5);
    for (double& v : img.values) v += 0.05 * gard::sample_normal(rng);
    const double sigma = gard::estimate_noise_std(img);
    CHECK(sigma == doctest::Approx(0.05).epsilon(0.2));
}

TEST_CASE("nlm fixes constant images") {
    const gard::ImageField img(32, 32, gard::Domain::Normalized, 0.37);
    gard::NlmParams p;
    p.noise_std_estimate = 0.05;
    for (const auto& out : {gard::nlm_reference(img, p), gard::nlm_fast(img, p)})
        for (double v : out.values) CHECK(v == doctest::Approx(0.37).epsilon(1e-12));
}

TEST_CASE("nlm shrinks an isolated impulse") {
    gard::ImageField img(33, 33, gard::Domain::Normalized, 0.0);
    img.at(16, 16) = 1.0;
    gard::NlmParams p;
    p.noise_std_estimate = 0.05;
    const auto out = gard::nlm_fast(img, p);
    CHECK(out.at(16, 16) < 1.0);
    CHECK(out.at(16, 16) >= 0.0);
    double total_dev = 0.0;
    for (double v : out.values) total_dev += std::abs(v);
    CHECK(total_dev < 1.0);  // averaging cannot amplify the deviation mass
}

TEST_CASE("nlm center weight: single pixel against a weight-formula oracle") {
    // tiny configuration recomputed with an explicit loop over the search window
    const auto img = random_field(17, 17, gard::Domain::Normalized, -0.5, 0.5, 12);
    gard::NlmParams p;
    p.patch_radius = 1;
    p.search_radius = 2;
    p.h = 0.2;
    p.noise_std_estimate = 0.05;
    const auto out = gard::nlm_reference(img, p);

    const int r0 = 8, c0 = 8;
    double wsum = 0.0, acc = 0.0;
    for (int dr = -2; dr <= 2; ++dr)
        for (int dc = -2; dc <= 2; ++dc) {
            double d2 = 0.0;
            for (int pr = -1; pr <= 1; ++pr)
                for (int pc = -1; pc <= 1; ++pc) {
                    const double diff =
                        img.at(r0 + pr, c0 + pc) - img.at(r0 + dr + pr, c0 + dc + pc);
                    d2 += diff * diff;
                }
            d2 /= 9.0;
            const double w =
                std::exp(-std::max(d2 - 2.0 * 0.05 * 0.05, 0.0) / (0.2 * 0.2));
            wsum += w;
            acc += w * img.at(r0 + dr, c0 + dc);
        }
    CHECK(out.at(r0, c0) == doctest::Approx(acc / wsum).epsilon(1e-12));
}

TEST_CASE("nlm mirror padding matches the padding oracle at the border") {
    // with h very large all weights become 1; the output is the plain mean of the
    // mirrored search window, which the padding oracle reproduces directly
    const auto img = random_field(20, 20, gard::Domain::Normalized, -1.0, 1.0, 77);
    gard::NlmParams p;
    p.patch_radius = 2;
    p.search_radius = 3;
    p.h = 1e6;
    p.noise_std_estimate = 0.01;
    const auto out = gard::nlm_fast(img, p);
    const auto padded = mirror_pad_oracle(img, 3);
    for (const auto [r, c] : {std::pair{0, 0}, {0, 10}, {19, 19}, {10, 0}}) {
        double mean = 0.0;
        for (int dr = -3; dr <= 3; ++dr)
            for (int dc = -3; dc <= 3; ++dc) mean += padded.at(r + 3 + dr, c + 3 + dc);
        mean /= 49.0;
        CHECK(out.at(r, c) == doctest::Approx(mean).epsilon(1e-9));
    }
}

TEST_CASE("fast nlm matches the reference implementation") {
    for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
        const auto img = random_field(32, 32, gard::Domain::Normalized, -1.0, 1.0, seed);
        gard::NlmParams p;  // defaults: patch 2, search 7, auto sigma / h
        const auto a = gard::nlm_reference(img, p);
        const auto b = gard::nlm_fast(img, p);
        double worst = 0.0;
        for (size_t i = 0; i < a.size(); ++i)
            worst = std::max(worst, std::abs(a.values[i] - b.values[i]));
        CAPTURE(seed);
        CHECK(worst < 1e-6);
    }
}

TEST_CASE("fast nlm matches the reference on non-default geometry") {
    struct Geometry {
        int patch, search;
        double h, sigma;
    };
    for (const auto g :
         {Geometry{1, 3, 0.0, 0.0}, Geometry{3, 5, 0.15, 0.02}, Geometry{2, 4, 0.3, 0.0}}) {
        const auto img = random_field(40, 28, gard::Domain::Normalized, -1.0, 1.0, 31);
        gard::NlmParams p;
        p.patch_radius = g.patch;
        p.search_radius = g.search;
        p.h = g.h;
        p.noise_std_estimate = g.sigma;
        const auto a = gard::nlm_reference(img, p);
        const auto b = gard::nlm_fast(img, p);
        double worst = 0.0;
        for (size_t i = 0; i < a.size(); ++i)
            worst = std::max(worst, std::abs(a.values[i] - b.values[i]));
        CHECK(worst < 1e-6);
    }
}

TEST_CASE("nlm rejects images smaller than the search window") {
    const auto img = random_field(14, 40, gard::Domain::Normalized, -1.0, 1.0, 1);
    gard::NlmParams p;  // needs >= 15x15
    CHECK_THROWS_AS(gard::nlm_fast(img, p), gard::data_error);
    CHECK_THROWS_AS(gard::nlm_reference(img, p), gard::data_error);
}

TEST_CASE("nlm parameter validation") {
    gard::NlmParams p;
    p.patch_radius = 0;
    CHECK_THROWS_AS(p.validate(), gard::config_error);
    p = {};
    p.search_radius = 0;
    CHECK_THROWS_AS(p.validate(), gard::config_error);
    p = {};
    p.search_radius = 2;
    p.patch_radius = 3;  // patch must fit inside the search window
    CHECK_THROWS_AS(p.validate(), gard::config_error);
}

TEST_CASE("nrft fixed point: guide equals anchor") {
    gard::FidelityProblem prob;
    prob.guide = gard::ImageField(4, 4, gard::Domain::Normalized, 0.5);
    prob.anchor = gard::ImageField(4, 4, gard::Domain::Normalized, 0.5);
    const auto z = gard::nrft_refine(prob);
    for (double v : z.values) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("nrft worked example: y=1, x=0, mu=10") {
    gard::FidelityProblem prob;
    prob.guide = gard::ImageField(1, 1, gard::Domain::Normalized, 1.0);
    prob.anchor = gard::ImageField(1, 1, gard::Domain::Normalized, 0.0);
    const auto z = gard::nrft_refine(prob);
    CHECK(z.at(0, 0) == doctest::Approx(0.0760).epsilon(0.02));
    CHECK(z.at(0, 0) == doctest::Approx(bisect_root(1.0, 0.0, 10.0)).epsilon(1e-9));
}

TEST_CASE("nrft agrees with bisection on random instances") {
    gard::SplitMix64 rng(8);
    gard::FidelityProblem prob;
    prob.guide = gard::ImageField(20, 20, gard::Domain::Normalized);
    prob.anchor = gard::ImageField(20, 20, gard::Domain::Normalized);
    for (size_t i = 0; i < prob.guide.size(); ++i) {
        prob.guide.values[i] = 4.0 * rng.next_double() - 2.0;
        prob.anchor.values[i] = 4.0 * rng.next_double() - 2.0;
    }
    for (double mu : {0.1, 10.0, 500.0}) {
        prob.mu = mu;
        const auto z = gard::nrft_refine(prob);
        for (size_t i = 0; i < z.size(); ++i) {
            const double want = bisect_root(prob.guide.values[i], prob.anchor.values[i], mu);
            CHECK(z.values[i] == doctest::Approx(want).epsilon(1e-8));
            // residual bound
            const double f = 1.0 - std::exp(prob.guide.values[i] - z.values[i]) +
                             2.0 * mu * (z.values[i] - prob.anchor.values[i]);
            CHECK(std::abs(f) <= 1e-10);
        }
    }
}

TEST_CASE("nrft limits: mu -> 0 returns the guide, mu -> inf the anchor") {
    gard::FidelityProblem prob;
    prob.guide = gard::ImageField(1, 1, gard::Domain::Normalized, 0.8);
    prob.anchor = gard::ImageField(1, 1, gard::Domain::Normalized, -0.3);
    prob.mu = 1e-8;
    CHECK(gard::nrft_refine(prob).at(0, 0) == doctest::Approx(0.8).epsilon(1e-4));
    prob.mu = 1e6;
    CHECK(gard::nrft_refine(prob).at(0, 0) == doctest::Approx(-0.3).epsilon(1e-4));
}

TEST_CASE("nrft output is monotone in guide and anchor") {
    gard::FidelityProblem a, b;
    a.guide = gard::ImageField(1, 1, gard::Domain::Normalized, 0.2);
    a.anchor = gard::ImageField(1, 1, gard::Domain::Normalized, 0.1);
    b = a;
    b.guide.at(0, 0) = 0.5;
    CHECK(gard::nrft_refine(b).at(0, 0) > gard::nrft_refine(a).at(0, 0));
    b = a;
    b.anchor.at(0, 0) = 0.6;
    CHECK(gard::nrft_refine(b).at(0, 0) > gard::nrft_refine(a).at(0, 0));
}

TEST_CASE("nrft root minimizes the refinement objective") {
    auto objective = [](double z, double y, double x, double mu) {
        return z + std::exp(y - z) + mu * (z - x) * (z - x);
    };
    gard::FidelityProblem prob;
    prob.guide = gard::ImageField(1, 1, gard::Domain::Normalized, 0.9);
    prob.anchor = gard::ImageField(1, 1, gard::Domain::Normalized, -0.4);
    const double z = gard::nrft_refine(prob).at(0, 0);
    const double fz = objective(z, 0.9, -0.4, prob.mu);
    CHECK(fz <= objective(z + 1e-3, 0.9, -0.4, prob.mu));
    CHECK(fz <= objective(z - 1e-3, 0.9, -0.4, prob.mu));
}

TEST_CASE("nrft shape mismatch throws config_error") {
    gard::FidelityProblem prob;
    prob.guide = gard::ImageField(4, 4, gard::Domain::Normalized, 0.0);
    prob.anchor = gard::ImageField(4, 5, gard::Domain::Normalized, 0.0);
    CHECK_THROWS_AS(gard::nrft_refine(prob), gard::config_error);
}

}  // TEST_SUITE
