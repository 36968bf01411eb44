#include "gard/sampler.hpp"

#include <cmath>
#include <limits>

#include "gard/types.hpp"

namespace gard {

std::string noise_family_name(NoiseFamily f) {
    return f == NoiseFamily::Gamma ? "gamma" : "gaussian";
}

NoiseFamily noise_family_from_name(const std::string& name) {
    if (name == "gamma") return NoiseFamily::Gamma;
    if (name == "gaussian") return NoiseFamily::Gaussian;
    throw config_error("unknown noise family '" + name + "' (expected gamma|gaussian)");
}

namespace {

// Marsaglia & Tsang (2000) squeeze method, valid for k >= 1.
double gamma_shape_ge1(double k, SplitMix64& rng) {
    const double d = k - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = sample_normal(rng);
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.next_open_double();
        const double x2 = x * x;
        if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
        if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
    }
}

}  // namespace

double sample_gamma_scalar(double k, double theta, SplitMix64& rng) {
    if (!(k > 0.0) || !(theta > 0.0)) throw config_error("gamma sampler: k, theta must be > 0");
    if (k >= 1.0) return gamma_shape_ge1(k, rng) * theta;
    // Boost: if G ~ Gamma(k+1) and U ~ U(0,1), G * U^(1/k) ~ Gamma(k). For the
    // schedule's smallest shapes (k ~ 0.01) U^(1/k) underflows badly, so the
    // product is assembled in log space and clamped to the smallest positive
    // double: the support is (0, inf) and downstream code takes log().
    const double g = gamma_shape_ge1(k + 1.0, rng);
    const double log_u = std::log(rng.next_open_double());
    const double log_x = std::log(g) + log_u / k + std::log(theta);
    const double x = std::exp(log_x);
    return x > 0.0 ? x : std::numeric_limits<double>::denorm_min();
}

std::vector<double> sample_gamma(double k, double theta, size_t n, std::uint64_t seed) {
    SplitMix64 rng(seed);
    std::vector<double> out(n);
    for (size_t i = 0; i < n; ++i) out[i] = sample_gamma_scalar(k, theta, rng);
    return out;
}

NoiseField sample_centered_cumulative_noise(const NoiseSchedule& s, int t, int height, int width,
                                            std::uint64_t seed) {
    const double k = s.shape_cum_at(t);
    const double theta = s.scale_at(t);
    NoiseField f;
    f.height = height;
    f.width = width;
    f.family = NoiseFamily::Gamma;
    f.shape_param = k;
    f.scale_param = theta;
    f.mean = k * theta;
    f.variance = k * theta * theta;
    f.values = sample_gamma(k, theta, static_cast<size_t>(height) * width, seed);
    for (double& v : f.values) v -= f.mean;
    return f;
}

NoiseField sample_standardized_noise(const NoiseSchedule& s, int t, NoiseFamily family, int height,
                                     int width, std::uint64_t seed) {
    if (family == NoiseFamily::Gamma) {
        NoiseField f = sample_centered_cumulative_noise(s, t, height, width, seed);
        const double std = marginal_std(s, t);
        for (double& v : f.values) v /= std;
        return f;
    }
    NoiseField f;
    f.height = height;
    f.width = width;
    f.family = NoiseFamily::Gaussian;
    f.scale_param = 1.0;
    f.variance = 1.0;
    f.values.resize(static_cast<size_t>(height) * width);
    SplitMix64 rng(seed);
    for (double& v : f.values) v = sample_normal(rng);
    return f;
}

}  // namespace gard
