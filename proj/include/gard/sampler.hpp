#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gard/rng.hpp"
#include "gard/schedule.hpp"

namespace gard {

enum class NoiseFamily : std::uint8_t { Gamma, Gaussian };

std::string noise_family_name(NoiseFamily f);
NoiseFamily noise_family_from_name(const std::string& name);

// A sampled noise realization plus the analytic moments of the distribution
// it was drawn from. For Gamma the metadata describes the *uncentered* draw.
struct NoiseField {
    int height = 0;
    int width = 0;
    NoiseFamily family = NoiseFamily::Gamma;
    double shape_param = 0.0;  // Gamma k (unused for Gaussian)
    double scale_param = 0.0;  // Gamma theta; std for Gaussian
    double mean = 0.0;         // k*theta for Gamma, 0 for Gaussian
    double variance = 0.0;     // k*theta^2 for Gamma, scale^2 for Gaussian
    std::vector<double> values;

    size_t size() const { return values.size(); }
};

// One draw from Gamma(k, theta). Marsaglia-Tsang squeeze method for k >= 1;
// k < 1 is boosted through k+1 with the U^(1/k) power correction, evaluated in
// log space so shapes as small as the schedule's k_1 ~ 0.01 stay positive.
double sample_gamma_scalar(double k, double theta, SplitMix64& rng);

// n i.i.d. draws from Gamma(k, theta), deterministic in (k, theta, n, seed).
std::vector<double> sample_gamma(double k, double theta, size_t n, std::uint64_t seed);

// Centered cumulative noise (g_cum - E[g_cum]) with g_cum ~ Gamma(k_cum_t, theta_t).
// Metadata carries the uncentered moments: mean = k_cum*theta, variance = 1 - alpha_bar_t.
NoiseField sample_centered_cumulative_noise(const NoiseSchedule& s, int t, int height, int width,
                                            std::uint64_t seed);

// Zero-mean unit-variance field: the centered cumulative Gamma divided by
// sqrt(1 - alpha_bar_t), or a standard normal field for the Gaussian family.
NoiseField sample_standardized_noise(const NoiseSchedule& s, int t, NoiseFamily family, int height,
                                     int width, std::uint64_t seed);

}  // namespace gard
