#pragma once

// Synthetic layered retina phantoms, multiplicative speckle simulation, and
// the domain conversions between linear intensity, display scale, and the
// normalized [-1,1] range the diffusion model works in.

#include <cstdint>
#include <utility>

#include "gard/types.hpp"

namespace gard {

struct PhantomParams {
    int width = 64, height = 64;
    int n_layers = 7;                                  // in [5, 9]
    double boundary_waviness = 1.5;                    // px amplitude of boundary undulation
    std::pair<double, double> reflectivity_range = {0.15, 0.95};
    int n_vessels = 2;
    double blur_sigma = 0.8;
    std::uint64_t seed = 0;

    void validate() const;  // throws config_error
};

enum class DisplayTransform : std::uint8_t { FourthRoot, Log };

struct SpeckleParams {
    double looks = 4.0;  // Gamma looks L; L=1 is fully developed speckle
    DisplayTransform display_transform = DisplayTransform::FourthRoot;
    int averaging_count = 30;  // simulated ART frame averaging

    void validate() const;  // throws config_error
};

struct PairedSample {
    ImageField clean;       // display-transformed noise-free phantom
    ImageField noisy;       // single speckle realization
    ImageField less_noisy;  // mean of averaging_count realizations (linear domain), then transformed
};

// Layered phantom in linear intensity, values in (0,1], deterministic per seed.
ImageField generate_phantom(const PhantomParams& p);

// Display transform applied to a linear-intensity field, scaled onto the
// raw8bit range via v = 255*clip(value, 0, 1).
ImageField to_display(const ImageField& linear, DisplayTransform transform);

// Multiplicative speckle S ~ Gamma(L, 1/L) per pixel: noisy = T(clean*S),
// less_noisy = T(mean of averaging_count independent clean*S_i). All three
// outputs are display-transformed raw8bit fields.
PairedSample apply_speckle(const ImageField& clean_linear, const SpeckleParams& sp,
                           std::uint64_t seed);

// raw8bit <-> normalized conversion: x = 2*(v/255) - 1 and its inverse with
// clipping to [0,255]. Throws config_error on an unsupported domain pair.
ImageField normalize(const ImageField& img, Domain from, Domain to);

}  // namespace gard
