#pragma once

#include "gard/types.hpp"

namespace gard {

struct NlmParams {
    int patch_radius = 2;           // 5x5 patches
    int search_radius = 7;          // 15x15 window
    double h = 0.0;                 // filtering strength; <= 0 means 0.8 * noise_std_estimate
    double noise_std_estimate = 0.0;  // <= 0 means estimate from the image

    void validate() const;  // throws config_error
};

// Robust noise std from the finest diagonal detail: Haar HH coefficients
// (y[i,j] - y[i,j+1] - y[i+1,j] + y[i+1,j+1]) / 2 have std sigma for i.i.d.
// noise sigma, so sigma_hat = median(|HH|) / 0.6745.
double estimate_noise_std(const ImageField& y);

// Brute-force non-local means, O(N * search^2 * patch^2). Patch distance is the
// mean squared difference over the (2p+1)^2 patch; similarity weight is
// exp(-max(d2 - 2*sigma^2, 0) / h^2) with the center pixel weighted 1.
// Boundaries are mirror-padded (symmetric, edge included).
ImageField nlm_reference(const ImageField& y, const NlmParams& p);

// Integral-image NLM over shifted squared differences, O(N * search^2).
// Same contract as nlm_reference; matches it within 1e-6 everywhere.
ImageField nlm_fast(const ImageField& y, const NlmParams& p);

struct FidelityProblem {
    ImageField guide;   // y_tilde
    ImageField anchor;  // x (diffusion output)
    double mu = 10.0;
    double newton_tol = 1e-10;
    int max_iters = 50;
};

// Per-pixel root of f(z) = 1 - exp(y_tilde - z) + 2*mu*(z - x), the stationarity
// condition of z + exp(y_tilde - z) + mu*(z - x)^2. f is strictly increasing, so
// the root is unique. Newton from z0 = x with a bisection fallback bracket
// [min(y,x)-5, max(y,x)+5]; convergence is |f(z)| <= newton_tol.
// Throws numeric_error if an instance fails to converge within max_iters.
ImageField nrft_refine(const FidelityProblem& prob);

}  // namespace gard
