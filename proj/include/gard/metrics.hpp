#pragma once

// Image quality metrics on the 0-255 scale plus the paired Wilcoxon
// signed-rank test used to compare denoisers over a corpus.

#include <string>
#include <vector>

#include "gard/types.hpp"

namespace gard {

// Mean squared error over pixels; shapes and domains must match.
double mse(const ImageField& a, const ImageField& b);

// 10*log10(data_range^2 / mse). Identical images give +infinity.
double psnr(const ImageField& a, const ImageField& b, double data_range = 255.0);

struct SsimParams {
    int window_radius = 5;  // 11x11 window
    double sigma = 1.5;     // Gaussian window std
    double k1 = 0.01, k2 = 0.03;
    double data_range = 255.0;
};

// Mean local SSIM over all positions where the full window fits. Throws
// data_error if the image is smaller than the window.
double ssim(const ImageField& a, const ImageField& b, const SsimParams& params = {});

struct WilcoxonResult {
    double statistic = 0.0;   // W+ = sum of positive-difference ranks
    double p_value = 1.0;     // two-sided
    int n_nonzero = 0;        // pairs left after dropping zero differences
    bool exact = false;       // exact distribution (n <= 25) vs normal approximation
    bool degenerate = false;  // all differences were zero
};

// Two-sided Wilcoxon signed-rank test on paired differences. Zero differences
// are dropped and ties get average ranks. Exact p-values (tie-aware
// dynamic program) for n <= 25, otherwise a normal approximation with
// tie-corrected variance and continuity correction.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& diffs);

struct ImageMetrics {
    std::string id;
    double psnr = 0.0, ssim = 0.0, mse = 0.0;
};

struct MetricAggregate {
    double mean_psnr = 0.0, sd_psnr = 0.0;
    double mean_ssim = 0.0, sd_ssim = 0.0;
    double mean_mse = 0.0, sd_mse = 0.0;
};

struct SignificanceRow {
    std::string method_a, method_b, metric;
    WilcoxonResult test;
};

struct EvaluationReport {
    std::vector<ImageMetrics> per_image;
    MetricAggregate aggregate;
    std::vector<SignificanceRow> significance;
};

// Mean / sample standard deviation (n-1 denominator) over per-image rows.
MetricAggregate aggregate_metrics(const std::vector<ImageMetrics>& rows);

}  // namespace gard
