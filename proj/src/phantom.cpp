#include "gard/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "gard/rng.hpp"
#include "gard/sampler.hpp"

namespace gard {

void PhantomParams::validate() const {
    if (width < 32 || height < 32) throw config_error("phantom: dimensions must be >= 32");
    if (n_layers < 5 || n_layers > 9) throw config_error("phantom: n_layers must be in [5,9]");
    if (boundary_waviness < 0.0) throw config_error("phantom: waviness must be >= 0");
    const auto [lo, hi] = reflectivity_range;
    if (!(lo > 0.0 && hi < 1.0 && lo < hi))
        throw config_error("phantom: reflectivity range must be ordered within (0,1)");
    if (n_vessels < 0) throw config_error("phantom: n_vessels must be >= 0");
    if (blur_sigma < 0.0) throw config_error("phantom: blur_sigma must be >= 0");
}

void SpeckleParams::validate() const {
    if (!(looks > 0.0)) throw config_error("speckle: looks must be > 0");
    if (averaging_count < 1) throw config_error("speckle: averaging_count must be >= 1");
}

namespace {

// Separable Gaussian blur with mirrored edges; kernel radius 3*sigma.
void gaussian_blur(ImageField& img, double sigma) {
    if (sigma <= 0.0) return;
    const int rad = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * rad + 1);
    double sum = 0.0;
    for (int i = -rad; i <= rad; ++i) sum += k[i + rad] = std::exp(-0.5 * i * i / (sigma * sigma));
    for (double& v : k) v /= sum;

    auto mirror = [](int i, int n) {
        while (i < 0 || i >= n) {
            if (i < 0) i = -i - 1;
            if (i >= n) i = 2 * n - i - 1;
        }
        return i;
    };
    ImageField tmp(img.height, img.width, img.domain);
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c) {
            double acc = 0.0;
            for (int i = -rad; i <= rad; ++i) acc += k[i + rad] * img.at(r, mirror(c + i, img.width));
            tmp.at(r, c) = acc;
        }
    for (int c = 0; c < img.width; ++c)
        for (int r = 0; r < img.height; ++r) {
            double acc = 0.0;
            for (int i = -rad; i <= rad; ++i) acc += k[i + rad] * tmp.at(mirror(r + i, img.height), c);
            img.at(r, c) = acc;
        }
}

}  // namespace

ImageField generate_phantom(const PhantomParams& p) {
    p.validate();
    SplitMix64 rng(p.seed);
    const int H = p.height, W = p.width;
    const int nb = p.n_layers - 1;  // internal boundaries
    const auto [rlo, rhi] = p.reflectivity_range;

    // Boundary curves: evenly spaced bases with jitter plus low-frequency
    // sinusoids, then a forward pass enforcing monotone ordering with a
    // minimum separation that stays resolvable after the blur.
    const double min_sep = std::max(4.0, 2.0 + 4.0 * p.blur_sigma);
    const double gap = static_cast<double>(H) / p.n_layers;
    std::vector<std::vector<double>> bounds(nb, std::vector<double>(W));
    for (int i = 0; i < nb; ++i) {
        const double base = gap * (i + 1) + (rng.next_double() - 0.5) * 0.5 * gap;
        double amp[3], phase[3];
        for (int j = 0; j < 3; ++j) {
            amp[j] = (0.5 + 0.5 * rng.next_double()) * p.boundary_waviness / (j + 1);
            phase[j] = rng.next_double() * 2.0 * M_PI;
        }
        for (int c = 0; c < W; ++c) {
            double b = base;
            for (int j = 0; j < 3; ++j)
                b += amp[j] * std::sin(2.0 * M_PI * (j + 1) * c / W + phase[j]);
            bounds[i][c] = b;
        }
    }
    for (int c = 0; c < W; ++c) {
        double prev = 2.0;
        for (int i = 0; i < nb; ++i) {
            const double ceiling = H - 2.0 - min_sep * (nb - 1 - i);
            bounds[i][c] = std::clamp(std::max(bounds[i][c], prev + min_sep), 2.0, ceiling);
            prev = bounds[i][c];
        }
    }

    // Per-layer reflectivity with an enforced contrast between neighbors so
    // boundaries survive the blur.
    const double min_contrast = 0.15 * (rhi - rlo);
    std::vector<double> refl(p.n_layers);
    for (int i = 0; i < p.n_layers; ++i) {
        double v = rlo + rng.next_double() * (rhi - rlo);
        if (i > 0) {
            for (int tries = 0; tries < 100 && std::abs(v - refl[i - 1]) < min_contrast; ++tries)
                v = rlo + rng.next_double() * (rhi - rlo);
            if (std::abs(v - refl[i - 1]) < min_contrast)
                v = refl[i - 1] > 0.5 * (rlo + rhi) ? rlo : rhi;
        }
        refl[i] = v;
    }

    ImageField img(H, W, Domain::LinearIntensity);
    for (int c = 0; c < W; ++c) {
        int layer = 0;
        for (int r = 0; r < H; ++r) {
            while (layer < nb && r >= bounds[layer][c]) ++layer;
            img.at(r, c) = refl[layer];
        }
    }

    // Dark elliptical vessel cross-sections.
    for (int v = 0; v < p.n_vessels; ++v) {
        const double r0 = (0.25 + 0.5 * rng.next_double()) * H;
        const double c0 = (0.1 + 0.8 * rng.next_double()) * W;
        const double ry = 2.0 + 2.0 * rng.next_double();
        const double rx = 2.0 + 3.0 * rng.next_double();
        const double darken = 0.15 + 0.25 * rng.next_double();
        const int rmin = std::max(0, static_cast<int>(r0 - ry) - 1);
        const int rmax = std::min(H - 1, static_cast<int>(r0 + ry) + 1);
        const int cmin = std::max(0, static_cast<int>(c0 - rx) - 1);
        const int cmax = std::min(W - 1, static_cast<int>(c0 + rx) + 1);
        for (int r = rmin; r <= rmax; ++r)
            for (int c = cmin; c <= cmax; ++c) {
                const double dy = (r - r0) / ry, dx = (c - c0) / rx;
                if (dy * dy + dx * dx <= 1.0) img.at(r, c) *= darken;
            }
    }

    gaussian_blur(img, p.blur_sigma);
    return img;
}

ImageField to_display(const ImageField& linear, DisplayTransform transform) {
    require_domain(linear, Domain::LinearIntensity, "to_display");
    ImageField out(linear.height, linear.width, Domain::Raw8bit);
    for (size_t i = 0; i < out.size(); ++i) {
        const double x = std::max(linear.values[i], 0.0);
        double v;
        if (transform == DisplayTransform::FourthRoot) {
            v = std::pow(x, 0.25);
        } else {
            // log display: [1e-3, 1] in intensity maps to [0, 1]
            constexpr double kFloor = 1e-3;
            v = 1.0 + std::log(std::max(x, kFloor)) / (-std::log(kFloor));
        }
        out.values[i] = 255.0 * std::clamp(v, 0.0, 1.0);
    }
    return out;
}

PairedSample apply_speckle(const ImageField& clean_linear, const SpeckleParams& sp,
                           std::uint64_t seed) {
    require_domain(clean_linear, Domain::LinearIntensity, "apply_speckle");
    sp.validate();
    const size_t n = clean_linear.size();
    SplitMix64 rng(seed);

    ImageField noisy_lin(clean_linear.height, clean_linear.width, Domain::LinearIntensity);
    ImageField avg_lin(clean_linear.height, clean_linear.width, Domain::LinearIntensity);
    for (size_t i = 0; i < n; ++i)
        noisy_lin.values[i] =
            clean_linear.values[i] * sample_gamma_scalar(sp.looks, 1.0 / sp.looks, rng);
    for (int a = 0; a < sp.averaging_count; ++a)
        for (size_t i = 0; i < n; ++i)
            avg_lin.values[i] +=
                clean_linear.values[i] * sample_gamma_scalar(sp.looks, 1.0 / sp.looks, rng);
    for (size_t i = 0; i < n; ++i) avg_lin.values[i] /= sp.averaging_count;

    PairedSample out;
    out.clean = to_display(clean_linear, sp.display_transform);
    out.noisy = to_display(noisy_lin, sp.display_transform);
    out.less_noisy = to_display(avg_lin, sp.display_transform);
    return out;
}

ImageField normalize(const ImageField& img, Domain from, Domain to) {
    if (img.domain != from)
        throw config_error("normalize: image is " + domain_name(img.domain) + ", expected " +
                           domain_name(from));
    ImageField out(img.height, img.width, to);
    if (from == Domain::Raw8bit && to == Domain::Normalized) {
        for (size_t i = 0; i < img.size(); ++i)
            out.values[i] = std::clamp(2.0 * (img.values[i] / 255.0) - 1.0, -1.0, 1.0);
        return out;
    }
    if (from == Domain::Normalized && to == Domain::Raw8bit) {
        for (size_t i = 0; i < img.size(); ++i)
            out.values[i] = std::clamp(255.0 * (img.values[i] + 1.0) / 2.0, 0.0, 255.0);
        return out;
    }
    throw config_error("normalize: unsupported domain pair " + domain_name(from) + " -> " +
                       domain_name(to));
}

}  // namespace gard
