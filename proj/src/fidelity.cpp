#include "gard/fidelity.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace gard {

void NlmParams::validate() const {
    if (patch_radius < 1) throw config_error("nlm: patch_radius must be >= 1");
    if (search_radius < patch_radius)
        throw config_error("nlm: search_radius must be >= patch_radius");
}

namespace {

// Symmetric (edge-including) mirror index: ... 2 1 0 | 0 1 2 ... N-1 | N-1 N-2 ...
int mirror(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - i - 1;
    }
    return i;
}

std::vector<double> mirror_pad(const ImageField& y, int pad, int& ph, int& pw) {
    ph = y.height + 2 * pad;
    pw = y.width + 2 * pad;
    std::vector<double> p(static_cast<size_t>(ph) * pw);
    for (int r = 0; r < ph; ++r) {
        const int sr = mirror(r - pad, y.height);
        for (int c = 0; c < pw; ++c) p[static_cast<size_t>(r) * pw + c] = y.at(sr, mirror(c - pad, y.width));
    }
    return p;
}

void check_nlm_input(const ImageField& y, const NlmParams& p) {
    p.validate();
    const int need = 2 * p.search_radius + 1;
    if (y.height < need || y.width < need)
        throw data_error("nlm: image smaller than the search window (" + std::to_string(need) +
                         "x" + std::to_string(need) + ")");
}

struct NlmSetup {
    double sigma2;   // 2 * sigma_hat^2
    double inv_h2;   // 1 / h^2
};

NlmSetup nlm_setup(const ImageField& y, const NlmParams& p) {
    const double sigma = p.noise_std_estimate > 0.0 ? p.noise_std_estimate : estimate_noise_std(y);
    double h = p.h > 0.0 ? p.h : 0.8 * sigma;
    h = std::max(h, 1e-12);  // constant images estimate sigma = 0; any h is a no-op there
    return {2.0 * sigma * sigma, 1.0 / (h * h)};
}

}  // namespace

double estimate_noise_std(const ImageField& y) {
    const int hh = y.height / 2, hw = y.width / 2;
    if (hh < 1 || hw < 1) throw data_error("noise estimate: image too small");
    std::vector<double> d;
    d.reserve(static_cast<size_t>(hh) * hw);
    for (int i = 0; i < hh; ++i)
        for (int j = 0; j < hw; ++j)
            d.push_back(std::abs(y.at(2 * i, 2 * j) - y.at(2 * i, 2 * j + 1) -
                                 y.at(2 * i + 1, 2 * j) + y.at(2 * i + 1, 2 * j + 1)) /
                        2.0);
    std::sort(d.begin(), d.end());
    const size_t n = d.size();
    const double med = n % 2 ? d[n / 2] : 0.5 * (d[n / 2 - 1] + d[n / 2]);
    return med / 0.6745;
}

ImageField nlm_reference(const ImageField& y, const NlmParams& p) {
    check_nlm_input(y, p);
    const NlmSetup su = nlm_setup(y, p);
    const int pr = p.patch_radius, sr = p.search_radius, pad = pr + sr;
    int ph, pw;
    const std::vector<double> P = mirror_pad(y, pad, ph, pw);
    auto at = [&](int r, int c) { return P[static_cast<size_t>(r) * pw + c]; };
    const double inv_n = 1.0 / ((2 * pr + 1) * (2 * pr + 1));

    ImageField out(y.height, y.width, y.domain);
    for (int r = 0; r < y.height; ++r) {
        for (int c = 0; c < y.width; ++c) {
            const int pr0 = r + pad, pc0 = c + pad;
            double num = 0.0, den = 0.0;
            for (int dy = -sr; dy <= sr; ++dy) {
                for (int dx = -sr; dx <= sr; ++dx) {
                    double d2 = 0.0;
                    for (int oy = -pr; oy <= pr; ++oy)
                        for (int ox = -pr; ox <= pr; ++ox) {
                            const double diff =
                                at(pr0 + oy, pc0 + ox) - at(pr0 + dy + oy, pc0 + dx + ox);
                            d2 += diff * diff;
                        }
                    d2 *= inv_n;
                    const double w = std::exp(-std::max(d2 - su.sigma2, 0.0) * su.inv_h2);
                    num += w * at(pr0 + dy, pc0 + dx);
                    den += w;
                }
            }
            out.at(r, c) = num / den;
        }
    }
    return out;
}

ImageField nlm_fast(const ImageField& y, const NlmParams& p) {
    check_nlm_input(y, p);
    const NlmSetup su = nlm_setup(y, p);
    const int pr = p.patch_radius, sr = p.search_radius, pad = pr + sr;
    int ph, pw;
    const std::vector<double> P = mirror_pad(y, pad, ph, pw);
    const double inv_n = 1.0 / ((2 * pr + 1) * (2 * pr + 1));

    // Per shift (dy,dx): box-sum the squared difference image with an integral
    // image, turning the per-pixel patch distance into four lookups.
    const int dh = y.height + 2 * pr, dw = y.width + 2 * pr;  // diff region incl. patch margin
    const int off = pad - pr;                                 // diff (0,0) in padded coords
    std::vector<double> integ(static_cast<size_t>(dh + 1) * (dw + 1));
    ImageField out(y.height, y.width, y.domain);
    std::vector<double> num(out.size(), 0.0), den(out.size(), 0.0);

    for (int dy = -sr; dy <= sr; ++dy) {
        for (int dx = -sr; dx <= sr; ++dx) {
            for (int i = 0; i <= dw; ++i) integ[i] = 0.0;
            for (int r = 0; r < dh; ++r) {
                double rowsum = 0.0;
                const size_t base = static_cast<size_t>(r + 1) * (dw + 1);
                const size_t prev = static_cast<size_t>(r) * (dw + 1);
                const size_t a = static_cast<size_t>(r + off) * pw + off;
                const size_t b = static_cast<size_t>(r + off + dy) * pw + off + dx;
                integ[base] = 0.0;
                for (int c = 0; c < dw; ++c) {
                    const double diff = P[a + c] - P[b + c];
                    rowsum += diff * diff;
                    integ[base + c + 1] = integ[prev + c + 1] + rowsum;
                }
            }
            const int side = 2 * pr + 1;
            for (int r = 0; r < y.height; ++r) {
                const size_t top = static_cast<size_t>(r) * (dw + 1);
                const size_t bot = static_cast<size_t>(r + side) * (dw + 1);
                for (int c = 0; c < y.width; ++c) {
                    const double s = integ[bot + c + side] - integ[top + c + side] -
                                     integ[bot + c] + integ[top + c];
                    const double w =
                        std::exp(-std::max(s * inv_n - su.sigma2, 0.0) * su.inv_h2);
                    const size_t i = static_cast<size_t>(r) * y.width + c;
                    num[i] += w * P[static_cast<size_t>(r + pad + dy) * pw + (c + pad + dx)];
                    den[i] += w;
                }
            }
        }
    }
    for (size_t i = 0; i < out.size(); ++i) out.values[i] = num[i] / den[i];
    return out;
}

ImageField nrft_refine(const FidelityProblem& prob) {
    if (!prob.guide.same_shape(prob.anchor))
        throw config_error("nrft: guide and anchor shapes differ");
    if (prob.mu < 0.0) throw config_error("nrft: mu must be >= 0");
    const double mu2 = 2.0 * prob.mu;
    ImageField out(prob.anchor.height, prob.anchor.width, prob.anchor.domain);
    for (size_t i = 0; i < out.size(); ++i) {
        const double yt = prob.guide.values[i];
        const double x = prob.anchor.values[i];
        double lo = std::min(yt, x) - 5.0, hi = std::max(yt, x) + 5.0;
        double z = x;
        bool done = false;
        for (int it = 0; it < prob.max_iters; ++it) {
            const double e = std::exp(yt - z);
            const double f = 1.0 - e + mu2 * (z - x);
            if (std::abs(f) <= prob.newton_tol) {
                done = true;
                break;
            }
            if (f > 0.0) hi = z; else lo = z;  // f strictly increasing
            double zn = z - f / (e + mu2);
            if (!(zn > lo && zn < hi)) zn = 0.5 * (lo + hi);
            z = zn;
        }
        if (!done)
            throw numeric_error("nrft: Newton failed to converge (y=" + std::to_string(yt) +
                                ", x=" + std::to_string(x) + ", mu=" + std::to_string(prob.mu) +
                                ")");
        out.values[i] = z;
    }
    return out;
}

}  // namespace gard
