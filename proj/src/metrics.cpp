#include "gard/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace gard {

namespace {

void require_same_shape(const ImageField& a, const ImageField& b, const char* what) {
    if (!a.same_shape(b)) throw config_error(std::string(what) + ": shape mismatch");
    if (a.domain != b.domain) throw config_error(std::string(what) + ": domain mismatch");
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

double mse(const ImageField& a, const ImageField& b) {
    require_same_shape(a, b, "mse");
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a.values[i] - b.values[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

double psnr(const ImageField& a, const ImageField& b, double data_range) {
    const double m = mse(a, b);
    if (m == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(data_range * data_range / m);
}

double ssim(const ImageField& a, const ImageField& b, const SsimParams& params) {
    require_same_shape(a, b, "ssim");
    const int rad = params.window_radius;
    const int side = 2 * rad + 1;
    if (a.height < side || a.width < side)
        throw data_error("ssim: image smaller than the " + std::to_string(side) + "x" +
                         std::to_string(side) + " window");

    std::vector<double> w(static_cast<size_t>(side) * side);
    double wsum = 0.0;
    for (int i = -rad; i <= rad; ++i)
        for (int j = -rad; j <= rad; ++j) {
            const double v = std::exp(-(i * i + j * j) / (2.0 * params.sigma * params.sigma));
            w[static_cast<size_t>(i + rad) * side + (j + rad)] = v;
            wsum += v;
        }
    for (double& v : w) v /= wsum;

    const double c1 = params.k1 * params.data_range * params.k1 * params.data_range;
    const double c2 = params.k2 * params.data_range * params.k2 * params.data_range;

    double total = 0.0;
    long count = 0;
    for (int r = rad; r < a.height - rad; ++r) {
        for (int c = rad; c < a.width - rad; ++c) {
            double ma = 0.0, mb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
            size_t k = 0;
            for (int i = -rad; i <= rad; ++i)
                for (int j = -rad; j <= rad; ++j, ++k) {
                    const double va = a.at(r + i, c + j);
                    const double vb = b.at(r + i, c + j);
                    ma += w[k] * va;
                    mb += w[k] * vb;
                    saa += w[k] * va * va;
                    sbb += w[k] * vb * vb;
                    sab += w[k] * va * vb;
                }
            const double va = saa - ma * ma;
            const double vb = sbb - mb * mb;
            const double cab = sab - ma * mb;
            total += ((2.0 * ma * mb + c1) * (2.0 * cab + c2)) /
                     ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& diffs) {
    WilcoxonResult res;
    std::vector<double> absd;
    std::vector<bool> positive;
    for (double d : diffs) {
        if (d == 0.0) continue;
        absd.push_back(std::abs(d));
        positive.push_back(d > 0.0);
    }
    const int n = static_cast<int>(absd.size());
    res.n_nonzero = n;
    if (n == 0) {
        res.degenerate = true;
        res.exact = true;
        return res;
    }

    // Average ranks of |d|; doubled so ties stay integral.
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](int i, int j) { return absd[i] < absd[j]; });
    std::vector<long> rank2(n);  // 2 * rank
    std::vector<long> tie_sizes;
    for (int i = 0; i < n;) {
        int j = i;
        while (j < n && absd[order[j]] == absd[order[i]]) ++j;
        const long r2 = i + j + 1;  // 2 * average of ranks i+1 .. j
        for (int k = i; k < j; ++k) rank2[order[k]] = r2;
        tie_sizes.push_back(j - i);
        i = j;
    }

    long w2 = 0;   // 2 * W+
    long tot2 = 0; // 2 * (sum of all ranks) = n(n+1)
    for (int i = 0; i < n; ++i) {
        tot2 += rank2[i];
        if (positive[i]) w2 += rank2[i];
    }
    res.statistic = 0.5 * static_cast<double>(w2);

    if (n <= 25) {
        // Exact distribution of 2*W+ over all 2^n sign assignments.
        res.exact = true;
        std::vector<double> dist(static_cast<size_t>(tot2) + 1, 0.0);
        dist[0] = 1.0;
        long upper = 0;
        for (int i = 0; i < n; ++i) {
            const long r2 = rank2[i];
            for (long s = upper; s >= 0; --s)
                if (dist[s] > 0.0) dist[s + r2] += dist[s];
            upper += r2;
        }
        const double denom = std::ldexp(1.0, n);  // 2^n
        double lo = 0.0, hi = 0.0;
        for (long s = 0; s <= tot2; ++s) {
            if (s <= w2) lo += dist[s];
            if (s >= w2) hi += dist[s];
        }
        res.p_value = std::min(1.0, 2.0 * std::min(lo, hi) / denom);
        return res;
    }

    // Normal approximation with tie-corrected variance and continuity correction.
    const double nn = n;
    const double mean = nn * (nn + 1.0) / 4.0;
    double tie_corr = 0.0;
    for (long t : tie_sizes) tie_corr += static_cast<double>(t) * t * t - t;
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_corr / 48.0;
    const double wplus = res.statistic;
    const double diff = wplus - mean;
    const double cc = diff > 0.0 ? -0.5 : (diff < 0.0 ? 0.5 : 0.0);
    const double z = (diff + cc) / std::sqrt(var);
    res.p_value = std::min(1.0, 2.0 * (1.0 - normal_cdf(std::abs(z))));
    return res;
}

MetricAggregate aggregate_metrics(const std::vector<ImageMetrics>& rows) {
    MetricAggregate agg;
    const size_t n = rows.size();
    if (n == 0) return agg;
    auto stats = [&](auto get, double& mean, double& sd) {
        double s = 0.0;
        for (const auto& r : rows) s += get(r);
        mean = s / static_cast<double>(n);
        if (n > 1) {
            double ss = 0.0;
            for (const auto& r : rows) {
                const double d = get(r) - mean;
                ss += d * d;
            }
            sd = std::sqrt(ss / static_cast<double>(n - 1));
        }
    };
    stats([](const ImageMetrics& r) { return r.psnr; }, agg.mean_psnr, agg.sd_psnr);
    stats([](const ImageMetrics& r) { return r.ssim; }, agg.mean_ssim, agg.sd_ssim);
    stats([](const ImageMetrics& r) { return r.mse; }, agg.mean_mse, agg.sd_mse);
    return agg;
}

}  // namespace gard
