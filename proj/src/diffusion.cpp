#include "gard/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gard {

std::string fidelity_kind_name(FidelityKind f) {
    switch (f) {
        case FidelityKind::None: return "none";
        case FidelityKind::Raw: return "raw";
        case FidelityKind::Nrft: return "nrft";
    }
    return "unknown";
}

void InferenceConfig::validate(int T) const {
    if (t_start < 1 || t_start > T)
        throw config_error("inference: t_start must be in [1," + std::to_string(T) + "]");
    if (stride < 1 || stride > t_start)
        throw config_error("inference: stride must be in [1, t_start]");
    if (mu < 0.0) throw config_error("inference: mu must be >= 0");
}

ImageField forward_step(const NoiseSchedule& s, const ImageField& x_prev, int t,
                        std::uint64_t seed) {
    require_domain(x_prev, Domain::Normalized, "forward_step");
    const double k = s.shape_at(t);
    const double scale = s.scale_at(t);  // Var(g_t) = k_t * theta_t^2 = beta_t
    const double mean = k * scale;
    ImageField out(x_prev.height, x_prev.width, Domain::Normalized);
    SplitMix64 rng(seed);
    const double damp = std::sqrt(1.0 - s.beta_at(t));
    for (size_t i = 0; i < out.values.size(); ++i) {
        const double g = sample_gamma_scalar(k, scale, rng);
        out.values[i] = damp * x_prev.values[i] + (g - mean);
    }
    return out;
}

ForwardMarginal forward_marginal(const NoiseSchedule& s, const ImageField& x0, int t,
                                 std::uint64_t seed, NoiseFamily family) {
    require_domain(x0, Domain::Normalized, "forward_marginal");
    ForwardMarginal fm;
    fm.eps_true = sample_standardized_noise(s, t, family, x0.height, x0.width, seed);
    const double root_abar = std::sqrt(s.alpha_bar_at(t));
    const double std = marginal_std(s, t);
    fm.x_t = ImageField(x0.height, x0.width, Domain::Normalized);
    for (size_t i = 0; i < x0.values.size(); ++i)
        fm.x_t.values[i] = root_abar * x0.values[i] + std * fm.eps_true.values[i];
    return fm;
}

ImageField predict_x0(const NoiseSchedule& s, const ImageField& x_t,
                      const std::vector<double>& eps_hat, int t) {
    if (eps_hat.size() != x_t.values.size())
        throw config_error("predict_x0: eps_hat size mismatch");
    const double root_abar = std::sqrt(s.alpha_bar_at(t));
    const double std = marginal_std(s, t);
    ImageField out(x_t.height, x_t.width, Domain::Normalized);
    for (size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = (x_t.values[i] - std * eps_hat[i]) / root_abar;
    return out;
}

ImageField reverse_step_stochastic(const NoiseSchedule& s, const ImageField& x_t,
                                   const std::vector<double>& eps_hat, int t, double sigma_t,
                                   NoiseFamily family, std::uint64_t seed) {
    if (eps_hat.size() != x_t.values.size())
        throw config_error("reverse_step: eps_hat size mismatch");
    if (sigma_t < 0.0) throw config_error("reverse_step: sigma_t must be >= 0");
    const double coef = (1.0 - s.alpha_at(t)) / marginal_std(s, t);
    const double denom = std::sqrt(s.alpha_at(t));
    ImageField out(x_t.height, x_t.width, Domain::Normalized);
    for (size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = (x_t.values[i] - coef * eps_hat[i]) / denom;
    if (sigma_t > 0.0) {
        NoiseField n = sample_standardized_noise(s, t, family, x_t.height, x_t.width, seed);
        for (size_t i = 0; i < out.values.size(); ++i) out.values[i] += sigma_t * n.values[i];
    }
    return out;
}

ImageField ddim_trajectory(const NoiseSchedule& s, const ImageField& x_start,
                           DenoiserBackend& backend, const InferenceConfig& cfg,
                           const FidelityHook& fidelity_hook) {
    require_domain(x_start, Domain::Normalized, "ddim_trajectory");
    cfg.validate(s.T);
    if (cfg.fidelity != FidelityKind::None && !fidelity_hook)
        throw config_error("ddim_trajectory: fidelity configured but no hook supplied");

    ImageField x = x_start;
    for (int t = cfg.t_start; t >= 1; t -= cfg.stride) {
        const std::vector<double> eps_hat = predict_noise(backend, x, t);
        ImageField x0_hat = predict_x0(s, x, eps_hat, t);
        const int t_next = t - cfg.stride;
        if (t_next >= 1) {
            const double root_abar = std::sqrt(s.alpha_bar_at(t_next));
            const double std_next = marginal_std(s, t_next);
            for (size_t i = 0; i < x.values.size(); ++i)
                x.values[i] = root_abar * x0_hat.values[i] + std_next * eps_hat[i];
        } else {
            // terminal jump to 0 reuses this eps_hat: the result is x0_hat
            x = std::move(x0_hat);
        }
        if (cfg.fidelity != FidelityKind::None) x = fidelity_hook(x);
    }
    for (double& v : x.values) v = std::clamp(v, -1.0, 1.0);
    return x;
}

}  // namespace gard
