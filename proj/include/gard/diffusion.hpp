#pragma once

#include <cstdint>
#include <functional>

#include "gard/denoiser.hpp"
#include "gard/sampler.hpp"
#include "gard/schedule.hpp"
#include "gard/types.hpp"

namespace gard {

enum class SigmaMode : std::uint8_t { Deterministic, Stochastic };
enum class FidelityKind : std::uint8_t { None, Raw, Nrft };

std::string fidelity_kind_name(FidelityKind f);

struct InferenceConfig {
    int t_start = 70;
    int stride = 10;
    SigmaMode sigma_mode = SigmaMode::Deterministic;
    FidelityKind fidelity = FidelityKind::None;
    double mu = 10.0;
    NoiseFamily noise_family = NoiseFamily::Gamma;

    void validate(int T) const;  // throws config_error
};

// Applied to the running estimate after each reverse step when fidelity != none.
using FidelityHook = std::function<ImageField(const ImageField&)>;

// One forward step: sqrt(1-beta_t)*x_prev + (g_t - E[g_t]), g_t ~ Gamma(k_t, theta_t).
ImageField forward_step(const NoiseSchedule& s, const ImageField& x_prev, int t,
                        std::uint64_t seed);

// Closed-form jump to timestep t: x_t = sqrt(alpha_bar_t)*x0 + centered cumulative
// noise. Returns x_t together with the standardized noise used, which is the
// training target for the epsilon model.
struct ForwardMarginal {
    ImageField x_t;
    NoiseField eps_true;
};
ForwardMarginal forward_marginal(const NoiseSchedule& s, const ImageField& x0, int t,
                                 std::uint64_t seed, NoiseFamily family = NoiseFamily::Gamma);

// (x_t - sqrt(1-alpha_bar_t)*eps_hat) / sqrt(alpha_bar_t)
ImageField predict_x0(const NoiseSchedule& s, const ImageField& x_t,
                      const std::vector<double>& eps_hat, int t);

// Ancestral reverse step with explicit sigma_t. The denominator is sqrt(alpha_t)
// (the DDPM posterior mean), with the standardized stochastic term drawn from
// the configured family. Test surface for the stochastic path; the production
// denoise path is ddim_trajectory.
ImageField reverse_step_stochastic(const NoiseSchedule& s, const ImageField& x_t,
                                   const std::vector<double>& eps_hat, int t, double sigma_t,
                                   NoiseFamily family, std::uint64_t seed);

// Deterministic accelerated trajectory: descending grid {t_start, t_start-stride, ...}
// with a terminal jump to 0 from the last grid point. One backend evaluation per
// grid point; the terminal jump returns that step's predicted x0. After every
// step (terminal included) the fidelity hook refines the estimate when
// cfg.fidelity != none. The result is clamped to [-1,1] once, at the end.
ImageField ddim_trajectory(const NoiseSchedule& s, const ImageField& x_start,
                           DenoiserBackend& backend, const InferenceConfig& cfg,
                           const FidelityHook& fidelity_hook = nullptr);

}  // namespace gard
