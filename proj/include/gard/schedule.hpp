#pragma once

#include <cstdint>
#include <vector>

namespace gard {

// All per-timestep scalars of the Gamma diffusion schedule, precomputed at
// double precision. Timesteps are 1-based: t in [1,T]; t=0 means the clean
// image and is not a schedule index. Immutable after construction.
struct NoiseSchedule {
    int T = 0;
    double theta0 = 0.0;
    // All arrays are size T; index i holds the value for timestep t=i+1.
    std::vector<double> beta;             // per-step noise rate
    std::vector<double> alpha;            // 1 - beta
    std::vector<double> alpha_bar;        // cumulative product of alpha
    std::vector<double> gamma_shape;      // k_t = beta_t / (alpha_bar_t * theta0^2)
    std::vector<double> gamma_scale;      // theta_t = sqrt(alpha_bar_t) * theta0
    std::vector<double> gamma_shape_cum;  // running sum of k_t

    double beta_at(int t) const { return beta[check(t)]; }
    double alpha_at(int t) const { return alpha[check(t)]; }
    double alpha_bar_at(int t) const { return alpha_bar[check(t)]; }
    double shape_at(int t) const { return gamma_shape[check(t)]; }
    double scale_at(int t) const { return gamma_scale[check(t)]; }
    double shape_cum_at(int t) const { return gamma_shape_cum[check(t)]; }

  private:
    size_t check(int t) const;
};

// Linear beta schedule: beta_t = beta_start + (t-1)*(beta_end-beta_start)/(T-1),
// beta_1 = beta_start when T == 1. Derived Gamma parameters use the cumulative
// product in the shape denominator, k_t = beta_t/(alpha_bar_t * theta0^2),
// which is the choice that satisfies k_cum_t * theta_t^2 = 1 - alpha_bar_t and
// makes the scaled per-step Gammas sum to a single Gamma.
NoiseSchedule build_linear_schedule(int T, double beta_start, double beta_end, double theta0);

// sqrt(1 - alpha_bar_t). Throws std::out_of_range for t outside [1,T].
double marginal_std(const NoiseSchedule& s, int t);

}  // namespace gard
