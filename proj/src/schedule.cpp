#include "gard/schedule.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "gard/types.hpp"

namespace gard {

size_t NoiseSchedule::check(int t) const {
    if (t < 1 || t > T)
        throw std::out_of_range("timestep " + std::to_string(t) + " outside [1," +
                                std::to_string(T) + "]");
    return static_cast<size_t>(t - 1);
}

NoiseSchedule build_linear_schedule(int T, double beta_start, double beta_end, double theta0) {
    if (T < 1) throw config_error("schedule: T must be >= 1");
    if (!(beta_start > 0.0) || !(beta_end < 1.0) || beta_end < beta_start)
        throw config_error("schedule: need 0 < beta_start <= beta_end < 1");
    if (!(theta0 > 0.0)) throw config_error("schedule: theta0 must be > 0");

    NoiseSchedule s;
    s.T = T;
    s.theta0 = theta0;
    s.beta.resize(T);
    s.alpha.resize(T);
    s.alpha_bar.resize(T);
    s.gamma_shape.resize(T);
    s.gamma_scale.resize(T);
    s.gamma_shape_cum.resize(T);

    double abar = 1.0;
    double kcum = 0.0;
    for (int i = 0; i < T; ++i) {
        const double beta =
            T == 1 ? beta_start : beta_start + (beta_end - beta_start) * i / (T - 1);
        const double alpha = 1.0 - beta;
        abar *= alpha;
        const double k = beta / (abar * theta0 * theta0);
        kcum += k;
        s.beta[i] = beta;
        s.alpha[i] = alpha;
        s.alpha_bar[i] = abar;
        s.gamma_shape[i] = k;
        s.gamma_scale[i] = std::sqrt(abar) * theta0;
        s.gamma_shape_cum[i] = kcum;
    }
    return s;
}

double marginal_std(const NoiseSchedule& s, int t) {
    return std::sqrt(1.0 - s.alpha_bar_at(t));
}

}  // namespace gard
