#include "gard/rng.hpp"

#include <cmath>

namespace gard {

double sample_normal(SplitMix64& rng) {
    // Marsaglia polar method; the second deviate is discarded to keep the
    // draw count a pure function of the call sequence.
    for (;;) {
        const double u = 2.0 * rng.next_double() - 1.0;
        const double v = 2.0 * rng.next_double() - 1.0;
        const double s = u * u + v * v;
        if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
    }
}

}  // namespace gard
