#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace gard {

// Thrown for bad configuration / parameter values (CLI exit code 2).
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown for unreadable / malformed / missing data (CLI exit code 3).
struct data_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown for numerical failures: non-convergence, non-finite loss (CLI exit code 4).
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Value domain of an image. Raw8bit is [0,255], Normalized is [-1,1],
// LinearIntensity is nonnegative pre-display-transform reflectivity.
enum class Domain : std::uint8_t {
    Raw8bit,
    Normalized,
    LinearIntensity,
};

std::string domain_name(Domain d);

// 2-D grayscale field of doubles, row-major, with an explicit value domain.
struct ImageField {
    int height = 0;
    int width = 0;
    Domain domain = Domain::Normalized;
    std::vector<double> values;

    ImageField() = default;
    ImageField(int h, int w, Domain d, double fill = 0.0)
        : height(h), width(w), domain(d), values(static_cast<size_t>(h) * w, fill) {}

    double& at(int r, int c) { return values[static_cast<size_t>(r) * width + c]; }
    double at(int r, int c) const { return values[static_cast<size_t>(r) * width + c]; }
    size_t size() const { return values.size(); }
    bool same_shape(const ImageField& o) const { return height == o.height && width == o.width; }
};

// Throws config_error unless the field carries the expected domain and a sane shape.
void require_domain(const ImageField& img, Domain expected, const char* what);

}  // namespace gard
