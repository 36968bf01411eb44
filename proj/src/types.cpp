#include "gard/types.hpp"

namespace gard {

std::string domain_name(Domain d) {
    switch (d) {
        case Domain::Raw8bit: return "raw8bit";
        case Domain::Normalized: return "normalized";
        case Domain::LinearIntensity: return "linear-intensity";
    }
    return "unknown";
}

void require_domain(const ImageField& img, Domain expected, const char* what) {
    if (img.height < 1 || img.width < 1 ||
        img.values.size() != static_cast<size_t>(img.height) * img.width)
        throw config_error(std::string(what) + ": malformed image field");
    if (img.domain != expected)
        throw config_error(std::string(what) + ": expected " + domain_name(expected) +
                           " domain, got " + domain_name(img.domain));
}

}  // namespace gard
