#pragma once

// Lossless 8-bit grayscale PNG I/O.

#include <string>

#include "gard/types.hpp"

namespace gard {

// Reads an 8-bit single-channel PNG into a raw8bit field. Throws data_error
// on unreadable files, non-grayscale images (convert to grayscale first), or
// bit depths other than 8 (16-bit input is unsupported).
ImageField load_image(const std::string& path);

// Writes a raw8bit field as grayscale PNG, rounding and clipping values to
// [0,255]. Integer-valued in-range fields round-trip bit-identically.
void save_image(const ImageField& img, const std::string& path);

}  // namespace gard
