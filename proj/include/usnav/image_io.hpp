#pragma once

#include <string>

#include "usnav/calibration.hpp"

namespace usnav {

// Binary PGM (P5, maxval <= 255). Comments in the header are skipped.
GrayImage read_pgm(const std::string& path);
GrayImage parse_pgm(const std::string& bytes);
void write_pgm(const std::string& path, const GrayImage& image);
std::string format_pgm(const GrayImage& image);

// Pixels >= 128 are valid (fixtures store masks as 0/255).
ImageMask mask_from_gray(const GrayImage& image);
GrayImage gray_from_mask(const ImageMask& mask);

}  // namespace usnav
