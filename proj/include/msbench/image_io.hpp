#ifndef MSBENCH_IMAGE_IO_HPP
#define MSBENCH_IMAGE_IO_HPP

#include <string>

#include "msbench/core.hpp"

namespace msbench {

/// Loads 8-bit PNG (gray or RGB) or binary PGM/PPM; values divided by 255.
/// Format chosen by file extension (.png, .pgm, .ppm).
Image load_image(const std::string& path);

/// Writes 8-bit quantized output; round(v*255) so quantized data round-trips
/// exactly. Channel count picks gray vs RGB.
void save_image(const Image& im, const std::string& path);

}  // namespace msbench

#endif
