#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "disque/image.hpp"

namespace disque {

// Reads 8-bit PNG/JPEG as SRGB, or 16-bit PNG as PQ-coded HDR (10-bit codes
// left-aligned in the 16-bit samples). The colorspace argument is the
// manifest's declaration for the file; EIGHT/TEN bit origin is inferred from
// the container depth.
Image load_image(const std::string& path, Colorspace colorspace = Colorspace::SRGB);

// 8-bit PNG writer (SRGB payloads).
void save_png8(const std::string& path, const Image& img);

// 16-bit PNG writer for PQ-coded frames, 10-bit codes left-aligned.
void save_png16_pq(const std::string& path, const Image& img);

// In-memory JPEG compress + decode at the given quality (0..100).
// Used by the Compress distortion and the tone-mapping JPEG stage.
Image jpeg_roundtrip(const Image& img, int quality);

}  // namespace disque
