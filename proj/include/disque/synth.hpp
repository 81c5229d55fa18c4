#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "disque/image.hpp"
#include "disque/manifest.hpp"

namespace disque {

// Procedurally generated colorful test imagery: gradient background, random
// filled shapes, mild texture noise. Mid-toned and saturated so the dataset
// screening accepts it.
Image synth_image(int rows, int cols, std::uint64_t seed);

// Same generator with a strong global hue cast pushed on top (hue in [0,1) turns).
Image synth_color_cast(int rows, int cols, std::uint64_t seed, double hue);

std::vector<Image> synth_corpus(int count, int rows, int cols, std::uint64_t seed);

// Writes a PNG corpus plus its JSON-lines manifest; returns the manifest path.
std::string write_synth_corpus(const std::string& dir, int count, int rows, int cols,
                               std::uint64_t seed);

}  // namespace disque
