#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "disque/image.hpp"

namespace disque {

enum class DistortionKind {
    NNResize, BilinearResize, BicubicResize, LanczosResize,
    MotionBlur, GaussianBlur, LensBlur,
    MeanShift, Contrast, Compress, UnsharpMasking,
    ColorBlock, Jitter, PatchJitter,
    RGBNoise, YUVNoise, ImpulseNoise, SpeckleNoise, Denoise,
    Brighten, Darken,
    ColorDiffuse, ColorShift, HSVSaturate, LABSaturate,
};

inline constexpr int kNumDistortionKinds = 25;

const char* to_string(DistortionKind kind);
DistortionKind distortion_kind_from_string(const std::string& s);

// Kinds whose output depends on noise_seed.
bool is_stochastic(DistortionKind kind);

struct UnitDistortion {
    DistortionKind kind;
    int severity = 1;                 // 1..5
    std::uint64_t noise_seed = 0;     // consumed by stochastic kinds only
};

enum class BankDomain { SDR, HDR };

// An element t of the SDR bank: 1 to 3 unit distortions applied in order.
struct TransformSpec {
    std::vector<UnitDistortion> units;
    BankDomain bank_domain = BankDomain::SDR;

    // Canonical text form: `kind:severity:seed[+kind:severity:seed...]`.
    std::string serialize() const;
    static TransformSpec parse(const std::string& text);
};

// Severity ladders. Each kind exposes one primary strength parameter,
// strictly monotone across severities 1..5; ladders are validated by the
// monotone-MSE property test rather than by absolute values.
std::array<double, 5> severity_table(DistortionKind kind);

Image apply_unit(const Image& img, const UnitDistortion& d);
Image apply_transform(const Image& img, const TransformSpec& spec);

// Random composition of 1-3 unit distortions: depth uniform in {1,2,3},
// kinds without replacement, severities uniform in {1..5}.
TransformSpec sample_transform(std::uint64_t rng_seed);

// Restricted sampler used by desk-scale presets (kind subset instead of all 25).
TransformSpec sample_transform(std::uint64_t rng_seed,
                               const std::vector<DistortionKind>& kinds,
                               int max_depth = 3);

}  // namespace disque
