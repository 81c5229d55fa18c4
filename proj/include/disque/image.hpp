#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <opencv2/core.hpp>

namespace disque {

// Error classes map onto CLI exit codes (see tools/).
enum class ErrorClass { Config = 2, Data = 3, Numeric = 4 };

class Error : public std::runtime_error {
public:
    Error(ErrorClass cls, const std::string& msg) : std::runtime_error(msg), cls_(cls) {}
    ErrorClass cls() const { return cls_; }

private:
    ErrorClass cls_;
};

enum class Colorspace { SRGB, PQ_BT2100, LINEAR };
enum class BitOrigin { EIGHT_BIT, TEN_BIT };

const char* to_string(Colorspace cs);
Colorspace colorspace_from_string(const std::string& s);

// The universal pixel currency: H x W x 3 float32 in [0,1], RGB channel
// order, tagged with the colorspace its values are coded in.
struct Image {
    cv::Mat pixels;  // CV_32FC3, RGB
    Colorspace colorspace = Colorspace::SRGB;
    BitOrigin bit_origin = BitOrigin::EIGHT_BIT;

    int rows() const { return pixels.rows; }
    int cols() const { return pixels.cols; }
    bool empty() const { return pixels.empty(); }

    Image clone() const { return {pixels.clone(), colorspace, bit_origin}; }

    static Image constant(int rows, int cols, cv::Vec3f rgb,
                          Colorspace cs = Colorspace::SRGB);
};

// Clips a float image into [0,1] in place and scrubs non-finite values to 0.
// Every pixelcore conversion ends with this.
void clip01(cv::Mat& m);

// Asserts the Image invariants (finite, in range, non-degenerate shape).
void validate_image(const Image& img);

struct Patch {
    Image image;          // H = W = patch_size
    std::string source_id;
    int row = 0;
    int col = 0;
};

// Uniformly random patch placement; deterministic for a fixed seed.
Patch sample_patch(const Image& img, int patch_size, std::uint64_t rng_seed,
                   const std::string& source_id = {});

struct ScreeningReport {
    bool is_grayscale = false;
    double overexposed_fraction = 0.0;
    double underexposed_fraction = 0.0;
    bool accepted = false;
};

// Dataset screening: grayscale and exposure gates. Luma is BT.709 on
// sRGB-decoded (linear) pixels; grayscale means mean HSV saturation below
// sat_threshold.
ScreeningReport screen_image(const Image& img, double theta_over = 0.30,
                             double theta_under = 0.30,
                             double sat_threshold = 0.02);

}  // namespace disque
