#pragma once

#include "disque/image.hpp"

namespace disque {

// BT.709 luma weights, used on linear RGB.
inline constexpr double kLumaR = 0.2126;
inline constexpr double kLumaG = 0.7152;
inline constexpr double kLumaB = 0.0722;

// Scalar transfer functions, evaluated in 64-bit.
// sRGB per IEC 61966-2-1 (piecewise with linear toe).
double srgb_eotf(double code);    // encoded -> linear
double srgb_oetf(double linear);  // linear -> encoded

// ST 2084 PQ. Codes in [0,1] map to [0,10000] nits; both helpers work on
// luminance normalized by 10000 nits.
double pq_eotf(double code);      // code -> luminance / 10000
double pq_oetf(double lum10k);    // luminance / 10000 -> code

Image srgb_to_linear(const Image& img);
Image linear_to_srgb(const Image& img);

// PQ decode/encode against a display peak: linear values are absolute
// luminance divided by peak_nits, clipped to [0,1].
Image pq_to_linear(const Image& img, double peak_nits = 1000.0);
Image linear_to_pq(const Image& img, double peak_nits = 1000.0);

enum class ColorTarget { HSV, CIELAB, YUV };

// Forward conversions are defined from SRGB input:
//   HSV    - computed on the encoded R'G'B' values; H in [0,1) turns, S,V in [0,1]
//   CIELAB - via linearized sRGB and D65 XYZ; L in [0,100], a*,b* unbounded
//   YUV    - BT.601 luma on encoded values, U,V scaled to [-0.5, 0.5]
// Returned mats are CV_32FC3 in the target's natural ranges.
cv::Mat color_convert(const Image& img, ColorTarget target);
Image color_convert_back(const cv::Mat& channels, ColorTarget target);

// Per-pixel BT.709 luma of an RGB mat (single channel out).
cv::Mat luma709(const cv::Mat& rgb);

}  // namespace disque
