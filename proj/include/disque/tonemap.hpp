#pragma once

#include <string>

#include "disque/image.hpp"

namespace disque {

enum class TmoOperator { HABLE, REINHARD02, ITU21_A };

const char* to_string(TmoOperator op);
TmoOperator tmo_operator_from_string(const std::string& s);

// An element of the HDR bank: analytic TMO + its variation parameter +
// a JPEG compression level.
struct TmoSpec {
    TmoOperator op = TmoOperator::HABLE;
    double param = 0.0;   // desaturation in [0,1] for HABLE/REINHARD02,
                          // nominal HDR luminance in [100,10000] nits for ITU21_A
    int jpeg_level = 1;   // 1..4

    std::string serialize() const;           // `OPERATOR:param:jpegLevel`
    static TmoSpec parse(const std::string& text);
};

// JPEG quality ladder for the four compression levels.
int tmo_jpeg_quality(int jpeg_level);

// Tone curves on relative luminance (0 maps to 0, monotone non-decreasing).
// Hable uses the published filmic constants normalized at linear white 11.2;
// input is expected pre-scaled by that white.
double hable_curve(double x);
double reinhard02_curve(double x, double white);
double itu21a_curve(double x, double nominal_nits);

// Convex blend of each pixel toward its BT.709 luma; preserves luma exactly.
Image desaturate(const Image& img_linear, double amount);

// Full HDR->SDR transform: PQ decode, BT.2020->BT.709 gamut map, tone curve
// on luminance, desaturation, sRGB encode, JPEG round trip.
Image tone_map(const Image& img, const TmoSpec& spec, double peak_nits = 1000.0);

// Same pipeline without the JPEG stage (curve verification hooks).
Image tone_map_uncompressed(const Image& img, const TmoSpec& spec,
                            double peak_nits = 1000.0);

}  // namespace disque
