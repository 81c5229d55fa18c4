#include "disque/tonemap.hpp"

#include <cmath>
#include <sstream>

#include "disque/color.hpp"
#include "disque/image_io.hpp"

namespace disque {

namespace {

// Uncharted-2 filmic constants.
constexpr double kHA = 0.15, kHB = 0.50, kHC = 0.10, kHD = 0.20, kHE = 0.02,
                 kHF = 0.30;
constexpr double kHableWhite = 11.2;

double hable_partial(double x) {
    return ((x * (kHA * x + kHC * kHB) + kHD * kHE) /
            (x * (kHA * x + kHB) + kHD * kHF)) -
           kHE / kHF;
}

// BT.2020 luminance weights (linear).
constexpr double kY2020R = 0.2627, kY2020G = 0.6780, kY2020B = 0.0593;

// Linear BT.2020 -> BT.709 primaries.
constexpr double kG2020To709[3][3] = {{1.6605, -0.5876, -0.0728},
                                      {-0.1246, 1.1329, -0.0083},
                                      {-0.0182, -0.1006, 1.1187}};

constexpr int kJpegLadder[4] = {60, 40, 25, 12};

void validate_spec(const TmoSpec& spec) {
    if (spec.jpeg_level < 1 || spec.jpeg_level > 4)
        throw Error(ErrorClass::Config, "jpeg_level must be in 1..4");
    switch (spec.op) {
        case TmoOperator::HABLE:
        case TmoOperator::REINHARD02:
            if (spec.param < 0.0 || spec.param > 1.0)
                throw Error(ErrorClass::Config, "desaturation must be in [0,1]");
            break;
        case TmoOperator::ITU21_A:
            if (spec.param < 100.0 || spec.param > 10000.0)
                throw Error(ErrorClass::Config,
                            "nominal luminance must be in [100,10000] nits");
            break;
    }
}

}  // namespace

const char* to_string(TmoOperator op) {
    switch (op) {
        case TmoOperator::HABLE: return "HABLE";
        case TmoOperator::REINHARD02: return "REINHARD02";
        case TmoOperator::ITU21_A: return "ITU21_A";
    }
    return "?";
}

TmoOperator tmo_operator_from_string(const std::string& s) {
    if (s == "HABLE") return TmoOperator::HABLE;
    if (s == "REINHARD02") return TmoOperator::REINHARD02;
    if (s == "ITU21_A") return TmoOperator::ITU21_A;
    throw Error(ErrorClass::Config, "unknown TMO operator: " + s);
}

std::string TmoSpec::serialize() const {
    std::ostringstream os;
    os << to_string(op) << ':' << param << ':' << jpeg_level;
    return os.str();
}

TmoSpec TmoSpec::parse(const std::string& text) {
    const size_t c1 = text.find(':');
    const size_t c2 = c1 == std::string::npos ? std::string::npos : text.find(':', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
        throw Error(ErrorClass::Config,
                    "malformed TMO spec '" + text + "': expected OPERATOR:param:jpegLevel");
    TmoSpec spec;
    spec.op = tmo_operator_from_string(text.substr(0, c1));
    try {
        spec.param = std::stod(text.substr(c1 + 1, c2 - c1 - 1));
        spec.jpeg_level = std::stoi(text.substr(c2 + 1));
    } catch (const std::exception&) {
        throw Error(ErrorClass::Config, "malformed TMO spec '" + text + "': bad number");
    }
    validate_spec(spec);
    return spec;
}

int tmo_jpeg_quality(int jpeg_level) {
    if (jpeg_level < 1 || jpeg_level > 4)
        throw Error(ErrorClass::Config, "jpeg_level must be in 1..4");
    return kJpegLadder[jpeg_level - 1];
}

double hable_curve(double x) {
    return hable_partial(std::max(0.0, x)) / hable_partial(kHableWhite);
}

double reinhard02_curve(double x, double white) {
    x = std::max(0.0, x);
    return x * (1.0 + x / (white * white)) / (1.0 + x);
}

double itu21a_curve(double x, double nominal_nits) {
    // Rec. BT.2446-0 Approach A on normalized luminance, SDR target 100 nits.
    x = std::min(std::max(x, 0.0), 1.0);
    const double rho_hdr = 1.0 + 32.0 * std::pow(nominal_nits / 10000.0, 1.0 / 2.4);
    const double rho_sdr = 1.0 + 32.0 * std::pow(100.0 / 10000.0, 1.0 / 2.4);
    const double yp = std::log1p((rho_hdr - 1.0) * std::pow(x, 1.0 / 2.4)) /
                      std::log(rho_hdr);
    double yc;
    if (yp <= 0.7399)
        yc = 1.0770 * yp;
    else if (yp < 0.9909)
        yc = -1.1510 * yp * yp + 2.7811 * yp - 0.6302;
    else
        yc = 0.5 * yp + 0.5;
    yc = std::min(std::max(yc, 0.0), 1.0);
    const double ysdr = (std::pow(rho_sdr, yc) - 1.0) / (rho_sdr - 1.0);
    return std::pow(ysdr, 2.4);
}

Image desaturate(const Image& img_linear, double amount) {
    if (amount < 0.0 || amount > 1.0)
        throw Error(ErrorClass::Config, "desaturation amount must be in [0,1]");
    Image out = img_linear.clone();
    for (int r = 0; r < out.rows(); ++r) {
        cv::Vec3f* p = out.pixels.ptr<cv::Vec3f>(r);
        for (int c = 0; c < out.cols(); ++c) {
            const double y = kLumaR * p[c][0] + kLumaG * p[c][1] + kLumaB * p[c][2];
            for (int k = 0; k < 3; ++k)
                p[c][k] = static_cast<float>((1.0 - amount) * p[c][k] + amount * y);
        }
    }
    return out;
}

Image tone_map_uncompressed(const Image& img, const TmoSpec& spec, double peak_nits) {
    if (img.colorspace != Colorspace::PQ_BT2100)
        throw Error(ErrorClass::Data, "tone_map expects a PQ-coded input");
    validate_spec(spec);
    if (peak_nits <= 0.0) throw Error(ErrorClass::Config, "peak_nits must be > 0");

    const double norm_nits =
        spec.op == TmoOperator::ITU21_A ? spec.param : peak_nits;

    Image lin;
    lin.pixels = cv::Mat(img.rows(), img.cols(), CV_32FC3);
    lin.colorspace = Colorspace::LINEAR;
    for (int r = 0; r < img.rows(); ++r) {
        const cv::Vec3f* src = img.pixels.ptr<cv::Vec3f>(r);
        cv::Vec3f* dst = lin.pixels.ptr<cv::Vec3f>(r);
        for (int c = 0; c < img.cols(); ++c) {
            // PQ decode to luminance relative to the normalization peak.
            double rgb[3];
            for (int k = 0; k < 3; ++k)
                rgb[k] = pq_eotf(src[c][k]) * 10000.0 / norm_nits;
            const double y = kY2020R * rgb[0] + kY2020G * rgb[1] + kY2020B * rgb[2];
            double y_out;
            switch (spec.op) {
                case TmoOperator::HABLE:
                    y_out = hable_curve(y * kHableWhite);
                    break;
                case TmoOperator::REINHARD02:
                    y_out = reinhard02_curve(y, 1e6);
                    break;
                case TmoOperator::ITU21_A:
                    y_out = itu21a_curve(y, spec.param);
                    break;
                default:
                    y_out = y;
            }
            const double ratio = y > 1e-9 ? y_out / y : 0.0;
            double mapped[3];
            for (int k = 0; k < 3; ++k) mapped[k] = rgb[k] * ratio;
            // BT.2020 -> BT.709 primaries, then clip into gamut.
            for (int k = 0; k < 3; ++k) {
                double v = kG2020To709[k][0] * mapped[0] +
                           kG2020To709[k][1] * mapped[1] +
                           kG2020To709[k][2] * mapped[2];
                dst[c][k] = static_cast<float>(std::min(1.0, std::max(0.0, v)));
            }
        }
    }

    if (spec.op != TmoOperator::ITU21_A && spec.param > 0.0)
        lin = desaturate(lin, spec.param);

    return linear_to_srgb(lin);
}

Image tone_map(const Image& img, const TmoSpec& spec, double peak_nits) {
    Image sdr = tone_map_uncompressed(img, spec, peak_nits);
    return jpeg_roundtrip(sdr, tmo_jpeg_quality(spec.jpeg_level));
}

}  // namespace disque
