#include "disque/color.hpp"

#include <cmath>

namespace disque {

namespace {

// ST 2084 constants.
constexpr double kPqM1 = 2610.0 / 16384.0;
constexpr double kPqM2 = 2523.0 / 4096.0 * 128.0;
constexpr double kPqC1 = 3424.0 / 4096.0;
constexpr double kPqC2 = 2413.0 / 4096.0 * 32.0;
constexpr double kPqC3 = 2392.0 / 4096.0 * 32.0;

// Applies a 64-bit scalar transfer function channelwise and clips.
template <typename F>
Image map_channels(const Image& img, Colorspace out_cs, F&& f) {
    Image out;
    out.pixels = cv::Mat(img.rows(), img.cols(), CV_32FC3);
    out.colorspace = out_cs;
    out.bit_origin = img.bit_origin;
    for (int r = 0; r < img.rows(); ++r) {
        const float* src = img.pixels.ptr<float>(r);
        float* dst = out.pixels.ptr<float>(r);
        for (int i = 0; i < img.cols() * 3; ++i)
            dst[i] = static_cast<float>(f(static_cast<double>(src[i])));
    }
    clip01(out.pixels);
    return out;
}

void require_colorspace(const Image& img, Colorspace cs, const char* op) {
    if (img.colorspace != cs)
        throw Error(ErrorClass::Data,
                    std::string(op) + ": input colorspace mismatch, expected " +
                        to_string(cs) + ", got " + to_string(img.colorspace));
}

}  // namespace

double srgb_eotf(double code) {
    if (code <= 0.04045) return code / 12.92;
    return std::pow((code + 0.055) / 1.055, 2.4);
}

double srgb_oetf(double linear) {
    if (linear <= 0.0031308) return linear * 12.92;
    return 1.055 * std::pow(linear, 1.0 / 2.4) - 0.055;
}

double pq_eotf(double code) {
    code = std::max(code, 0.0);
    const double p = std::pow(code, 1.0 / kPqM2);
    const double num = std::max(p - kPqC1, 0.0);
    const double den = kPqC2 - kPqC3 * p;
    if (den <= 0.0) return 1.0;
    return std::pow(num / den, 1.0 / kPqM1);
}

double pq_oetf(double lum10k) {
    lum10k = std::min(std::max(lum10k, 0.0), 1.0);
    const double y = std::pow(lum10k, kPqM1);
    return std::pow((kPqC1 + kPqC2 * y) / (1.0 + kPqC3 * y), kPqM2);
}

Image srgb_to_linear(const Image& img) {
    require_colorspace(img, Colorspace::SRGB, "srgb_to_linear");
    return map_channels(img, Colorspace::LINEAR, [](double v) { return srgb_eotf(v); });
}

Image linear_to_srgb(const Image& img) {
    require_colorspace(img, Colorspace::LINEAR, "linear_to_srgb");
    return map_channels(img, Colorspace::SRGB, [](double v) { return srgb_oetf(v); });
}

Image pq_to_linear(const Image& img, double peak_nits) {
    require_colorspace(img, Colorspace::PQ_BT2100, "pq_to_linear");
    if (peak_nits <= 0.0) throw Error(ErrorClass::Config, "peak_nits must be > 0");
    const double scale = 10000.0 / peak_nits;
    return map_channels(img, Colorspace::LINEAR,
                        [scale](double v) { return pq_eotf(v) * scale; });
}

Image linear_to_pq(const Image& img, double peak_nits) {
    require_colorspace(img, Colorspace::LINEAR, "linear_to_pq");
    if (peak_nits <= 0.0) throw Error(ErrorClass::Config, "peak_nits must be > 0");
    const double scale = peak_nits / 10000.0;
    Image out = map_channels(img, Colorspace::PQ_BT2100,
                             [scale](double v) { return pq_oetf(v * scale); });
    out.bit_origin = BitOrigin::TEN_BIT;
    return out;
}

namespace {

// BT.601 luma with U,V scaled so extreme saturated inputs hit +-0.5.
constexpr double kYuvR = 0.299, kYuvG = 0.587, kYuvB = 0.114;

void rgb_to_hsv(double r, double g, double b, double* h, double* s, double* v) {
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    const double d = mx - mn;
    *v = mx;
    *s = mx > 0.0 ? d / mx : 0.0;
    if (d <= 0.0) {
        *h = 0.0;
        return;
    }
    double hh;
    if (mx == r)
        hh = std::fmod((g - b) / d, 6.0);
    else if (mx == g)
        hh = (b - r) / d + 2.0;
    else
        hh = (r - g) / d + 4.0;
    hh /= 6.0;
    if (hh < 0.0) hh += 1.0;
    *h = hh;
}

void hsv_to_rgb(double h, double s, double v, double* r, double* g, double* b) {
    h = h - std::floor(h);
    const double hh = h * 6.0;
    const int i = std::min(5, static_cast<int>(hh));
    const double f = hh - i;
    const double p = v * (1.0 - s);
    const double q = v * (1.0 - s * f);
    const double t = v * (1.0 - s * (1.0 - f));
    switch (i) {
        case 0: *r = v; *g = t; *b = p; break;
        case 1: *r = q; *g = v; *b = p; break;
        case 2: *r = p; *g = v; *b = t; break;
        case 3: *r = p; *g = q; *b = v; break;
        case 4: *r = t; *g = p; *b = v; break;
        default: *r = v; *g = p; *b = q; break;
    }
}

// Linear sRGB <-> XYZ (D65). White point taken from the matrix row sums so
// that (1,1,1) maps exactly to L*=100, a*=b*=0.
constexpr double kM[3][3] = {{0.4124, 0.3576, 0.1805},
                             {0.2126, 0.7152, 0.0722},
                             {0.0193, 0.1192, 0.9505}};
constexpr double kWhiteX = kM[0][0] + kM[0][1] + kM[0][2];
constexpr double kWhiteY = kM[1][0] + kM[1][1] + kM[1][2];
constexpr double kWhiteZ = kM[2][0] + kM[2][1] + kM[2][2];

double lab_f(double t) {
    constexpr double d = 6.0 / 29.0;
    if (t > d * d * d) return std::cbrt(t);
    return t / (3.0 * d * d) + 4.0 / 29.0;
}

double lab_finv(double t) {
    constexpr double d = 6.0 / 29.0;
    if (t > d) return t * t * t;
    return 3.0 * d * d * (t - 4.0 / 29.0);
}

void invert3x3(const double m[3][3], double inv[3][3]) {
    const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                       m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                       m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    const double id = 1.0 / det;
    inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * id;
    inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * id;
    inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * id;
    inv[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * id;
    inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * id;
    inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * id;
    inv[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * id;
    inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * id;
    inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * id;
}

}  // namespace

cv::Mat color_convert(const Image& img, ColorTarget target) {
    require_colorspace(img, Colorspace::SRGB, "color_convert");
    cv::Mat out(img.rows(), img.cols(), CV_32FC3);
    for (int rr = 0; rr < img.rows(); ++rr) {
        const cv::Vec3f* src = img.pixels.ptr<cv::Vec3f>(rr);
        cv::Vec3f* dst = out.ptr<cv::Vec3f>(rr);
        for (int cc = 0; cc < img.cols(); ++cc) {
            const double r = src[cc][0], g = src[cc][1], b = src[cc][2];
            switch (target) {
                case ColorTarget::HSV: {
                    double h, s, v;
                    rgb_to_hsv(r, g, b, &h, &s, &v);
                    dst[cc] = cv::Vec3f(static_cast<float>(h), static_cast<float>(s),
                                        static_cast<float>(v));
                    break;
                }
                case ColorTarget::CIELAB: {
                    const double rl = srgb_eotf(r), gl = srgb_eotf(g), bl = srgb_eotf(b);
                    const double X = kM[0][0] * rl + kM[0][1] * gl + kM[0][2] * bl;
                    const double Y = kM[1][0] * rl + kM[1][1] * gl + kM[1][2] * bl;
                    const double Z = kM[2][0] * rl + kM[2][1] * gl + kM[2][2] * bl;
                    const double fx = lab_f(X / kWhiteX);
                    const double fy = lab_f(Y / kWhiteY);
                    const double fz = lab_f(Z / kWhiteZ);
                    dst[cc] = cv::Vec3f(static_cast<float>(116.0 * fy - 16.0),
                                        static_cast<float>(500.0 * (fx - fy)),
                                        static_cast<float>(200.0 * (fy - fz)));
                    break;
                }
                case ColorTarget::YUV: {
                    const double y = kYuvR * r + kYuvG * g + kYuvB * b;
                    const double u = 0.5 * (b - y) / (1.0 - kYuvB);
                    const double v = 0.5 * (r - y) / (1.0 - kYuvR);
                    dst[cc] = cv::Vec3f(static_cast<float>(y), static_cast<float>(u),
                                        static_cast<float>(v));
                    break;
                }
            }
        }
    }
    return out;
}

Image color_convert_back(const cv::Mat& channels, ColorTarget target) {
    CV_Assert(channels.type() == CV_32FC3);
    Image out;
    out.pixels = cv::Mat(channels.rows, channels.cols, CV_32FC3);
    out.colorspace = Colorspace::SRGB;
    double minv[3][3];
    invert3x3(kM, minv);
    for (int rr = 0; rr < channels.rows; ++rr) {
        const cv::Vec3f* src = channels.ptr<cv::Vec3f>(rr);
        cv::Vec3f* dst = out.pixels.ptr<cv::Vec3f>(rr);
        for (int cc = 0; cc < channels.cols; ++cc) {
            double r, g, b;
            switch (target) {
                case ColorTarget::HSV:
                    hsv_to_rgb(src[cc][0], src[cc][1], src[cc][2], &r, &g, &b);
                    break;
                case ColorTarget::CIELAB: {
                    const double L = src[cc][0], a = src[cc][1], bb = src[cc][2];
                    const double fy = (L + 16.0) / 116.0;
                    const double fx = fy + a / 500.0;
                    const double fz = fy - bb / 200.0;
                    const double X = kWhiteX * lab_finv(fx);
                    const double Y = kWhiteY * lab_finv(fy);
                    const double Z = kWhiteZ * lab_finv(fz);
                    const double rl = minv[0][0] * X + minv[0][1] * Y + minv[0][2] * Z;
                    const double gl = minv[1][0] * X + minv[1][1] * Y + minv[1][2] * Z;
                    const double bl = minv[2][0] * X + minv[2][1] * Y + minv[2][2] * Z;
                    r = srgb_oetf(std::max(rl, 0.0));
                    g = srgb_oetf(std::max(gl, 0.0));
                    b = srgb_oetf(std::max(bl, 0.0));
                    break;
                }
                case ColorTarget::YUV: {
                    const double y = src[cc][0], u = src[cc][1], v = src[cc][2];
                    r = y + v * (1.0 - kYuvR) / 0.5;
                    b = y + u * (1.0 - kYuvB) / 0.5;
                    g = (y - kYuvR * r - kYuvB * b) / kYuvG;
                    break;
                }
                default:
                    throw Error(ErrorClass::Config, "unsupported color target");
            }
            dst[cc] = cv::Vec3f(static_cast<float>(r), static_cast<float>(g),
                                static_cast<float>(b));
        }
    }
    clip01(out.pixels);
    return out;
}

cv::Mat luma709(const cv::Mat& rgb) {
    CV_Assert(rgb.type() == CV_32FC3);
    cv::Mat out(rgb.rows, rgb.cols, CV_32F);
    for (int r = 0; r < rgb.rows; ++r) {
        const cv::Vec3f* src = rgb.ptr<cv::Vec3f>(r);
        float* dst = out.ptr<float>(r);
        for (int c = 0; c < rgb.cols; ++c)
            dst[c] = static_cast<float>(kLumaR * src[c][0] + kLumaG * src[c][1] +
                                        kLumaB * src[c][2]);
    }
    return out;
}

}  // namespace disque
