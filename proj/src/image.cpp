#include "disque/image.hpp"

#include <cmath>
#include <random>

#include "disque/color.hpp"

namespace disque {

const char* to_string(Colorspace cs) {
    switch (cs) {
        case Colorspace::SRGB: return "srgb";
        case Colorspace::PQ_BT2100: return "pq";
        case Colorspace::LINEAR: return "linear";
    }
    return "?";
}

Colorspace colorspace_from_string(const std::string& s) {
    if (s == "srgb") return Colorspace::SRGB;
    if (s == "pq") return Colorspace::PQ_BT2100;
    if (s == "linear") return Colorspace::LINEAR;
    throw Error(ErrorClass::Data, "unknown colorspace: " + s);
}

Image Image::constant(int rows, int cols, cv::Vec3f rgb, Colorspace cs) {
    Image out;
    out.pixels = cv::Mat(rows, cols, CV_32FC3, cv::Scalar(rgb[0], rgb[1], rgb[2]));
    out.colorspace = cs;
    return out;
}

void clip01(cv::Mat& m) {
    CV_Assert(m.depth() == CV_32F);
    for (int r = 0; r < m.rows; ++r) {
        float* p = m.ptr<float>(r);
        const int n = m.cols * m.channels();
        for (int i = 0; i < n; ++i) {
            float v = p[i];
            if (!std::isfinite(v)) v = 0.0f;
            p[i] = std::min(1.0f, std::max(0.0f, v));
        }
    }
}

void validate_image(const Image& img) {
    if (img.pixels.empty() || img.rows() < 1 || img.cols() < 1)
        throw Error(ErrorClass::Data, "image is empty");
    if (img.pixels.type() != CV_32FC3)
        throw Error(ErrorClass::Data, "image must be CV_32FC3");
    for (int r = 0; r < img.rows(); ++r) {
        const float* p = img.pixels.ptr<float>(r);
        for (int i = 0; i < img.cols() * 3; ++i) {
            if (!std::isfinite(p[i]) || p[i] < 0.0f || p[i] > 1.0f)
                throw Error(ErrorClass::Data, "pixel out of [0,1]");
        }
    }
}

Patch sample_patch(const Image& img, int patch_size, std::uint64_t rng_seed,
                   const std::string& source_id) {
    if (patch_size < 1) throw Error(ErrorClass::Config, "patch_size must be >= 1");
    if (img.rows() < patch_size || img.cols() < patch_size)
        throw Error(ErrorClass::Data, "image smaller than patch_size");
    std::mt19937_64 rng(rng_seed);
    std::uniform_int_distribution<int> row_d(0, img.rows() - patch_size);
    std::uniform_int_distribution<int> col_d(0, img.cols() - patch_size);
    const int r = row_d(rng);
    const int c = col_d(rng);
    Patch p;
    p.image.pixels = img.pixels(cv::Rect(c, r, patch_size, patch_size)).clone();
    p.image.colorspace = img.colorspace;
    p.image.bit_origin = img.bit_origin;
    p.source_id = source_id;
    p.row = r;
    p.col = c;
    return p;
}

ScreeningReport screen_image(const Image& img, double theta_over, double theta_under,
                             double sat_threshold) {
    ScreeningReport rep;
    const cv::Mat hsv = color_convert(img, ColorTarget::HSV);
    double sat_sum = 0.0;
    for (int r = 0; r < hsv.rows; ++r) {
        const cv::Vec3f* p = hsv.ptr<cv::Vec3f>(r);
        for (int c = 0; c < hsv.cols; ++c) sat_sum += p[c][1];
    }
    const double n = static_cast<double>(hsv.rows) * hsv.cols;
    rep.is_grayscale = (sat_sum / n) < sat_threshold;

    const Image lin = srgb_to_linear(img);
    const cv::Mat luma = luma709(lin.pixels);
    std::int64_t over = 0, under = 0;
    for (int r = 0; r < luma.rows; ++r) {
        const float* p = luma.ptr<float>(r);
        for (int c = 0; c < luma.cols; ++c) {
            if (p[c] > 0.98f) ++over;
            if (p[c] < 0.02f) ++under;
        }
    }
    rep.overexposed_fraction = over / n;
    rep.underexposed_fraction = under / n;
    rep.accepted = !rep.is_grayscale && rep.overexposed_fraction <= theta_over &&
                   rep.underexposed_fraction <= theta_under;
    return rep;
}

}  // namespace disque
