#include "disque/distortion.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <opencv2/imgproc.hpp>

#include "disque/color.hpp"
#include "disque/image_io.hpp"

namespace disque {

namespace {

struct KindInfo {
    DistortionKind kind;
    const char* name;
    std::array<double, 5> ladder;
    bool stochastic;
};

// One row per kind: the primary strength ladder and whether noise_seed matters.
// Resize factors are downscale ratios; blur ladders are sigmas or radii;
// noise ladders are standard deviations on the [0,1] scale.
constexpr KindInfo kKinds[kNumDistortionKinds] = {
    {DistortionKind::NNResize,       "NNResize",       {1 / 1.25, 1 / 1.5, 1 / 2.0, 1 / 3.0, 1 / 4.0}, false},
    {DistortionKind::BilinearResize, "BilinearResize", {1 / 1.25, 1 / 1.5, 1 / 2.0, 1 / 3.0, 1 / 4.0}, false},
    {DistortionKind::BicubicResize,  "BicubicResize",  {1 / 1.25, 1 / 1.5, 1 / 2.0, 1 / 3.0, 1 / 4.0}, false},
    {DistortionKind::LanczosResize,  "LanczosResize",  {1 / 1.25, 1 / 1.5, 1 / 2.0, 1 / 3.0, 1 / 4.0}, false},
    {DistortionKind::MotionBlur,     "MotionBlur",     {3, 5, 9, 13, 17}, true},
    {DistortionKind::GaussianBlur,   "GaussianBlur",   {0.5, 1.0, 2.0, 3.5, 5.0}, false},
    {DistortionKind::LensBlur,       "LensBlur",       {1, 2, 3, 5, 7}, false},
    {DistortionKind::MeanShift,      "MeanShift",      {0.02, 0.05, 0.08, 0.12, 0.16}, false},
    {DistortionKind::Contrast,       "Contrast",       {1.5, 2.5, 4.0, 6.0, 9.0}, false},
    {DistortionKind::Compress,       "Compress",       {75, 50, 35, 20, 10}, false},
    {DistortionKind::UnsharpMasking, "UnsharpMasking", {0.5, 1.0, 2.0, 3.0, 4.0}, false},
    {DistortionKind::ColorBlock,     "ColorBlock",     {2, 4, 6, 8, 10}, true},
    {DistortionKind::Jitter,         "Jitter",         {1, 2, 3, 4, 5}, true},
    {DistortionKind::PatchJitter,    "PatchJitter",    {4, 8, 16, 24, 32}, true},
    {DistortionKind::RGBNoise,       "RGBNoise",       {0.01, 0.02, 0.035, 0.06, 0.10}, true},
    {DistortionKind::YUVNoise,       "YUVNoise",       {0.01, 0.02, 0.035, 0.06, 0.10}, true},
    {DistortionKind::ImpulseNoise,   "ImpulseNoise",   {0.005, 0.01, 0.02, 0.04, 0.08}, true},
    {DistortionKind::SpeckleNoise,   "SpeckleNoise",   {0.05, 0.10, 0.175, 0.25, 0.35}, true},
    {DistortionKind::Denoise,        "Denoise",        {0.02, 0.04, 0.06, 0.09, 0.12}, true},
    {DistortionKind::Brighten,       "Brighten",       {1.25, 1.5, 1.8, 2.2, 2.7}, false},
    {DistortionKind::Darken,         "Darken",         {1.25, 1.5, 1.8, 2.2, 2.7}, false},
    {DistortionKind::ColorDiffuse,   "ColorDiffuse",   {1, 2, 4, 6, 9}, false},
    {DistortionKind::ColorShift,     "ColorShift",     {1, 2, 3, 5, 8}, false},
    {DistortionKind::HSVSaturate,    "HSVSaturate",    {0.8, 0.6, 0.4, 0.25, 0.1}, false},
    {DistortionKind::LABSaturate,    "LABSaturate",    {0.8, 0.6, 0.4, 0.25, 0.1}, false},
};

const KindInfo& info(DistortionKind kind) {
    for (const auto& k : kKinds)
        if (k.kind == kind) return k;
    throw Error(ErrorClass::Config, "unknown distortion kind");
}

double ladder_value(const UnitDistortion& d) {
    if (d.severity < 1 || d.severity > 5)
        throw Error(ErrorClass::Config, "severity must be in 1..5");
    return info(d.kind).ladder[d.severity - 1];
}

cv::Mat blur_constant_border(const cv::Mat& src, const cv::Mat& kernel) {
    cv::Mat out;
    cv::filter2D(src, out, -1, kernel, cv::Point(-1, -1), 0, cv::BORDER_REPLICATE);
    return out;
}

cv::Mat gaussian(const cv::Mat& src, double sigma) {
    const int k = 2 * static_cast<int>(std::ceil(3.0 * sigma)) + 1;
    cv::Mat out;
    cv::GaussianBlur(src, out, cv::Size(k, k), sigma, sigma, cv::BORDER_REPLICATE);
    return out;
}

Image downscale_upscale(const Image& img, double factor, int up_interp) {
    const int h = std::max(1, static_cast<int>(std::lround(img.rows() * factor)));
    const int w = std::max(1, static_cast<int>(std::lround(img.cols() * factor)));
    cv::Mat small, back;
    cv::resize(img.pixels, small, cv::Size(w, h), 0, 0, cv::INTER_AREA);
    cv::resize(small, back, cv::Size(img.cols(), img.rows()), 0, 0, up_interp);
    Image out{back, img.colorspace, img.bit_origin};
    clip01(out.pixels);
    return out;
}

cv::Mat disk_kernel(int radius) {
    const int k = 2 * radius + 1;
    cv::Mat ker = cv::Mat::zeros(k, k, CV_32F);
    double sum = 0.0;
    for (int r = 0; r < k; ++r)
        for (int c = 0; c < k; ++c) {
            const double dr = r - radius, dc = c - radius;
            if (dr * dr + dc * dc <= radius * radius + 0.25) {
                ker.at<float>(r, c) = 1.0f;
                sum += 1.0;
            }
        }
    ker /= sum;
    return ker;
}

cv::Mat line_kernel(int length, double angle_rad) {
    const int half = length / 2;
    const int k = 2 * half + 1;
    cv::Mat ker = cv::Mat::zeros(k, k, CV_32F);
    const double dx = std::cos(angle_rad), dy = std::sin(angle_rad);
    for (int i = -half; i <= half; ++i) {
        const int r = half + static_cast<int>(std::lround(i * dy));
        const int c = half + static_cast<int>(std::lround(i * dx));
        ker.at<float>(std::clamp(r, 0, k - 1), std::clamp(c, 0, k - 1)) = 1.0f;
    }
    ker /= cv::sum(ker)[0];
    return ker;
}

Image add_noise_rgb(const Image& img, double sigma, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, sigma);
    Image out = img.clone();
    for (int r = 0; r < out.rows(); ++r) {
        float* p = out.pixels.ptr<float>(r);
        for (int i = 0; i < out.cols() * 3; ++i) p[i] += static_cast<float>(nd(rng));
    }
    clip01(out.pixels);
    return out;
}

// Sigmoid contrast, renormalized so [0,1] maps onto [0,1].
Image sigmoid_contrast(const Image& img, double gain) {
    auto f = [gain](double x) { return 1.0 / (1.0 + std::exp(-gain * (x - 0.5))); };
    const double lo = f(0.0), hi = f(1.0);
    Image out = img.clone();
    for (int r = 0; r < out.rows(); ++r) {
        float* p = out.pixels.ptr<float>(r);
        for (int i = 0; i < out.cols() * 3; ++i)
            p[i] = static_cast<float>((f(p[i]) - lo) / (hi - lo));
    }
    clip01(out.pixels);
    return out;
}

Image gamma_curve(const Image& img, double exponent) {
    Image out = img.clone();
    for (int r = 0; r < out.rows(); ++r) {
        float* p = out.pixels.ptr<float>(r);
        for (int i = 0; i < out.cols() * 3; ++i)
            p[i] = static_cast<float>(std::pow(std::max(0.0f, p[i]), exponent));
    }
    clip01(out.pixels);
    return out;
}

}  // namespace

const char* to_string(DistortionKind kind) { return info(kind).name; }

DistortionKind distortion_kind_from_string(const std::string& s) {
    for (const auto& k : kKinds)
        if (s == k.name) return k.kind;
    throw Error(ErrorClass::Config, "unknown distortion kind: " + s);
}

bool is_stochastic(DistortionKind kind) { return info(kind).stochastic; }

std::array<double, 5> severity_table(DistortionKind kind) { return info(kind).ladder; }

Image apply_unit(const Image& img, const UnitDistortion& d) {
    validate_image(img);
    const double v = ladder_value(d);
    switch (d.kind) {
        case DistortionKind::NNResize:
            return downscale_upscale(img, v, cv::INTER_NEAREST);
        case DistortionKind::BilinearResize:
            return downscale_upscale(img, v, cv::INTER_LINEAR);
        case DistortionKind::BicubicResize:
            return downscale_upscale(img, v, cv::INTER_CUBIC);
        case DistortionKind::LanczosResize:
            return downscale_upscale(img, v, cv::INTER_LANCZOS4);

        case DistortionKind::MotionBlur: {
            std::mt19937_64 rng(d.noise_seed);
            std::uniform_real_distribution<double> ad(0.0, CV_PI);
            const cv::Mat ker = line_kernel(static_cast<int>(v), ad(rng));
            Image out{blur_constant_border(img.pixels, ker), img.colorspace, img.bit_origin};
            clip01(out.pixels);
            return out;
        }
        case DistortionKind::GaussianBlur: {
            Image out{gaussian(img.pixels, v), img.colorspace, img.bit_origin};
            clip01(out.pixels);
            return out;
        }
        case DistortionKind::LensBlur: {
            const cv::Mat ker = disk_kernel(static_cast<int>(v));
            Image out{blur_constant_border(img.pixels, ker), img.colorspace, img.bit_origin};
            clip01(out.pixels);
            return out;
        }

        case DistortionKind::MeanShift: {
            Image out = img.clone();
            out.pixels += cv::Scalar(v, v, v);
            clip01(out.pixels);
            return out;
        }
        case DistortionKind::Contrast:
            return sigmoid_contrast(img, v);
        case DistortionKind::Compress:
            return jpeg_roundtrip(img, static_cast<int>(v));
        case DistortionKind::UnsharpMasking: {
            const cv::Mat blurred = gaussian(img.pixels, 2.0);
            cv::Mat sharp = img.pixels + v * (img.pixels - blurred);
            Image out{sharp, img.colorspace, img.bit_origin};
            clip01(out.pixels);
            return out;
        }

        case DistortionKind::ColorBlock: {
            std::mt19937_64 rng(d.noise_seed);
            Image out = img.clone();
            const int side = std::min({32, out.rows(), out.cols()});
            std::uniform_int_distribution<int> rd(0, out.rows() - side);
            std::uniform_int_distribution<int> cd(0, out.cols() - side);
            std::uniform_real_distribution<float> col(0.0f, 1.0f);
            for (int i = 0; i < static_cast<int>(v); ++i) {
                const int r = rd(rng), c = cd(rng);
                const cv::Scalar color(col(rng), col(rng), col(rng));
                out.pixels(cv::Rect(c, r, side, side)).setTo(color);
            }
            return out;
        }
        case DistortionKind::Jitter: {
            std::mt19937_64 rng(d.noise_seed);
            const int s = static_cast<int>(v);
            std::uniform_int_distribution<int> od(-s, s);
            cv::Mat mapx(img.rows(), img.cols(), CV_32F);
            cv::Mat mapy(img.rows(), img.cols(), CV_32F);
            for (int r = 0; r < img.rows(); ++r)
                for (int c = 0; c < img.cols(); ++c) {
                    mapx.at<float>(r, c) =
                        static_cast<float>(std::clamp(c + od(rng), 0, img.cols() - 1));
                    mapy.at<float>(r, c) =
                        static_cast<float>(std::clamp(r + od(rng), 0, img.rows() - 1));
                }
            cv::Mat warped;
            cv::remap(img.pixels, warped, mapx, mapy, cv::INTER_NEAREST);
            return {warped, img.colorspace, img.bit_origin};
        }
        case DistortionKind::PatchJitter: {
            std::mt19937_64 rng(d.noise_seed);
            Image out = img.clone();
            const int side = std::min({16, out.rows(), out.cols()});
            const int max_off = side / 2;
            std::uniform_int_distribution<int> rd(0, out.rows() - side);
            std::uniform_int_distribution<int> cd(0, out.cols() - side);
            std::uniform_int_distribution<int> od(-max_off, max_off);
            for (int i = 0; i < static_cast<int>(v); ++i) {
                const int r = rd(rng), c = cd(rng);
                const int sr = std::clamp(r + od(rng), 0, out.rows() - side);
                const int sc = std::clamp(c + od(rng), 0, out.cols() - side);
                img.pixels(cv::Rect(sc, sr, side, side))
                    .copyTo(out.pixels(cv::Rect(c, r, side, side)));
            }
            return out;
        }

        case DistortionKind::RGBNoise:
            return add_noise_rgb(img, v, d.noise_seed);
        case DistortionKind::YUVNoise: {
            cv::Mat yuv = color_convert(img, ColorTarget::YUV);
            std::mt19937_64 rng(d.noise_seed);
            std::normal_distribution<double> nd(0.0, v);
            for (int r = 0; r < yuv.rows; ++r) {
                float* p = yuv.ptr<float>(r);
                for (int i = 0; i < yuv.cols * 3; ++i) p[i] += static_cast<float>(nd(rng));
            }
            return color_convert_back(yuv, ColorTarget::YUV);
        }
        case DistortionKind::ImpulseNoise: {
            std::mt19937_64 rng(d.noise_seed);
            std::uniform_real_distribution<double> ud(0.0, 1.0);
            Image out = img.clone();
            for (int r = 0; r < out.rows(); ++r) {
                cv::Vec3f* p = out.pixels.ptr<cv::Vec3f>(r);
                for (int c = 0; c < out.cols(); ++c) {
                    const double roll = ud(rng);
                    if (roll < v / 2.0)
                        p[c] = cv::Vec3f(0, 0, 0);
                    else if (roll < v)
                        p[c] = cv::Vec3f(1, 1, 1);
                }
            }
            return out;
        }
        case DistortionKind::SpeckleNoise: {
            std::mt19937_64 rng(d.noise_seed);
            std::normal_distribution<double> nd(0.0, v);
            Image out = img.clone();
            for (int r = 0; r < out.rows(); ++r) {
                float* p = out.pixels.ptr<float>(r);
                for (int i = 0; i < out.cols() * 3; ++i)
                    p[i] *= static_cast<float>(1.0 + nd(rng));
            }
            clip01(out.pixels);
            return out;
        }
        case DistortionKind::Denoise: {
            // Noise then a blur sized to roughly cancel it, per the bank recipe.
            Image noisy = add_noise_rgb(img, v, d.noise_seed);
            const double blur_sigma = 0.6 + 10.0 * v;
            Image out{gaussian(noisy.pixels, blur_sigma), img.colorspace, img.bit_origin};
            clip01(out.pixels);
            return out;
        }

        case DistortionKind::Brighten:
            return gamma_curve(img, 1.0 / v);
        case DistortionKind::Darken:
            return gamma_curve(img, v);

        case DistortionKind::ColorDiffuse: {
            cv::Mat lab = color_convert(img, ColorTarget::CIELAB);
            std::vector<cv::Mat> ch;
            cv::split(lab, ch);
            ch[1] = gaussian(ch[1], v);
            ch[2] = gaussian(ch[2], v);
            cv::merge(ch, lab);
            return color_convert_back(lab, ColorTarget::CIELAB);
        }
        case DistortionKind::ColorShift: {
            const int s = static_cast<int>(v);
            if (img.rows() <= s || img.cols() <= s)
                throw Error(ErrorClass::Data, "image too small for ColorShift");
            Image out = img.clone();
            std::vector<cv::Mat> ch;
            cv::split(img.pixels, ch);
            cv::Mat shifted;
            const cv::Mat m = (cv::Mat_<double>(2, 3) << 1, 0, s, 0, 1, s);
            cv::warpAffine(ch[0], shifted, m, ch[0].size(), cv::INTER_NEAREST,
                           cv::BORDER_REPLICATE);
            std::vector<cv::Mat> merged{shifted, ch[1], ch[2]};
            cv::merge(merged, out.pixels);
            return out;
        }
        case DistortionKind::HSVSaturate: {
            cv::Mat hsv = color_convert(img, ColorTarget::HSV);
            for (int r = 0; r < hsv.rows; ++r) {
                cv::Vec3f* p = hsv.ptr<cv::Vec3f>(r);
                for (int c = 0; c < hsv.cols; ++c)
                    p[c][1] = std::min(1.0f, static_cast<float>(p[c][1] * v));
            }
            return color_convert_back(hsv, ColorTarget::HSV);
        }
        case DistortionKind::LABSaturate: {
            cv::Mat lab = color_convert(img, ColorTarget::CIELAB);
            for (int r = 0; r < lab.rows; ++r) {
                cv::Vec3f* p = lab.ptr<cv::Vec3f>(r);
                for (int c = 0; c < lab.cols; ++c) {
                    p[c][1] = static_cast<float>(p[c][1] * v);
                    p[c][2] = static_cast<float>(p[c][2] * v);
                }
            }
            return color_convert_back(lab, ColorTarget::CIELAB);
        }
    }
    throw Error(ErrorClass::Config, "unknown distortion kind");
}

Image apply_transform(const Image& img, const TransformSpec& spec) {
    if (spec.units.empty() || spec.units.size() > 3)
        throw Error(ErrorClass::Config, "TransformSpec must hold 1..3 units");
    Image out = img.clone();
    for (const auto& u : spec.units) out = apply_unit(out, u);
    return out;
}

std::string TransformSpec::serialize() const {
    std::ostringstream os;
    for (size_t i = 0; i < units.size(); ++i) {
        if (i) os << '+';
        os << to_string(units[i].kind) << ':' << units[i].severity << ':'
           << units[i].noise_seed;
    }
    return os.str();
}

TransformSpec TransformSpec::parse(const std::string& text) {
    TransformSpec spec;
    size_t pos = 0;
    while (pos <= text.size()) {
        const size_t end = std::min(text.find('+', pos), text.size());
        const std::string unit_text = text.substr(pos, end - pos);
        const size_t c1 = unit_text.find(':');
        const size_t c2 = c1 == std::string::npos ? std::string::npos
                                                  : unit_text.find(':', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw Error(ErrorClass::Config,
                        "malformed transform spec at offset " + std::to_string(pos) +
                            ": expected kind:severity:seed, got '" + unit_text + "'");
        UnitDistortion u;
        u.kind = distortion_kind_from_string(unit_text.substr(0, c1));
        try {
            u.severity = std::stoi(unit_text.substr(c1 + 1, c2 - c1 - 1));
            u.noise_seed = std::stoull(unit_text.substr(c2 + 1));
        } catch (const std::exception&) {
            throw Error(ErrorClass::Config, "malformed transform spec at offset " +
                                                std::to_string(pos) + ": bad number in '" +
                                                unit_text + "'");
        }
        if (u.severity < 1 || u.severity > 5)
            throw Error(ErrorClass::Config, "severity out of 1..5 in '" + unit_text + "'");
        spec.units.push_back(u);
        if (end == text.size()) break;
        pos = end + 1;
    }
    if (spec.units.empty() || spec.units.size() > 3)
        throw Error(ErrorClass::Config, "TransformSpec must hold 1..3 units");
    return spec;
}

TransformSpec sample_transform(std::uint64_t rng_seed,
                               const std::vector<DistortionKind>& kinds, int max_depth) {
    if (kinds.empty()) throw Error(ErrorClass::Config, "empty kind pool");
    std::mt19937_64 rng(rng_seed);
    const int depth_cap = std::min<int>(max_depth, static_cast<int>(kinds.size()));
    std::uniform_int_distribution<int> dd(1, depth_cap);
    const int depth = dd(rng);

    // Kinds without replacement.
    std::vector<DistortionKind> pool = kinds;
    TransformSpec spec;
    std::uniform_int_distribution<int> sd(1, 5);
    for (int i = 0; i < depth; ++i) {
        std::uniform_int_distribution<size_t> kd(0, pool.size() - 1);
        const size_t pick = kd(rng);
        UnitDistortion u;
        u.kind = pool[pick];
        pool.erase(pool.begin() + pick);
        u.severity = sd(rng);
        u.noise_seed = rng();
        spec.units.push_back(u);
    }
    return spec;
}

TransformSpec sample_transform(std::uint64_t rng_seed) {
    std::vector<DistortionKind> all;
    all.reserve(kNumDistortionKinds);
    for (const auto& k : {
             DistortionKind::NNResize, DistortionKind::BilinearResize,
             DistortionKind::BicubicResize, DistortionKind::LanczosResize,
             DistortionKind::MotionBlur, DistortionKind::GaussianBlur,
             DistortionKind::LensBlur, DistortionKind::MeanShift,
             DistortionKind::Contrast, DistortionKind::Compress,
             DistortionKind::UnsharpMasking, DistortionKind::ColorBlock,
             DistortionKind::Jitter, DistortionKind::PatchJitter,
             DistortionKind::RGBNoise, DistortionKind::YUVNoise,
             DistortionKind::ImpulseNoise, DistortionKind::SpeckleNoise,
             DistortionKind::Denoise, DistortionKind::Brighten, DistortionKind::Darken,
             DistortionKind::ColorDiffuse, DistortionKind::ColorShift,
             DistortionKind::HSVSaturate, DistortionKind::LABSaturate})
        all.push_back(k);
    return sample_transform(rng_seed, all, 3);
}

}  // namespace disque
