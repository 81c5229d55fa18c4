#include "disque/synth.hpp"

#include <filesystem>
#include <random>

#include <opencv2/imgproc.hpp>

#include "disque/color.hpp"
#include "disque/image_io.hpp"

namespace disque {

namespace {

cv::Vec3f random_saturated_color(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> hd(0.0, 1.0);
    std::uniform_real_distribution<double> sd(0.55, 0.95);
    std::uniform_real_distribution<double> vd(0.35, 0.8);
    cv::Mat hsv(1, 1, CV_32FC3, cv::Scalar(hd(rng), sd(rng), vd(rng)));
    Image rgb = color_convert_back(hsv, ColorTarget::HSV);
    return rgb.pixels.at<cv::Vec3f>(0, 0);
}

}  // namespace

Image synth_image(int rows, int cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ud(0.0, 1.0);

    // Diagonal two-color gradient background.
    const cv::Vec3f c0 = random_saturated_color(rng);
    const cv::Vec3f c1 = random_saturated_color(rng);
    const double gx = ud(rng), gy = 1.0 - gx;
    Image img;
    img.pixels = cv::Mat(rows, cols, CV_32FC3);
    for (int r = 0; r < rows; ++r) {
        cv::Vec3f* p = img.pixels.ptr<cv::Vec3f>(r);
        for (int c = 0; c < cols; ++c) {
            const double t = (gx * c / std::max(1, cols - 1) + gy * r / std::max(1, rows - 1));
            p[c] = c0 * static_cast<float>(1.0 - t) + c1 * static_cast<float>(t);
        }
    }

    // Random filled ellipses and rectangles.
    std::uniform_int_distribution<int> nshapes(6, 12);
    std::uniform_int_distribution<int> rx(0, cols - 1), ry(0, rows - 1);
    std::uniform_int_distribution<int> axis(std::max(2, cols / 16), std::max(3, cols / 3));
    std::uniform_int_distribution<int> ang(0, 179);
    const int n = nshapes(rng);
    for (int i = 0; i < n; ++i) {
        const cv::Vec3f col = random_saturated_color(rng);
        const cv::Scalar color(col[0], col[1], col[2]);
        if (ud(rng) < 0.6) {
            cv::ellipse(img.pixels, cv::Point(rx(rng), ry(rng)),
                        cv::Size(axis(rng), axis(rng)), ang(rng), 0, 360, color,
                        cv::FILLED, cv::LINE_8);
        } else {
            const cv::Point a(rx(rng), ry(rng));
            const cv::Point b(rx(rng), ry(rng));
            cv::rectangle(img.pixels, a, b, color, cv::FILLED);
        }
    }

    // Mild texture noise, then a soft blur.
    std::normal_distribution<double> nd(0.0, 0.03);
    for (int r = 0; r < rows; ++r) {
        float* p = img.pixels.ptr<float>(r);
        for (int i = 0; i < cols * 3; ++i) p[i] += static_cast<float>(nd(rng));
    }
    cv::GaussianBlur(img.pixels, img.pixels, cv::Size(3, 3), 0.6, 0.6,
                     cv::BORDER_REPLICATE);
    clip01(img.pixels);
    img.colorspace = Colorspace::SRGB;
    return img;
}

Image synth_color_cast(int rows, int cols, std::uint64_t seed, double hue) {
    Image base = synth_image(rows, cols, seed);
    cv::Mat hsv = color_convert(base, ColorTarget::HSV);
    std::mt19937_64 rng(seed ^ 0xc01dcafeULL);
    std::normal_distribution<double> jitter(0.0, 0.02);
    for (int r = 0; r < hsv.rows; ++r) {
        cv::Vec3f* p = hsv.ptr<cv::Vec3f>(r);
        for (int c = 0; c < hsv.cols; ++c) {
            double h = hue + jitter(rng);
            h -= std::floor(h);
            p[c][0] = static_cast<float>(h);
            p[c][1] = std::min(1.0f, p[c][1] * 1.4f + 0.25f);
        }
    }
    return color_convert_back(hsv, ColorTarget::HSV);
}

std::vector<Image> synth_corpus(int count, int rows, int cols, std::uint64_t seed) {
    std::vector<Image> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i)
        out.push_back(synth_image(rows, cols, seed + 1000003ULL * i));
    return out;
}

std::string write_synth_corpus(const std::string& dir, int count, int rows, int cols,
                               std::uint64_t seed) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    Manifest manifest;
    for (int i = 0; i < count; ++i) {
        const Image img = synth_image(rows, cols, seed + 1000003ULL * i);
        const std::string path =
            (fs::path(dir) / ("synth_" + std::to_string(i) + ".png")).string();
        save_png8(path, img);
        manifest.entries.push_back({path, Colorspace::SRGB, "train"});
    }
    const std::string mpath = (fs::path(dir) / "manifest.jsonl").string();
    manifest.save(mpath);
    return mpath;
}

}  // namespace disque
