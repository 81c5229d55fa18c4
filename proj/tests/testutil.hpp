#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "disque/image.hpp"
#include "disque/synth.hpp"

namespace testutil {

// Scratch directory under the build tree, wiped per construction.
class TempDir {
public:
    explicit TempDir(const std::string& name) {
        path_ = std::filesystem::temp_directory_path() / ("disque_test_" + name);
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    std::string str() const { return path_.string(); }
    std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

private:
    std::filesystem::path path_;
};

inline double max_abs_diff(const cv::Mat& a, const cv::Mat& b) {
    CV_Assert(a.size() == b.size() && a.type() == b.type());
    double worst = 0.0;
    for (int r = 0; r < a.rows; ++r) {
        const float* pa = a.ptr<float>(r);
        const float* pb = b.ptr<float>(r);
        for (int i = 0; i < a.cols * a.channels(); ++i)
            worst = std::max(worst, static_cast<double>(std::abs(pa[i] - pb[i])));
    }
    return worst;
}

inline double mse(const cv::Mat& a, const cv::Mat& b) {
    CV_Assert(a.size() == b.size() && a.type() == b.type());
    double sum = 0.0;
    for (int r = 0; r < a.rows; ++r) {
        const float* pa = a.ptr<float>(r);
        const float* pb = b.ptr<float>(r);
        for (int i = 0; i < a.cols * a.channels(); ++i) {
            const double d = pa[i] - pb[i];
            sum += d * d;
        }
    }
    return sum / (static_cast<double>(a.rows) * a.cols * a.channels());
}

inline bool bytes_equal(const cv::Mat& a, const cv::Mat& b) {
    if (a.size() != b.size() || a.type() != b.type()) return false;
    for (int r = 0; r < a.rows; ++r)
        if (std::memcmp(a.ptr(r), b.ptr(r), a.cols * a.elemSize()) != 0) return false;
    return true;
}

}  // namespace testutil
