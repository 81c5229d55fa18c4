#include "disque/image_io.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace disque {

Image load_image(const std::string& path, Colorspace colorspace) {
    cv::Mat raw = cv::imread(path, cv::IMREAD_UNCHANGED);
    if (raw.empty()) throw Error(ErrorClass::Data, "cannot decode image: " + path);
    if (raw.channels() == 1) cv::cvtColor(raw, raw, cv::COLOR_GRAY2BGR);
    if (raw.channels() == 4) cv::cvtColor(raw, raw, cv::COLOR_BGRA2BGR);

    Image img;
    img.colorspace = colorspace;
    cv::Mat rgb;
    cv::cvtColor(raw, rgb, cv::COLOR_BGR2RGB);
    if (rgb.depth() == CV_8U) {
        rgb.convertTo(img.pixels, CV_32FC3, 1.0 / 255.0);
        img.bit_origin = BitOrigin::EIGHT_BIT;
    } else if (rgb.depth() == CV_16U) {
        // 10-bit codes left-aligned in 16-bit samples.
        img.pixels = cv::Mat(rgb.rows, rgb.cols, CV_32FC3);
        for (int r = 0; r < rgb.rows; ++r) {
            const cv::Vec3w* src = rgb.ptr<cv::Vec3w>(r);
            cv::Vec3f* dst = img.pixels.ptr<cv::Vec3f>(r);
            for (int c = 0; c < rgb.cols; ++c)
                for (int k = 0; k < 3; ++k)
                    dst[c][k] = static_cast<float>((src[c][k] >> 6) / 1023.0);
        }
        img.bit_origin = BitOrigin::TEN_BIT;
    } else {
        throw Error(ErrorClass::Data, "unsupported bit depth in " + path);
    }
    clip01(img.pixels);
    return img;
}

void save_png8(const std::string& path, const Image& img) {
    cv::Mat u8, bgr;
    img.pixels.convertTo(u8, CV_8UC3, 255.0);
    cv::cvtColor(u8, bgr, cv::COLOR_RGB2BGR);
    if (!cv::imwrite(path, bgr)) throw Error(ErrorClass::Data, "cannot write " + path);
}

void save_png16_pq(const std::string& path, const Image& img) {
    cv::Mat u16(img.rows(), img.cols(), CV_16UC3);
    for (int r = 0; r < img.rows(); ++r) {
        const cv::Vec3f* src = img.pixels.ptr<cv::Vec3f>(r);
        cv::Vec3w* dst = u16.ptr<cv::Vec3w>(r);
        for (int c = 0; c < img.cols(); ++c)
            for (int k = 0; k < 3; ++k) {
                const int code = static_cast<int>(std::lround(src[c][k] * 1023.0));
                dst[c][k] = static_cast<ushort>(std::min(1023, std::max(0, code)) << 6);
            }
    }
    cv::Mat bgr;
    cv::cvtColor(u16, bgr, cv::COLOR_RGB2BGR);
    if (!cv::imwrite(path, bgr)) throw Error(ErrorClass::Data, "cannot write " + path);
}

Image jpeg_roundtrip(const Image& img, int quality) {
    if (quality < 1 || quality > 100)
        throw Error(ErrorClass::Config, "jpeg quality out of range");
    cv::Mat u8, bgr;
    img.pixels.convertTo(u8, CV_8UC3, 255.0);
    cv::cvtColor(u8, bgr, cv::COLOR_RGB2BGR);
    std::vector<uchar> buf;
    if (!cv::imencode(".jpg", bgr, buf, {cv::IMWRITE_JPEG_QUALITY, quality}))
        throw Error(ErrorClass::Numeric, "jpeg encode failed");
    cv::Mat dec = cv::imdecode(buf, cv::IMREAD_COLOR);
    cv::Mat rgb;
    cv::cvtColor(dec, rgb, cv::COLOR_BGR2RGB);
    Image out;
    rgb.convertTo(out.pixels, CV_32FC3, 1.0 / 255.0);
    out.colorspace = img.colorspace;
    out.bit_origin = img.bit_origin;
    clip01(out.pixels);
    return out;
}

}  // namespace disque
