#include <doctest.h>

#include <random>

#include "disque/color.hpp"
#include "disque/image.hpp"
#include "disque/image_io.hpp"
#include "disque/synth.hpp"
#include "testutil.hpp"

using namespace disque;

TEST_SUITE("pixelcore") {

TEST_CASE("srgb transfer function fixed points and midpoint") {
    CHECK(srgb_eotf(0.0) == doctest::Approx(0.0));
    CHECK(srgb_eotf(1.0) == doctest::Approx(1.0));
    // arbitrary-precision evaluation of the piecewise sRGB EOTF at 0.5
    CHECK(srgb_eotf(0.5) == doctest::Approx(0.21404114048223244).epsilon(1e-12));
    CHECK(srgb_oetf(srgb_eotf(0.37)) == doctest::Approx(0.37).epsilon(1e-10));
}

TEST_CASE("srgb_to_linear image path and colorspace tags") {
    Image img = Image::constant(4, 4, {0.5f, 0.0f, 1.0f});
    Image lin = srgb_to_linear(img);
    CHECK(lin.colorspace == Colorspace::LINEAR);
    const cv::Vec3f px = lin.pixels.at<cv::Vec3f>(1, 1);
    CHECK(px[0] == doctest::Approx(0.2140411).epsilon(1e-5));
    CHECK(px[1] == doctest::Approx(0.0));
    CHECK(px[2] == doctest::Approx(1.0));

    Image wrong = Image::constant(2, 2, {0.5f, 0.5f, 0.5f}, Colorspace::LINEAR);
    CHECK_THROWS_AS(srgb_to_linear(wrong), Error);
}

TEST_CASE("pq transfer function") {
    CHECK(pq_eotf(0.0) == doctest::Approx(0.0));
    // ST 2084 full-scale code is 10000 nits by definition
    Image full = Image::constant(2, 2, {1.0f, 1.0f, 1.0f}, Colorspace::PQ_BT2100);
    Image lin = pq_to_linear(full, 10000.0);
    CHECK(lin.pixels.at<cv::Vec3f>(0, 0)[0] == doctest::Approx(1.0).epsilon(1e-6));
    // arbitrary-precision ST 2084 EOTF at code 0.5
    CHECK(pq_eotf(0.5) == doctest::Approx(0.009224570899406408).epsilon(1e-9));

    Image half = Image::constant(2, 2, {0.5f, 0.5f, 0.5f}, Colorspace::PQ_BT2100);
    Image lin2 = pq_to_linear(half, 10000.0);
    CHECK(lin2.pixels.at<cv::Vec3f>(0, 0)[0] == doctest::Approx(0.0092246).epsilon(1e-4));

    CHECK_THROWS_AS(pq_to_linear(half, 0.0), Error);
    CHECK_THROWS_AS(pq_to_linear(half, -5.0), Error);
}

TEST_CASE("pq round trip within 1e-4") {
    Image lin = Image::constant(2, 2, {0.25f, 0.25f, 0.25f}, Colorspace::LINEAR);
    for (double peak : {1000.0, 10000.0}) {
        Image rt = pq_to_linear(linear_to_pq(lin, peak), peak);
        CHECK(testutil::max_abs_diff(rt.pixels, lin.pixels) < 1e-4);
    }
    Image zero = Image::constant(2, 2, {0.0f, 0.0f, 0.0f}, Colorspace::LINEAR);
    CHECK(linear_to_pq(zero, 1000.0).pixels.at<cv::Vec3f>(0, 0)[0] == doctest::Approx(0.0));
    Image one = Image::constant(2, 2, {1.0f, 1.0f, 1.0f}, Colorspace::LINEAR);
    CHECK(pq_to_linear(linear_to_pq(one, 10000.0), 10000.0).pixels.at<cv::Vec3f>(0, 0)[0] ==
          doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("all conversions clip into [0,1]") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<float> ud(0.0f, 1.0f);
    Image img;
    img.pixels = cv::Mat(8, 8, CV_32FC3);
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c)
            img.pixels.at<cv::Vec3f>(r, c) = {ud(rng), ud(rng), ud(rng)};
    img.colorspace = Colorspace::SRGB;
    CHECK_NOTHROW(validate_image(srgb_to_linear(img)));
    img.colorspace = Colorspace::PQ_BT2100;
    CHECK_NOTHROW(validate_image(pq_to_linear(img, 1000.0)));
    img.colorspace = Colorspace::LINEAR;
    CHECK_NOTHROW(validate_image(linear_to_pq(img, 1000.0)));
    CHECK_NOTHROW(validate_image(linear_to_srgb(img)));
}

TEST_CASE("color_convert HSV basics") {
    Image gray = Image::constant(2, 2, {0.5f, 0.5f, 0.5f});
    cv::Mat hsv = color_convert(gray, ColorTarget::HSV);
    CHECK(hsv.at<cv::Vec3f>(0, 0)[1] == doctest::Approx(0.0));  // gray has zero saturation
    CHECK(hsv.at<cv::Vec3f>(0, 0)[2] == doctest::Approx(0.5));

    Image red = Image::constant(2, 2, {1.0f, 0.0f, 0.0f});
    cv::Mat hsv_red = color_convert(red, ColorTarget::HSV);
    CHECK(hsv_red.at<cv::Vec3f>(0, 0)[0] == doctest::Approx(0.0));
    CHECK(hsv_red.at<cv::Vec3f>(0, 0)[1] == doctest::Approx(1.0));
}

TEST_CASE("color_convert YUV matches BT.601 evaluation") {
    Image red = Image::constant(2, 2, {1.0f, 0.0f, 0.0f});
    cv::Mat yuv = color_convert(red, ColorTarget::YUV);
    const cv::Vec3f px = yuv.at<cv::Vec3f>(0, 0);
    CHECK(px[0] == doctest::Approx(0.299).epsilon(1e-6));
    CHECK(px[1] == doctest::Approx(-0.16873589).epsilon(1e-5));
    CHECK(px[2] == doctest::Approx(0.5).epsilon(1e-6));  // V at channel maximum
}

TEST_CASE("CIELAB round trip example") {
    Image img = Image::constant(2, 2, {0.2f, 0.4f, 0.6f});
    cv::Mat lab = color_convert(img, ColorTarget::CIELAB);
    Image back = color_convert_back(lab, ColorTarget::CIELAB);
    CHECK(testutil::max_abs_diff(back.pixels, img.pixels) < 1e-3);
}

TEST_CASE("round trips on 1000 random in-gamut pixels") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<float> ud(0.05f, 0.95f);
    Image img;
    img.pixels = cv::Mat(10, 100, CV_32FC3);
    for (int r = 0; r < 10; ++r)
        for (int c = 0; c < 100; ++c)
            img.pixels.at<cv::Vec3f>(r, c) = {ud(rng), ud(rng), ud(rng)};
    img.colorspace = Colorspace::SRGB;
    for (auto target : {ColorTarget::HSV, ColorTarget::CIELAB, ColorTarget::YUV}) {
        Image back = color_convert_back(color_convert(img, target), target);
        CHECK(testutil::max_abs_diff(back.pixels, img.pixels) < 1e-3);
    }
}

TEST_CASE("sample_patch determinism and bounds") {
    Image img = synth_image(256, 256, 5);
    const Patch a = sample_patch(img, 128, 42);
    const Patch b = sample_patch(img, 128, 42);
    CHECK(a.row == b.row);
    CHECK(a.col == b.col);
    CHECK(testutil::bytes_equal(a.image.pixels, b.image.pixels));

    // only one placement when patch covers the image
    Image exact = synth_image(128, 128, 6);
    const Patch p = sample_patch(exact, 128, 7);
    CHECK(p.row == 0);
    CHECK(p.col == 0);

    CHECK_THROWS_AS(sample_patch(exact, 129, 0), Error);
}

TEST_CASE("sample_patch offsets cover quadrants uniformly") {
    Image img = synth_image(256, 256, 8);
    // offsets live in {0..128}^2: 129 values per axis, low half = 64 of them
    const int n = 10000;
    const double p_low = 64.0 / 129.0;
    int counts[2][2] = {};
    for (int i = 0; i < n; ++i) {
        const Patch p = sample_patch(img, 128, 1000 + i);
        counts[p.row >= 64][p.col >= 64]++;
    }
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            const double pr = (a ? 1 - p_low : p_low) * (b ? 1 - p_low : p_low);
            const double expect = n * pr;
            const double sigma = std::sqrt(n * pr * (1 - pr));
            CHECK(std::abs(counts[a][b] - expect) < 5 * sigma);
        }
}

TEST_CASE("screen_image gates") {
    // gray ramp: zero saturation everywhere
    Image ramp;
    ramp.pixels = cv::Mat(16, 64, CV_32FC3);
    for (int r = 0; r < 16; ++r)
        for (int c = 0; c < 64; ++c) {
            const float v = 0.1f + 0.8f * c / 63.0f;
            ramp.pixels.at<cv::Vec3f>(r, c) = {v, v, v};
        }
    const ScreeningReport rep = screen_image(ramp);
    CHECK(rep.is_grayscale);
    CHECK_FALSE(rep.accepted);

    Image white = Image::constant(8, 8, {1.0f, 1.0f, 1.0f});
    const ScreeningReport rep2 = screen_image(white);
    CHECK(rep2.overexposed_fraction == doctest::Approx(1.0));
    CHECK_FALSE(rep2.accepted);

    // colorful mid-tone content is accepted
    const ScreeningReport rep3 = screen_image(synth_image(64, 64, 3));
    CHECK(rep3.accepted);
}

TEST_CASE("png round trips") {
    testutil::TempDir tmp("pngio");
    Image img = synth_image(40, 56, 17);
    const std::string p8 = (tmp / "x.png").string();
    save_png8(p8, img);
    Image back = load_image(p8, Colorspace::SRGB);
    CHECK(back.rows() == 40);
    CHECK(back.cols() == 56);
    CHECK(testutil::max_abs_diff(back.pixels, img.pixels) < 1.0 / 255.0 + 1e-6);

    // 16-bit PQ container: 10-bit codes survive exactly
    Image pq = img.clone();
    pq.colorspace = Colorspace::PQ_BT2100;
    const std::string p16 = (tmp / "x16.png").string();
    save_png16_pq(p16, pq);
    Image back16 = load_image(p16, Colorspace::PQ_BT2100);
    CHECK(back16.bit_origin == BitOrigin::TEN_BIT);
    CHECK(testutil::max_abs_diff(back16.pixels, pq.pixels) < 0.5 / 1023.0 + 1e-6);

    CHECK_THROWS_AS(load_image((tmp / "missing.png").string(), Colorspace::SRGB), Error);
}

}  // TEST_SUITE
