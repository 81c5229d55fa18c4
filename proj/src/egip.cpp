#include "disque/egip.hpp"

#include <opencv2/imgproc.hpp>

namespace disque {

const char* to_string(EgipMode mode) {
    return mode == EgipMode::MIXING ? "mixing" : "replacement";
}

EgipMode egip_mode_from_string(const std::string& s) {
    if (s == "mixing") return EgipMode::MIXING;
    if (s == "replacement") return EgipMode::REPLACEMENT;
    throw Error(ErrorClass::Config, "unknown EGIP mode: " + s);
}

namespace {

cv::Mat reflect_pad_to(const cv::Mat& m, int divisor) {
    const int ph = (divisor - m.rows % divisor) % divisor;
    const int pw = (divisor - m.cols % divisor) % divisor;
    if (ph == 0 && pw == 0) return m;
    cv::Mat padded;
    cv::copyMakeBorder(m, padded, 0, ph, 0, pw, cv::BORDER_REFLECT_101);
    return padded;
}

torch::Tensor appearance_of(DualHeadUNet& model, const cv::Mat& pixels) {
    Image img{reflect_pad_to(pixels, model->config().min_divisor()), Colorspace::SRGB,
              BitOrigin::EIGHT_BIT};
    return model->encode_appearance(image_to_tensor(img));
}

// Single full-frame pass (input already divisor-aligned after padding).
Image process_whole(const EgipRequest& req, DualHeadUNet& model, EgipTrace* trace) {
    const int divisor = model->config().min_divisor();
    const cv::Mat padded = reflect_pad_to(req.input_src.pixels, divisor);
    Image in{padded, req.input_src.colorspace, req.input_src.bit_origin};
    const auto x = image_to_tensor(in);
    const auto content = model->encode_content(x);
    torch::Tensor appearance;
    if (req.mode == EgipMode::MIXING) {
        const auto delta = appearance_of(model, req.example_tgt.pixels) -
                           appearance_of(model, req.example_src.pixels);
        appearance = model->encode_appearance(x) + delta;
    } else {
        appearance = appearance_of(model, req.example_tgt.pixels);
    }
    if (trace) {
        trace->content_maps = content;
        trace->appearance = appearance;
    }
    const auto out = model->decode(content, appearance);
    Image img = tensor_to_image(out, Colorspace::SRGB);
    img.pixels = img.pixels(cv::Rect(0, 0, req.input_src.cols(), req.input_src.rows())).clone();
    return img;
}

// Tent weight map for overlap blending.
cv::Mat tent_weights(int size) {
    cv::Mat w(size, size, CV_32F);
    for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c) {
            const float wr = 1.0f - std::abs(2.0f * (r + 0.5f) / size - 1.0f);
            const float wc = 1.0f - std::abs(2.0f * (c + 0.5f) / size - 1.0f);
            w.at<float>(r, c) = std::max(wr * wc, 1e-4f);
        }
    return w;
}

std::vector<int> tile_origins(int extent, int tile, int stride) {
    std::vector<int> origins;
    for (int o = 0; o + tile < extent; o += stride) origins.push_back(o);
    origins.push_back(extent - tile);
    return origins;
}

}  // namespace

Image egip_apply(const EgipRequest& req, DualHeadUNet& model, EgipTrace* trace) {
    validate_image(req.example_src);
    validate_image(req.example_tgt);
    validate_image(req.input_src);
    if (req.example_src.rows() != req.example_tgt.rows() ||
        req.example_src.cols() != req.example_tgt.cols())
        throw Error(ErrorClass::Data, "example pair sizes differ");

    torch::NoGradGuard no_grad;
    const int patch = model->config().patch_size;
    if (req.input_src.rows() <= patch && req.input_src.cols() <= patch)
        return process_whole(req, model, trace);

    // Tiled path: 50% overlap, tent blending.
    const int stride = patch / 2;
    const bool colocated = req.example_src.rows() == req.input_src.rows() &&
                           req.example_src.cols() == req.input_src.cols();
    torch::Tensor global_delta, global_target;
    if (req.mode == EgipMode::MIXING && !colocated)
        global_delta = appearance_of(model, req.example_tgt.pixels) -
                       appearance_of(model, req.example_src.pixels);
    if (req.mode == EgipMode::REPLACEMENT && !colocated)
        global_target = appearance_of(model, req.example_tgt.pixels);

    cv::Mat acc = cv::Mat::zeros(req.input_src.rows(), req.input_src.cols(), CV_32FC3);
    cv::Mat wsum = cv::Mat::zeros(req.input_src.rows(), req.input_src.cols(), CV_32F);
    const cv::Mat tent = tent_weights(patch);

    bool first_tile = true;
    for (int r : tile_origins(req.input_src.rows(), patch, stride)) {
        for (int c : tile_origins(req.input_src.cols(), patch, stride)) {
            const cv::Rect roi(c, r, patch, patch);
            Image tile{req.input_src.pixels(roi).clone(), req.input_src.colorspace,
                       req.input_src.bit_origin};
            const auto x = image_to_tensor(tile);
            const auto content = model->encode_content(x);
            torch::Tensor appearance;
            if (req.mode == EgipMode::MIXING) {
                torch::Tensor delta = global_delta;
                if (colocated)
                    delta = appearance_of(model, req.example_tgt.pixels(roi)) -
                            appearance_of(model, req.example_src.pixels(roi));
                appearance = model->encode_appearance(x) + delta;
            } else {
                appearance = colocated
                                 ? appearance_of(model, req.example_tgt.pixels(roi))
                                 : global_target;
            }
            if (trace && first_tile) {
                trace->content_maps = content;
                trace->appearance = appearance;
                first_tile = false;
            }
            const Image out = tensor_to_image(model->decode(content, appearance));
            for (int tr = 0; tr < patch; ++tr) {
                const cv::Vec3f* src = out.pixels.ptr<cv::Vec3f>(tr);
                const float* tw = tent.ptr<float>(tr);
                cv::Vec3f* dst = acc.ptr<cv::Vec3f>(r + tr);
                float* dw = wsum.ptr<float>(r + tr);
                for (int tc = 0; tc < patch; ++tc) {
                    dst[c + tc] += src[tc] * tw[tc];
                    dw[c + tc] += tw[tc];
                }
            }
        }
    }

    Image result;
    result.pixels = cv::Mat(acc.rows, acc.cols, CV_32FC3);
    result.colorspace = Colorspace::SRGB;
    for (int r = 0; r < acc.rows; ++r) {
        const cv::Vec3f* a = acc.ptr<cv::Vec3f>(r);
        const float* w = wsum.ptr<float>(r);
        cv::Vec3f* dst = result.pixels.ptr<cv::Vec3f>(r);
        for (int c = 0; c < acc.cols; ++c) dst[c] = a[c] / w[c];
    }
    clip01(result.pixels);
    return result;
}

Image egtm(const Image& hdr_input, const Image& example_hdr, const Image& example_sdr,
           DualHeadUNet& model) {
    if (hdr_input.colorspace != Colorspace::PQ_BT2100 ||
        example_hdr.colorspace != Colorspace::PQ_BT2100)
        throw Error(ErrorClass::Data, "egtm expects PQ-coded HDR inputs");
    EgipRequest req;
    req.example_src = example_hdr.clone();
    req.example_tgt = example_sdr.clone();
    req.input_src = hdr_input.clone();
    req.mode = EgipMode::MIXING;
    Image out = egip_apply(req, model);
    out.colorspace = Colorspace::SRGB;
    return out;
}

}  // namespace disque
