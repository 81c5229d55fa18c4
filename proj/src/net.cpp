#include "disque/net.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

namespace disque {

namespace {

torch::nn::Conv2d make_conv(int in_ch, int out_ch, int ksize, int stride) {
    auto opts = torch::nn::Conv2dOptions(in_ch, out_ch, ksize).stride(stride);
    if (ksize > 1) opts = opts.padding(ksize / 2).padding_mode(torch::kReplicate);
    return torch::nn::Conv2d(opts);
}

}  // namespace

NetConfig NetConfig::toy() {
    NetConfig cfg;
    cfg.width_multiplier = 0.125;
    cfg.block_depths = {1, 1, 1, 1};
    cfg.toy_preset = true;
    cfg.bottleneck = false;
    cfg.patch_size = 64;
    return cfg;
}

int NetConfig::stem_channels() const {
    return std::max(4, static_cast<int>(std::lround(base_channels * width_multiplier)));
}

int NetConfig::inner_channels(int block) const {
    return static_cast<int>(std::lround(base_channels * width_multiplier)) << block;
}

int NetConfig::block_channels(int block) const {
    return inner_channels(block) * expansion();
}

int NetConfig::appearance_dim() const {
    int sum = 0;
    for (int b = 0; b < 4; ++b) sum += block_channels(b);
    return sum;
}

void NetConfig::validate() const {
    const double w = base_channels * width_multiplier;
    if (std::abs(w - std::lround(w)) > 1e-9 || std::lround(w) < 4)
        throw Error(ErrorClass::Config,
                    "base_channels * width_multiplier must be an integer >= 4");
    for (int d : block_depths)
        if (d < 1) throw Error(ErrorClass::Config, "block depths must be >= 1");
    if (patch_size % min_divisor() != 0)
        throw Error(ErrorClass::Config, "patch_size must be divisible by " +
                                            std::to_string(min_divisor()));
}

std::string NetConfig::to_json() const {
    nlohmann::ordered_json j;
    j["width_multiplier"] = width_multiplier;
    j["block_depths"] = block_depths;
    j["base_channels"] = base_channels;
    j["patch_size"] = patch_size;
    j["toy_preset"] = toy_preset;
    j["bottleneck"] = bottleneck;
    j["in_affine"] = in_affine;
    j["stem_downsample"] = stem_downsample;
    j["in_eps"] = in_eps;
    return j.dump();
}

NetConfig NetConfig::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    NetConfig cfg;
    cfg.width_multiplier = j.value("width_multiplier", cfg.width_multiplier);
    if (j.contains("block_depths")) {
        auto d = j["block_depths"];
        for (int i = 0; i < 4; ++i) cfg.block_depths[i] = d.at(i).get<int>();
    }
    cfg.base_channels = j.value("base_channels", cfg.base_channels);
    cfg.patch_size = j.value("patch_size", cfg.patch_size);
    cfg.toy_preset = j.value("toy_preset", cfg.toy_preset);
    cfg.bottleneck = j.value("bottleneck", cfg.bottleneck);
    cfg.in_affine = j.value("in_affine", cfg.in_affine);
    cfg.stem_downsample = j.value("stem_downsample", cfg.stem_downsample);
    cfg.in_eps = j.value("in_eps", cfg.in_eps);
    return cfg;
}

InstanceNormImpl::InstanceNormImpl(int channels, bool affine, double eps)
    : affine_(affine), eps_(eps) {
    if (affine_) {
        gamma = register_parameter("gamma", torch::ones({channels}));
        beta = register_parameter("beta", torch::zeros({channels}));
    }
}

torch::Tensor InstanceNormImpl::forward(const torch::Tensor& x,
                                        std::vector<torch::Tensor>* in_probe) {
    auto normalized = instance_norm(x, eps_);
    if (in_probe) in_probe->push_back(normalized.detach());
    if (!affine_) return normalized;
    return normalized * gamma.view({1, -1, 1, 1}) + beta.view({1, -1, 1, 1});
}

torch::Tensor instance_norm(const torch::Tensor& x, double eps) {
    TORCH_CHECK(x.dim() == 4, "instance_norm expects NxCxHxW");
    const auto mu = x.mean({2, 3}, /*keepdim=*/true);
    const auto var = (x - mu).pow(2).mean({2, 3}, /*keepdim=*/true);
    // clamped sigma: exact unit variance away from the degenerate case,
    // finite output for constant channels
    return (x - mu) / torch::sqrt(var).clamp_min(eps);
}

torch::Tensor channel_attention(const torch::Tensor& x, const torch::Tensor& a) {
    TORCH_CHECK(x.dim() == 4 && a.dim() == 2, "channel_attention expects NxCxHxW and NxC");
    if (x.size(0) != a.size(0) || x.size(1) != a.size(1))
        throw Error(ErrorClass::Config, "channel_attention shape mismatch");
    return x * a.view({a.size(0), a.size(1), 1, 1});
}

ResidualBlockImpl::ResidualBlockImpl(int in_ch, int inner_ch, int out_ch, int stride,
                                     bool use_in, const NetConfig& cfg)
    : bottleneck_(cfg.bottleneck), use_in_(use_in) {
    if (bottleneck_) {
        conv1 = register_module("conv1", make_conv(in_ch, inner_ch, 1, 1));
        conv2 = register_module("conv2", make_conv(inner_ch, inner_ch, 3, stride));
        conv3 = register_module("conv3", make_conv(inner_ch, out_ch, 1, 1));
    } else {
        conv1 = register_module("conv1", make_conv(in_ch, inner_ch, 3, stride));
        conv2 = register_module("conv2", make_conv(inner_ch, out_ch, 3, 1));
    }
    if (use_in_) {
        in1 = register_module("in1", InstanceNorm(inner_ch, cfg.in_affine, cfg.in_eps));
        in2 = register_module("in2", InstanceNorm(bottleneck_ ? inner_ch : out_ch,
                                                  cfg.in_affine, cfg.in_eps));
        if (bottleneck_)
            in3 = register_module("in3", InstanceNorm(out_ch, cfg.in_affine, cfg.in_eps));
    }
    if (stride != 1 || in_ch != out_ch) {
        proj = register_module("proj", make_conv(in_ch, out_ch, 1, stride));
        if (use_in_)
            in_proj =
                register_module("in_proj", InstanceNorm(out_ch, cfg.in_affine, cfg.in_eps));
    }
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x,
                                         std::vector<torch::Tensor>* in_probe) {
    torch::Tensor identity = x;
    if (proj) {
        identity = proj->forward(x);
        if (use_in_) identity = in_proj->forward(identity, in_probe);
    }
    torch::Tensor h = conv1->forward(x);
    if (use_in_) h = in1->forward(h, in_probe);
    h = torch::relu(h);
    h = conv2->forward(h);
    if (use_in_) h = in2->forward(h, in_probe);
    if (bottleneck_) {
        h = torch::relu(h);
        h = conv3->forward(h);
        if (use_in_) h = in3->forward(h, in_probe);
    }
    return torch::relu(h + identity);
}

EncoderImpl::EncoderImpl(const NetConfig& cfg, bool use_in) : cfg_(cfg), use_in_(use_in) {
    cfg_.validate();
    const int stem_ch = cfg_.stem_channels();
    stem_ = register_module("stem", cfg_.stem_downsample ? make_conv(3, stem_ch, 7, 2)
                                                         : make_conv(3, stem_ch, 3, 1));
    if (cfg_.stem_downsample)
        pool_ = register_module(
            "pool", torch::nn::MaxPool2d(torch::nn::MaxPool2dOptions(3).stride(2).padding(1)));

    int in_ch = stem_ch;
    int index = 0;
    for (int s = 0; s < 4; ++s) {
        stage_begin_[s] = index;
        for (int b = 0; b < cfg_.block_depths[s]; ++b) {
            const int stride = (s > 0 && b == 0) ? 2 : 1;
            auto block = ResidualBlock(in_ch, cfg_.inner_channels(s), cfg_.block_channels(s),
                                       stride, use_in_, cfg_);
            register_module("stage" + std::to_string(s) + "_block" + std::to_string(b),
                            block);
            blocks_.push_back(block);
            in_ch = cfg_.block_channels(s);
            ++index;
        }
        stage_end_[s] = index;
    }
}

std::vector<torch::Tensor> EncoderImpl::forward_maps(const torch::Tensor& x,
                                                     std::vector<torch::Tensor>* in_probe) {
    torch::Tensor h = torch::relu(stem_->forward(x));
    if (pool_) h = pool_->forward(h);
    std::vector<torch::Tensor> maps;
    maps.reserve(4);
    for (int s = 0; s < 4; ++s) {
        for (int i = stage_begin_[s]; i < stage_end_[s]; ++i)
            h = blocks_[i]->forward(h, in_probe);
        maps.push_back(h);
    }
    return maps;
}

DecoderImpl::DecoderImpl(const NetConfig& cfg) : cfg_(cfg) {
    const int a_dim = cfg_.appearance_dim();
    int index = 0;
    for (int s = 3; s >= 0; --s) {
        auto proj = torch::nn::Linear(a_dim, cfg_.block_channels(s));
        register_module("appearance_proj" + std::to_string(s), proj);
        appearance_proj_.push_back(proj);

        if (s < 3) {
            auto up = make_conv(cfg_.block_channels(s + 1), cfg_.block_channels(s), 3, 1);
            register_module("up_conv" + std::to_string(s), up);
            up_convs_.push_back(up);
            auto fuse = make_conv(2 * cfg_.block_channels(s), cfg_.block_channels(s), 1, 1);
            register_module("fuse" + std::to_string(s), fuse);
            fuse_convs_.push_back(fuse);
        }

        stage_begin_[s] = index;
        for (int b = 0; b < cfg_.block_depths[s]; ++b) {
            auto block = ResidualBlock(cfg_.block_channels(s), cfg_.inner_channels(s),
                                       cfg_.block_channels(s), 1, /*use_in=*/false, cfg_);
            register_module("stage" + std::to_string(s) + "_block" + std::to_string(b),
                            block);
            blocks_.push_back(block);
            ++index;
        }
        stage_end_[s] = index;
    }
    const int stem_ch = cfg_.stem_channels();
    head1_ = register_module("head1", make_conv(cfg_.block_channels(0), stem_ch, 3, 1));
    head2_ = register_module("head2", make_conv(stem_ch, stem_ch, 3, 1));
    out_conv_ = register_module("out_conv", make_conv(stem_ch, 3, 3, 1));
}

torch::Tensor DecoderImpl::forward(const std::vector<torch::Tensor>& content_maps,
                                   const torch::Tensor& appearance) {
    TORCH_CHECK(content_maps.size() == 4, "decoder expects 4 content maps");
    namespace F = torch::nn::functional;
    const auto up2 = F::InterpolateFuncOptions()
                         .scale_factor(std::vector<double>{2.0, 2.0})
                         .mode(torch::kNearest);

    torch::Tensor x;
    for (int s = 3; s >= 0; --s) {
        const int idx = 3 - s;  // construction order above
        if (s == 3) {
            x = content_maps[3];
        } else {
            x = torch::relu(up_convs_[idx - 1]->forward(F::interpolate(x, up2)));
            if (x.sizes() != content_maps[s].sizes())
                throw Error(ErrorClass::Config, "decoder/content map size mismatch");
            x = torch::relu(fuse_convs_[idx - 1]->forward(torch::cat({x, content_maps[s]}, 1)));
        }
        x = channel_attention(x, appearance_proj_[idx]->forward(appearance));
        for (int i = stage_begin_[s]; i < stage_end_[s]; ++i) x = blocks_[i]->forward(x);
    }
    if (cfg_.stem_downsample) {
        x = torch::relu(head1_->forward(F::interpolate(x, up2)));
        x = torch::relu(head2_->forward(F::interpolate(x, up2)));
    } else {
        x = torch::relu(head1_->forward(x));
        x = torch::relu(head2_->forward(x));
    }
    return torch::clamp(out_conv_->forward(x), 0.0, 1.0);
}

DualHeadUNetImpl::DualHeadUNetImpl(const NetConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    content_encoder = register_module("content_encoder", Encoder(cfg_, /*use_in=*/true));
    appearance_encoder =
        register_module("appearance_encoder", Encoder(cfg_, /*use_in=*/false));
    decoder = register_module("decoder", Decoder(cfg_));
}

void DualHeadUNetImpl::check_input(const torch::Tensor& x) const {
    TORCH_CHECK(x.dim() == 4 && x.size(1) == 3, "expected Nx3xHxW input");
    const int d = cfg_.min_divisor();
    if (x.size(2) % d != 0 || x.size(3) % d != 0)
        throw Error(ErrorClass::Data,
                    "input dimensions must be divisible by " + std::to_string(d));
}

std::vector<torch::Tensor> DualHeadUNetImpl::encode_content(
    const torch::Tensor& x, std::vector<torch::Tensor>* in_probe) {
    check_input(x);
    return content_encoder->forward_maps(x, in_probe);
}

torch::Tensor DualHeadUNetImpl::encode_appearance(const torch::Tensor& x) {
    check_input(x);
    return pool_appearance(appearance_encoder->forward_maps(x));
}

std::vector<torch::Tensor> DualHeadUNetImpl::appearance_maps(const torch::Tensor& x) {
    check_input(x);
    return appearance_encoder->forward_maps(x);
}

torch::Tensor DualHeadUNetImpl::decode(const std::vector<torch::Tensor>& content_maps,
                                       const torch::Tensor& appearance) {
    if (static_cast<int>(appearance.size(1)) != cfg_.appearance_dim())
        throw Error(ErrorClass::Config, "appearance vector length mismatch");
    return decoder->forward(content_maps, appearance);
}

torch::Tensor DualHeadUNetImpl::reconstruct(const torch::Tensor& x) {
    return decode(encode_content(x), encode_appearance(x));
}

torch::Tensor pool_appearance(const std::vector<torch::Tensor>& maps) {
    std::vector<torch::Tensor> pooled;
    pooled.reserve(maps.size());
    for (const auto& m : maps) pooled.push_back(m.mean({2, 3}));
    return torch::cat(pooled, 1);
}

torch::Tensor image_to_tensor(const Image& img, torch::Dtype dtype) {
    cv::Mat m = img.pixels;
    auto t = torch::from_blob(m.data, {m.rows, m.cols, 3}, torch::kFloat32)
                 .permute({2, 0, 1})
                 .unsqueeze(0)
                 .clone();
    return t.to(dtype);
}

Image tensor_to_image(const torch::Tensor& t, Colorspace cs) {
    TORCH_CHECK(t.dim() == 4 && t.size(0) == 1 && t.size(1) == 3,
                "expected 1x3xHxW tensor");
    auto hwc = t.squeeze(0).permute({1, 2, 0}).contiguous().to(torch::kFloat32);
    Image img;
    img.pixels = cv::Mat(static_cast<int>(hwc.size(0)), static_cast<int>(hwc.size(1)),
                         CV_32FC3);
    std::memcpy(img.pixels.data, hwc.data_ptr<float>(),
                sizeof(float) * hwc.numel());
    img.colorspace = cs;
    clip01(img.pixels);
    return img;
}

void write_parameters(const DualHeadUNet& model, torch::serialize::OutputArchive& ar) {
    for (const auto& p : model->named_parameters())
        ar.write(p.key(), p.value().detach().cpu());
}

void read_parameters(DualHeadUNet& model, torch::serialize::InputArchive& ar) {
    torch::NoGradGuard no_grad;
    for (const auto& p : model->named_parameters()) {
        torch::Tensor t;
        ar.read(p.key(), t);
        if (!t.defined() || t.sizes() != p.value().sizes())
            throw Error(ErrorClass::Data, "checkpoint parameter mismatch at " + p.key());
        p.value().copy_(t);
    }
}

}  // namespace disque
