#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "disque/image.hpp"

namespace disque {

// Dual-head U-Net sizing. Full-scale default is a ResNet-50-style backbone at
// half width (bottleneck blocks); the toy preset switches to basic blocks at
// one-eighth width for desk-scale experiments.
struct NetConfig {
    double width_multiplier = 0.5;
    std::array<int, 4> block_depths = {3, 4, 6, 3};
    int base_channels = 64;
    int patch_size = 128;
    bool toy_preset = false;
    bool bottleneck = true;       // expansion-4 blocks; basic blocks otherwise
    bool in_affine = true;        // learnable per-channel affine after IN
    bool stem_downsample = true;  // 7x7/2 conv + 3x3/2 maxpool; 3x3/1 conv when off
    double in_eps = 1e-5;

    static NetConfig toy();

    int expansion() const { return bottleneck ? 4 : 1; }
    int stem_channels() const;
    int inner_channels(int block) const;  // pre-expansion stage width
    int block_channels(int block) const;  // stage output channels C_b
    int appearance_dim() const;           // sum of C_b
    int min_divisor() const { return stem_downsample ? 32 : 8; }
    void validate() const;

    std::string to_json() const;
    static NetConfig from_json(const std::string& text);
};

// Per-(sample, channel) spatial standardization; the affine scale/shift is
// applied after normalization so tests can probe the raw standardized maps.
class InstanceNormImpl : public torch::nn::Module {
public:
    InstanceNormImpl(int channels, bool affine, double eps);
    torch::Tensor forward(const torch::Tensor& x,
                          std::vector<torch::Tensor>* in_probe = nullptr);

    torch::Tensor gamma, beta;  // undefined when affine is off

private:
    bool affine_;
    double eps_;
};
TORCH_MODULE(InstanceNorm);

// Free-function form of the normalization (no affine), usable on any NxCxHxW map.
torch::Tensor instance_norm(const torch::Tensor& x, double eps = 1e-5);

// Product channel attention: out[n,c,h,w] = x[n,c,h,w] * a[n,c].
torch::Tensor channel_attention(const torch::Tensor& x, const torch::Tensor& a);

class ResidualBlockImpl : public torch::nn::Module {
public:
    // use_in selects content-encoder flavor (IN after each conv); stride
    // applies to the spatial reduction conv of the block.
    ResidualBlockImpl(int in_ch, int inner_ch, int out_ch, int stride, bool use_in,
                      const NetConfig& cfg);
    torch::Tensor forward(const torch::Tensor& x,
                          std::vector<torch::Tensor>* in_probe = nullptr);

private:
    bool bottleneck_, use_in_;
    torch::nn::Conv2d conv1{nullptr}, conv2{nullptr}, conv3{nullptr}, proj{nullptr};
    InstanceNorm in1{nullptr}, in2{nullptr}, in3{nullptr}, in_proj{nullptr};
};
TORCH_MODULE(ResidualBlock);

class EncoderImpl : public torch::nn::Module {
public:
    EncoderImpl(const NetConfig& cfg, bool use_in);

    // Returns the four stage output maps (shallow to deep).
    std::vector<torch::Tensor> forward_maps(const torch::Tensor& x,
                                            std::vector<torch::Tensor>* in_probe = nullptr);

private:
    NetConfig cfg_;
    bool use_in_;
    torch::nn::Conv2d stem_{nullptr};
    torch::nn::MaxPool2d pool_{nullptr};
    std::vector<ResidualBlock> blocks_;
    std::array<int, 4> stage_begin_{}, stage_end_{};
};
TORCH_MODULE(Encoder);

class DecoderImpl : public torch::nn::Module {
public:
    explicit DecoderImpl(const NetConfig& cfg);
    torch::Tensor forward(const std::vector<torch::Tensor>& content_maps,
                          const torch::Tensor& appearance);

private:
    NetConfig cfg_;
    std::vector<torch::nn::Linear> appearance_proj_;
    std::vector<torch::nn::Conv2d> up_convs_, fuse_convs_;
    std::vector<ResidualBlock> blocks_;
    std::array<int, 4> stage_begin_{}, stage_end_{};
    torch::nn::Conv2d head1_{nullptr}, head2_{nullptr}, out_conv_{nullptr};
};
TORCH_MODULE(Decoder);

class DualHeadUNetImpl : public torch::nn::Module {
public:
    explicit DualHeadUNetImpl(const NetConfig& cfg);

    // Content head: four instance-normalized maps, shallow to deep.
    std::vector<torch::Tensor> encode_content(const torch::Tensor& x,
                                              std::vector<torch::Tensor>* in_probe = nullptr);
    // Appearance head: pooled vector of length appearance_dim().
    torch::Tensor encode_appearance(const torch::Tensor& x);
    // Appearance head without pooling (quality feature extraction).
    std::vector<torch::Tensor> appearance_maps(const torch::Tensor& x);

    torch::Tensor decode(const std::vector<torch::Tensor>& content_maps,
                         const torch::Tensor& appearance);
    torch::Tensor reconstruct(const torch::Tensor& x);

    const NetConfig& config() const { return cfg_; }
    Encoder content_encoder{nullptr};
    Encoder appearance_encoder{nullptr};
    Decoder decoder{nullptr};

private:
    NetConfig cfg_;
    void check_input(const torch::Tensor& x) const;
};
TORCH_MODULE(DualHeadUNet);

// Pools each stage map to its per-channel spatial mean and concatenates.
torch::Tensor pool_appearance(const std::vector<torch::Tensor>& maps);

// Image <-> tensor bridges ([N,3,H,W], float32 by default).
torch::Tensor image_to_tensor(const Image& img,
                              torch::Dtype dtype = torch::kFloat32);
Image tensor_to_image(const torch::Tensor& t, Colorspace cs = Colorspace::SRGB);

// Model parameter round trip keyed by canonical parameter path names.
void write_parameters(const DualHeadUNet& model, torch::serialize::OutputArchive& ar);
void read_parameters(DualHeadUNet& model, torch::serialize::InputArchive& ar);

}  // namespace disque
