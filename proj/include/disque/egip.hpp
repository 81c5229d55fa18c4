#pragma once

#include <string>
#include <vector>

#include "disque/image.hpp"
#include "disque/net.hpp"

namespace disque {

enum class EgipMode { MIXING, REPLACEMENT };

const char* to_string(EgipMode mode);
EgipMode egip_mode_from_string(const std::string& s);

struct EgipRequest {
    Image example_src, example_tgt, input_src;
    EgipMode mode = EgipMode::MIXING;
};

// Debug tap: what was handed to the decoder on the (first) pass.
struct EgipTrace {
    std::vector<torch::Tensor> content_maps;
    torch::Tensor appearance;
};

// Example-guided processing.
//   MIXING:      out = D(C(input), A(input) + (A(example_tgt) - A(example_src)))
//   REPLACEMENT: out = D(C(input), A(example_tgt))
// Inputs larger than the training patch size are tiled with 50% overlap and
// tent-blended; the example delta is taken from the co-located example tile
// when the example pair matches the input size, and globally otherwise.
Image egip_apply(const EgipRequest& req, DualHeadUNet& model, EgipTrace* trace = nullptr);

// Example-guided tone mapping: MIXING with a PQ-coded input and example
// source, and an SDR example target. Output is SRGB.
Image egtm(const Image& hdr_input, const Image& example_hdr, const Image& example_sdr,
           DualHeadUNet& model);

}  // namespace disque
