#pragma once

#include <string>
#include <vector>

#include <torch/torch.h>

#include "disque/net.hpp"

namespace disque {

struct LossHyper {
    double lambda_f = 0.1;
    double beta = 0.5;
    double tau = 0.2;
    double eps_char = 1e-3;
};

struct LossBreakdown {
    double l_self = 0.0;
    double l_cross = 0.0;
    double l_c_nce = 0.0;
    double l_a_nce = 0.0;
    double total = 0.0;
    LossHyper hyper;

    static std::string csv_header();  // step,l_self,l_cross,l_c_nce,l_a_nce,total,lr
    std::string csv_row(std::int64_t step, double lr) const;
};

// Charbonnier in its global-norm form: per sample sqrt(||x-y||^2 + eps^2),
// averaged over the batch.
torch::Tensor charbonnier(const torch::Tensor& x, const torch::Tensor& y, double eps);

// L1 over complex bins of the unnormalized 2-D DFT, per channel, summed;
// averaged over the batch. A constant difference c on an HxW channel costs
// exactly HW*|c| (only the DC bin differs).
torch::Tensor frequency_loss(const torch::Tensor& x, const torch::Tensor& y);

torch::Tensor recon_loss(const torch::Tensor& x, const torch::Tensor& y, double lambda_f,
                         double eps);

struct MixedAppearance {
    torch::Tensor a11, a12, a21, a22;
};

// Appearance mixing: the transform delta of the *other* image is added or
// removed, never the whole vector.
MixedAppearance mix_appearance(const torch::Tensor& a11, const torch::Tensor& a12,
                               const torch::Tensor& a21, const torch::Tensor& a22);

// Content shuffling: within-image swap (12<->11, 22<->21).
struct ShuffledContent {
    std::vector<torch::Tensor> c11, c12, c21, c22;
};
ShuffledContent shuffle_content(const std::vector<torch::Tensor>& c11,
                                const std::vector<torch::Tensor>& c12,
                                const std::vector<torch::Tensor>& c21,
                                const std::vector<torch::Tensor>& c22);

// Single-pair InfoNCE, symmetrized over (q,k+) with a shared negative set.
// Vectors are L2-normalized before dot products. Empty negatives are legal.
torch::Tensor info_nce(const torch::Tensor& q, const torch::Tensor& k_pos,
                       const torch::Tensor& negatives, double tau);

// In-batch symmetrized InfoNCE: row i of Q pairs with row i of K, all other
// rows act as negatives in both directions.
torch::Tensor info_nce_batch(const torch::Tensor& queries, const torch::Tensor& keys,
                             double tau);

struct ContrastivePairs {
    torch::Tensor content_q, content_k;        // [B, 2*C_deep]
    torch::Tensor appearance_q, appearance_k;  // [B, appearance_dim]
};

// Content query/key: concatenated pooled deepest-block maps of (x11,x21) vs
// (x12,x22); appearance query/key: (delta_a1, delta_a2).
ContrastivePairs contrastive_pairs(const std::vector<torch::Tensor>& c11,
                                   const std::vector<torch::Tensor>& c12,
                                   const std::vector<torch::Tensor>& c21,
                                   const std::vector<torch::Tensor>& c22,
                                   const torch::Tensor& a11, const torch::Tensor& a12,
                                   const torch::Tensor& a21, const torch::Tensor& a22);

struct QuadrupleBatch {
    torch::Tensor x11, x12, x21, x22;  // [B,3,H,W]
    std::int64_t batch_size() const { return x11.size(0); }
};

// Full objective: self + cross reconstruction plus the two contrastive terms.
// Returns the differentiable total and fills the breakdown. Batches of one
// skip the contrastive terms (no negatives available).
torch::Tensor total_loss(DualHeadUNet& model, const QuadrupleBatch& batch,
                         const LossHyper& hyper, LossBreakdown* breakdown);

}  // namespace disque
