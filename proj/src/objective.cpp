#include "disque/objective.hpp"

#include <cstdio>
#include <iostream>

namespace disque {

namespace {

void check_same_shape(const torch::Tensor& x, const torch::Tensor& y, const char* op) {
    if (x.sizes() != y.sizes())
        throw Error(ErrorClass::Config, std::string(op) + ": shape mismatch");
}

torch::Tensor l2_normalize(const torch::Tensor& v) {
    return v / v.norm(2, -1, /*keepdim=*/true).clamp_min(1e-12);
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

}  // namespace

std::string LossBreakdown::csv_header() {
    return "step,l_self,l_cross,l_c_nce,l_a_nce,total,lr";
}

std::string LossBreakdown::csv_row(std::int64_t step, double lr) const {
    return std::to_string(step) + "," + format_double(l_self) + "," +
           format_double(l_cross) + "," + format_double(l_c_nce) + "," +
           format_double(l_a_nce) + "," + format_double(total) + "," + format_double(lr);
}

torch::Tensor charbonnier(const torch::Tensor& x, const torch::Tensor& y, double eps) {
    check_same_shape(x, y, "charbonnier");
    if (eps <= 0.0) throw Error(ErrorClass::Config, "charbonnier eps must be > 0");
    const auto diff = (x - y).flatten(1);
    return torch::sqrt(diff.pow(2).sum(1) + eps * eps).mean();
}

torch::Tensor frequency_loss(const torch::Tensor& x, const torch::Tensor& y) {
    check_same_shape(x, y, "frequency_loss");
    const auto fx = torch::fft::fft2(x);
    const auto fy = torch::fft::fft2(y);
    return torch::abs(fx - fy).flatten(1).sum(1).mean();
}

torch::Tensor recon_loss(const torch::Tensor& x, const torch::Tensor& y, double lambda_f,
                         double eps) {
    return charbonnier(x, y, eps) + lambda_f * frequency_loss(x, y);
}

MixedAppearance mix_appearance(const torch::Tensor& a11, const torch::Tensor& a12,
                               const torch::Tensor& a21, const torch::Tensor& a22) {
    check_same_shape(a11, a12, "mix_appearance");
    check_same_shape(a11, a21, "mix_appearance");
    check_same_shape(a11, a22, "mix_appearance");
    const auto delta1 = a12 - a11;
    const auto delta2 = a22 - a21;
    return {a12 - delta2, a11 + delta2, a22 - delta1, a21 + delta1};
}

ShuffledContent shuffle_content(const std::vector<torch::Tensor>& c11,
                                const std::vector<torch::Tensor>& c12,
                                const std::vector<torch::Tensor>& c21,
                                const std::vector<torch::Tensor>& c22) {
    return {c12, c11, c22, c21};
}

torch::Tensor info_nce(const torch::Tensor& q, const torch::Tensor& k_pos,
                       const torch::Tensor& negatives, double tau) {
    if (tau <= 0.0) throw Error(ErrorClass::Config, "tau must be > 0");
    const auto qn = l2_normalize(q.flatten());
    const auto kn = l2_normalize(k_pos.flatten());
    if (qn.numel() != kn.numel())
        throw Error(ErrorClass::Config, "info_nce: query/key length mismatch");

    auto one_direction = [&](const torch::Tensor& anchor, const torch::Tensor& positive) {
        auto logits = (anchor * positive).sum().div(tau).unsqueeze(0);
        if (negatives.defined() && negatives.numel() > 0) {
            auto negs = l2_normalize(negatives);
            logits = torch::cat({logits, negs.matmul(anchor).div(tau)});
        }
        return torch::logsumexp(logits, 0) - logits[0];
    };
    return 0.5 * (one_direction(qn, kn) + one_direction(kn, qn));
}

torch::Tensor info_nce_batch(const torch::Tensor& queries, const torch::Tensor& keys,
                             double tau) {
    if (tau <= 0.0) throw Error(ErrorClass::Config, "tau must be > 0");
    check_same_shape(queries, keys, "info_nce_batch");
    const auto qn = l2_normalize(queries);
    const auto kn = l2_normalize(keys);
    const auto logits = qn.matmul(kn.t()) / tau;
    const auto target = torch::arange(queries.size(0), torch::kLong);
    namespace F = torch::nn::functional;
    return 0.5 * (F::cross_entropy(logits, target) + F::cross_entropy(logits.t(), target));
}

ContrastivePairs contrastive_pairs(const std::vector<torch::Tensor>& c11,
                                   const std::vector<torch::Tensor>& c12,
                                   const std::vector<torch::Tensor>& c21,
                                   const std::vector<torch::Tensor>& c22,
                                   const torch::Tensor& a11, const torch::Tensor& a12,
                                   const torch::Tensor& a21, const torch::Tensor& a22) {
    ContrastivePairs p;
    // Deepest-block maps, global-average-pooled; image order (1, 2).
    p.content_q = torch::cat({c11.back().mean({2, 3}), c21.back().mean({2, 3})}, 1);
    p.content_k = torch::cat({c12.back().mean({2, 3}), c22.back().mean({2, 3})}, 1);
    p.appearance_q = a12 - a11;
    p.appearance_k = a22 - a21;
    return p;
}

torch::Tensor total_loss(DualHeadUNet& model, const QuadrupleBatch& batch,
                         const LossHyper& hyper, LossBreakdown* breakdown) {
    const auto c11 = model->encode_content(batch.x11);
    const auto c12 = model->encode_content(batch.x12);
    const auto c21 = model->encode_content(batch.x21);
    const auto c22 = model->encode_content(batch.x22);
    const auto a11 = model->encode_appearance(batch.x11);
    const auto a12 = model->encode_appearance(batch.x12);
    const auto a21 = model->encode_appearance(batch.x21);
    const auto a22 = model->encode_appearance(batch.x22);

    auto l_self = recon_loss(batch.x11, model->decode(c11, a11), hyper.lambda_f, hyper.eps_char) +
                  recon_loss(batch.x12, model->decode(c12, a12), hyper.lambda_f, hyper.eps_char) +
                  recon_loss(batch.x21, model->decode(c21, a21), hyper.lambda_f, hyper.eps_char) +
                  recon_loss(batch.x22, model->decode(c22, a22), hyper.lambda_f, hyper.eps_char);

    const auto mixed = mix_appearance(a11, a12, a21, a22);
    const auto shuffled = shuffle_content(c11, c12, c21, c22);
    // Crossed predictions are scored against the original same-index views.
    auto l_cross =
        recon_loss(batch.x11, model->decode(shuffled.c11, mixed.a11), hyper.lambda_f, hyper.eps_char) +
        recon_loss(batch.x12, model->decode(shuffled.c12, mixed.a12), hyper.lambda_f, hyper.eps_char) +
        recon_loss(batch.x21, model->decode(shuffled.c21, mixed.a21), hyper.lambda_f, hyper.eps_char) +
        recon_loss(batch.x22, model->decode(shuffled.c22, mixed.a22), hyper.lambda_f, hyper.eps_char);

    torch::Tensor l_c_nce, l_a_nce;
    if (batch.batch_size() >= 2) {
        const auto pairs = contrastive_pairs(c11, c12, c21, c22, a11, a12, a21, a22);
        l_c_nce = info_nce_batch(pairs.content_q, pairs.content_k, hyper.tau);
        l_a_nce = info_nce_batch(pairs.appearance_q, pairs.appearance_k, hyper.tau);
    } else {
        static bool warned = false;
        if (!warned) {
            std::cerr << "warning: batch of 1, contrastive terms skipped\n";
            warned = true;
        }
        l_c_nce = torch::zeros({}, l_self.options());
        l_a_nce = torch::zeros({}, l_self.options());
    }

    auto total = (l_self + l_cross) + hyper.beta * (l_c_nce + l_a_nce);
    if (breakdown) {
        breakdown->l_self = l_self.item<double>();
        breakdown->l_cross = l_cross.item<double>();
        breakdown->l_c_nce = l_c_nce.item<double>();
        breakdown->l_a_nce = l_a_nce.item<double>();
        breakdown->total = total.item<double>();
        breakdown->hyper = hyper;
    }
    return total;
}

}  // namespace disque
