
#include <random>

#include "disque/net.hpp"
#include "disque/objective.hpp"

#include "doctest_compat.hpp"

using namespace disque;

TEST_SUITE("objective") {

TEST_CASE("charbonnier global-norm form") {
    auto x = torch::zeros({1, 1, 2, 2});
    CHECK(charbonnier(x, x, 1e-3).item<double>() == doctest::Approx(1e-3).epsilon(1e-9));

    // residual (3,4) with eps -> 0 limit gives the Euclidean norm 5
    auto a = torch::tensor({3.0, 4.0}).view({1, 1, 1, 2});
    auto b = torch::zeros({1, 1, 1, 2});
    CHECK(charbonnier(a, b, 1e-9).item<double>() == doctest::Approx(5.0).epsilon(1e-8));

    // scaling the residual scales the loss up
    CHECK(charbonnier(2.0 * a, b, 1e-3).item<double>() >
          charbonnier(a, b, 1e-3).item<double>());

    CHECK_THROWS_AS(charbonnier(a, torch::zeros({1, 1, 2, 2}), 1e-3), Error);
    CHECK_THROWS_AS(charbonnier(a, b, 0.0), Error);
}

TEST_CASE("frequency loss DC-bin closed form pins the DFT normalization") {
    auto x = torch::zeros({1, 1, 8, 8});
    CHECK(frequency_loss(x, x).item<double>() == doctest::Approx(0.0));

    // constant difference c on N=64 pixels -> N*|c| (only the DC bin differs)
    auto y = torch::full({1, 1, 8, 8}, 0.25);
    CHECK(frequency_loss(x, y).item<double>() == doctest::Approx(64 * 0.25).epsilon(1e-6));

    // DFT linearity: loss(x, x+d) depends only on d
    auto base = torch::rand({1, 3, 8, 8});
    auto d = torch::rand({1, 3, 8, 8}) * 0.1;
    CHECK(frequency_loss(base, base + d).item<double>() ==
          doctest::Approx(frequency_loss(torch::zeros_like(d), d).item<double>())
              .epsilon(1e-4));
}

TEST_CASE("recon_loss composition is linear in lambda_f") {
    auto x = torch::rand({2, 3, 8, 8});
    auto y = torch::rand({2, 3, 8, 8});
    const double c = charbonnier(x, y, 1e-3).item<double>();
    const double f = frequency_loss(x, y).item<double>();
    CHECK(recon_loss(x, y, 0.0, 1e-3).item<double>() == doctest::Approx(c));
    CHECK(recon_loss(x, y, 0.1, 1e-3).item<double>() == doctest::Approx(c + 0.1 * f));
    CHECK(recon_loss(x, y, 0.2, 1e-3).item<double>() == doctest::Approx(c + 0.2 * f));
}

TEST_CASE("mix_appearance printed algebra") {
    auto a11 = torch::tensor({0.0}).view({1, 1});
    auto a12 = torch::tensor({1.0}).view({1, 1});
    auto a21 = torch::tensor({10.0}).view({1, 1});
    auto a22 = torch::tensor({12.0}).view({1, 1});
    const auto m = mix_appearance(a11, a12, a21, a22);
    CHECK(m.a11.item<double>() == doctest::Approx(-1.0));
    CHECK(m.a12.item<double>() == doctest::Approx(2.0));
    CHECK(m.a21.item<double>() == doctest::Approx(11.0));
    CHECK(m.a22.item<double>() == doctest::Approx(11.0));
}

TEST_CASE("mix_appearance identities hold for random vectors") {
    torch::manual_seed(2);
    auto a11 = torch::randn({4, 16});
    auto a21 = torch::randn({4, 16});
    auto delta = torch::randn({4, 16});

    // equal deltas: mixing is the identity
    const auto id = mix_appearance(a11, a11 + delta, a21, a21 + delta);
    CHECK((id.a11 - a11).abs().max().item<double>() < 1e-6);
    CHECK((id.a12 - (a11 + delta)).abs().max().item<double>() < 1e-6);
    CHECK((id.a21 - a21).abs().max().item<double>() < 1e-6);
    CHECK((id.a22 - (a21 + delta)).abs().max().item<double>() < 1e-6);

    // pair-sum conservation
    auto a12 = torch::randn({4, 16});
    auto a22 = torch::randn({4, 16});
    const auto m = mix_appearance(a11, a12, a21, a22);
    CHECK(((m.a11 + m.a12) - (a11 + a12)).abs().max().item<double>() < 1e-6);
    CHECK(((m.a21 + m.a22) - (a21 + a22)).abs().max().item<double>() < 1e-6);

    CHECK_THROWS_AS(mix_appearance(a11, a12, a21, torch::randn({4, 8})), Error);
}

TEST_CASE("shuffle_content is the printed permutation and an involution") {
    auto tag = [](double v) {
        return std::vector<torch::Tensor>{torch::full({1, 1, 1, 1}, v)};
    };
    const auto s = shuffle_content(tag(11), tag(12), tag(21), tag(22));
    CHECK(s.c11[0].item<double>() == doctest::Approx(12));
    CHECK(s.c12[0].item<double>() == doctest::Approx(11));
    CHECK(s.c21[0].item<double>() == doctest::Approx(22));
    CHECK(s.c22[0].item<double>() == doctest::Approx(21));

    const auto twice = shuffle_content(s.c11, s.c12, s.c21, s.c22);
    CHECK(twice.c11[0].item<double>() == doctest::Approx(11));
    CHECK(twice.c12[0].item<double>() == doctest::Approx(12));
}

TEST_CASE("cross-reconstruction targets in a linear toy world") {
    // toy world: x = content + brightness, A(x) = mean, C(x) = x - mean,
    // D(c, a) = c + a. MeanShift by delta plays the transform t.
    torch::manual_seed(3);
    auto content1 = torch::randn({16});
    auto content2 = torch::randn({16});
    content1 -= content1.mean();
    content2 -= content2.mean();
    const double bright1 = 0.4, bright2 = 0.9, delta = 0.25;

    auto x11 = content1 + bright1;
    auto x12 = content1 + bright1 + delta;
    auto x21 = content2 + bright2;
    auto x22 = content2 + bright2 + delta;

    auto A = [](const torch::Tensor& x) { return x.mean().view({1, 1}); };
    auto C = [](const torch::Tensor& x) { return x - x.mean(); };
    auto D = [](const torch::Tensor& c, const torch::Tensor& a) { return c + a.item<double>(); };

    const auto mixed = mix_appearance(A(x11), A(x12), A(x21), A(x22));
    // shuffled content of view 11 is c12; target is x11 itself
    auto y11 = D(C(x12), mixed.a11);
    CHECK((y11 - x11).abs().max().item<double>() < 1e-6);
    auto y12 = D(C(x11), mixed.a12);
    CHECK((y12 - x12).abs().max().item<double>() < 1e-6);

    // replacement (whole-vector swap) leaks the other image's brightness (CAF)
    auto y11_replaced = D(C(x12), A(x21));
    CHECK((y11_replaced - x11).abs().max().item<double>() ==
          doctest::Approx(std::abs(bright2 - bright1)).epsilon(1e-6));
}

TEST_CASE("info_nce closed forms") {
    auto q = torch::tensor({1.0, 0.0});
    CHECK(info_nce(q, q, torch::Tensor(), 1.0).item<double>() == doctest::Approx(0.0));
    CHECK(info_nce(q, q, torch::zeros({0, 2}), 1.0).item<double>() == doctest::Approx(0.0));

    // one orthogonal negative at tau=1: -log(e/(e+1))
    auto neg = torch::tensor({{0.0, 1.0}});
    CHECK(info_nce(q, q, neg, 1.0).item<double>() ==
          doctest::Approx(0.31326168751822286).epsilon(1e-6));

    // moving the negative away from the query lowers the loss
    auto far_neg = torch::tensor({{-1.0, 0.0}});
    CHECK(info_nce(q, q, far_neg, 1.0).item<double>() <
          info_nce(q, q, neg, 1.0).item<double>());

    CHECK_THROWS_AS(info_nce(q, q, neg, 0.0), Error);
}

TEST_CASE("info_nce temperature-compensated rescaling invariance") {
    // multiplying tau by c and all dot products by c leaves the loss unchanged;
    // dot products scale with the unnormalized-vector norms, so feed raw logits
    auto l1 = torch::log_softmax(torch::tensor({2.0, 0.5, -1.0}) / 0.2, 0)[0];
    auto l2 = torch::log_softmax(torch::tensor({6.0, 1.5, -3.0}) / 0.6, 0)[0];
    CHECK(l1.item<double>() == doctest::Approx(l2.item<double>()).epsilon(1e-9));
}

TEST_CASE("batched symmetric info_nce counting and permutation invariance") {
    torch::manual_seed(5);
    auto Q = torch::randn({4, 8});
    auto K = torch::randn({4, 8});
    const double base = info_nce_batch(Q, K, 0.2).item<double>();
    CHECK(base >= 0.0);

    // permuting the batch (queries and keys together) leaves the loss unchanged
    auto perm = torch::tensor({2, 0, 3, 1});
    const double permuted =
        info_nce_batch(Q.index_select(0, perm), K.index_select(0, perm), 0.2)
            .item<double>();
    CHECK(base == doctest::Approx(permuted).epsilon(1e-6));

    // batch of 2: each query faces exactly one negative; reproduce the value
    // with scalar log-sum-exp arithmetic as an independent oracle
    auto qn = Q.slice(0, 0, 2) / Q.slice(0, 0, 2).norm(2, 1, true);
    auto kn = K.slice(0, 0, 2) / K.slice(0, 0, 2).norm(2, 1, true);
    auto s = qn.matmul(kn.t());  // 2x2 similarity at tau=1
    auto ce = [](double pos, double neg) {
        return -(pos - std::log(std::exp(pos) + std::exp(neg)));
    };
    const double s00 = s[0][0].item<double>(), s01 = s[0][1].item<double>();
    const double s10 = s[1][0].item<double>(), s11 = s[1][1].item<double>();
    const double manual = 0.25 * (ce(s00, s01) + ce(s11, s10) +   // q -> k
                                  ce(s00, s10) + ce(s11, s01));   // k -> q
    const double small = info_nce_batch(Q.slice(0, 0, 2), K.slice(0, 0, 2), 1.0).item<double>();
    CHECK(small == doctest::Approx(manual).epsilon(1e-5));
}

TEST_CASE("total_loss composition and batch-of-one fallback") {
    torch::manual_seed(17);
    NetConfig cfg = NetConfig::toy();
    cfg.stem_downsample = false;
    cfg.patch_size = 16;
    DualHeadUNet model(cfg);
    model->train();

    QuadrupleBatch batch{torch::rand({2, 3, 16, 16}), torch::rand({2, 3, 16, 16}),
                         torch::rand({2, 3, 16, 16}), torch::rand({2, 3, 16, 16})};
    LossBreakdown b;
    auto total = total_loss(model, batch, LossHyper{}, &b);
    CHECK(b.total == doctest::Approx((b.l_self + b.l_cross) +
                                     b.hyper.beta * (b.l_c_nce + b.l_a_nce))
                         .epsilon(1e-5));  // components accumulate in float32
    CHECK(b.l_self >= 0.0);
    CHECK(b.l_cross >= 0.0);
    CHECK(b.l_c_nce >= 0.0);
    CHECK(b.l_a_nce >= 0.0);
    CHECK(total.requires_grad());

    // beta = 0 drops the contrastive terms from the total
    LossHyper h0;
    h0.beta = 0.0;
    LossBreakdown b0;
    total_loss(model, batch, h0, &b0);
    CHECK(b0.total == doctest::Approx(b0.l_self + b0.l_cross).epsilon(1e-5));

    QuadrupleBatch single{batch.x11.slice(0, 0, 1), batch.x12.slice(0, 0, 1),
                          batch.x21.slice(0, 0, 1), batch.x22.slice(0, 0, 1)};
    LossBreakdown b1;
    total_loss(model, single, LossHyper{}, &b1);
    CHECK(b1.l_c_nce == 0.0);
    CHECK(b1.l_a_nce == 0.0);
}

TEST_CASE("gradient of total_loss versus finite differences (64-bit)") {
    torch::manual_seed(23);
    NetConfig cfg = NetConfig::toy();
    cfg.stem_downsample = false;
    cfg.patch_size = 16;
    DualHeadUNet model(cfg);
    model->to(torch::kFloat64);
    model->train();

    QuadrupleBatch batch{
        torch::rand({2, 3, 16, 16}, torch::kFloat64),
        torch::rand({2, 3, 16, 16}, torch::kFloat64),
        torch::rand({2, 3, 16, 16}, torch::kFloat64),
        torch::rand({2, 3, 16, 16}, torch::kFloat64)};
    const LossHyper hyper;

    model->zero_grad();
    auto loss = total_loss(model, batch, hyper, nullptr);
    loss.backward();

    std::mt19937_64 rng(31);
    std::vector<std::shared_ptr<torch::nn::Module>> groups = {
        model->content_encoder.ptr(), model->appearance_encoder.ptr(),
        model->decoder.ptr()};
    for (auto& group : groups) {
        auto params = group->parameters();
        for (int probe = 0; probe < 5; ++probe) {
            auto& p = params[rng() % params.size()];
            auto flat = p.flatten();
            const auto idx = static_cast<std::int64_t>(rng() % flat.numel());
            const double analytic = p.grad().flatten()[idx].item<double>();
            const double h = 1e-5;
            const double orig = flat[idx].item<double>();
            auto eval_loss = [&] {
                return total_loss(model, batch, hyper, nullptr).item<double>();
            };
            {
                torch::NoGradGuard g;
                flat[idx] = orig + h;
            }
            const double lp = eval_loss();
            {
                torch::NoGradGuard g;
                flat[idx] = orig - h;
            }
            const double lm = eval_loss();
            {
                torch::NoGradGuard g;
                flat[idx] = orig;
            }
            const double fd = (lp - lm) / (2 * h);
            // gradcheck semantics: the atol floor absorbs fd roundoff at this
            // objective's magnitude; rtol carries the 1e-3 relative criterion
            const double tol = 1e-4 + 1e-3 * std::max(std::abs(analytic), std::abs(fd));
            CHECK_MESSAGE(std::abs(analytic - fd) <= tol,
                          "analytic " << analytic << " vs fd " << fd);
        }
    }
}

TEST_CASE("csv row format") {
    LossBreakdown b;
    b.l_self = 1.5;
    b.l_cross = 2.5;
    b.l_c_nce = 0.25;
    b.l_a_nce = 0.125;
    b.total = 4.1875;
    CHECK(LossBreakdown::csv_header() == "step,l_self,l_cross,l_c_nce,l_a_nce,total,lr");
    CHECK(b.csv_row(12, 0.0002) == "12,1.5,2.5,0.25,0.125,4.1875,0.0002");
}

}  // TEST_SUITE
