
#include <random>

#include "disque/net.hpp"
#include "disque/objective.hpp"

#include "doctest_compat.hpp"

using namespace disque;

namespace {

// Small config for cheap forward passes (no stem downsampling: divisor 8).
NetConfig tiny_config() {
    NetConfig cfg = NetConfig::toy();
    cfg.stem_downsample = false;
    cfg.patch_size = 16;
    return cfg;
}

}  // namespace

TEST_SUITE("network") {

TEST_CASE("config channel arithmetic") {
    NetConfig full;  // 0.5x bottleneck
    CHECK(full.inner_channels(0) == 32);
    CHECK(full.block_channels(0) == 128);
    CHECK(full.block_channels(3) == 1024);
    CHECK(full.appearance_dim() == 1920);

    NetConfig toy = NetConfig::toy();
    CHECK(toy.block_channels(0) == 8);
    CHECK(toy.block_channels(3) == 64);
    CHECK(toy.appearance_dim() == 120);

    NetConfig bad;
    bad.width_multiplier = 0.013;
    CHECK_THROWS_AS(bad.validate(), Error);

    const NetConfig round = NetConfig::from_json(toy.to_json());
    CHECK(round.appearance_dim() == toy.appearance_dim());
    CHECK(round.patch_size == toy.patch_size);
}

TEST_CASE("instance_norm closed-form example and guards") {
    auto x = torch::tensor({1.0, 2.0, 3.0, 4.0}).view({1, 1, 2, 2});
    auto out = instance_norm(x).flatten();
    CHECK(out[0].item<double>() == doctest::Approx(-1.3416408).epsilon(1e-4));
    CHECK(out[1].item<double>() == doctest::Approx(-0.4472136).epsilon(1e-4));
    CHECK(out[2].item<double>() == doctest::Approx(0.4472136).epsilon(1e-4));
    CHECK(out[3].item<double>() == doctest::Approx(1.3416408).epsilon(1e-4));

    // constant channel: zero-variance guard keeps the output finite (all zeros)
    auto c = torch::full({1, 2, 3, 3}, 0.7);
    CHECK(instance_norm(c).abs().max().item<double>() < 1e-2);
    CHECK(torch::isfinite(instance_norm(c)).all().item<bool>());

    // affine invariance of standardization
    auto y = torch::randn({2, 3, 4, 4});
    auto n1 = instance_norm(y);
    auto n2 = instance_norm(y * 3.0 + 0.5);
    CHECK((n1 - n2).abs().max().item<double>() < 1e-5);
}

TEST_CASE("channel_attention algebra") {
    auto x = torch::randn({2, 4, 3, 3});
    auto ones = torch::ones({2, 4});
    CHECK((channel_attention(x, ones) - x).abs().max().item<double>() == 0.0);
    auto zero = torch::zeros({2, 4});
    CHECK(channel_attention(x, zero).abs().max().item<double>() == 0.0);

    // scalar product case
    auto xs = torch::tensor({1.0, 2.0}).view({1, 1, 1, 2});
    auto a = torch::tensor({3.0}).view({1, 1});
    auto out = channel_attention(xs, a).flatten();
    CHECK(out[0].item<double>() == doctest::Approx(3.0));
    CHECK(out[1].item<double>() == doctest::Approx(6.0));

    // bilinearity in the attention vector
    auto a1 = torch::randn({2, 4});
    auto a2 = torch::randn({2, 4});
    auto lhs = channel_attention(x, a1 + a2);
    auto rhs = channel_attention(x, a1) + channel_attention(x, a2);
    CHECK((lhs - rhs).abs().max().item<double>() < 1e-6);

    CHECK_THROWS_AS(channel_attention(x, torch::ones({2, 5})), Error);
}

TEST_CASE("encode_content map shapes match the documented arithmetic") {
    torch::manual_seed(1);
    NetConfig full;
    full.patch_size = 128;
    DualHeadUNet model(full);
    model->eval();
    torch::NoGradGuard no_grad;
    const auto maps = model->encode_content(torch::rand({1, 3, 128, 128}));
    REQUIRE(maps.size() == 4);
    const std::array<std::array<std::int64_t, 3>, 4> want = {
        {{128, 32, 32}, {256, 16, 16}, {512, 8, 8}, {1024, 4, 4}}};
    for (int b = 0; b < 4; ++b) {
        CHECK(maps[b].size(1) == want[b][0]);
        CHECK(maps[b].size(2) == want[b][1]);
        CHECK(maps[b].size(3) == want[b][2]);
    }
}

TEST_CASE("toy preset shapes at 64x64") {
    torch::manual_seed(1);
    DualHeadUNet model(NetConfig::toy());
    model->eval();
    torch::NoGradGuard no_grad;
    const auto maps = model->encode_content(torch::rand({1, 3, 64, 64}));
    const std::array<std::array<std::int64_t, 3>, 4> want = {
        {{8, 16, 16}, {16, 8, 8}, {32, 4, 4}, {64, 2, 2}}};
    for (int b = 0; b < 4; ++b) {
        CHECK(maps[b].size(1) == want[b][0]);
        CHECK(maps[b].size(2) == want[b][1]);
        CHECK(maps[b].size(3) == want[b][2]);
    }
    CHECK(model->encode_appearance(torch::rand({1, 3, 64, 64})).size(1) == 120);

    CHECK_THROWS_AS(model->encode_content(torch::rand({1, 3, 60, 60})), Error);
}

TEST_CASE("IN statistics at every IN layer output") {
    torch::manual_seed(3);
    DualHeadUNet model(NetConfig::toy());
    model->eval();
    torch::NoGradGuard no_grad;
    std::vector<torch::Tensor> probe;
    model->encode_content(torch::rand({2, 3, 64, 64}), &probe);
    REQUIRE(!probe.empty());
    for (const auto& t : probe) {
        const auto mean = t.mean({2, 3});
        const auto var = (t - mean.unsqueeze(-1).unsqueeze(-1)).pow(2).mean({2, 3});
        CHECK(mean.abs().max().item<double>() <= 1e-4);
        CHECK((var.sqrt() - 1.0).abs().max().item<double>() <= 1e-3);
    }
}

TEST_CASE("architecture census: no batch norm, IN only in the content encoder") {
    DualHeadUNet model(NetConfig::toy());
    int in_count = 0;
    for (const auto& item : model->named_modules("", false)) {
        CHECK(std::dynamic_pointer_cast<torch::nn::BatchNorm2dImpl>(item.value()) ==
              nullptr);
        CHECK(std::dynamic_pointer_cast<torch::nn::BatchNorm1dImpl>(item.value()) ==
              nullptr);
        if (std::dynamic_pointer_cast<InstanceNormImpl>(item.value())) {
            ++in_count;
            CHECK(item.key().rfind("content_encoder", 0) == 0);
        }
    }
    CHECK(in_count > 0);
    for (const auto& p : model->named_parameters())
        CHECK(p.key().find("batch") == std::string::npos);
}

TEST_CASE("decode shape contract and eval determinism") {
    torch::manual_seed(9);
    DualHeadUNet model(NetConfig::toy());
    model->eval();
    torch::NoGradGuard no_grad;
    auto x = torch::rand({2, 3, 64, 64});
    auto y1 = model->reconstruct(x);
    auto y2 = model->reconstruct(x);
    CHECK(y1.sizes() == x.sizes());
    CHECK(y1.min().item<double>() >= 0.0);
    CHECK(y1.max().item<double>() <= 1.0);
    CHECK(torch::equal(y1, y2));

    // config mismatch guard: a narrower net expects shorter appearance vectors
    NetConfig narrow = NetConfig::toy();
    narrow.width_multiplier = 0.25;
    DualHeadUNet other(narrow);
    auto c = model->encode_content(x);
    CHECK_THROWS_AS(other->decode(c, model->encode_appearance(x)), Error);
}

TEST_CASE("gradients reach every parameter group at init") {
    torch::manual_seed(5);
    DualHeadUNet model(tiny_config());
    model->train();
    auto x = torch::rand({1, 3, 16, 16});
    auto y = model->reconstruct(x);
    auto loss = (y - x).pow(2).sum();
    loss.backward();
    auto group_grad_norm = [&](const torch::nn::Module& m) {
        double norm = 0.0;
        for (const auto& p : m.parameters())
            if (p.grad().defined()) norm += p.grad().abs().sum().item<double>();
        return norm;
    };
    CHECK(group_grad_norm(*model->content_encoder) > 0.0);
    CHECK(group_grad_norm(*model->appearance_encoder) > 0.0);
    CHECK(group_grad_norm(*model->decoder) > 0.0);
}

TEST_CASE("finite-difference gradient check on the full forward pass") {
    // 64-bit mode, tiny toy inputs, 5 random scalar parameters per group
    torch::manual_seed(11);
    DualHeadUNet model(tiny_config());
    model->to(torch::kFloat64);
    model->train();
    auto x = torch::rand({1, 3, 16, 16}, torch::kFloat64);

    auto loss_fn = [&] {
        auto y = model->reconstruct(x);
        return charbonnier(x, y, 1e-3) + 0.1 * frequency_loss(x, y);
    };

    model->zero_grad();
    auto loss = loss_fn();
    loss.backward();

    std::mt19937_64 rng(7);
    std::vector<std::pair<std::string, std::shared_ptr<torch::nn::Module>>> groups = {
        {"content", model->content_encoder.ptr()},
        {"appearance", model->appearance_encoder.ptr()},
        {"decoder", model->decoder.ptr()}};
    for (auto& [name, group] : groups) {
        auto params = group->parameters();
        REQUIRE(!params.empty());
        for (int probe = 0; probe < 5; ++probe) {
            auto& p = params[rng() % params.size()];
            auto flat = p.flatten();
            const auto idx = static_cast<std::int64_t>(rng() % flat.numel());
            const double analytic = p.grad().flatten()[idx].item<double>();
            const double h = 1e-5;
            torch::NoGradGuard no_grad_scope;
            const double orig = flat[idx].item<double>();
            flat[idx] = orig + h;
            double lp, lm;
            {
                torch::AutoGradMode enable(true);
                lp = loss_fn().item<double>();
            }
            flat[idx] = orig - h;
            {
                torch::AutoGradMode enable(true);
                lm = loss_fn().item<double>();
            }
            flat[idx] = orig;
            const double fd = (lp - lm) / (2 * h);
            // gradcheck semantics: the atol floor absorbs fd roundoff at this
            // objective's magnitude; rtol carries the 1e-3 relative criterion
            const double tol = 1e-4 + 1e-3 * std::max(std::abs(analytic), std::abs(fd));
            CHECK_MESSAGE(std::abs(analytic - fd) <= tol,
                          name << " param grad " << analytic << " vs fd " << fd);
        }
    }
}

TEST_CASE("parameter round trip through an archive") {
    torch::manual_seed(21);
    DualHeadUNet model(tiny_config());
    torch::serialize::OutputArchive out;
    write_parameters(model, out);
    std::ostringstream buf;
    out.save_to(buf);

    torch::manual_seed(22);
    DualHeadUNet other(tiny_config());
    auto x = torch::rand({1, 3, 16, 16});
    CHECK_FALSE(torch::equal(model->reconstruct(x), other->reconstruct(x)));

    std::istringstream in_buf(buf.str());
    torch::serialize::InputArchive in;
    in.load_from(in_buf);
    read_parameters(other, in);
    model->eval();
    other->eval();
    torch::NoGradGuard no_grad;
    CHECK(torch::equal(model->reconstruct(x), other->reconstruct(x)));
}

TEST_CASE("image/tensor bridge round trip") {
    Image img = Image::constant(8, 8, {0.25f, 0.5f, 0.75f});
    auto t = image_to_tensor(img);
    CHECK(t.dim() == 4);
    CHECK(t.size(0) == 1);
    CHECK(t.size(1) == 3);
    CHECK(t.size(2) == 8);
    CHECK(t.size(3) == 8);
    CHECK(t[0][1][3][3].item<float>() == doctest::Approx(0.5));
    Image back = tensor_to_image(t);
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) {
            const cv::Vec3f a = img.pixels.at<cv::Vec3f>(r, c);
            const cv::Vec3f b = back.pixels.at<cv::Vec3f>(r, c);
            CHECK(a == b);
        }
}

}  // TEST_SUITE
