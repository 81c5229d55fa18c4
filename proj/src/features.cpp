#include "disque/features.hpp"

#include <filesystem>
#include <fstream>

#include <opencv2/imgproc.hpp>

namespace disque {

namespace fs = std::filesystem;

FeatureLayout feature_layout(const NetConfig& cfg) {
    FeatureLayout layout;
    const int block_sum = cfg.appearance_dim();
    layout.scale.reserve(4 * block_sum);
    layout.pool.reserve(4 * block_sum);
    for (ScaleTag s : {ScaleTag::FULL, ScaleTag::HALF})
        for (PoolTag p : {PoolTag::MEAN, PoolTag::STD})
            for (int i = 0; i < block_sum; ++i) {
                layout.scale.push_back(s);
                layout.pool.push_back(p);
            }
    return layout;
}

namespace {

cv::Mat pad_to_divisor(const cv::Mat& m, int divisor) {
    const int ph = (divisor - m.rows % divisor) % divisor;
    const int pw = (divisor - m.cols % divisor) % divisor;
    if (ph == 0 && pw == 0) return m;
    cv::Mat padded;
    cv::copyMakeBorder(m, padded, 0, ph, 0, pw, cv::BORDER_REFLECT_101);
    return padded;
}

// One scale: per-channel spatial mean then std across the four block maps.
void pool_scale(DualHeadUNet& model, const cv::Mat& pixels, Colorspace cs,
                std::vector<double>* means, std::vector<double>* stds) {
    Image padded{pad_to_divisor(pixels, model->config().min_divisor()), cs,
                 BitOrigin::EIGHT_BIT};
    torch::NoGradGuard no_grad;
    const auto maps = model->appearance_maps(image_to_tensor(padded));
    for (const auto& m : maps) {
        const auto mu = m.mean({2, 3});
        const auto sd = torch::sqrt((m - mu.unsqueeze(-1).unsqueeze(-1)).pow(2).mean({2, 3}));
        const auto mu_a = mu.squeeze(0).contiguous();
        const auto sd_a = sd.squeeze(0).contiguous();
        for (std::int64_t i = 0; i < mu_a.numel(); ++i) {
            means->push_back(mu_a[i].item<double>());
            stds->push_back(sd_a[i].item<double>());
        }
    }
}

}  // namespace

std::vector<double> extract_features(const Image& img, DualHeadUNet& model) {
    validate_image(img);
    std::vector<double> mean_full, std_full, mean_half, std_half;
    pool_scale(model, img.pixels, img.colorspace, &mean_full, &std_full);

    cv::Mat half;
    cv::resize(img.pixels, half,
               cv::Size(std::max(1, img.cols() / 2), std::max(1, img.rows() / 2)), 0, 0,
               cv::INTER_AREA);  // antialiased half-resolution pass
    pool_scale(model, half, img.colorspace, &mean_half, &std_half);

    std::vector<double> z;
    z.reserve(mean_full.size() * 4);
    z.insert(z.end(), mean_full.begin(), mean_full.end());
    z.insert(z.end(), std_full.begin(), std_full.end());
    z.insert(z.end(), mean_half.begin(), mean_half.end());
    z.insert(z.end(), std_half.begin(), std_half.end());
    return z;
}

std::vector<double> fr_feature(const std::vector<double>& z_ref,
                               const std::vector<double>& z_dis) {
    if (z_ref.size() != z_dis.size())
        throw Error(ErrorClass::Config, "fr_feature length mismatch");
    std::vector<double> z(z_ref.size());
    for (size_t i = 0; i < z.size(); ++i) z[i] = std::abs(z_ref[i] - z_dis[i]);
    return z;
}

std::vector<double> video_features(const std::vector<std::vector<double>>& frames) {
    if (frames.empty()) throw Error(ErrorClass::Data, "no frames");
    std::vector<double> out(frames[0].size(), 0.0);
    for (const auto& f : frames) {
        if (f.size() != out.size())
            throw Error(ErrorClass::Config, "frame feature length mismatch");
        for (size_t i = 0; i < f.size(); ++i) out[i] += f[i];
    }
    for (auto& v : out) v /= static_cast<double>(frames.size());
    return out;
}

std::vector<double> slice_variant(const std::vector<double>& z, const FeatureLayout& layout,
                                  bool multi_scale, bool with_std) {
    if (static_cast<int>(z.size()) != layout.dim())
        throw Error(ErrorClass::Config, "feature/layout mismatch");
    std::vector<double> out;
    for (size_t i = 0; i < z.size(); ++i) {
        if (!multi_scale && layout.scale[i] == ScaleTag::HALF) continue;
        if (!with_std && layout.pool[i] == PoolTag::STD) continue;
        out.push_back(z[i]);
    }
    return out;
}

FeatureCache::FeatureCache(std::string dir, std::string model_checksum)
    : dir_(std::move(dir)), checksum_(std::move(model_checksum)) {
    fs::create_directories(dir_);
}

namespace {

std::uint64_t fnv1a(const void* data, size_t len, std::uint64_t h = 1469598103934665603ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

constexpr std::uint32_t kCacheMagic = 0x64697146;  // "Fqid"

}  // namespace

std::string FeatureCache::file_for(const std::string& image_id) const {
    const std::string key = image_id + "|" + checksum_;
    char name[32];
    std::snprintf(name, sizeof(name), "%016llx.feat",
                  static_cast<unsigned long long>(fnv1a(key.data(), key.size())));
    return (fs::path(dir_) / name).string();
}

std::optional<std::vector<double>> FeatureCache::get(const std::string& image_id) const {
    const std::string path = file_for(image_id);
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::uint32_t magic = 0;
    std::uint64_t keylen = 0;
    in.read(reinterpret_cast<char*>(&magic), sizeof(magic));
    in.read(reinterpret_cast<char*>(&keylen), sizeof(keylen));
    if (magic != kCacheMagic || keylen > 1 << 20) return std::nullopt;
    std::string key(keylen, '\0');
    in.read(key.data(), static_cast<std::streamsize>(keylen));
    if (key != image_id + "|" + checksum_) return std::nullopt;  // hash collision
    std::uint64_t dim = 0;
    in.read(reinterpret_cast<char*>(&dim), sizeof(dim));
    std::vector<double> z(dim);
    in.read(reinterpret_cast<char*>(z.data()), static_cast<std::streamsize>(dim * sizeof(double)));
    if (!in) return std::nullopt;
    return z;
}

void FeatureCache::put(const std::string& image_id, const std::vector<double>& z) const {
    const std::string path = file_for(image_id);
    std::ofstream out(path, std::ios::binary);
    const std::string key = image_id + "|" + checksum_;
    const std::uint64_t keylen = key.size(), dim = z.size();
    out.write(reinterpret_cast<const char*>(&kCacheMagic), sizeof(kCacheMagic));
    out.write(reinterpret_cast<const char*>(&keylen), sizeof(keylen));
    out.write(key.data(), static_cast<std::streamsize>(keylen));
    out.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
    out.write(reinterpret_cast<const char*>(z.data()),
              static_cast<std::streamsize>(dim * sizeof(double)));
}

std::string file_checksum(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorClass::Data, "cannot open " + path);
    std::uint64_t h = 1469598103934665603ULL;
    char buf[8192];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
        h = fnv1a(buf, static_cast<size_t>(in.gcount()), h);
    char hex[24];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

}  // namespace disque
