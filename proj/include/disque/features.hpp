#pragma once

#include <optional>
#include <string>
#include <vector>

#include "disque/image.hpp"
#include "disque/net.hpp"

namespace disque {

// Coordinate tags for ablation slicing.
enum class ScaleTag { FULL = 0, HALF = 1 };
enum class PoolTag { MEAN = 0, STD = 1 };

struct FeatureLayout {
    std::vector<ScaleTag> scale;
    std::vector<PoolTag> pool;
    int dim() const { return static_cast<int>(scale.size()); }
};

// Layout of the quality feature vector for a given NetConfig:
// scale-1 means, scale-1 stds, scale-0.5 means, scale-0.5 stds, each segment
// holding the four blocks in depth order. D = 2*2*sum(C_b).
FeatureLayout feature_layout(const NetConfig& cfg);

// Appearance-encoder features with mean+std channel pooling at two scales.
// Inputs whose sides are not divisible by the network stride are
// reflect-padded; the half-scale pass uses antialiased bilinear downscaling.
std::vector<double> extract_features(const Image& img, DualHeadUNet& model);

// |z_ref - z_dis|, coordinatewise.
std::vector<double> fr_feature(const std::vector<double>& z_ref,
                               const std::vector<double>& z_dis);

// Frame-feature average for videos.
std::vector<double> video_features(const std::vector<std::vector<double>>& frames);

// Keeps the coordinates selected by an ablation variant.
std::vector<double> slice_variant(const std::vector<double>& z, const FeatureLayout& layout,
                                  bool multi_scale, bool with_std);

// Simple on-disk feature cache keyed by (image id, model checksum); the
// per-coordinate scale and pool tags complete the key for slicing.
class FeatureCache {
public:
    FeatureCache(std::string dir, std::string model_checksum);

    std::optional<std::vector<double>> get(const std::string& image_id) const;
    void put(const std::string& image_id, const std::vector<double>& z) const;

private:
    std::string file_for(const std::string& image_id) const;
    std::string dir_, checksum_;
};

// FNV-1a content hash of a file (used as the model checksum).
std::string file_checksum(const std::string& path);

}  // namespace disque
