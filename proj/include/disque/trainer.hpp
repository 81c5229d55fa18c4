#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "disque/distortion.hpp"
#include "disque/manifest.hpp"
#include "disque/net.hpp"
#include "disque/objective.hpp"
#include "disque/tonemap.hpp"

namespace disque {

struct TrainConfig {
    int batch_size = 8;               // reference setup uses 36
    std::int64_t steps = 2000;        // reference setup uses 400000
    double lr0 = 0.0002;
    double decay = 0.99;              // applied every 1000 steps
    LossHyper hyper;
    int patch_size = 128;
    std::uint64_t seed = 0;
    std::int64_t checkpoint_every = 1000;
    std::int64_t log_every = 1;
    int num_workers = 2;
    bool deterministic = false;
    double peak_nits = 1000.0;
    std::vector<DistortionKind> sdr_kinds;  // empty means the full bank of 25
    int max_depth = 3;
    bool freeze_data = false;  // every step reuses the step-0 batch (overfit smoke)
    NetConfig net;

    double lr_at(std::int64_t step) const;  // lr0 * decay^(step/1000)
    void validate() const;

    std::string to_json() const;
    static TrainConfig from_json(const std::string& text);
    static TrainConfig from_json_file(const std::string& path);
};

// One element of either bank, behind a single interface.
struct BankTransform {
    BankDomain domain = BankDomain::SDR;
    TransformSpec sdr;
    TmoSpec hdr;

    Image apply(const Image& img, double peak_nits) const;
    std::string serialize() const;
};

BankTransform sample_bank_transform(BankDomain domain, std::uint64_t seed,
                                    const std::vector<DistortionKind>& kinds,
                                    int max_depth);

struct QuadrupleSample {
    Image x11, x12, x21, x22;
    std::string transform;  // canonical spec of the shared t
};

// Decoded-image cache shared across quadruple builds.
class ImageCache {
public:
    const Image& get(const ManifestEntry& entry);

private:
    std::unordered_map<std::string, Image> cache_;
    std::mutex mu_;
};

// Builds the four training views from two distinct manifest images: the
// transform is applied to a region twice the patch size centered on the crop,
// then center-cropped, so resize/blur border behavior stays honest.
QuadrupleSample build_quadruple(const Manifest& manifest, const TrainConfig& cfg,
                                ImageCache& cache, std::uint64_t seed);

QuadrupleBatch collate(const std::vector<QuadrupleSample>& samples);

// Deterministic per-step seed derivation (training data is a pure function
// of master seed and step index, which makes resume bit-exact).
std::uint64_t step_seed(std::uint64_t master, std::int64_t step, std::uint64_t slot);

struct Checkpoint {
    NetConfig net;
    TrainConfig train;
    std::int64_t step = 0;
};

inline constexpr std::int64_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const DualHeadUNet& model,
                     torch::optim::Adam* optimizer, const TrainConfig& cfg,
                     std::int64_t step);
// Loads config+step; model/optimizer are filled when non-null.
Checkpoint load_checkpoint(const std::string& path, DualHeadUNet* model,
                           torch::optim::Adam* optimizer);
DualHeadUNet load_model(const std::string& path, Checkpoint* meta = nullptr);

class Trainer {
public:
    Trainer(TrainConfig cfg, Manifest manifest, std::string out_dir);

    // Optional per-step observer (step, breakdown, lr).
    using StepHook = std::function<void(std::int64_t, const LossBreakdown&, double)>;

    // Runs from the current step to cfg.steps; returns final step count.
    std::int64_t run(const StepHook& hook = nullptr);

    void resume_from(const std::string& checkpoint_path);

    DualHeadUNet& model() { return model_; }
    std::int64_t step() const { return step_; }
    const std::string& log_path() const { return log_path_; }

private:
    void train_step(const QuadrupleBatch& batch, LossBreakdown* breakdown);
    QuadrupleBatch batch_for_step(std::int64_t step);
    void write_checkpoint(std::int64_t step);

    TrainConfig cfg_;
    Manifest manifest_;
    std::string out_dir_, log_path_;
    DualHeadUNet model_{nullptr};
    std::unique_ptr<torch::optim::Adam> optimizer_;
    ImageCache cache_;
    std::int64_t step_ = 0;
    bool resumed_ = false;
};

}  // namespace disque
