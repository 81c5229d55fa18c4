#include "disque/trainer.hpp"

#include <atomic>
#include <cmath>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <thread>

#include <nlohmann/json.hpp>

#include "disque/image_io.hpp"

namespace disque {

namespace fs = std::filesystem;

double TrainConfig::lr_at(std::int64_t step) const {
    return lr0 * std::pow(decay, static_cast<double>(step / 1000));
}

void TrainConfig::validate() const {
    if (batch_size < 1 || steps < 1 || lr0 <= 0.0 || decay <= 0.0 || patch_size < 1 ||
        checkpoint_every < 1 || hyper.tau <= 0.0 || hyper.eps_char <= 0.0 ||
        peak_nits <= 0.0)
        throw Error(ErrorClass::Config, "train config fields must be positive");
    net.validate();
    if (patch_size % net.min_divisor() != 0)
        throw Error(ErrorClass::Config, "patch_size incompatible with the network");
}

std::string TrainConfig::to_json() const {
    nlohmann::ordered_json j;
    j["batch_size"] = batch_size;
    j["steps"] = steps;
    j["lr0"] = lr0;
    j["decay"] = decay;
    j["lambda_f"] = hyper.lambda_f;
    j["beta"] = hyper.beta;
    j["tau"] = hyper.tau;
    j["eps_char"] = hyper.eps_char;
    j["patch_size"] = patch_size;
    j["seed"] = seed;
    j["checkpoint_every"] = checkpoint_every;
    j["log_every"] = log_every;
    j["num_workers"] = num_workers;
    j["deterministic"] = deterministic;
    j["peak_nits"] = peak_nits;
    std::vector<std::string> kinds;
    for (auto k : sdr_kinds) kinds.push_back(to_string(k));
    j["sdr_kinds"] = kinds;
    j["max_depth"] = max_depth;
    j["freeze_data"] = freeze_data;
    j["net"] = nlohmann::json::parse(net.to_json());
    return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    TrainConfig cfg;
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.steps = j.value("steps", cfg.steps);
    cfg.lr0 = j.value("lr0", cfg.lr0);
    cfg.decay = j.value("decay", cfg.decay);
    cfg.hyper.lambda_f = j.value("lambda_f", cfg.hyper.lambda_f);
    cfg.hyper.beta = j.value("beta", cfg.hyper.beta);
    cfg.hyper.tau = j.value("tau", cfg.hyper.tau);
    cfg.hyper.eps_char = j.value("eps_char", cfg.hyper.eps_char);
    cfg.patch_size = j.value("patch_size", cfg.patch_size);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.checkpoint_every = j.value("checkpoint_every", cfg.checkpoint_every);
    cfg.log_every = j.value("log_every", cfg.log_every);
    cfg.num_workers = j.value("num_workers", cfg.num_workers);
    cfg.deterministic = j.value("deterministic", cfg.deterministic);
    cfg.peak_nits = j.value("peak_nits", cfg.peak_nits);
    if (j.contains("sdr_kinds"))
        for (const auto& k : j["sdr_kinds"])
            cfg.sdr_kinds.push_back(distortion_kind_from_string(k.get<std::string>()));
    cfg.max_depth = j.value("max_depth", cfg.max_depth);
    cfg.freeze_data = j.value("freeze_data", cfg.freeze_data);
    if (j.contains("net")) cfg.net = NetConfig::from_json(j["net"].dump());
    return cfg;
}

TrainConfig TrainConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorClass::Config, "cannot open config: " + path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return from_json(text);
}

Image BankTransform::apply(const Image& img, double peak_nits) const {
    (void)peak_nits;
    if (domain == BankDomain::SDR) return apply_transform(img, sdr);
    return tone_map(img, hdr, peak_nits);
}

std::string BankTransform::serialize() const {
    return domain == BankDomain::SDR ? sdr.serialize() : hdr.serialize();
}

BankTransform sample_bank_transform(BankDomain domain, std::uint64_t seed,
                                    const std::vector<DistortionKind>& kinds,
                                    int max_depth) {
    BankTransform t;
    t.domain = domain;
    if (domain == BankDomain::SDR) {
        t.sdr = kinds.empty() ? sample_transform(seed)
                              : sample_transform(seed, kinds, max_depth);
        return t;
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> od(0, 2);
    std::uniform_int_distribution<int> jd(1, 4);
    switch (od(rng)) {
        case 0: t.hdr.op = TmoOperator::HABLE; break;
        case 1: t.hdr.op = TmoOperator::REINHARD02; break;
        default: t.hdr.op = TmoOperator::ITU21_A; break;
    }
    if (t.hdr.op == TmoOperator::ITU21_A) {
        // Log-uniform over the nominal luminance range.
        std::uniform_real_distribution<double> ld(std::log(100.0), std::log(10000.0));
        t.hdr.param = std::exp(ld(rng));
    } else {
        std::uniform_real_distribution<double> dd(0.0, 1.0);
        t.hdr.param = dd(rng);
    }
    t.hdr.jpeg_level = jd(rng);
    return t;
}

const Image& ImageCache::get(const ManifestEntry& entry) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(entry.path);
    if (it != cache_.end()) return it->second;
    auto [ins, ok] = cache_.emplace(entry.path, load_image(entry.path, entry.colorspace));
    return ins->second;
}

std::uint64_t step_seed(std::uint64_t master, std::int64_t step, std::uint64_t slot) {
    // splitmix64 over a composed key
    std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(step) + 1) +
                      0xbf58476d1ce4e5b9ULL * (slot + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

namespace {

// Crop helper: transform a region twice the patch size centered on the crop,
// then cut the patch out of both the clean and transformed regions.
struct ViewPair {
    Image clean, transformed;
};

ViewPair make_views(const Image& src, const BankTransform& t, int patch, double peak_nits,
                    std::mt19937_64& rng) {
    const int region = std::min({2 * patch, src.rows(), src.cols()});
    if (region < patch) throw Error(ErrorClass::Data, "image smaller than patch size");
    std::uniform_int_distribution<int> rd(0, src.rows() - region);
    std::uniform_int_distribution<int> cd(0, src.cols() - region);
    const int rr = rd(rng), cc = cd(rng);
    Image region_img{src.pixels(cv::Rect(cc, rr, region, region)).clone(), src.colorspace,
                     src.bit_origin};
    Image distorted = t.apply(region_img, peak_nits);
    const int off = (region - patch) / 2;
    const cv::Rect crop(off, off, patch, patch);
    ViewPair vp;
    vp.clean = {region_img.pixels(crop).clone(), region_img.colorspace, src.bit_origin};
    vp.transformed = {distorted.pixels(crop).clone(), distorted.colorspace,
                      distorted.bit_origin};
    return vp;
}

bool patch_has_content(const Image& img) {
    cv::Scalar mean, stddev;
    cv::meanStdDev(img.pixels, mean, stddev);
    return stddev[0] + stddev[1] + stddev[2] > 1e-3;
}

}  // namespace

QuadrupleSample build_quadruple(const Manifest& manifest, const TrainConfig& cfg,
                                ImageCache& cache, std::uint64_t seed) {
    const auto train = manifest.split_entries("train");
    const auto& pool = train.size() >= 2 ? train : manifest.entries;
    if (pool.size() < 2)
        throw Error(ErrorClass::Data, "need at least two images to build a quadruple");

    std::mt19937_64 rng(seed);
    constexpr int kMaxRetries = 32;
    for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
        std::uniform_int_distribution<size_t> pick(0, pool.size() - 1);
        const size_t i1 = pick(rng);
        size_t i2 = pick(rng);
        if (i1 == i2) continue;  // two distinct source images
        const BankTransform t =
            sample_bank_transform(manifest.bank_domain, rng(), cfg.sdr_kinds, cfg.max_depth);
        ViewPair v1 = make_views(cache.get(pool[i1]), t, cfg.patch_size, cfg.peak_nits, rng);
        ViewPair v2 = make_views(cache.get(pool[i2]), t, cfg.patch_size, cfg.peak_nits, rng);
        if (!patch_has_content(v1.clean) || !patch_has_content(v2.clean)) continue;
        QuadrupleSample q;
        q.x11 = std::move(v1.clean);
        q.x12 = std::move(v1.transformed);
        q.x21 = std::move(v2.clean);
        q.x22 = std::move(v2.transformed);
        q.transform = t.serialize();
        return q;
    }
    throw Error(ErrorClass::Data, "quadruple construction exhausted retries (flat patches?)");
}

QuadrupleBatch collate(const std::vector<QuadrupleSample>& samples) {
    std::vector<torch::Tensor> t11, t12, t21, t22;
    for (const auto& s : samples) {
        t11.push_back(image_to_tensor(s.x11));
        t12.push_back(image_to_tensor(s.x12));
        t21.push_back(image_to_tensor(s.x21));
        t22.push_back(image_to_tensor(s.x22));
    }
    return {torch::cat(t11, 0), torch::cat(t12, 0), torch::cat(t21, 0),
            torch::cat(t22, 0)};
}

void save_checkpoint(const std::string& path, const DualHeadUNet& model,
                     torch::optim::Adam* optimizer, const TrainConfig& cfg,
                     std::int64_t step) {
    torch::serialize::OutputArchive ar;
    ar.write("version", torch::tensor(kCheckpointVersion));
    ar.write("net_config", cfg.net.to_json());
    ar.write("train_config", cfg.to_json());
    ar.write("step", torch::tensor(step));
    torch::serialize::OutputArchive params;
    write_parameters(model, params);
    ar.write("parameters", params);
    if (optimizer) {
        torch::serialize::OutputArchive opt;
        optimizer->save(opt);
        ar.write("optimizer", opt);
    }
    ar.save_to(path);
}

Checkpoint load_checkpoint(const std::string& path, DualHeadUNet* model,
                           torch::optim::Adam* optimizer) {
    if (!fs::exists(path)) throw Error(ErrorClass::Data, "checkpoint missing: " + path);
    torch::serialize::InputArchive ar;
    try {
        ar.load_from(path);
    } catch (const std::exception& e) {
        throw Error(ErrorClass::Data, std::string("corrupted checkpoint: ") + e.what());
    }
    torch::Tensor version;
    ar.read("version", version);
    if (version.item<std::int64_t>() != kCheckpointVersion)
        throw Error(ErrorClass::Data, "unsupported checkpoint version");
    Checkpoint ck;
    c10::IValue net_json, train_json;
    ar.read("net_config", net_json);
    ar.read("train_config", train_json);
    ck.net = NetConfig::from_json(net_json.toStringRef());
    ck.train = TrainConfig::from_json(train_json.toStringRef());
    torch::Tensor step;
    ar.read("step", step);
    ck.step = step.item<std::int64_t>();
    if (model) {
        torch::serialize::InputArchive params;
        ar.read("parameters", params);
        read_parameters(*model, params);
    }
    if (optimizer) {
        torch::serialize::InputArchive opt;
        if (!ar.try_read("optimizer", opt))
            throw Error(ErrorClass::Data, "checkpoint has no optimizer state");
        optimizer->load(opt);
    }
    return ck;
}

DualHeadUNet load_model(const std::string& path, Checkpoint* meta) {
    Checkpoint ck = load_checkpoint(path, nullptr, nullptr);
    DualHeadUNet model(ck.net);
    load_checkpoint(path, &model, nullptr);
    model->eval();
    if (meta) *meta = ck;
    return model;
}

Trainer::Trainer(TrainConfig cfg, Manifest manifest, std::string out_dir)
    : cfg_(std::move(cfg)), manifest_(std::move(manifest)), out_dir_(std::move(out_dir)) {
    cfg_.validate();
    fs::create_directories(out_dir_);
    log_path_ = (fs::path(out_dir_) / "train_log.csv").string();
    if (cfg_.deterministic) torch::set_num_threads(1);
    torch::manual_seed(cfg_.seed);
    model_ = DualHeadUNet(cfg_.net);
    model_->train();
    optimizer_ = std::make_unique<torch::optim::Adam>(
        model_->parameters(), torch::optim::AdamOptions(cfg_.lr0));
}

void Trainer::resume_from(const std::string& checkpoint_path) {
    const Checkpoint ck = load_checkpoint(checkpoint_path, &model_, optimizer_.get());
    step_ = ck.step;
    resumed_ = true;
}

QuadrupleBatch Trainer::batch_for_step(std::int64_t step) {
    if (cfg_.freeze_data) step = 0;
    std::vector<QuadrupleSample> samples;
    samples.reserve(cfg_.batch_size);
    for (int b = 0; b < cfg_.batch_size; ++b)
        samples.push_back(
            build_quadruple(manifest_, cfg_, cache_, step_seed(cfg_.seed, step, b)));
    return collate(samples);
}

void Trainer::train_step(const QuadrupleBatch& batch, LossBreakdown* breakdown) {
    const double lr = cfg_.lr_at(step_);
    for (auto& group : optimizer_->param_groups())
        static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
    optimizer_->zero_grad();
    auto total = total_loss(model_, batch, cfg_.hyper, breakdown);
    if (!std::isfinite(breakdown->total)) {
        const std::string snap = (fs::path(out_dir_) / "abort_snapshot.pt").string();
        torch::serialize::OutputArchive ar;
        ar.write("step", torch::tensor(step_));
        ar.write("x11", batch.x11);
        ar.write("x12", batch.x12);
        ar.write("x21", batch.x21);
        ar.write("x22", batch.x22);
        ar.save_to(snap);
        throw Error(ErrorClass::Numeric,
                    "non-finite loss at step " + std::to_string(step_) +
                        "; inputs saved to " + snap);
    }
    total.backward();
    optimizer_->step();
}

void Trainer::write_checkpoint(std::int64_t step) {
    const std::string path =
        (fs::path(out_dir_) / ("checkpoint_step" + std::to_string(step) + ".pt")).string();
    save_checkpoint(path, model_, optimizer_.get(), cfg_, step);
    const std::string latest = (fs::path(out_dir_) / "checkpoint_latest.pt").string();
    fs::copy_file(path, latest, fs::copy_options::overwrite_existing);
}

std::int64_t Trainer::run(const StepHook& hook) {
    std::ofstream log(log_path_, resumed_ ? std::ios::app : std::ios::out);
    if (!log) throw Error(ErrorClass::Data, "cannot open training log " + log_path_);
    if (!resumed_) log << LossBreakdown::csv_header() << '\n';

    const int workers = cfg_.deterministic ? 1 : std::max(1, cfg_.num_workers);

    // Bounded ordered prefetch; batches are pure functions of the step index,
    // so worker count never changes the data stream.
    std::mutex mu;
    std::condition_variable cv;
    std::map<std::int64_t, QuadrupleBatch> ready;
    std::atomic<std::int64_t> next_claim{step_};
    std::atomic<bool> failed{false};
    std::string fail_msg;
    const std::int64_t last = cfg_.steps;
    const size_t max_ahead = static_cast<size_t>(2 * workers + 1);

    auto worker_fn = [&] {
        try {
            while (!failed) {
                const std::int64_t s = next_claim.fetch_add(1);
                if (s >= last) break;
                auto batch = batch_for_step(s);
                std::unique_lock<std::mutex> lock(mu);
                cv.wait(lock, [&] { return ready.size() < max_ahead || failed; });
                ready.emplace(s, std::move(batch));
                cv.notify_all();
            }
        } catch (const std::exception& e) {
            std::lock_guard<std::mutex> lock(mu);
            failed = true;
            fail_msg = e.what();
            cv.notify_all();
        }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker_fn);

    while (step_ < last) {
        QuadrupleBatch batch;
        {
            std::unique_lock<std::mutex> lock(mu);
            cv.wait(lock, [&] { return ready.count(step_) > 0 || failed; });
            if (failed) break;
            batch = std::move(ready.at(step_));
            ready.erase(step_);
            cv.notify_all();
        }
        LossBreakdown breakdown;
        try {
            train_step(batch, &breakdown);
        } catch (...) {
            {
                std::lock_guard<std::mutex> lock(mu);
                failed = true;
                cv.notify_all();
            }
            for (auto& t : pool) t.join();
            throw;
        }
        const double lr = cfg_.lr_at(step_);
        if (step_ % cfg_.log_every == 0) log << breakdown.csv_row(step_, lr) << '\n';
        if (hook) hook(step_, breakdown, lr);
        ++step_;
        if (step_ % cfg_.checkpoint_every == 0) write_checkpoint(step_);
    }
    for (auto& t : pool) t.join();
    if (failed && step_ < last) throw Error(ErrorClass::Data, "data worker failed: " + fail_msg);

    log.flush();
    write_checkpoint(step_);
    return step_;
}

}  // namespace disque
