#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "disque/egip.hpp"
#include "disque/evalharness.hpp"
#include "disque/features.hpp"
#include "disque/image_io.hpp"
#include "disque/synth.hpp"
#include "disque/trainer.hpp"

namespace fs = std::filesystem;
using namespace disque;

namespace {

constexpr const char* kVersion = "0.1.0";

std::uint64_t string_hash(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// Every run drops a metadata file next to its primary output: the command,
// the effective config, its hash, and the seed, so runs can be reproduced
// from the metadata alone.
void write_run_metadata(const std::string& out_path, const std::string& command,
                        const nlohmann::ordered_json& effective, std::uint64_t seed) {
    nlohmann::ordered_json meta;
    meta["tool_version"] = kVersion;
    meta["command"] = command;
    meta["config"] = effective;
    char hex[24];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(string_hash(effective.dump())));
    meta["config_hash"] = hex;
    meta["seed"] = seed;
    const std::string path = out_path + ".runmeta.json";
    std::ofstream out(path);
    out << meta.dump(2) << '\n';
}

void print_effective(const std::string& command, const nlohmann::ordered_json& effective) {
    std::cout << command << " effective config: " << effective.dump() << "\n";
}

RegressMethod method_from_string(const std::string& s) {
    if (s == "ridge") return RegressMethod::RIDGE;
    if (s == "lasso") return RegressMethod::LASSO;
    if (s == "pls_svr") return RegressMethod::PLS_SVR;
    throw Error(ErrorClass::Config, "unknown method: " + s);
}

std::vector<RegressMethod> methods_from_flag(const std::string& s) {
    if (s == "auto")
        return {RegressMethod::PLS_SVR, RegressMethod::LASSO, RegressMethod::RIDGE};
    return {method_from_string(s)};
}

int cmd_make_manifest(const std::string& dir, const std::string& out,
                      const std::string& domain, bool no_screening, double theta_over,
                      double theta_under, double sat_threshold) {
    if (!fs::is_directory(dir)) throw Error(ErrorClass::Data, "not a directory: " + dir);
    const Colorspace cs = domain == "hdr" ? Colorspace::PQ_BT2100 : Colorspace::SRGB;

    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const auto ext = e.path().extension().string();
        if (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".PNG")
            files.push_back(e.path().string());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw Error(ErrorClass::Data, "no decodable images in " + dir);

    Manifest manifest;
    manifest.bank_domain = cs == Colorspace::PQ_BT2100 ? BankDomain::HDR : BankDomain::SDR;
    nlohmann::ordered_json rejects = nlohmann::json::array();
    for (const auto& f : files) {
        Image img;
        try {
            img = load_image(f, cs);
        } catch (const Error&) {
            continue;  // undecodable files are skipped, not fatal
        }
        bool accept = true;
        if (!no_screening && cs == Colorspace::SRGB) {
            const ScreeningReport rep =
                screen_image(img, theta_over, theta_under, sat_threshold);
            accept = rep.accepted;
            if (!accept) {
                nlohmann::ordered_json jr;
                jr["path"] = f;
                jr["is_grayscale"] = rep.is_grayscale;
                jr["overexposed_fraction"] = rep.overexposed_fraction;
                jr["underexposed_fraction"] = rep.underexposed_fraction;
                rejects.push_back(jr);
            }
        }
        if (accept) manifest.entries.push_back({f, cs, "train"});
    }
    if (manifest.entries.size() < 2)
        throw Error(ErrorClass::Data, "fewer than 2 images passed screening");
    manifest.save(out);
    std::ofstream rep(out + ".rejects.json");
    rep << rejects.dump(2) << '\n';
    std::cout << "manifest: " << manifest.entries.size() << " accepted, " << rejects.size()
              << " rejected\n";
    return 0;
}

int cmd_distort(const std::string& input, const std::string& out, std::string spec_text,
                bool random, std::uint64_t seed) {
    const Image img = load_image(input, Colorspace::SRGB);
    TransformSpec spec;
    if (random)
        spec = sample_transform(seed);
    else
        spec = TransformSpec::parse(spec_text);
    const Image result = apply_transform(img, spec);
    save_png8(out, result);
    std::cout << "spec: " << spec.serialize() << "\n";
    return 0;
}

int cmd_train(std::string config_path, const std::string& manifest_path,
              const std::string& out_dir, const std::string& resume,
              const CLI::App* sub, TrainConfig cli_overrides, bool toy) {
    TrainConfig cfg;
    if (!config_path.empty()) cfg = TrainConfig::from_json_file(config_path);
    if (toy) {
        cfg.net = NetConfig::toy();
        cfg.patch_size = cfg.net.patch_size;
    }
    // CLI > config > defaults.
    auto passed = [&](const std::string& flag) { return sub->count(flag) > 0; };
    if (passed("--steps")) cfg.steps = cli_overrides.steps;
    if (passed("--batch-size")) cfg.batch_size = cli_overrides.batch_size;
    if (passed("--lr0")) cfg.lr0 = cli_overrides.lr0;
    if (passed("--seed")) cfg.seed = cli_overrides.seed;
    if (passed("--patch-size")) cfg.patch_size = cli_overrides.patch_size;
    if (passed("--checkpoint-every")) cfg.checkpoint_every = cli_overrides.checkpoint_every;
    if (passed("--workers")) cfg.num_workers = cli_overrides.num_workers;
    if (passed("--deterministic")) cfg.deterministic = true;

    const Manifest manifest = Manifest::load(manifest_path);
    nlohmann::ordered_json effective = nlohmann::json::parse(cfg.to_json());
    effective["manifest"] = manifest_path;
    print_effective("train", effective);
    fs::create_directories(out_dir);
    write_run_metadata((fs::path(out_dir) / "train").string(), "train", effective,
                       cfg.seed);

    Trainer trainer(cfg, manifest, out_dir);
    if (!resume.empty()) trainer.resume_from(resume);
    const auto t0 = std::chrono::steady_clock::now();
    trainer.run([&](std::int64_t step, const LossBreakdown& b, double lr) {
        if (step % 100 == 0) {
            const auto dt = std::chrono::duration<double>(
                                std::chrono::steady_clock::now() - t0)
                                .count();
            std::cout << "step " << step << " total " << b.total << " lr " << lr << " ("
                      << dt << "s)\n";
        }
    });
    std::cout << "finished at step " << trainer.step() << "; log: " << trainer.log_path()
              << "\n";
    return 0;
}

int cmd_extract(const std::string& model_path, const std::vector<std::string>& inputs,
                const std::string& out, const std::string& colorspace,
                const std::string& cache_dir) {
    DualHeadUNet model = load_model(model_path);
    const Colorspace cs = colorspace_from_string(colorspace);
    const std::string checksum = file_checksum(model_path);
    std::unique_ptr<FeatureCache> cache;
    if (!cache_dir.empty()) cache = std::make_unique<FeatureCache>(cache_dir, checksum);

    std::ofstream os(out);
    if (!os) throw Error(ErrorClass::Data, "cannot write " + out);
    for (const auto& path : inputs) {
        std::vector<double> z;
        if (cache) {
            if (auto hit = cache->get(path)) z = *hit;
        }
        if (z.empty()) {
            z = extract_features(load_image(path, cs), model);
            if (cache) cache->put(path, z);
        }
        os << path;
        for (double v : z) os << ',' << v;
        os << '\n';
    }
    return 0;
}

int cmd_evaluate(const std::string& model_path, const std::string& records_path,
                 const std::string& out, int folds, double split, std::uint64_t seed,
                 const std::string& method, const std::string& cache_dir,
                 const std::string& colorspace) {
    DualHeadUNet model = load_model(model_path);
    const RecordsFile rf = RecordsFile::load(records_path);
    const std::string cache = cache_dir.empty() ? out + ".cache" : cache_dir;
    const auto records = build_records(rf, model, cache, file_checksum(model_path),
                                       colorspace_from_string(colorspace));
    const EvalReport report =
        cross_validate(records, folds, split, seed, methods_from_flag(method));
    std::ofstream os(out);
    os << report.to_json() << '\n';
    std::cout << report.table();
    return 0;
}

int cmd_ablate(const std::string& model_path, const std::string& records_path,
               const std::string& out, int folds, double split, std::uint64_t seed,
               const std::string& method, const std::string& cache_dir,
               const std::string& colorspace) {
    Checkpoint meta;
    DualHeadUNet model = load_model(model_path, &meta);
    const RecordsFile rf = RecordsFile::load(records_path);
    const std::string cache = cache_dir.empty() ? out + ".cache" : cache_dir;
    const auto records = build_records(rf, model, cache, file_checksum(model_path),
                                       colorspace_from_string(colorspace));
    const auto rows = ablate(records, feature_layout(meta.net), folds, split, seed,
                             methods_from_flag(method));
    const std::string table = ablation_table(rows);
    std::ofstream os(out);
    os << table;
    std::cout << table;
    return 0;
}

int cmd_egtm(const std::string& model_path, const std::string& example_src,
             const std::string& example_tgt, const std::string& input,
             const std::string& out, const std::string& mode,
             const std::string& input_colorspace) {
    DualHeadUNet model = load_model(model_path);
    const Colorspace in_cs = colorspace_from_string(input_colorspace);
    EgipRequest req;
    req.example_src = load_image(example_src, in_cs);
    req.example_tgt = load_image(example_tgt, Colorspace::SRGB);
    req.input_src = load_image(input, in_cs);
    req.mode = egip_mode_from_string(mode);
    Image result;
    if (in_cs == Colorspace::PQ_BT2100 && req.mode == EgipMode::MIXING) {
        result = egtm(req.input_src, req.example_src, req.example_tgt, model);
    } else {
        result = egip_apply(req, model);
    }
    save_png8(out, result);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"disque: disentangled content/appearance model toolkit"};
    app.require_subcommand(1);

    // make-manifest
    auto* mm = app.add_subcommand("make-manifest", "screen a directory into a manifest");
    std::string mm_dir, mm_out, mm_domain = "sdr";
    bool mm_noscreen = false;
    double mm_over = 0.30, mm_under = 0.30, mm_sat = 0.02;
    mm->add_option("--dir", mm_dir, "image directory")->required();
    mm->add_option("--out", mm_out, "output manifest path")->required();
    mm->add_option("--domain", mm_domain, "sdr|hdr")->check(CLI::IsMember({"sdr", "hdr"}));
    mm->add_flag("--no-screening", mm_noscreen, "include all decodable files");
    mm->add_option("--theta-over", mm_over, "overexposure fraction threshold");
    mm->add_option("--theta-under", mm_under, "underexposure fraction threshold");
    mm->add_option("--sat-threshold", mm_sat, "grayscale mean-saturation threshold");

    // distort
    auto* di = app.add_subcommand("distort", "apply a transform spec to an image");
    std::string di_in, di_out, di_spec;
    bool di_random = false;
    std::uint64_t di_seed = 0;
    di->add_option("--input", di_in)->required();
    di->add_option("--out", di_out)->required();
    di->add_option("--spec", di_spec, "kind:severity:seed[+...]");
    di->add_flag("--random", di_random, "sample a random spec");
    di->add_option("--seed", di_seed, "seed for --random");

    // train
    auto* tr = app.add_subcommand("train", "train the dual-head model");
    std::string tr_config, tr_manifest, tr_out, tr_resume;
    bool tr_toy = false, tr_det = false;
    TrainConfig tr_cli;
    tr->add_option("--config", tr_config, "JSON config file");
    tr->add_option("--manifest", tr_manifest)->required();
    tr->add_option("--out", tr_out, "output directory")->required();
    tr->add_option("--resume", tr_resume, "checkpoint to resume from");
    tr->add_flag("--toy", tr_toy, "toy network preset");
    tr->add_option("--steps", tr_cli.steps);
    tr->add_option("--batch-size", tr_cli.batch_size);
    tr->add_option("--lr0", tr_cli.lr0);
    tr->add_option("--seed", tr_cli.seed);
    tr->add_option("--patch-size", tr_cli.patch_size);
    tr->add_option("--checkpoint-every", tr_cli.checkpoint_every);
    tr->add_option("--workers", tr_cli.num_workers);
    tr->add_flag("--deterministic", tr_det, "single-worker bit-reproducible mode");

    // extract
    auto* ex = app.add_subcommand("extract", "extract quality features");
    std::string ex_model, ex_out, ex_cs = "srgb", ex_cache;
    std::vector<std::string> ex_inputs;
    ex->add_option("--model", ex_model)->required();
    ex->add_option("--input", ex_inputs, "image path(s)")->required();
    ex->add_option("--out", ex_out, "output CSV")->required();
    ex->add_option("--colorspace", ex_cs)->check(CLI::IsMember({"srgb", "pq"}));
    ex->add_option("--cache", ex_cache, "feature cache directory");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "cross-validated quality evaluation");
    std::string ev_model, ev_records, ev_out, ev_method = "auto", ev_cache, ev_cs = "srgb";
    int ev_folds = 10;
    double ev_split = 0.8;
    std::uint64_t ev_seed = 0;
    ev->add_option("--model", ev_model)->required();
    ev->add_option("--records", ev_records)->required();
    ev->add_option("--out", ev_out)->required();
    ev->add_option("--folds", ev_folds);
    ev->add_option("--split", ev_split);
    ev->add_option("--seed", ev_seed);
    ev->add_option("--method", ev_method)
        ->check(CLI::IsMember({"auto", "ridge", "lasso", "pls_svr"}));
    ev->add_option("--cache", ev_cache);
    ev->add_option("--colorspace", ev_cs)->check(CLI::IsMember({"srgb", "pq"}));

    // ablate
    auto* ab = app.add_subcommand("ablate", "scale x pooling feature ablation");
    std::string ab_model, ab_records, ab_out, ab_method = "ridge", ab_cache, ab_cs = "srgb";
    int ab_folds = 10;
    double ab_split = 0.8;
    std::uint64_t ab_seed = 0;
    ab->add_option("--model", ab_model)->required();
    ab->add_option("--records", ab_records)->required();
    ab->add_option("--out", ab_out)->required();
    ab->add_option("--folds", ab_folds);
    ab->add_option("--split", ab_split);
    ab->add_option("--seed", ab_seed);
    ab->add_option("--method", ab_method)
        ->check(CLI::IsMember({"auto", "ridge", "lasso", "pls_svr"}));
    ab->add_option("--cache", ab_cache);
    ab->add_option("--colorspace", ab_cs)->check(CLI::IsMember({"srgb", "pq"}));

    // egtm
    auto* eg = app.add_subcommand("egtm", "example-guided processing / tone mapping");
    std::string eg_model, eg_src, eg_tgt, eg_in, eg_out, eg_mode = "mixing",
                          eg_cs = "pq";
    eg->add_option("--model", eg_model)->required();
    eg->add_option("--example-src", eg_src)->required();
    eg->add_option("--example-tgt", eg_tgt)->required();
    eg->add_option("--input", eg_in)->required();
    eg->add_option("--out", eg_out)->required();
    eg->add_option("--mode", eg_mode)->check(CLI::IsMember({"mixing", "replacement"}));
    eg->add_option("--input-colorspace", eg_cs)->check(CLI::IsMember({"srgb", "pq"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (mm->parsed()) {
            nlohmann::ordered_json eff{{"dir", mm_dir},
                                       {"domain", mm_domain},
                                       {"no_screening", mm_noscreen},
                                       {"theta_over", mm_over},
                                       {"theta_under", mm_under},
                                       {"sat_threshold", mm_sat}};
            print_effective("make-manifest", eff);
            write_run_metadata(mm_out, "make-manifest", eff, 0);
            return cmd_make_manifest(mm_dir, mm_out, mm_domain, mm_noscreen, mm_over,
                                     mm_under, mm_sat);
        }
        if (di->parsed()) {
            if (di_spec.empty() && !di_random)
                throw Error(ErrorClass::Config, "distort needs --spec or --random");
            nlohmann::ordered_json eff{{"input", di_in},
                                       {"spec", di_spec},
                                       {"random", di_random},
                                       {"seed", di_seed}};
            print_effective("distort", eff);
            write_run_metadata(di_out, "distort", eff, di_seed);
            return cmd_distort(di_in, di_out, di_spec, di_random, di_seed);
        }
        if (tr->parsed()) {
            if (tr_det) tr_cli.deterministic = true;
            return cmd_train(tr_config, tr_manifest, tr_out, tr_resume, tr, tr_cli,
                             tr_toy);
        }
        if (ex->parsed()) {
            nlohmann::ordered_json eff{{"model", ex_model}, {"colorspace", ex_cs}};
            print_effective("extract", eff);
            write_run_metadata(ex_out, "extract", eff, 0);
            return cmd_extract(ex_model, ex_inputs, ex_out, ex_cs, ex_cache);
        }
        if (ev->parsed()) {
            nlohmann::ordered_json eff{{"model", ev_model},   {"records", ev_records},
                                       {"folds", ev_folds},   {"split", ev_split},
                                       {"seed", ev_seed},     {"method", ev_method},
                                       {"colorspace", ev_cs}};
            print_effective("evaluate", eff);
            write_run_metadata(ev_out, "evaluate", eff, ev_seed);
            return cmd_evaluate(ev_model, ev_records, ev_out, ev_folds, ev_split, ev_seed,
                                ev_method, ev_cache, ev_cs);
        }
        if (ab->parsed()) {
            nlohmann::ordered_json eff{{"model", ab_model},   {"records", ab_records},
                                       {"folds", ab_folds},   {"split", ab_split},
                                       {"seed", ab_seed},     {"method", ab_method},
                                       {"colorspace", ab_cs}};
            print_effective("ablate", eff);
            write_run_metadata(ab_out, "ablate", eff, ab_seed);
            return cmd_ablate(ab_model, ab_records, ab_out, ab_folds, ab_split, ab_seed,
                              ab_method, ab_cache, ab_cs);
        }
        if (eg->parsed()) {
            nlohmann::ordered_json eff{{"model", eg_model},
                                       {"example_src", eg_src},
                                       {"example_tgt", eg_tgt},
                                       {"input", eg_in},
                                       {"mode", eg_mode},
                                       {"input_colorspace", eg_cs}};
            print_effective("egtm", eff);
            write_run_metadata(eg_out, "egtm", eff, 0);
            return cmd_egtm(eg_model, eg_src, eg_tgt, eg_in, eg_out, eg_mode, eg_cs);
        }
    } catch (const Error& e) {
        std::cerr << "error[" << static_cast<int>(e.cls()) << "]: " << e.what() << "\n";
        return static_cast<int>(e.cls());
    } catch (const std::exception& e) {
        std::cerr << "error[4]: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
