#include "disque/evalharness.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "disque/image_io.hpp"

namespace disque {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(field);
    return out;
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

RecordsFile RecordsFile::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorClass::Data, "cannot open records file: " + path);
    RecordsFile rf;
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorClass::Data, "empty records file");
    const auto header = split_csv_line(line);
    if (header.size() < 3 || header[0] != "ref_path" || header[1] != "dis_path" ||
        header[2] != "mos")
        throw Error(ErrorClass::Data,
                    "records header must be ref_path,dis_path,mos[,content_id]");
    rf.has_content_ids = header.size() >= 4 && header[3] == "content_id";
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() < 3)
            throw Error(ErrorClass::Data, "records line " + std::to_string(lineno) +
                                              ": expected >= 3 fields");
        rf.ref_paths.push_back(f[0]);
        rf.dis_paths.push_back(f[1]);
        try {
            rf.mos.push_back(std::stod(f[2]));
        } catch (const std::exception&) {
            throw Error(ErrorClass::Data,
                        "records line " + std::to_string(lineno) + ": bad mos");
        }
        rf.content_ids.push_back(rf.has_content_ids && f.size() >= 4 ? f[3] : "");
    }
    return rf;
}

std::vector<QualityRecord> build_records(const RecordsFile& rf, DualHeadUNet& model,
                                         const std::string& cache_dir,
                                         const std::string& model_checksum,
                                         Colorspace colorspace) {
    FeatureCache cache(cache_dir, model_checksum);
    auto features_of = [&](const std::string& path) {
        if (auto hit = cache.get(path)) return *hit;
        const Image img = load_image(path, colorspace);
        auto z = extract_features(img, model);
        cache.put(path, z);
        return z;
    };
    std::vector<QualityRecord> records;
    records.reserve(rf.mos.size());
    for (size_t i = 0; i < rf.mos.size(); ++i) {
        QualityRecord r;
        r.ref_id = rf.ref_paths[i];
        r.dis_id = rf.dis_paths[i];
        r.z = fr_feature(features_of(rf.ref_paths[i]), features_of(rf.dis_paths[i]));
        r.mos = rf.mos[i];
        r.content_id = rf.content_ids[i];
        records.push_back(std::move(r));
    }
    return records;
}

namespace {

struct Split {
    std::vector<size_t> train, test;
};

Split make_split(const std::vector<QualityRecord>& records, double split_frac,
                 std::mt19937_64& rng, bool content_disjoint) {
    Split s;
    if (content_disjoint) {
        std::set<std::string> ids;
        for (const auto& r : records) ids.insert(r.content_id);
        std::vector<std::string> contents(ids.begin(), ids.end());
        std::shuffle(contents.begin(), contents.end(), rng);
        const size_t n_train =
            static_cast<size_t>(std::ceil(split_frac * contents.size()));
        std::set<std::string> train_ids(contents.begin(), contents.begin() + n_train);
        for (size_t i = 0; i < records.size(); ++i)
            (train_ids.count(records[i].content_id) ? s.train : s.test).push_back(i);
    } else {
        std::vector<size_t> perm(records.size());
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        const size_t n_train = static_cast<size_t>(std::ceil(split_frac * perm.size()));
        s.train.assign(perm.begin(), perm.begin() + n_train);
        s.test.assign(perm.begin() + n_train, perm.end());
    }
    return s;
}

}  // namespace

EvalReport cross_validate(const std::vector<QualityRecord>& records, int folds,
                          double split, std::uint64_t seed,
                          const std::vector<RegressMethod>& methods) {
    if (records.size() < 10) throw Error(ErrorClass::Data, "need at least 10 records");
    if (methods.empty()) throw Error(ErrorClass::Config, "no regression methods given");
    const Eigen::Index d = static_cast<Eigen::Index>(records[0].z.size());

    bool content_disjoint = true;
    for (const auto& r : records)
        if (r.content_id.empty()) content_disjoint = false;

    EvalReport report;
    report.content_disjoint = content_disjoint;
    std::mt19937_64 rng(seed);
    for (int f = 0; f < folds; ++f) {
        const Split s = make_split(records, split, rng, content_disjoint);
        if (s.test.size() < 3 || s.train.size() < 10)
            throw Error(ErrorClass::Data, "split produced degenerate fold sizes");
        Eigen::MatrixXd Xt(s.train.size(), d), Xv(s.test.size(), d);
        Eigen::VectorXd yt(s.train.size());
        std::vector<double> yv(s.test.size());
        for (size_t i = 0; i < s.train.size(); ++i) {
            const auto& r = records[s.train[i]];
            Xt.row(i) = Eigen::Map<const Eigen::VectorXd>(r.z.data(), d).transpose();
            yt[i] = r.mos;
        }
        for (size_t i = 0; i < s.test.size(); ++i) {
            const auto& r = records[s.test[i]];
            Xv.row(i) = Eigen::Map<const Eigen::VectorXd>(r.z.data(), d).transpose();
            yv[i] = r.mos;
        }

        double best_score = -2.0;
        LinearModel best_model;
        for (const auto m : methods) {
            double score = 0.0;
            LinearModel model;
            try {
                model = fit_regressor(Xt, yt, m, 5, seed + f, &score);
            } catch (const Error&) {
                continue;
            }
            if (score > best_score) {
                best_score = score;
                best_model = model;
            }
        }
        if (best_score <= -2.0)
            throw Error(ErrorClass::Numeric, "no method produced a usable model");

        FoldResult fr;
        fr.metrics = compute_metrics(best_model.predict(Xv), yv);
        fr.regressor = best_model.description;
        report.folds.push_back(std::move(fr));
    }

    std::vector<double> pccs, sroccs, rmses;
    for (const auto& fr : report.folds) {
        pccs.push_back(fr.metrics.pcc);
        sroccs.push_back(fr.metrics.srocc);
        rmses.push_back(fr.metrics.rmse);
    }
    report.median = {median_of(pccs), median_of(sroccs), median_of(rmses)};
    report.mean = {std::accumulate(pccs.begin(), pccs.end(), 0.0) / pccs.size(),
                   std::accumulate(sroccs.begin(), sroccs.end(), 0.0) / sroccs.size(),
                   std::accumulate(rmses.begin(), rmses.end(), 0.0) / rmses.size()};
    return report;
}

std::string EvalReport::to_json() const {
    nlohmann::ordered_json j;
    j["content_disjoint"] = content_disjoint;
    j["folds"] = nlohmann::json::array();
    for (const auto& f : folds) {
        nlohmann::ordered_json jf;
        jf["pcc"] = f.metrics.pcc;
        jf["srocc"] = f.metrics.srocc;
        jf["rmse"] = f.metrics.rmse;
        jf["regressor"] = f.regressor;
        j["folds"].push_back(jf);
    }
    auto agg = [](const Metrics& m) {
        nlohmann::ordered_json ja;
        ja["pcc"] = m.pcc;
        ja["srocc"] = m.srocc;
        ja["rmse"] = m.rmse;
        return ja;
    };
    j["median"] = agg(median);
    j["mean"] = agg(mean);
    return j.dump(2);
}

std::string EvalReport::table() const {
    std::ostringstream os;
    os << "fold  pcc      srocc    rmse     regressor\n";
    char buf[256];
    for (size_t i = 0; i < folds.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%-5zu %+.4f  %+.4f  %8.4f  %s\n", i,
                      folds[i].metrics.pcc, folds[i].metrics.srocc, folds[i].metrics.rmse,
                      folds[i].regressor.c_str());
        os << buf;
    }
    std::snprintf(buf, sizeof(buf), "med   %+.4f  %+.4f  %8.4f\n", median.pcc,
                  median.srocc, median.rmse);
    os << buf;
    std::snprintf(buf, sizeof(buf), "mean  %+.4f  %+.4f  %8.4f\n", mean.pcc, mean.srocc,
                  mean.rmse);
    os << buf;
    return os.str();
}

std::vector<AblationRow> ablate(const std::vector<QualityRecord>& records,
                                const FeatureLayout& layout, int folds, double split,
                                std::uint64_t seed,
                                const std::vector<RegressMethod>& methods) {
    struct Variant {
        const char* name;
        bool multi_scale, with_std;
    };
    constexpr Variant kVariants[4] = {
        {"single-scale,mean", false, false},
        {"multi-scale,mean", true, false},
        {"single-scale,mean+std", false, true},
        {"multi-scale,mean+std", true, true},
    };
    std::vector<AblationRow> rows;
    for (const auto& v : kVariants) {
        std::vector<QualityRecord> sliced = records;
        for (auto& r : sliced) r.z = slice_variant(r.z, layout, v.multi_scale, v.with_std);
        const EvalReport rep = cross_validate(sliced, folds, split, seed, methods);
        rows.push_back({v.name, rep.median});
    }
    return rows;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
    std::ostringstream os;
    os << "variant                 pcc      srocc    rmse\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%-22s  %+.4f  %+.4f  %8.4f\n", r.variant.c_str(),
                      r.median.pcc, r.median.srocc, r.median.rmse);
        os << buf;
    }
    return os.str();
}

}  // namespace disque
