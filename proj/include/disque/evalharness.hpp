#pragma once

#include <optional>
#include <string>
#include <vector>

#include "disque/features.hpp"
#include "disque/net.hpp"
#include "disque/regress.hpp"

namespace disque {

// One row of the evaluation harness: an FR feature vector and its MOS.
struct QualityRecord {
    std::string ref_id, dis_id;
    std::vector<double> z;  // |z_ref - z_dis|
    double mos = 0.0;
    std::string content_id;  // optional; enables content-disjoint splits
};

// Records CSV: header `ref_path,dis_path,mos[,content_id]`, one row per pair.
struct RecordsFile {
    std::vector<std::string> ref_paths, dis_paths, content_ids;
    std::vector<double> mos;
    bool has_content_ids = false;

    static RecordsFile load(const std::string& path);
};

// Computes FR features for every row, caching per-image features.
std::vector<QualityRecord> build_records(const RecordsFile& rf, DualHeadUNet& model,
                                         const std::string& cache_dir,
                                         const std::string& model_checksum,
                                         Colorspace colorspace = Colorspace::SRGB);

struct FoldResult {
    Metrics metrics;
    std::string regressor;  // chosen method + hyperparameters
};

struct EvalReport {
    std::vector<FoldResult> folds;
    Metrics median, mean;
    bool content_disjoint = false;

    std::string to_json() const;
    std::string table() const;
};

// 10 independent random 80/20 splits; content-disjoint whenever content ids
// are present. The best regressor per fold is chosen by inner 5-fold score.
EvalReport cross_validate(const std::vector<QualityRecord>& records, int folds = 10,
                          double split = 0.8, std::uint64_t seed = 0,
                          const std::vector<RegressMethod>& methods = {
                              RegressMethod::PLS_SVR, RegressMethod::LASSO,
                              RegressMethod::RIDGE});

struct AblationRow {
    std::string variant;
    Metrics median;
};

// The four scale x pool variants sliced from one cached feature matrix.
std::vector<AblationRow> ablate(const std::vector<QualityRecord>& records,
                                const FeatureLayout& layout, int folds = 10,
                                double split = 0.8, std::uint64_t seed = 0,
                                const std::vector<RegressMethod>& methods = {
                                    RegressMethod::RIDGE});

std::string ablation_table(const std::vector<AblationRow>& rows);

}  // namespace disque
