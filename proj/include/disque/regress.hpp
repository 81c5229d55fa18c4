#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "disque/image.hpp"

namespace disque {

struct Metrics {
    double pcc = 0.0;
    double srocc = 0.0;
    double rmse = 0.0;
};

// Standard PCC / SROCC (average-rank ties) / RMSE. Correlations require
// length >= 3 and non-constant inputs.
Metrics compute_metrics(const std::vector<double>& pred, const std::vector<double>& truth);

std::vector<double> average_ranks(const std::vector<double>& v);

enum class RegressMethod { PLS_SVR, LASSO, RIDGE };
const char* to_string(RegressMethod m);

// All methods return a pure linear scoring function.
struct LinearModel {
    Eigen::VectorXd w;
    double b = 0.0;
    std::string description;  // chosen method + hyperparameters

    double predict(const Eigen::VectorXd& x) const { return w.dot(x) + b; }
    std::vector<double> predict(const Eigen::MatrixXd& X) const;
};

// Fits one method, choosing hyperparameters by inner k-fold cross-validation
// maximizing the mean of PCC and SROCC. Desk-scale grids: PLS components
// {16,32,64,128} (clipped), SVR C {0.1,1,10} x eps {0.1,0.5}, Lasso/Ridge
// alpha ladders.
LinearModel fit_regressor(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                          RegressMethod method, int inner_folds = 5,
                          std::uint64_t seed = 0, double* cv_score = nullptr);

// Building blocks (exposed for tests).
Eigen::VectorXd ridge_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                          double alpha);
Eigen::VectorXd lasso_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                          double alpha);
Eigen::MatrixXd pls_projection(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                               int components);
Eigen::VectorXd svr_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double C,
                        double eps);

}  // namespace disque
