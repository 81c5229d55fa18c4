#include "disque/regress.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>

namespace disque {

namespace {

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const size_t n = a.size();
    double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double num = 0.0, va = 0.0, vb = 0.0;
    for (size_t i = 0; i < n; ++i) {
        num += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    if (va <= 0.0 || vb <= 0.0)
        throw Error(ErrorClass::Numeric, "correlation undefined for constant input");
    return num / std::sqrt(va * vb);
}

}  // namespace

std::vector<double> average_ranks(const std::vector<double>& v) {
    const size_t n = v.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t i, size_t j) { return v[i] < v[j]; });
    std::vector<double> ranks(n, 0.0);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

Metrics compute_metrics(const std::vector<double>& pred, const std::vector<double>& truth) {
    if (pred.size() != truth.size())
        throw Error(ErrorClass::Config, "metrics: length mismatch");
    if (pred.size() < 3) throw Error(ErrorClass::Data, "metrics: need at least 3 points");
    Metrics m;
    m.pcc = pearson(pred, truth);
    m.srocc = pearson(average_ranks(pred), average_ranks(truth));
    double sse = 0.0;
    for (size_t i = 0; i < pred.size(); ++i)
        sse += (pred[i] - truth[i]) * (pred[i] - truth[i]);
    m.rmse = std::sqrt(sse / pred.size());
    return m;
}

const char* to_string(RegressMethod m) {
    switch (m) {
        case RegressMethod::PLS_SVR: return "pls_svr";
        case RegressMethod::LASSO: return "lasso";
        case RegressMethod::RIDGE: return "ridge";
    }
    return "?";
}

std::vector<double> LinearModel::predict(const Eigen::MatrixXd& X) const {
    std::vector<double> out(X.rows());
    const Eigen::VectorXd yhat = X * w;
    for (Eigen::Index i = 0; i < X.rows(); ++i) out[i] = yhat[i] + b;
    return out;
}

Eigen::VectorXd ridge_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                          double alpha) {
    Eigen::MatrixXd A = X.transpose() * X;
    A.diagonal().array() += alpha;
    return A.ldlt().solve(X.transpose() * y);
}

Eigen::VectorXd lasso_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                          double alpha) {
    // Cyclic coordinate descent on 1/(2n)||y - Xw||^2 + alpha*||w||_1.
    const Eigen::Index n = X.rows(), d = X.cols();
    Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd residual = y;
    Eigen::VectorXd col_sq(d);
    for (Eigen::Index j = 0; j < d; ++j) col_sq[j] = X.col(j).squaredNorm() / n;
    for (int iter = 0; iter < 500; ++iter) {
        double max_delta = 0.0;
        for (Eigen::Index j = 0; j < d; ++j) {
            if (col_sq[j] <= 0.0) continue;
            const double wj = w[j];
            const double rho = X.col(j).dot(residual) / n + col_sq[j] * wj;
            const double z = std::abs(rho) - alpha;
            const double nj = z > 0.0 ? std::copysign(z, rho) / col_sq[j] : 0.0;
            if (nj != wj) {
                residual += X.col(j) * (wj - nj);
                w[j] = nj;
                max_delta = std::max(max_delta, std::abs(nj - wj));
            }
        }
        if (max_delta < 1e-8) break;
    }
    return w;
}

Eigen::MatrixXd pls_projection(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                               int components) {
    // PLS1 (NIPALS) on centered data; returns R = W (P^T W)^{-1} so that
    // scores T = X R.
    const Eigen::Index d = X.cols();
    const int k = std::min<int>(components, static_cast<int>(std::min(X.rows() - 1, d)));
    Eigen::MatrixXd Xd = X;
    Eigen::VectorXd yd = y;
    Eigen::MatrixXd W(d, k), P(d, k);
    int used = 0;
    for (int c = 0; c < k; ++c) {
        Eigen::VectorXd w = Xd.transpose() * yd;
        const double wn = w.norm();
        if (wn < 1e-12) break;
        w /= wn;
        Eigen::VectorXd t = Xd * w;
        const double tt = t.squaredNorm();
        if (tt < 1e-12) break;
        Eigen::VectorXd p = Xd.transpose() * t / tt;
        const double q = yd.dot(t) / tt;
        Xd -= t * p.transpose();
        yd -= q * t;
        W.col(c) = w;
        P.col(c) = p;
        ++used;
    }
    if (used == 0) throw Error(ErrorClass::Numeric, "PLS found no usable component");
    W.conservativeResize(Eigen::NoChange, used);
    P.conservativeResize(Eigen::NoChange, used);
    Eigen::MatrixXd ptw = P.transpose() * W;
    return W * ptw.partialPivLu().solve(Eigen::MatrixXd::Identity(used, used));
}

Eigen::VectorXd svr_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double C,
                        double eps) {
    // Dual coordinate descent for L2-regularized epsilon-insensitive (L1) SVR.
    const Eigen::Index n = X.rows(), d = X.cols();
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd qii(n);
    for (Eigen::Index i = 0; i < n; ++i) qii[i] = X.row(i).squaredNorm();

    std::mt19937_64 rng(7);
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < 300; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double max_violation = 0.0;
        for (Eigen::Index i : order) {
            if (qii[i] <= 0.0) continue;
            const double G = w.dot(X.row(i)) - y[i];
            const double Gp = G + eps, Gn = G - eps;
            double violation = 0.0;
            if (beta[i] >= C) {
                if (Gp > 0) violation = Gp;
            } else if (beta[i] <= -C) {
                if (Gn < 0) violation = -Gn;
            } else if (beta[i] > 0) {
                violation = std::abs(Gp);
            } else if (beta[i] < 0) {
                violation = std::abs(Gn);
            } else {
                if (Gp < 0)
                    violation = -Gp;
                else if (Gn > 0)
                    violation = Gn;
            }
            max_violation = std::max(max_violation, violation);

            double delta;
            if (Gp < qii[i] * beta[i])
                delta = -Gp / qii[i];
            else if (Gn > qii[i] * beta[i])
                delta = -Gn / qii[i];
            else
                delta = -beta[i];
            const double old = beta[i];
            beta[i] = std::min(std::max(old + delta, -C), C);
            if (beta[i] != old) w += (beta[i] - old) * X.row(i).transpose();
        }
        if (max_violation < 1e-6) break;
    }
    return w;
}

namespace {

struct Standardized {
    Eigen::MatrixXd X;
    Eigen::VectorXd mu, sd;
    double y_mean = 0.0;
};

Standardized standardize(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    Standardized s;
    s.mu = X.colwise().mean();
    s.X = X.rowwise() - s.mu.transpose();
    s.sd.resize(X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        const double v = std::sqrt(s.X.col(j).squaredNorm() / X.rows());
        s.sd[j] = v > 1e-12 ? v : 1.0;
        s.X.col(j) /= s.sd[j];
    }
    s.y_mean = y.mean();
    return s;
}

LinearModel fold_back(const Eigen::VectorXd& w_std, const Standardized& s,
                      const std::string& description) {
    LinearModel m;
    m.w = w_std.array() / s.sd.array();
    m.b = s.y_mean - m.w.dot(s.mu);
    m.description = description;
    return m;
}

// One hyperparameter candidate trained on standardized data.
using FitFn = std::function<Eigen::VectorXd(const Eigen::MatrixXd&, const Eigen::VectorXd&)>;

struct Candidate {
    std::string name;
    FitFn fit;
};

std::vector<Candidate> candidates_for(RegressMethod method, Eigen::Index n,
                                      Eigen::Index d) {
    std::vector<Candidate> cands;
    switch (method) {
        case RegressMethod::RIDGE:
            for (double alpha : {0.01, 0.1, 1.0, 10.0, 100.0})
                cands.push_back({"ridge(alpha=" + std::to_string(alpha) + ")",
                                 [alpha](const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
                                     return ridge_fit(X, y, alpha);
                                 }});
            break;
        case RegressMethod::LASSO:
            for (double alpha : {0.0003, 0.001, 0.003, 0.01, 0.03, 0.1})
                cands.push_back({"lasso(alpha=" + std::to_string(alpha) + ")",
                                 [alpha](const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
                                     return lasso_fit(X, y, alpha);
                                 }});
            break;
        case RegressMethod::PLS_SVR:
            for (int comp : {16, 32, 64, 128}) {
                if (comp > std::min<Eigen::Index>(n - 1, d) && comp != 16) continue;
                for (double C : {0.1, 1.0, 10.0})
                    for (double eps : {0.1, 0.5})
                        cands.push_back(
                            {"pls_svr(components=" + std::to_string(comp) +
                                 ",C=" + std::to_string(C) + ",eps=" + std::to_string(eps) + ")",
                             [comp, C, eps](const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
                                 const Eigen::MatrixXd R = pls_projection(X, y, comp);
                                 const Eigen::MatrixXd T = X * R;
                                 const Eigen::VectorXd w_t = svr_fit(T, y, C, eps);
                                 return Eigen::VectorXd(R * w_t);
                             }});
            }
            break;
    }
    return cands;
}

}  // namespace

LinearModel fit_regressor(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                          RegressMethod method, int inner_folds, std::uint64_t seed,
                          double* cv_score) {
    const Eigen::Index n = X.rows();
    if (n < 2 * inner_folds)
        throw Error(ErrorClass::Data, "need at least 2*inner_folds records");
    if ((y.array() - y[0]).abs().maxCoeff() < 1e-12)
        throw Error(ErrorClass::Data, "degenerate targets: constant MOS");

    const auto cands = candidates_for(method, n, X.cols());

    // Inner k-fold split, fixed by seed.
    std::vector<Eigen::Index> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(seed ^ 0x5eed5eedULL);
    std::shuffle(perm.begin(), perm.end(), rng);

    double best_score = -2.0;
    size_t best = 0;
    for (size_t ci = 0; ci < cands.size(); ++ci) {
        double score_sum = 0.0;
        int folds_used = 0;
        for (int f = 0; f < inner_folds; ++f) {
            std::vector<Eigen::Index> train_idx, val_idx;
            for (Eigen::Index i = 0; i < n; ++i)
                ((static_cast<int>(i) % inner_folds) == f ? val_idx : train_idx)
                    .push_back(perm[i]);
            if (val_idx.size() < 3) continue;
            Eigen::MatrixXd Xt(train_idx.size(), X.cols()), Xv(val_idx.size(), X.cols());
            Eigen::VectorXd yt(train_idx.size());
            std::vector<double> yv(val_idx.size());
            for (size_t i = 0; i < train_idx.size(); ++i) {
                Xt.row(i) = X.row(train_idx[i]);
                yt[i] = y[train_idx[i]];
            }
            for (size_t i = 0; i < val_idx.size(); ++i) {
                Xv.row(i) = X.row(val_idx[i]);
                yv[i] = y[val_idx[i]];
            }
            const auto s = standardize(Xt, yt);
            Eigen::VectorXd w;
            try {
                w = cands[ci].fit(s.X, yt.array() - s.y_mean);
            } catch (const Error&) {
                continue;
            }
            const LinearModel m = fold_back(w, s, cands[ci].name);
            try {
                const auto met = compute_metrics(m.predict(Xv), yv);
                score_sum += 0.5 * (met.pcc + met.srocc);
                ++folds_used;
            } catch (const Error&) {
                // constant predictions on this fold contribute nothing
            }
        }
        if (folds_used == 0) continue;
        const double score = score_sum / folds_used;
        if (score > best_score) {
            best_score = score;
            best = ci;
        }
    }
    if (best_score <= -2.0)
        throw Error(ErrorClass::Numeric, "no regressor candidate produced valid folds");

    const auto s = standardize(X, y);
    const Eigen::VectorXd w = cands[best].fit(s.X, y.array() - s.y_mean);
    if (cv_score) *cv_score = best_score;
    return fold_back(w, s, cands[best].name);
}

}  // namespace disque
