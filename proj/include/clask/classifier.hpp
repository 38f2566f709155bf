#pragma once

// One-vs-rest least-squares classifier over explicit features.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "clask/data.hpp"
#include "clask/detail/error.hpp"
#include "clask/kernel.hpp"

namespace clask {

struct LinearModel {
    Matrix W;  // q x C
    Vector b;  // C
    double ridge = 1e-3;

    Eigen::Index input_dim() const { return W.rows(); }
    std::size_t num_classes() const { return static_cast<std::size_t>(W.cols()); }
};

struct Prediction {
    Vector scores;
    std::size_t label = 0;
    double confidence = 0.0;  // half the gap between the two largest scores
};

inline constexpr double kDefaultRidge = 1e-3;
inline constexpr double kNormalResidualTol = 1e-8;

/// Minimizes sum_i ||W' f_i + b - t_i||^2 + N * ridge * ||W||_F^2 with targets
/// t_i(c) = +1 for the true class and -1 otherwise. The bias is not penalized.
inline LinearModel fit_lssvm(const MatrixRef& F, const Labels& y, std::size_t num_classes, double ridge) {
    detail::require(ridge > 0.0 && std::isfinite(ridge), "fit_lssvm: ridge must be positive");
    detail::require(static_cast<std::size_t>(F.rows()) == y.size() && F.rows() > 0, "fit_lssvm: feature/label mismatch");
    detail::require(num_classes >= 2, "fit_lssvm: need at least 2 classes");
    detail::require(detail::all_finite(F.data(), static_cast<std::size_t>(F.size())), "fit_lssvm: non-finite feature");
    std::vector<bool> seen(num_classes, false);
    for (auto label : y) {
        detail::require(label < num_classes, "fit_lssvm: label out of range");
        seen[label] = true;
    }
    detail::require(std::count(seen.begin(), seen.end(), true) >= 2, "fit_lssvm: labels contain a single class");

    const auto n = static_cast<double>(F.rows());
    const auto C = static_cast<Eigen::Index>(num_classes);
    Matrix T = Matrix::Constant(F.rows(), C, -1.0);
    for (std::size_t i = 0; i < y.size(); ++i) T(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(y[i])) = 1.0;

    // Centering eliminates the unpenalized bias from the normal equations.
    const Vector f_mean = F.colwise().mean().transpose();
    const Vector t_mean = T.colwise().mean().transpose();
    const Matrix Fc = F.rowwise() - f_mean.transpose();
    const Matrix Tc = T.rowwise() - t_mean.transpose();

    Matrix G = Matrix::Zero(F.cols(), F.cols());
    G.selfadjointView<Eigen::Lower>().rankUpdate(Fc.transpose());
    G.triangularView<Eigen::StrictlyUpper>() = G.transpose();
    G.diagonal().array() += n * ridge;
    const Matrix rhs = Fc.transpose() * Tc;

    Eigen::LLT<Matrix> llt(G);
    detail::require(llt.info() == Eigen::Success, "fit_lssvm: singular system");
    LinearModel model;
    model.ridge = ridge;
    model.W = llt.solve(rhs);
    const double scale = std::max(rhs.norm(), std::numeric_limits<double>::min());
    const double residual = (G * model.W - rhs).norm() / scale;
    detail::require(std::isfinite(residual) && (rhs.norm() == 0.0 || residual <= kNormalResidualTol),
                    "fit_lssvm: singular system");
    model.b = t_mean - model.W.transpose() * f_mean;
    return model;
}

inline Prediction prediction_from_scores(Vector scores) {
    Prediction p;
    const Eigen::Index C = scores.size();
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < C; ++c) {
        if (scores(c) > scores(best)) best = c;
    }
    double second = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < C; ++c) {
        if (c != best) second = std::max(second, scores(c));
    }
    p.label = static_cast<std::size_t>(best);
    p.confidence = C > 1 ? (scores(best) - second) / 2.0 : std::numeric_limits<double>::infinity();
    p.scores = std::move(scores);
    return p;
}

inline Prediction predict(const LinearModel& model, const VectorRef& feature) {
    detail::require(feature.size() == model.W.rows(), "predict: feature dimension mismatch");
    return prediction_from_scores(model.W.transpose() * feature + model.b);
}

inline std::vector<Prediction> predict_rows(const LinearModel& model, const MatrixRef& F) {
    detail::require(F.cols() == model.W.rows(), "predict: feature dimension mismatch");
    const Matrix scores = (F * model.W).rowwise() + model.b.transpose();
    std::vector<Prediction> out;
    out.reserve(static_cast<std::size_t>(F.rows()));
    for (Eigen::Index i = 0; i < F.rows(); ++i) out.push_back(prediction_from_scores(scores.row(i).transpose()));
    return out;
}

/// Indices whose confidence is at most t_kappa.
inline IndexList select_marginal(const std::vector<Prediction>& predictions, double t_kappa) {
    detail::require(t_kappa >= 0.0, "select_marginal: threshold must be nonnegative");
    IndexList out;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (predictions[i].confidence <= t_kappa) out.push_back(i);
    }
    return out;
}

inline double error_rate(const std::vector<Prediction>& predictions, const Labels& y) {
    detail::require(predictions.size() == y.size() && !y.empty(), "error_rate: size mismatch");
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < y.size(); ++i) wrong += predictions[i].label != y[i] ? 1 : 0;
    return static_cast<double>(wrong) / static_cast<double>(y.size());
}

inline const std::vector<double>& default_ridge_grid() {
    static const std::vector<double> grid{1e-4, 1e-3, 1e-2, 1e-1, 1.0};
    return grid;
}

/// Picks the ridge with the lowest error on a stratified holdout of the
/// training rows; ties go to the smaller ridge.
inline double tune_ridge(const MatrixRef& F, const Labels& y, std::size_t num_classes, const std::vector<double>& grid,
                         std::uint64_t seed, double holdout = 0.2) {
    detail::require(!grid.empty(), "tune_ridge: empty grid");
    const auto split = split_indices_stratified(y, num_classes, 1.0 - holdout, seed);
    auto gather = [&](const IndexList& idx, Matrix& Fo, Labels& yo) {
        Fo.resize(static_cast<Eigen::Index>(idx.size()), F.cols());
        yo.resize(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            Fo.row(static_cast<Eigen::Index>(i)) = F.row(static_cast<Eigen::Index>(idx[i]));
            yo[i] = y[idx[i]];
        }
    };
    Matrix F_fit, F_val;
    Labels y_fit, y_val;
    gather(split.first, F_fit, y_fit);
    gather(split.second, F_val, y_val);
    double best = grid.front();
    double best_error = std::numeric_limits<double>::infinity();
    for (double ridge : grid) {
        try {
            const auto model = fit_lssvm(F_fit, y_fit, num_classes, ridge);
            const double err = error_rate(predict_rows(model, F_val), y_val);
            if (err < best_error) {
                best_error = err;
                best = ridge;
            }
        } catch (const Error&) {
        }
    }
    return best;
}

}  // namespace clask
