#pragma once

// Plug-in estimates of the subspace model statistics, the closed-form
// separability bounds and a brute-force pairwise check of the same quantities.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "clask/data.hpp"
#include "clask/detail/error.hpp"
#include "clask/embedding.hpp"
#include "clask/kernel.hpp"
#include "clask/metric.hpp"
#include "clask/subspace.hpp"

namespace clask {

/// proj[s][c] holds the class-c samples projected onto the class-s subspace,
/// one sample per row.
struct ProjectionSet {
    std::vector<std::vector<Matrix>> proj;

    std::size_t num_classes() const { return proj.size(); }
    const Matrix& at(std::size_t subspace, std::size_t data_class) const { return proj[subspace][data_class]; }
};

/// Projections onto explicit orthonormal bases U_s (q x r_s) of feature vectors.
inline ProjectionSet projections_from_subspaces(const std::vector<Matrix>& bases, const ClassSamples& classes) {
    detail::require(bases.size() == classes.size(), "projections: one basis per class required");
    ProjectionSet out;
    out.proj.resize(bases.size());
    for (std::size_t s = 0; s < bases.size(); ++s) {
        for (const auto& X : classes) {
            detail::require(X.cols() == bases[s].rows(), "projections: dimension mismatch");
            out.proj[s].push_back(X * bases[s]);
        }
    }
    return out;
}

/// Projections through a fitted bank: block s of the CLASMK embedding.
inline ProjectionSet projections_from_bank(const BasisBank& bank, const WeightMatrix& nu, const ClassSamples& classes) {
    detail::require(classes.size() == bank.num_classes(), "projections: one sample set per class required");
    const auto widths = block_widths(bank, nu);
    std::vector<Matrix> embedded;
    for (const auto& X : classes) embedded.push_back(embed_rows(bank, nu, X));
    ProjectionSet out;
    out.proj.resize(classes.size());
    Eigen::Index offset = 0;
    for (std::size_t s = 0; s < classes.size(); ++s) {
        for (const auto& E : embedded) out.proj[s].push_back(E.middleCols(offset, widths[s]));
        offset += widths[s];
    }
    return out;
}

/// Per-class principal subspaces of unit-normalized samples (top `rank`
/// eigenvectors of the uncentered second moment).
inline std::vector<Matrix> fit_pca_subspaces(const ClassSamples& classes, Eigen::Index rank) {
    detail::require(rank >= 1, "pca: rank must be >= 1");
    std::vector<Matrix> out;
    for (const auto& X : classes) {
        detail::require(X.rows() >= 1, "pca: empty class");
        detail::require(rank <= X.cols(), "pca: rank exceeds dimension");
        Matrix Xn = X;
        for (Eigen::Index i = 0; i < Xn.rows(); ++i) {
            const double n = Xn.row(i).norm();
            if (n > 0.0) Xn.row(i) /= n;
        }
        Eigen::SelfAdjointEigenSolver<Matrix> eig(Xn.transpose() * Xn / static_cast<double>(Xn.rows()));
        detail::require(eig.info() == Eigen::Success, "pca: eigendecomposition failed");
        out.push_back(eig.eigenvectors().rightCols(rank).rowwise().reverse());
    }
    return out;
}

struct ModelStats {
    std::vector<double> priors;
    std::vector<double> own_energy;       // mean ||U_c' phi_c||^2
    std::vector<double> mean_norms;       // ||m_c||^2
    double sigma_e_sq_hat = 0.0;
    double lambda_hat = 0.0;              // cross energy over own energy
    double lambda_hat_mean_norm = 0.0;    // cross energy over squared mean norms
    Matrix cross_energy;                  // (s, c): mean ||U_s' phi_c||^2
};

inline ModelStats estimate_model_stats(const ProjectionSet& set) {
    const std::size_t C = set.num_classes();
    detail::require(C >= 1, "model stats: no classes");
    ModelStats st;
    st.cross_energy = Matrix::Zero(static_cast<Eigen::Index>(C), static_cast<Eigen::Index>(C));
    double total = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
        detail::require(set.proj[c].size() == C, "model stats: ragged projection set");
        detail::require(set.at(c, c).rows() >= 1, "model stats: class " + std::to_string(c) + " is empty");
        total += static_cast<double>(set.at(c, c).rows());
    }
    for (std::size_t s = 0; s < C; ++s) {
        for (std::size_t c = 0; c < C; ++c) {
            const Matrix& P = set.at(s, c);
            st.cross_energy(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(c)) =
                P.rowwise().squaredNorm().mean();
        }
    }
    double own_sum = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
        const Matrix& P = set.at(c, c);
        st.priors.push_back(static_cast<double>(P.rows()) / total);
        st.own_energy.push_back(st.cross_energy(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c)));
        st.mean_norms.push_back(P.colwise().mean().squaredNorm());
        own_sum += st.own_energy.back();
    }
    st.sigma_e_sq_hat = std::clamp(1.0 - own_sum / static_cast<double>(C), 0.0, 1.0);

    double numer = 0.0, denom_energy = 0.0, denom_mean = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
        denom_energy += st.priors[c] * st.own_energy[c];
        denom_mean += st.priors[c] * st.mean_norms[c];
        if (C < 2) continue;
        double inner = 0.0;
        for (std::size_t s = 0; s < C; ++s) {
            if (s != c) inner += st.priors[s] * st.cross_energy(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(c));
        }
        numer += st.priors[c] / (1.0 - st.priors[c]) * inner;
    }
    st.lambda_hat = denom_energy > 0.0 ? numer / denom_energy : std::numeric_limits<double>::infinity();
    st.lambda_hat_mean_norm = denom_mean > 0.0 ? numer / denom_mean : std::numeric_limits<double>::infinity();
    return st;
}

struct BoundValue {
    double value = 0.0;
    bool vacuous = false;  // value >= 1 carries no information about a probability
};

namespace detail {

inline void check_model_params(double lambda, double sigma_e_sq) {
    require(std::isfinite(lambda) && lambda >= 0.0 && lambda < 1.0, "hypothesis violated: lambda must lie in [0, 1)");
    require(sigma_e_sq >= 0.0 && sigma_e_sq <= 1.0, "sigma_e^2 must lie in [0, 1]");
}

inline BoundValue make_bound(double numer, double denom) {
    require(denom > 0.0, "hypothesis violated: nonpositive denominator");
    const double v = numer / denom;
    return BoundValue{v, v >= 1.0};
}

}  // namespace detail

/// (1 - ||m||^2) / (1 - sqrt(lambda) (1 - sigma_e^2)).
inline BoundValue bound_lemma1(double lambda, double sigma_e_sq, double mean_norm_sq) {
    detail::check_model_params(lambda, sigma_e_sq);
    return detail::make_bound(1.0 - mean_norm_sq, 1.0 - std::sqrt(lambda) * (1.0 - sigma_e_sq));
}

/// The overlap bound with the prior-weighted mean norm in the numerator.
inline BoundValue bound_theorem1(double lambda, double sigma_e_sq, const std::vector<double>& priors,
                                 const std::vector<double>& mean_norms) {
    detail::check_model_params(lambda, sigma_e_sq);
    detail::require(priors.size() == mean_norms.size() && !priors.empty(), "bound: priors and mean norms differ in size");
    double weighted = 0.0, total = 0.0;
    for (std::size_t c = 0; c < priors.size(); ++c) {
        detail::require(priors[c] >= 0.0, "bound: negative prior");
        weighted += priors[c] * mean_norms[c];
        total += priors[c];
    }
    detail::require(std::abs(total - 1.0) <= 1e-9, "bound: priors must sum to 1");
    return detail::make_bound(1.0 - weighted, 1.0 - std::sqrt(lambda) * (1.0 - sigma_e_sq));
}

/// Expected between-class distance lower bound 2C(1 - (C lambda - lambda + 1)(1 - sigma_e^2)/C).
inline double lemma3_lower_bound(double lambda, double sigma_e_sq, std::size_t C) {
    detail::check_model_params(lambda, sigma_e_sq);
    detail::require(C >= 1, "between-class bound: C must be >= 1");
    const double c = static_cast<double>(C);
    return 2.0 * c * (1.0 - (c * lambda - lambda + 1.0) * (1.0 - sigma_e_sq) / c);
}

struct PairwiseBound {
    BoundValue bound;
    double db_lower = 0.0;
};

/// Class-specific multiple-kernel bound with equal priors; mean_norm_matrix(c, c')
/// is ||m_(c,c')||^2.
inline PairwiseBound bound_theorem2(double lambda, double sigma_e_sq, const Matrix& mean_norm_matrix, std::size_t C) {
    detail::check_model_params(lambda, sigma_e_sq);
    detail::require(C >= 1 && mean_norm_matrix.rows() == static_cast<Eigen::Index>(C) &&
                        mean_norm_matrix.cols() == static_cast<Eigen::Index>(C),
                    "bound: mean norm matrix must be C x C");
    const double c = static_cast<double>(C);
    const double denom = 1.0 - (c * lambda - lambda + 1.0) * (1.0 - sigma_e_sq) / c;
    PairwiseBound out;
    out.bound = detail::make_bound(1.0 - mean_norm_matrix.sum() / c, denom);
    out.db_lower = 2.0 * c * denom;
    return out;
}

struct SeparationStats {
    double e_dw = 0.0;
    double e_db = 0.0;
    double empirical_ratio = 0.0;
    double empirical_prob = 0.0;
};

/// Exhaustive pairwise squared distances. Within-class means use unordered
/// pairs; classes are weighted by frequency, between-class pairs (c, c~) by
/// p_c p_c~ / (1 - p_c). empirical_prob is the frequency-weighted share of
/// within-class pairs farther apart than the between-class mean.
inline SeparationStats empirical_separation(const MatrixRef& F, const Labels& y, std::size_t num_classes) {
    detail::require(static_cast<std::size_t>(F.rows()) == y.size(), "separation: feature/label mismatch");
    std::vector<IndexList> by_class = detail::indices_by_class(y, num_classes);
    std::vector<Matrix> blocks;
    std::vector<Vector> norms;
    std::vector<double> priors;
    const auto n = static_cast<double>(y.size());
    for (const auto& idx : by_class) {
        Matrix B(static_cast<Eigen::Index>(idx.size()), F.cols());
        for (std::size_t i = 0; i < idx.size(); ++i) B.row(static_cast<Eigen::Index>(i)) = F.row(static_cast<Eigen::Index>(idx[i]));
        norms.push_back(B.rowwise().squaredNorm());
        blocks.push_back(std::move(B));
        priors.push_back(static_cast<double>(idx.size()) / n);
    }
    auto distances = [&](std::size_t a, std::size_t b) {
        Matrix D = -2.0 * blocks[a] * blocks[b].transpose();
        D.colwise() += norms[a];
        D.rowwise() += norms[b].transpose();
        return D.cwiseMax(0.0).eval();
    };

    SeparationStats out;
    double between_weight = 0.0;
    for (std::size_t c = 0; c < num_classes; ++c) {
        if (blocks[c].rows() == 0 || priors[c] >= 1.0) continue;
        for (std::size_t d = 0; d < num_classes; ++d) {
            if (d == c || blocks[d].rows() == 0) continue;
            const double w = priors[c] * priors[d] / (1.0 - priors[c]);
            out.e_db += w * distances(c, d).mean();
            between_weight += w;
        }
    }
    detail::require(between_weight > 0.0, "separation: no between-class pairs");
    detail::require(out.e_db > 0.0, "separation: zero between-class distance");

    double within_weight = 0.0;
    double prob = 0.0;
    for (std::size_t c = 0; c < num_classes; ++c) {
        const Eigen::Index m = blocks[c].rows();
        if (m < 2) continue;
        const Matrix D = distances(c, c);
        double sum = 0.0;
        std::size_t above = 0;
        for (Eigen::Index j = 1; j < m; ++j) {
            for (Eigen::Index i = 0; i < j; ++i) {
                sum += D(i, j);
                above += D(i, j) > out.e_db ? 1 : 0;
            }
        }
        const double pairs = static_cast<double>(m) * static_cast<double>(m - 1) / 2.0;
        out.e_dw += priors[c] * sum / pairs;
        prob += priors[c] * static_cast<double>(above) / pairs;
        within_weight += priors[c];
    }
    detail::require(within_weight > 0.0, "separation: no class has two samples");
    out.e_dw /= within_weight;
    out.empirical_prob = prob / within_weight;
    out.empirical_ratio = out.e_dw / out.e_db;
    return out;
}

inline SeparationStats empirical_separation(const ClassSamples& classes) {
    Eigen::Index rows = 0;
    for (const auto& X : classes) rows += X.rows();
    detail::require(!classes.empty(), "separation: no classes");
    Matrix F(rows, classes.front().cols());
    Labels y;
    Eigen::Index offset = 0;
    for (std::size_t c = 0; c < classes.size(); ++c) {
        F.middleRows(offset, classes[c].rows()) = classes[c];
        offset += classes[c].rows();
        y.insert(y.end(), static_cast<std::size_t>(classes[c].rows()), c);
    }
    return empirical_separation(F, y, classes.size());
}

struct SeparabilityReport {
    ModelStats stats;
    BoundValue bound;                           // prior-weighted bound with lambda_hat
    std::optional<BoundValue> bound_mean_norm;  // same with lambda_hat_mean_norm, if that is below 1
    std::string bound_note;                     // why a bound is missing
    SeparationStats separation;
};

/// Stats from projections, bounds from the stats, separation from the
/// feature vectors the projections were taken of.
inline SeparabilityReport separability_report(const ProjectionSet& set, const ClassSamples& features) {
    SeparabilityReport r;
    r.stats = estimate_model_stats(set);
    r.separation = empirical_separation(features);
    const auto& st = r.stats;
    if (st.lambda_hat < 1.0) {
        try {
            r.bound = bound_theorem1(st.lambda_hat, st.sigma_e_sq_hat, st.priors, st.mean_norms);
        } catch (const Error& e) {
            r.bound = BoundValue{std::numeric_limits<double>::infinity(), true};
            r.bound_note = e.what();
        }
    } else {
        r.bound = BoundValue{std::numeric_limits<double>::infinity(), true};
        r.bound_note = "lambda_hat >= 1";
    }
    if (st.lambda_hat_mean_norm < 1.0) {
        try {
            r.bound_mean_norm = bound_theorem1(st.lambda_hat_mean_norm, st.sigma_e_sq_hat, st.priors, st.mean_norms);
        } catch (const Error&) {
        }
    }
    return r;
}

}  // namespace clask
