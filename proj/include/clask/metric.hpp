#pragma once

// Class-specific multiple-kernel weights: separability objective, kernel
// truncation, simplex-constrained optimization and per-class kernel choice.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "clask/data.hpp"
#include "clask/detail/error.hpp"
#include "clask/detail/parallel.hpp"
#include "clask/kernel.hpp"
#include "clask/subspace.hpp"

namespace clask {

/// C x K weights; row c is a convex combination over the kernel set.
using WeightMatrix = Matrix;

inline constexpr double kFeasibilityTol = 1e-9;

inline WeightMatrix uniform_weights(std::size_t num_classes, std::size_t num_kernels) {
    detail::require(num_classes >= 1 && num_kernels >= 1, "uniform_weights: empty shape");
    return Matrix::Constant(static_cast<Eigen::Index>(num_classes), static_cast<Eigen::Index>(num_kernels),
                            1.0 / static_cast<double>(num_kernels));
}

/// Uniform over the kernels flagged active, zero elsewhere.
inline WeightMatrix uniform_weights(std::size_t num_classes, const std::vector<bool>& active) {
    const auto count = static_cast<std::size_t>(std::count(active.begin(), active.end(), true));
    detail::require(num_classes >= 1 && count >= 1, "uniform_weights: no active kernel");
    WeightMatrix nu = Matrix::Zero(static_cast<Eigen::Index>(num_classes), static_cast<Eigen::Index>(active.size()));
    for (std::size_t k = 0; k < active.size(); ++k) {
        if (active[k]) nu.col(static_cast<Eigen::Index>(k)).setConstant(1.0 / static_cast<double>(count));
    }
    return nu;
}

/// Row c is one-hot on choice[c].
inline WeightMatrix one_hot_weights(const std::vector<std::size_t>& choice, std::size_t num_kernels) {
    WeightMatrix nu = Matrix::Zero(static_cast<Eigen::Index>(choice.size()), static_cast<Eigen::Index>(num_kernels));
    for (std::size_t c = 0; c < choice.size(); ++c) {
        detail::require(choice[c] < num_kernels, "one_hot_weights: kernel index out of range");
        nu(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(choice[c])) = 1.0;
    }
    return nu;
}

inline bool is_feasible(const WeightMatrix& nu, double tol = kFeasibilityTol) {
    if (nu.size() == 0) return false;
    for (Eigen::Index c = 0; c < nu.rows(); ++c) {
        double sum = 0.0;
        for (Eigen::Index k = 0; k < nu.cols(); ++k) {
            const double v = nu(c, k);
            if (!std::isfinite(v) || v < 0.0) return false;
            sum += v;
        }
        if (std::abs(sum - 1.0) > tol) return false;
    }
    return true;
}

inline void require_feasible(const WeightMatrix& nu, const char* where) {
    detail::require(is_feasible(nu), std::string(where) + ": weight rows must be nonnegative and sum to 1");
}

/// Sufficient statistics of the padded projections of an evaluation set.
/// Entry (s, c) describes the class-c samples projected onto the class-s bases.
struct ProjectionMoments {
    std::size_t num_classes = 0;
    std::size_t num_kernels = 0;
    std::vector<bool> active;               // kernel has a basis for every class
    std::vector<Eigen::Index> width;        // per subspace class: max rank over active kernels
    std::vector<std::size_t> class_sizes;
    std::vector<Matrix> second;             // K x K: mean of <pad p_{s,k}(x), pad p_{s,l}(x)>
    std::vector<Matrix> mean;               // width[s] x K: mean padded projection

    const Matrix& second_moment(std::size_t s, std::size_t c) const { return second[s * num_classes + c]; }
    const Matrix& mean_projection(std::size_t s, std::size_t c) const { return mean[s * num_classes + c]; }
    std::size_t active_count() const { return static_cast<std::size_t>(std::count(active.begin(), active.end(), true)); }
};

namespace detail {

struct StackedClasses {
    Matrix X;
    std::vector<Eigen::Index> offset;  // class c occupies rows [offset[c], offset[c + 1])
};

inline StackedClasses stack_classes(const ClassSamples& classes) {
    StackedClasses out;
    out.offset.assign(classes.size() + 1, 0);
    for (std::size_t c = 0; c < classes.size(); ++c) out.offset[c + 1] = out.offset[c] + classes[c].rows();
    const Eigen::Index dim = classes.empty() ? 0 : classes.front().cols();
    out.X.resize(out.offset.back(), dim);
    for (std::size_t c = 0; c < classes.size(); ++c) {
        require(classes[c].cols() == dim, "evaluation set: inconsistent dimensions");
        out.X.middleRows(out.offset[c], classes[c].rows()) = classes[c];
    }
    return out;
}

}  // namespace detail

/// Projects every evaluation sample on every (class, kernel) basis. When
/// `kernel_mask` is nonempty only flagged kernels are considered.
inline ProjectionMoments compute_moments(const BasisBank& bank, const ClassSamples& eval_set,
                                         const std::vector<bool>& kernel_mask = {}) {
    const std::size_t C = bank.num_classes();
    const std::size_t K = bank.num_kernels();
    detail::require(eval_set.size() == C, "evaluation set must have one entry per class");
    detail::require(kernel_mask.empty() || kernel_mask.size() == K, "kernel mask size mismatch");
    ProjectionMoments m;
    m.num_classes = C;
    m.num_kernels = K;
    m.active.assign(K, false);
    for (std::size_t k = 0; k < K; ++k) m.active[k] = bank.covers_kernel(k) && (kernel_mask.empty() || kernel_mask[k]);
    for (std::size_t c = 0; c < C; ++c) {
        detail::require(eval_set[c].rows() >= 1, "evaluation set: class " + std::to_string(c) + " is empty");
        m.class_sizes.push_back(static_cast<std::size_t>(eval_set[c].rows()));
    }
    m.width.assign(C, 0);
    for (std::size_t s = 0; s < C; ++s) {
        for (std::size_t k = 0; k < K; ++k) {
            if (m.active[k]) m.width[s] = std::max(m.width[s], bank.at(s, k).rank());
        }
    }
    const auto stacked = detail::stack_classes(eval_set);
    m.second.resize(C * C);
    m.mean.resize(C * C);
    const auto Ki = static_cast<Eigen::Index>(K);

    detail::parallel_for(C, [&](std::size_t s) {
        std::vector<Matrix> proj(K);
        for (std::size_t k = 0; k < K; ++k) {
            if (m.active[k]) proj[k] = project_rows(bank.at(s, k), bank.kernel(k), stacked.X);
        }
        for (std::size_t c = 0; c < C; ++c) {
            const Eigen::Index o = stacked.offset[c];
            const Eigen::Index n = stacked.offset[c + 1] - o;
            Matrix second = Matrix::Zero(Ki, Ki);
            Matrix mean = Matrix::Zero(m.width[s], Ki);
            for (std::size_t k = 0; k < K; ++k) {
                if (!m.active[k]) continue;
                const auto ki = static_cast<Eigen::Index>(k);
                const Eigen::Index rk = proj[k].cols();
                mean.col(ki).head(rk) = proj[k].middleRows(o, n).colwise().mean().transpose();
                for (std::size_t l = 0; l <= k; ++l) {
                    if (!m.active[l]) continue;
                    const auto li = static_cast<Eigen::Index>(l);
                    const Eigen::Index r = std::min(rk, proj[l].cols());
                    const double v = proj[k].block(o, 0, n, r).cwiseProduct(proj[l].block(o, 0, n, r)).sum() /
                                     static_cast<double>(n);
                    second(ki, li) = v;
                    second(li, ki) = v;
                }
            }
            m.second[s * C + c] = std::move(second);
            m.mean[s * C + c] = std::move(mean);
        }
    });
    return m;
}

struct ObjectiveParts {
    double h_b = 0.0;
    double h_w = 0.0;
    double h = 0.0;
};

namespace detail {

inline constexpr double kNonRepresentative = 1e-12;
inline constexpr double kWeightFloor = 1e-12;

inline void check_weights_against(const WeightMatrix& nu, const ProjectionMoments& m) {
    require(static_cast<std::size_t>(nu.rows()) == m.num_classes && static_cast<std::size_t>(nu.cols()) == m.num_kernels,
            "weight matrix shape does not match the basis bank");
    require_feasible(nu, "objective");
    for (std::size_t c = 0; c < m.num_classes; ++c) {
        for (std::size_t k = 0; k < m.num_kernels; ++k) {
            require(nu(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k)) == 0.0 || m.active[k],
                    "missing basis for class " + std::to_string(c) + ", kernel " + std::to_string(k));
        }
    }
}

// Unchecked h_b / h_w for square-root weights s (row c belongs to class c).
inline ObjectiveParts objective_from_roots(const Matrix& s, const ProjectionMoments& m) {
    const std::size_t C = m.num_classes;
    ObjectiveParts out;
    for (std::size_t a = 0; a < C; ++a) {
        const Vector sa = s.row(static_cast<Eigen::Index>(a)).transpose();
        for (std::size_t c = 0; c < C; ++c) {
            const double v = sa.dot(m.second_moment(a, c) * sa);
            if (a == c) {
                out.h_w += v;
            } else {
                out.h_b += v;
            }
        }
    }
    out.h_b = C > 1 ? out.h_b / static_cast<double>(C - 1) : 0.0;
    out.h = out.h_w > kNonRepresentative ? out.h_b / out.h_w : std::numeric_limits<double>::infinity();
    return out;
}

}  // namespace detail

inline ObjectiveParts empirical_objective(const WeightMatrix& nu, const ProjectionMoments& m) {
    detail::check_weights_against(nu, m);
    const ObjectiveParts out = detail::objective_from_roots(nu.cwiseSqrt(), m);
    detail::require(out.h_w > detail::kNonRepresentative, "non-representative model");
    return out;
}

inline ObjectiveParts empirical_objective(const WeightMatrix& nu, const BasisBank& bank, const ClassSamples& eval_set) {
    std::vector<bool> used(static_cast<std::size_t>(nu.cols()), false);
    for (Eigen::Index k = 0; k < nu.cols(); ++k) used[static_cast<std::size_t>(k)] = (nu.col(k).array() > 0.0).any();
    detail::require(static_cast<std::size_t>(nu.cols()) == bank.num_kernels(), "weight matrix shape does not match the basis bank");
    for (std::size_t k = 0; k < used.size(); ++k) {
        for (std::size_t c = 0; c < bank.num_classes(); ++c) {
            if (nu(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k)) > 0.0) (void)bank.at(c, k);
        }
    }
    return empirical_objective(nu, compute_moments(bank, eval_set, used));
}

/// Sum over classes of the mean squared projection norm of each class onto its
/// own kernel-k basis. Inactive kernels report 0.
inline Vector kernel_representativeness(const ProjectionMoments& m) {
    Vector rep = Vector::Zero(static_cast<Eigen::Index>(m.num_kernels));
    for (std::size_t k = 0; k < m.num_kernels; ++k) {
        if (!m.active[k]) continue;
        const auto ki = static_cast<Eigen::Index>(k);
        for (std::size_t c = 0; c < m.num_classes; ++c) rep(ki) += m.second_moment(c, c)(ki, ki);
    }
    return rep;
}

/// Indices of kernels that are inactive or whose representativeness is <= eta.
inline std::vector<std::size_t> truncate_kernels(const ProjectionMoments& m, double eta) {
    detail::require(eta > 0.0 && eta <= 1.0, "truncate_kernels: eta must lie in (0, 1]");
    const Vector rep = kernel_representativeness(m);
    std::vector<std::size_t> removed;
    for (std::size_t k = 0; k < m.num_kernels; ++k) {
        if (!m.active[k] || rep(static_cast<Eigen::Index>(k)) <= eta) removed.push_back(k);
    }
    detail::require(removed.size() < m.num_kernels, "no representative kernel");
    return removed;
}

inline std::vector<std::size_t> truncate_kernels(const BasisBank& bank, const ClassSamples& eval_set, double eta) {
    return truncate_kernels(compute_moments(bank, eval_set), eta);
}

/// Euclidean projection of v onto the probability simplex.
inline Vector project_simplex(const VectorRef& v) {
    detail::require(v.size() >= 1, "project_simplex: empty vector");
    Vector u = v;
    std::sort(u.data(), u.data() + u.size(), std::greater<>());
    double cumsum = 0.0;
    double theta = 0.0;
    for (Eigen::Index j = 0; j < u.size(); ++j) {
        cumsum += u(j);
        const double t = (cumsum - 1.0) / static_cast<double>(j + 1);
        if (u(j) - t > 0.0) theta = t;
    }
    Vector out = (v.array() - theta).max(0.0);
    const double sum = out.sum();
    if (sum > 0.0) out /= sum;
    return out;
}

struct OptimizeOptions {
    double f_tol = 1e-8;
    std::size_t max_iters = 500;
};

struct OptimizeResult {
    WeightMatrix nu;
    std::vector<double> trace;  // objective at every accepted iterate, starting with init
    std::size_t iterations = 0;
    bool converged = false;
};

/// Thrown when the objective turns non-finite; carries the last feasible iterate.
class OptimizationError : public Error {
public:
    OptimizationError(const std::string& what, WeightMatrix last) : Error(what), last_feasible_(std::move(last)) {}
    const WeightMatrix& last_feasible() const { return last_feasible_; }

private:
    WeightMatrix last_feasible_;
};

namespace detail {

// Gradient of h = h_b / h_w with respect to nu, with square roots floored.
inline Matrix objective_gradient(const Matrix& nu, const ProjectionMoments& m, const std::vector<Eigen::Index>& cols) {
    const std::size_t C = m.num_classes;
    const Matrix s = nu.cwiseMax(kWeightFloor).cwiseSqrt();
    Matrix masked = Matrix::Zero(nu.rows(), nu.cols());
    for (auto k : cols) masked.col(k) = s.col(k);
    const ObjectiveParts parts = objective_from_roots(masked, m);
    Matrix grad = Matrix::Zero(nu.rows(), nu.cols());
    const double inv_cross = C > 1 ? 1.0 / static_cast<double>(C - 1) : 0.0;
    for (std::size_t a = 0; a < C; ++a) {
        const auto ai = static_cast<Eigen::Index>(a);
        const Vector sa = masked.row(ai).transpose();
        Vector cross = Vector::Zero(sa.size());
        for (std::size_t c = 0; c < C; ++c) {
            if (c != a) cross += m.second_moment(a, c) * sa;
        }
        cross *= inv_cross;
        const Vector own = m.second_moment(a, a) * sa;
        // d h / d s = 2 (B s - h W s) / h_w and d s / d nu = 1 / (2 s).
        for (auto k : cols) grad(ai, k) = (cross(k) - parts.h * own(k)) / (parts.h_w * s(ai, k));
    }
    return grad;
}

}  // namespace detail

/// Projected gradient descent with Armijo backtracking and Barzilai-Borwein
/// step lengths. Only active kernels carry weight; the objective sequence of
/// accepted iterates is nonincreasing.
inline OptimizeResult optimize_weights(const ProjectionMoments& m, const WeightMatrix& init,
                                       const OptimizeOptions& opts = {}) {
    detail::check_weights_against(init, m);
    detail::require(opts.f_tol >= 0.0, "optimize_weights: f_tol must be nonnegative");
    std::vector<Eigen::Index> cols;
    for (std::size_t k = 0; k < m.num_kernels; ++k) {
        if (m.active[k]) cols.push_back(static_cast<Eigen::Index>(k));
    }
    detail::require(!cols.empty(), "no representative kernel");

    auto evaluate = [&](const Matrix& nu) { return detail::objective_from_roots(nu.cwiseSqrt(), m).h; };
    auto project = [&](const Matrix& nu) {
        Matrix out = Matrix::Zero(nu.rows(), nu.cols());
        Vector row(static_cast<Eigen::Index>(cols.size()));
        for (Eigen::Index c = 0; c < nu.rows(); ++c) {
            for (std::size_t j = 0; j < cols.size(); ++j) row(static_cast<Eigen::Index>(j)) = nu(c, cols[j]);
            const Vector p = project_simplex(row);
            for (std::size_t j = 0; j < cols.size(); ++j) out(c, cols[j]) = p(static_cast<Eigen::Index>(j));
        }
        return out;
    };

    OptimizeResult result;
    result.nu = init;
    double f = evaluate(init);
    detail::require(std::isfinite(f), "non-representative model");
    result.trace.push_back(f);
    if (cols.size() == 1) {
        result.converged = true;
        return result;
    }

    Matrix grad = detail::objective_gradient(result.nu, m, cols);
    double step = 1.0;
    constexpr double kArmijo = 1e-4;
    constexpr int kMaxBacktracks = 60;
    while (result.iterations < opts.max_iters) {
        bool accepted = false;
        Matrix candidate;
        double fc = f;
        for (int bt = 0; bt < kMaxBacktracks; ++bt) {
            candidate = project(result.nu - step * grad);
            fc = evaluate(candidate);
            if (std::isnan(fc)) throw OptimizationError("objective became non-finite during optimization", result.nu);
            const double decrease = (grad.array() * (candidate - result.nu).array()).sum();
            if (fc <= f + kArmijo * decrease && fc <= f) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            result.converged = true;
            break;
        }
        ++result.iterations;
        const double improvement = f - fc;
        const Matrix next_grad = detail::objective_gradient(candidate, m, cols);
        const Matrix ds = candidate - result.nu;
        const double sy = (ds.array() * (next_grad - grad).array()).sum();
        const double ss = ds.squaredNorm();
        step = sy > 0.0 ? std::clamp(ss / sy, 1e-12, 1e12) : std::min(step * 2.0, 1e12);
        result.nu = std::move(candidate);
        grad = next_grad;
        f = fc;
        result.trace.push_back(f);
        if (improvement < opts.f_tol) {
            result.converged = true;
            break;
        }
    }
    return result;
}

inline OptimizeResult optimize_weights(const BasisBank& bank, const ClassSamples& eval_set, const WeightMatrix& init,
                                       const OptimizeOptions& opts = {}) {
    std::vector<bool> used(static_cast<std::size_t>(init.cols()), false);
    for (Eigen::Index k = 0; k < init.cols(); ++k) used[static_cast<std::size_t>(k)] = (init.col(k).array() > 0.0).any();
    return optimize_weights(compute_moments(bank, eval_set, used), init, opts);
}

/// Zeroes entries below t times the row maximum and renormalizes each row.
inline WeightMatrix threshold_weights(const WeightMatrix& nu, double t) {
    detail::require(t >= 0.0 && t < 1.0, "threshold_weights: t must lie in [0, 1)");
    require_feasible(nu, "threshold_weights");
    WeightMatrix out = nu;
    for (Eigen::Index c = 0; c < out.rows(); ++c) {
        const double cutoff = t * out.row(c).maxCoeff();
        for (Eigen::Index k = 0; k < out.cols(); ++k) {
            if (out(c, k) < cutoff) out(c, k) = 0.0;
        }
        out.row(c) /= out.row(c).sum();
    }
    return out;
}

/// Per-class argmax of the weights, lowest index on ties.
inline std::vector<std::size_t> select_best_kernels(const WeightMatrix& nu) {
    require_feasible(nu, "select_best_kernels");
    std::vector<std::size_t> best(static_cast<std::size_t>(nu.rows()), 0);
    for (Eigen::Index c = 0; c < nu.rows(); ++c) {
        Eigen::Index arg = 0;
        for (Eigen::Index k = 1; k < nu.cols(); ++k) {
            if (nu(c, k) > nu(c, arg)) arg = k;
        }
        best[static_cast<std::size_t>(c)] = static_cast<std::size_t>(arg);
    }
    return best;
}

/// Mean cross-class projection energy on basis (c, k) divided by the squared
/// norm of the class-c mean projection. Smaller is better.
inline double classwise_criterion(const ProjectionMoments& m, std::size_t c, std::size_t k) {
    detail::require(c < m.num_classes && k < m.num_kernels, "classwise_criterion: index out of range");
    detail::require(m.active[k], "missing basis for class " + std::to_string(c) + ", kernel " + std::to_string(k));
    const auto ki = static_cast<Eigen::Index>(k);
    const double mean_norm = m.mean_projection(c, c).col(ki).squaredNorm();
    detail::require(mean_norm > 1e-12, "mean collapse");
    if (m.num_classes == 1) return 0.0;
    double cross = 0.0;
    for (std::size_t other = 0; other < m.num_classes; ++other) {
        if (other != c) cross += m.second_moment(c, other)(ki, ki);
    }
    return cross / static_cast<double>(m.num_classes - 1) / mean_norm;
}

inline double classwise_criterion(const BasisBank& bank, const ClassSamples& eval_set, std::size_t c, std::size_t k) {
    std::vector<bool> only(bank.num_kernels(), false);
    detail::require(k < only.size(), "classwise_criterion: index out of range");
    only[k] = true;
    return classwise_criterion(compute_moments(bank, eval_set, only), c, k);
}

/// Per-class argmin of classwise_criterion over active kernels; kernels whose
/// class mean collapses are skipped.
inline std::vector<std::size_t> select_by_criterion(const ProjectionMoments& m) {
    std::vector<std::size_t> best(m.num_classes, 0);
    for (std::size_t c = 0; c < m.num_classes; ++c) {
        double best_value = std::numeric_limits<double>::infinity();
        bool found = false;
        for (std::size_t k = 0; k < m.num_kernels; ++k) {
            if (!m.active[k]) continue;
            const double mean_norm = m.mean_projection(c, c).col(static_cast<Eigen::Index>(k)).squaredNorm();
            if (mean_norm <= 1e-12) continue;
            const double v = classwise_criterion(m, c, k);
            if (!found || v < best_value) {
                best_value = v;
                best[c] = k;
                found = true;
            }
        }
        detail::require(found, "mean collapse for every kernel of class " + std::to_string(c));
    }
    return best;
}

struct ClasmkOptions {
    double eta = 0.1;
    double t = 0.1;
    double split_fraction = 0.5;
    std::uint64_t split_seed = 0;
    BasisOptions basis;
    OptimizeOptions optimize;
};

struct ClasmkModel {
    BasisBank bank;                       // bases of truncated kernels are dropped
    WeightMatrix nu;                      // thresholded weights
    WeightMatrix nu_optimized;            // before thresholding
    std::vector<std::size_t> truncated;
    ObjectiveParts initial;               // uniform weights over surviving kernels
    ObjectiveParts optimized;
    ObjectiveParts thresholded;           // after thresholding
    std::vector<double> trace;
    double optimize_seconds = 0.0;        // moment build plus weight optimization
};

/// Splits each class into a basis-fitting part and a weight-fitting part, fits
/// all bases, truncates, optimizes from uniform weights and thresholds.
inline ClasmkModel train_clasmk(const ClassSamples& train, const KernelSet& kernels, const ClasmkOptions& opts) {
    detail::require(!train.empty(), "train_clasmk: no classes");
    for (std::size_t c = 0; c < train.size(); ++c) {
        detail::require(train[c].rows() >= 2, "train_clasmk: class " + std::to_string(c) + " needs at least 2 samples");
    }
    auto [basis_part, weight_part] = split_class_samples(train, opts.split_fraction, opts.split_seed);

    ClasmkModel model;
    model.bank = fit_bank(basis_part, kernels, opts.basis);

    const auto start = std::chrono::steady_clock::now();
    ProjectionMoments moments = compute_moments(model.bank, weight_part);
    model.truncated = truncate_kernels(moments, opts.eta);
    for (auto k : model.truncated) moments.active[k] = false;
    const WeightMatrix init = uniform_weights(train.size(), moments.active);
    OptimizeResult opt = optimize_weights(moments, init, opts.optimize);
    model.optimize_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    for (auto k : model.truncated) {
        for (std::size_t c = 0; c < train.size(); ++c) model.bank.erase(c, k);
    }
    model.initial = empirical_objective(init, moments);
    model.nu_optimized = opt.nu;
    model.optimized = empirical_objective(opt.nu, moments);
    model.nu = threshold_weights(opt.nu, opts.t);
    model.thresholded = empirical_objective(model.nu, moments);
    model.trace = std::move(opt.trace);
    return model;
}

}  // namespace clask
