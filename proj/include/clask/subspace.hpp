#pragma once

// Per-class, per-kernel subspace bases. Each basis is a landmark set X_B picked
// greedily by kernel-space innovation plus a transform A with A' K_BB A = I, so
// that A' k(X_B, x) are the coordinates of phi(x) in the estimated subspace.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "clask/detail/error.hpp"
#include "clask/detail/parallel.hpp"
#include "clask/detail/rng.hpp"
#include "clask/kernel.hpp"

namespace clask {

/// Per-class point sets; entry c holds the class-c samples, one per row.
using ClassSamples = std::vector<Matrix>;

struct ClassBasis {
    std::size_t class_id = 0;
    std::size_t kernel_index = 0;
    Matrix landmarks;  // m x p
    Matrix transform;  // m x r, r <= m after discarding near-null directions

    Eigen::Index num_landmarks() const { return landmarks.rows(); }
    Eigen::Index rank() const { return transform.cols(); }
};

struct BasisOptions {
    double tol = 1e-3;
    /// 0 selects min(class size, 256).
    std::size_t max_rank = 0;
    std::uint64_t seed = 0;
};

inline constexpr std::size_t kDefaultMaxRank = 256;

namespace detail {

// Residuals at or below this are treated as exact kernel-space duplicates.
inline constexpr double kResidualFloor = 1e-10;
// Eigenvalues below kRankEps * lambda_max are dropped when building A.
inline constexpr double kRankEps = 1e-10;

}  // namespace detail

/// Greedy landmark selection over the rows of `data` in their given order,
/// followed by A = V Lambda^{-1/2} from the landmark Gram eigendecomposition.
inline ClassBasis fit_class_basis(const MatrixRef& data, const KernelSpec& spec, double tol, std::size_t max_rank,
                                  std::size_t class_id = 0, std::size_t kernel_index = 0) {
    spec.validate();
    detail::require(data.rows() >= 1, "fit_class_basis: empty class");
    detail::require(tol >= 0.0 && tol < 1.0, "fit_class_basis: tol must lie in [0, 1)");
    detail::require(max_rank >= 1, "fit_class_basis: max_rank must be >= 1");

    const auto n = static_cast<std::size_t>(data.rows());
    const auto dim = static_cast<std::size_t>(data.cols());
    const std::size_t budget = std::min(max_rank, n);
    const double admit = std::max(tol, detail::kResidualFloor);
    const Matrix pts = data.transpose();  // one point per column

    // Incremental Cholesky factor of the landmark Gram: K_BB = L L'.
    Matrix chol = Matrix::Zero(static_cast<Eigen::Index>(budget), static_cast<Eigen::Index>(budget));
    std::vector<std::size_t> chosen;
    chosen.reserve(budget);
    Vector kb(static_cast<Eigen::Index>(budget));

    for (std::size_t i = 0; i < n && chosen.size() < budget; ++i) {
        const double* x = pts.data() + i * dim;
        const auto m = static_cast<Eigen::Index>(chosen.size());
        for (Eigen::Index j = 0; j < m; ++j) {
            kb(j) = detail::kernel_raw_normalized(spec, pts.data() + chosen[static_cast<std::size_t>(j)] * dim, x, dim);
        }
        double residual = 1.0;
        if (m > 0) {
            Vector z = kb.head(m);
            chol.topLeftCorner(m, m).triangularView<Eigen::Lower>().solveInPlace(z);
            residual = 1.0 - z.squaredNorm();
            if (residual > admit) chol.row(m).head(m) = z.transpose();
        }
        if (residual > admit) {
            chol(m, m) = std::sqrt(residual);
            chosen.push_back(i);
        }
    }

    ClassBasis basis;
    basis.class_id = class_id;
    basis.kernel_index = kernel_index;
    basis.landmarks.resize(static_cast<Eigen::Index>(chosen.size()), data.cols());
    for (std::size_t j = 0; j < chosen.size(); ++j) {
        basis.landmarks.row(static_cast<Eigen::Index>(j)) = data.row(static_cast<Eigen::Index>(chosen[j]));
    }

    const Matrix kbb = gram(spec, basis.landmarks);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(kbb);
    detail::require(eig.info() == Eigen::Success, "fit_class_basis: eigendecomposition failed");
    const Vector& evals = eig.eigenvalues();
    const double lmax = evals.maxCoeff();
    const double cutoff = detail::kRankEps * std::max(lmax, 0.0);
    std::vector<Eigen::Index> keep;
    for (Eigen::Index j = evals.size() - 1; j >= 0; --j) {
        if (evals(j) > cutoff && evals(j) > 0.0) keep.push_back(j);
    }
    detail::require(!keep.empty() && lmax > 0.0, "degenerate landmark Gram");
    basis.transform.resize(kbb.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j) {
        basis.transform.col(static_cast<Eigen::Index>(j)) =
            eig.eigenvectors().col(keep[j]) / std::sqrt(evals(keep[j]));
    }
    return basis;
}

/// Coordinates A' k(X_B, x) of one point.
inline Vector project(const ClassBasis& basis, const KernelSpec& spec, const VectorRef& x) {
    detail::require(x.size() == basis.landmarks.cols(), "project: dimension mismatch");
    const Matrix row = x.transpose();
    return (gram(spec, row, basis.landmarks) * basis.transform).transpose();
}

/// Projections of every row of X; result is N x rank.
inline Matrix project_rows(const ClassBasis& basis, const KernelSpec& spec, const MatrixRef& X) {
    detail::require(X.cols() == basis.landmarks.cols(), "project: dimension mismatch");
    return gram(spec, X, basis.landmarks) * basis.transform;
}

struct ApproxGram {
    Matrix approx;            // L = P P'
    double frobenius_error;   // ||K - L||_F
};

inline ApproxGram approx_gram(const ClassBasis& basis, const KernelSpec& spec, const MatrixRef& X) {
    const Matrix p = project_rows(basis, spec, X);
    ApproxGram out;
    out.approx = p * p.transpose();
    out.frobenius_error = (gram(spec, X) - out.approx).norm();
    return out;
}

/// Q = U_a' U_b estimated as A_a' k(X_a, X_b) A_b. Only defined within one kernel.
inline Matrix subspace_overlap(const ClassBasis& a, const ClassBasis& b, const KernelSpec& spec) {
    detail::require(a.kernel_index == b.kernel_index, "subspace_overlap: bases use different kernels");
    return a.transform.transpose() * gram(spec, a.landmarks, b.landmarks) * b.transform;
}

/// Dense (class, kernel) table of fitted bases. Missing entries are kernels that
/// were never fitted or were dropped.
class BasisBank {
public:
    BasisBank() = default;
    BasisBank(std::size_t num_classes, KernelSet kernels)
        : classes_(num_classes), kernels_(kernels.size()), specs_(std::move(kernels)),
          slots_(num_classes * kernels_) {}

    std::size_t num_classes() const { return classes_; }
    std::size_t num_kernels() const { return kernels_; }
    const KernelSet& kernels() const { return specs_; }
    const KernelSpec& kernel(std::size_t k) const {
        detail::require(k < kernels_, "BasisBank: kernel index out of range");
        return specs_[k];
    }

    bool contains(std::size_t c, std::size_t k) const {
        return c < classes_ && k < kernels_ && slots_[c * kernels_ + k].has_value();
    }

    const ClassBasis& at(std::size_t c, std::size_t k) const {
        detail::require(contains(c, k),
                        "missing basis for class " + std::to_string(c) + ", kernel " + std::to_string(k));
        return *slots_[c * kernels_ + k];
    }

    void set(ClassBasis basis) {
        detail::require(basis.class_id < classes_ && basis.kernel_index < kernels_, "BasisBank::set: out of range");
        const std::size_t slot = basis.class_id * kernels_ + basis.kernel_index;
        slots_[slot] = std::move(basis);
    }

    void erase(std::size_t c, std::size_t k) {
        if (c < classes_ && k < kernels_) slots_[c * kernels_ + k].reset();
    }

    /// True when every class has a basis for kernel k.
    bool covers_kernel(std::size_t k) const {
        for (std::size_t c = 0; c < classes_; ++c) {
            if (!contains(c, k)) return false;
        }
        return true;
    }

private:
    std::size_t classes_ = 0;
    std::size_t kernels_ = 0;
    KernelSet specs_;
    std::vector<std::optional<ClassBasis>> slots_;
};

/// Fits one basis per (class, kernel). Each class is traversed in a seeded
/// permutation shared by all kernels; fits run concurrently.
inline BasisBank fit_bank(const ClassSamples& classes, const KernelSet& kernels, const BasisOptions& opts) {
    detail::require(!classes.empty() && !kernels.empty(), "fit_bank: no classes or no kernels");
    const std::size_t num_classes = classes.size();
    const std::size_t num_kernels = kernels.size();

    std::vector<Matrix> ordered(num_classes);
    for (std::size_t c = 0; c < num_classes; ++c) {
        detail::require(classes[c].rows() >= 1, "fit_bank: class " + std::to_string(c) + " is empty");
        auto order = detail::iota_indices(static_cast<std::size_t>(classes[c].rows()));
        detail::Rng rng(detail::derive_seed(opts.seed, c));
        detail::portable_shuffle(order, rng);
        ordered[c].resize(classes[c].rows(), classes[c].cols());
        for (std::size_t i = 0; i < order.size(); ++i) {
            ordered[c].row(static_cast<Eigen::Index>(i)) = classes[c].row(static_cast<Eigen::Index>(order[i]));
        }
    }

    std::vector<ClassBasis> fitted(num_classes * num_kernels);
    detail::parallel_for(fitted.size(), [&](std::size_t slot) {
        const std::size_t c = slot / num_kernels;
        const std::size_t k = slot % num_kernels;
        const std::size_t cap = opts.max_rank > 0 ? opts.max_rank : kDefaultMaxRank;
        fitted[slot] = fit_class_basis(ordered[c], kernels[k], opts.tol, cap, c, k);
    });

    BasisBank bank(num_classes, kernels);
    for (auto& b : fitted) bank.set(std::move(b));
    return bank;
}

}  // namespace clask
