#pragma once

// Explicit CLASMK feature map. Block c stacks sum_k sqrt(nu_ck) * p_ck(x), each
// projection zero-padded to the widest class-c basis in use.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "clask/detail/error.hpp"
#include "clask/kernel.hpp"
#include "clask/metric.hpp"
#include "clask/subspace.hpp"

namespace clask {

/// Width of each class block: the largest rank among kernels with nonzero weight.
inline std::vector<Eigen::Index> block_widths(const BasisBank& bank, const WeightMatrix& nu) {
    detail::require(static_cast<std::size_t>(nu.rows()) == bank.num_classes() &&
                        static_cast<std::size_t>(nu.cols()) == bank.num_kernels(),
                    "weight matrix shape does not match the basis bank");
    std::vector<Eigen::Index> widths(bank.num_classes(), 0);
    for (std::size_t c = 0; c < bank.num_classes(); ++c) {
        for (std::size_t k = 0; k < bank.num_kernels(); ++k) {
            if (nu(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k)) > 0.0) {
                widths[c] = std::max(widths[c], bank.at(c, k).rank());
            }
        }
    }
    return widths;
}

inline Eigen::Index embedding_dim(const BasisBank& bank, const WeightMatrix& nu) {
    Eigen::Index total = 0;
    for (auto w : block_widths(bank, nu)) total += w;
    return total;
}

/// Embeds every row of X; the result is N x embedding_dim.
inline Matrix embed_rows(const BasisBank& bank, const WeightMatrix& nu, const MatrixRef& X) {
    require_feasible(nu, "embed");
    const auto widths = block_widths(bank, nu);
    Eigen::Index total = 0;
    for (auto w : widths) total += w;
    Matrix out = Matrix::Zero(X.rows(), total);
    Eigen::Index offset = 0;
    for (std::size_t c = 0; c < bank.num_classes(); ++c) {
        for (std::size_t k = 0; k < bank.num_kernels(); ++k) {
            const double w = nu(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k));
            if (w <= 0.0) continue;
            const Matrix p = project_rows(bank.at(c, k), bank.kernel(k), X);
            out.middleCols(offset, p.cols()) += std::sqrt(w) * p;
        }
        offset += widths[c];
    }
    return out;
}

inline Vector embed(const BasisBank& bank, const WeightMatrix& nu, const VectorRef& x) {
    const Matrix row = x.transpose();
    return embed_rows(bank, nu, row).row(0).transpose();
}

/// The CLASMK kernel value sum_c sum_{k,l} sqrt(nu_ck nu_cl) <pad p_ck(x), pad p_cl(y)>,
/// evaluated term by term without forming the embedding.
inline double clasmk_eval(const VectorRef& x, const VectorRef& y, const BasisBank& bank, const WeightMatrix& nu) {
    require_feasible(nu, "clasmk_eval");
    double total = 0.0;
    for (std::size_t c = 0; c < bank.num_classes(); ++c) {
        const auto ci = static_cast<Eigen::Index>(c);
        std::vector<Vector> px(bank.num_kernels()), py(bank.num_kernels());
        for (std::size_t k = 0; k < bank.num_kernels(); ++k) {
            if (nu(ci, static_cast<Eigen::Index>(k)) <= 0.0) continue;
            px[k] = project(bank.at(c, k), bank.kernel(k), x);
            py[k] = project(bank.at(c, k), bank.kernel(k), y);
        }
        for (std::size_t k = 0; k < bank.num_kernels(); ++k) {
            const double wk = nu(ci, static_cast<Eigen::Index>(k));
            if (wk <= 0.0) continue;
            for (std::size_t l = 0; l < bank.num_kernels(); ++l) {
                const double wl = nu(ci, static_cast<Eigen::Index>(l));
                if (wl <= 0.0) continue;
                const Eigen::Index r = std::min(px[k].size(), py[l].size());
                total += std::sqrt(wk * wl) * px[k].head(r).dot(py[l].head(r));
            }
        }
    }
    return total;
}

}  // namespace clask
