#pragma once

// Synthetic data: feature-space samples drawn from the class-subspace model,
// plus small input-space toy sets.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "clask/data.hpp"
#include "clask/detail/error.hpp"
#include "clask/detail/rng.hpp"
#include "clask/kernel.hpp"

namespace clask {

struct SubspaceParams {
    std::size_t num_classes = 2;
    Eigen::Index rank = 2;
    Eigen::Index ambient_dim = 16;
    double sigma_e_sq = 0.1;
    double overlap_lambda = 0.0;
    std::size_t per_class = 500;
    double spread = 0.5;  // scatter of the subspace coordinates around the class mean direction
    std::uint64_t seed = 0;
};

struct SubspaceSample {
    Dataset data;               // unit-norm feature vectors
    std::vector<Matrix> bases;  // orthonormal U_c, ambient_dim x rank
};

namespace detail {

inline Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
    }
    return m;
}

inline Matrix random_orthogonal(Eigen::Index n, Rng& rng) {
    Eigen::HouseholderQR<Matrix> qr(gaussian_matrix(n, n, rng));
    return qr.householderQ() * Matrix::Identity(n, n);
}

inline Vector random_unit(Eigen::Index n, Rng& rng) {
    Vector v = gaussian_matrix(n, 1, rng);
    while (v.norm() < 1e-12) v = gaussian_matrix(n, 1, rng);
    return v / v.norm();
}

// Unit vector around `center` (unit) with Gaussian scatter of size `spread`.
inline Vector scattered_unit(const Vector& center, double spread, Rng& rng) {
    Vector v = center + spread * gaussian_matrix(center.size(), 1, rng);
    const double n = v.norm();
    return n > 1e-12 ? Vector(v / n) : center;
}

}  // namespace detail

/// phi = U_c beta + e with ||beta||^2 = 1 - sigma_e^2 and e of squared norm
/// sigma_e^2 orthogonal to every class subspace, so ||phi|| = 1 exactly.
/// U_c = a V_0 + b V_c over orthonormal blocks gives U_c' U_c~ = sqrt(lambda) I,
/// which makes the population overlap ratio equal to lambda.
inline SubspaceSample synth_subspace(const SubspaceParams& p) {
    detail::require(p.num_classes >= 1 && p.rank >= 1 && p.per_class >= 1, "synth_subspace: empty configuration");
    detail::require(p.sigma_e_sq >= 0.0 && p.sigma_e_sq < 1.0, "synth_subspace: sigma_e^2 must lie in [0, 1)");
    detail::require(p.overlap_lambda >= 0.0 && p.overlap_lambda <= 1.0, "synth_subspace: lambda must lie in [0, 1]");
    const auto C = static_cast<Eigen::Index>(p.num_classes);
    const Eigen::Index r = p.rank;
    const bool shared = p.overlap_lambda > 0.0;
    const Eigen::Index used = (C + (shared ? 1 : 0)) * r;
    detail::require(used + (p.sigma_e_sq > 0.0 ? 1 : 0) <= p.ambient_dim,
                    "synth_subspace: rank/overlap combination does not fit the ambient dimension");

    detail::Rng rng(p.seed);
    const Matrix Q = detail::random_orthogonal(p.ambient_dim, rng);
    const double a = std::sqrt(std::sqrt(p.overlap_lambda));
    const double b = std::sqrt(std::max(0.0, 1.0 - a * a));
    SubspaceSample out;
    const Eigen::Index first = shared ? r : 0;
    for (Eigen::Index c = 0; c < C; ++c) {
        Matrix U = b * Q.middleCols(first + c * r, r);
        if (shared) U += a * Q.leftCols(r);
        out.bases.push_back(U);
    }
    const Matrix complement = Q.rightCols(p.ambient_dim - used);

    out.data.num_classes = p.num_classes;
    for (std::size_t c = 0; c < p.num_classes; ++c) out.data.original_labels.push_back(static_cast<long long>(c));
    out.data.X.resize(C * static_cast<Eigen::Index>(p.per_class), p.ambient_dim);
    const double radius = std::sqrt(1.0 - p.sigma_e_sq);
    const double noise = std::sqrt(p.sigma_e_sq);
    Eigen::Index row = 0;
    for (Eigen::Index c = 0; c < C; ++c) {
        const Vector center = detail::random_unit(r, rng);
        for (std::size_t i = 0; i < p.per_class; ++i) {
            Vector phi = out.bases[static_cast<std::size_t>(c)] * (radius * detail::scattered_unit(center, p.spread, rng));
            if (noise > 0.0) phi += complement * (noise * detail::random_unit(complement.cols(), rng));
            out.data.X.row(row++) = phi.transpose();
            out.data.y.push_back(static_cast<std::size_t>(c));
        }
    }
    return out;
}

struct ClassSpecificParams {
    std::size_t num_classes = 2;
    Eigen::Index rank = 2;
    Eigen::Index block_dim = 8;  // dimension of each kernel's feature space
    double sigma_e_sq = 0.1;
    double overlap_lambda = 0.1;
    std::size_t per_class = 200;
    double spread = 0.5;
    std::uint64_t seed = 0;
};

/// One unit-norm block per class-specific kernel. Class c uses U_c beta + e in
/// its own block; in block i != c it lies at squared distance
/// lambda (1 - sigma_e^2) inside span(U_i) near class i's mean direction, with
/// the rest of its unit norm orthogonal to U_i.
inline SubspaceSample synth_class_specific(const ClassSpecificParams& p) {
    detail::require(p.num_classes >= 1 && p.rank >= 1 && p.per_class >= 1, "synth_class_specific: empty configuration");
    detail::require(p.sigma_e_sq >= 0.0 && p.sigma_e_sq < 1.0, "synth_class_specific: sigma_e^2 must lie in [0, 1)");
    detail::require(p.overlap_lambda >= 0.0 && p.overlap_lambda < 1.0, "synth_class_specific: lambda must lie in [0, 1)");
    detail::require(p.rank < p.block_dim, "synth_class_specific: rank must be below the block dimension");
    const auto C = static_cast<Eigen::Index>(p.num_classes);
    const Eigen::Index q = p.block_dim;
    const Eigen::Index r = p.rank;

    detail::Rng rng(p.seed);
    std::vector<Matrix> U, complement;
    std::vector<Vector> centers;
    SubspaceSample out;
    for (Eigen::Index i = 0; i < C; ++i) {
        const Matrix Q = detail::random_orthogonal(q, rng);
        U.push_back(Q.leftCols(r));
        complement.push_back(Q.rightCols(q - r));
        centers.push_back(detail::random_unit(r, rng));
        out.bases.push_back(U.back());
    }

    out.data.num_classes = p.num_classes;
    for (std::size_t c = 0; c < p.num_classes; ++c) out.data.original_labels.push_back(static_cast<long long>(c));
    out.data.X.resize(C * static_cast<Eigen::Index>(p.per_class), C * q);
    const double own_radius = std::sqrt(1.0 - p.sigma_e_sq);
    const double cross_sq = p.overlap_lambda * (1.0 - p.sigma_e_sq);
    Eigen::Index row = 0;
    for (Eigen::Index c = 0; c < C; ++c) {
        for (std::size_t n = 0; n < p.per_class; ++n) {
            Vector phi(C * q);
            for (Eigen::Index i = 0; i < C; ++i) {
                const auto iu = static_cast<std::size_t>(i);
                const Vector dir = detail::scattered_unit(centers[iu], p.spread, rng);
                const Vector off = complement[iu] * detail::random_unit(q - r, rng);
                Vector block;
                if (i == c) {
                    block = U[iu] * (own_radius * dir) + std::sqrt(p.sigma_e_sq) * off;
                } else {
                    block = U[iu] * (std::sqrt(cross_sq) * dir) + std::sqrt(1.0 - cross_sq) * off;
                }
                phi.segment(i * q, q) = block;
            }
            out.data.X.row(row++) = phi.transpose();
            out.data.y.push_back(static_cast<std::size_t>(c));
        }
    }
    return out;
}

/// Two interleaving half circles with Gaussian jitter; `shift` moves the second
/// moon horizontally (1 gives the usual layout).
inline Dataset make_moons(std::size_t per_class, double noise, std::uint64_t seed, double shift = 1.0) {
    detail::require(per_class >= 1 && noise >= 0.0, "make_moons: invalid parameters");
    detail::Rng rng(seed);
    std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
    std::normal_distribution<double> jitter(0.0, noise > 0.0 ? noise : 1.0);
    Dataset ds;
    ds.num_classes = 2;
    ds.original_labels = {0, 1};
    ds.X.resize(static_cast<Eigen::Index>(2 * per_class), 2);
    for (std::size_t i = 0; i < 2 * per_class; ++i) {
        const std::size_t c = i % 2;
        const double t = angle(rng);
        double x = c == 0 ? std::cos(t) : shift - std::cos(t);
        double y = c == 0 ? std::sin(t) : 0.5 - std::sin(t);
        if (noise > 0.0) {
            x += jitter(rng);
            y += jitter(rng);
        }
        ds.X(static_cast<Eigen::Index>(i), 0) = x;
        ds.X(static_cast<Eigen::Index>(i), 1) = y;
        ds.y.push_back(c);
    }
    return ds;
}

/// Isotropic Gaussian clusters, one per row of `centers`.
inline Dataset make_blobs(const Matrix& centers, std::size_t per_class, double stddev, std::uint64_t seed) {
    detail::require(centers.rows() >= 1 && per_class >= 1 && stddev >= 0.0, "make_blobs: invalid parameters");
    detail::Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Dataset ds;
    ds.num_classes = static_cast<std::size_t>(centers.rows());
    ds.X.resize(centers.rows() * static_cast<Eigen::Index>(per_class), centers.cols());
    Eigen::Index row = 0;
    for (Eigen::Index c = 0; c < centers.rows(); ++c) {
        ds.original_labels.push_back(static_cast<long long>(c));
        for (std::size_t i = 0; i < per_class; ++i) {
            for (Eigen::Index j = 0; j < centers.cols(); ++j) ds.X(row, j) = centers(c, j) + stddev * normal(rng);
            ++row;
            ds.y.push_back(static_cast<std::size_t>(c));
        }
    }
    return ds;
}

}  // namespace clask
