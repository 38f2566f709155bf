#pragma once

// Normalized base kernels, Gram blocks and kernel-induced distances.

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "clask/detail/error.hpp"

namespace clask {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using VectorRef = Eigen::Ref<const Vector>;
using MatrixRef = Eigen::Ref<const Matrix>;

enum class KernelFamily { Rbf, Polynomial };

/// One base kernel. RBF uses exp(-||x - y||^2 / sigma^2); the polynomial kernel
/// (1 + x'y)^d is cosine-normalized so that every kernel satisfies k(x, x) = 1.
struct KernelSpec {
    KernelFamily family = KernelFamily::Rbf;
    double param = 1.0;

    static KernelSpec rbf(double sigma) { return KernelSpec{KernelFamily::Rbf, sigma}.validated(); }
    static KernelSpec poly(int degree) {
        return KernelSpec{KernelFamily::Polynomial, static_cast<double>(degree)}.validated();
    }

    void validate() const {
        detail::require(std::isfinite(param) && param > 0.0, "kernel parameter must be positive and finite");
        if (family == KernelFamily::Polynomial) {
            detail::require(param == std::floor(param), "polynomial degree must be a positive integer");
        }
    }

    KernelSpec validated() const {
        validate();
        return *this;
    }

    /// Text form used in configs and CSV headers: "rbf:<sigma>" or "poly:<degree>".
    std::string to_string() const {
        char buf[64];
        auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), param);
        (void)ec;
        return std::string(family == KernelFamily::Rbf ? "rbf:" : "poly:") + std::string(buf, end);
    }

    static KernelSpec parse(std::string_view text) {
        const auto colon = text.find(':');
        detail::require(colon != std::string_view::npos, "kernel spec must look like rbf:<sigma> or poly:<degree>, got '" +
                                                             std::string(text) + "'");
        const std::string_view name = text.substr(0, colon);
        const std::string value(text.substr(colon + 1));
        double param = 0.0;
        try {
            std::size_t used = 0;
            param = std::stod(value, &used);
            detail::require(used == value.size(), "trailing characters");
        } catch (const std::exception&) {
            detail::fail("bad kernel parameter in '" + std::string(text) + "'");
        }
        KernelSpec spec;
        if (name == "rbf") {
            spec.family = KernelFamily::Rbf;
        } else if (name == "poly") {
            spec.family = KernelFamily::Polynomial;
        } else {
            detail::fail("unknown kernel family '" + std::string(name) + "'");
        }
        spec.param = param;
        return spec.validated();
    }

    friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

/// Ordered kernel set; positions index the columns of a WeightMatrix.
using KernelSet = std::vector<KernelSpec>;

namespace detail {

inline bool all_finite(const double* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(p[i])) return false;
    }
    return true;
}

inline double integer_power(double base, int exponent) {
    double result = 1.0;
    while (exponent > 0) {
        if (exponent & 1) result *= base;
        base *= base;
        exponent >>= 1;
    }
    return result;
}

// Both pointers address `dim` contiguous coordinates.
inline double kernel_raw_normalized(const KernelSpec& spec, const double* x, const double* y, std::size_t dim) {
    if (spec.family == KernelFamily::Rbf) {
        double d2 = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            const double d = x[i] - y[i];
            d2 += d * d;
        }
        return std::exp(-d2 / (spec.param * spec.param));
    }
    double xy = 1.0, xx = 1.0, yy = 1.0;
    for (std::size_t i = 0; i < dim; ++i) {
        xy += x[i] * y[i];
        xx += x[i] * x[i];
        yy += y[i] * y[i];
    }
    double cosine = xy / std::sqrt(xx * yy);
    cosine = std::clamp(cosine, -1.0, 1.0);
    return integer_power(cosine, static_cast<int>(spec.param));
}

}  // namespace detail

/// Normalized kernel value k(x,y) / sqrt(k(x,x) k(y,y)).
inline double eval_kernel(const KernelSpec& spec, const VectorRef& x, const VectorRef& y) {
    spec.validate();
    detail::require(x.size() == y.size(), "eval_kernel: dimension mismatch");
    detail::require(detail::all_finite(x.data(), static_cast<std::size_t>(x.size())) &&
                        detail::all_finite(y.data(), static_cast<std::size_t>(y.size())),
                    "eval_kernel: non-finite input");
    return detail::kernel_raw_normalized(spec, x.data(), y.data(), static_cast<std::size_t>(x.size()));
}

/// Gram block between point sets stored one point per row. Entry (i, j) is
/// eval_kernel(spec, X.row(i), Y.row(j)).
inline Matrix gram(const KernelSpec& spec, const MatrixRef& X, const MatrixRef& Y) {
    spec.validate();
    detail::require(X.rows() > 0 && Y.rows() > 0, "gram: empty point set");
    detail::require(X.cols() == Y.cols(), "gram: dimension mismatch");
    // Column-major copies of the transposes keep each point contiguous.
    const Matrix xt = X.transpose();
    const Matrix yt = Y.transpose();
    detail::require(detail::all_finite(xt.data(), static_cast<std::size_t>(xt.size())) &&
                        detail::all_finite(yt.data(), static_cast<std::size_t>(yt.size())),
                    "gram: non-finite input");
    const auto dim = static_cast<std::size_t>(X.cols());
    Matrix g(X.rows(), Y.rows());
    for (Eigen::Index j = 0; j < Y.rows(); ++j) {
        const double* y = yt.data() + j * yt.rows();
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            g(i, j) = detail::kernel_raw_normalized(spec, xt.data() + i * xt.rows(), y, dim);
        }
    }
    return g;
}

/// Symmetric Gram matrix of one point set with an exact unit diagonal.
inline Matrix gram(const KernelSpec& spec, const MatrixRef& X) {
    Matrix g = gram(spec, X, X);
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
        g(i, i) = 1.0;
        for (Eigen::Index j = 0; j < i; ++j) g(j, i) = g(i, j);
    }
    return g;
}

/// Gram block tagged with the position of its kernel in a KernelSet.
struct GramBlock {
    Matrix values;
    std::size_t kernel_index = 0;
};

inline GramBlock gram_block(const KernelSet& kernels, std::size_t kernel_index, const MatrixRef& X,
                            const MatrixRef& Y) {
    detail::require(kernel_index < kernels.size(), "gram_block: kernel index out of range");
    return GramBlock{gram(kernels[kernel_index], X, Y), kernel_index};
}

/// Squared feature-space distance ||phi(x) - phi(y)||^2 from kernel values.
/// Cancellation residue below zero is clamped.
inline double feature_distance_sq(double kx, double ky, double kxy) {
    const double d = kx + ky - 2.0 * kxy;
    return d < 0.0 ? 0.0 : d;
}

}  // namespace clask
