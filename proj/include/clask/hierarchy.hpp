#pragma once

// Layered CLASMK feature network. Each layer learns bases and weights on the
// low-confidence subset left by the previous layer; features are concatenated
// and the classifier is refitted on the full training set.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "clask/classifier.hpp"
#include "clask/data.hpp"
#include "clask/detail/error.hpp"
#include "clask/detail/rng.hpp"
#include "clask/embedding.hpp"
#include "clask/kernel.hpp"
#include "clask/metric.hpp"
#include "clask/subspace.hpp"

namespace clask {

struct LayerModel {
    std::size_t layer_index = 1;
    WeightMatrix nu;
    BasisBank bank;            // only bases with nonzero weight are kept
    LinearModel classifier;    // trained on features through this layer
    std::vector<std::size_t> truncated;
    ObjectiveParts objective;  // thresholded weights on the weight-fitting split
    double optimize_seconds = 0.0;
    std::size_t train_size = 0;     // samples the layer was fitted on
    std::size_t marginal_size = 0;  // low-confidence samples passed onward

    Eigen::Index dim() const { return embedding_dim(bank, nu); }
};

struct HierarchicalModel {
    std::size_t num_classes = 0;
    Eigen::Index input_dim = 0;
    KernelSet kernels;
    std::optional<Standardizer> standardizer;
    std::vector<LayerModel> layers;
    std::vector<double> delta_trace;  // ||nu(l) - nu(l-1)||_F per layer, nu(0) uniform
    std::vector<double> d_nu_trace;   // |delta(l) - delta(l-1)| for l >= 2
    bool stopped_on_failure = false;
    std::string failure_message;

    std::size_t num_layers() const { return layers.size(); }
};

struct HierarchyOptions {
    std::size_t l_max = 10;
    double t_kappa = 1.0;
    double epsilon = 1e-3;
    double ridge = kDefaultRidge;
    bool tune_ridge = false;
    ClasmkOptions clasmk;
    std::uint64_t seed = 0;
};

inline Vector embed_layer(const VectorRef& x, const LayerModel& layer) { return embed(layer.bank, layer.nu, x); }

inline Matrix embed_layer_rows(const MatrixRef& X, const LayerModel& layer) {
    return embed_rows(layer.bank, layer.nu, X);
}

/// Concatenated embeddings of layers 1..through (1-based) for every row of X.
inline Matrix embed_full_rows(const MatrixRef& X, const HierarchicalModel& model, std::size_t through) {
    detail::require(through >= 1 && through <= model.layers.size(), "embed_full: layer index out of range");
    detail::require(X.cols() == model.input_dim, "embed_full: input dimension mismatch");
    Eigen::Index total = 0;
    for (std::size_t l = 0; l < through; ++l) total += model.layers[l].dim();
    Matrix out(X.rows(), total);
    Eigen::Index offset = 0;
    for (std::size_t l = 0; l < through; ++l) {
        const Matrix block = embed_layer_rows(X, model.layers[l]);
        out.middleCols(offset, block.cols()) = block;
        offset += block.cols();
    }
    return out;
}

inline Vector embed_full(const VectorRef& x, const HierarchicalModel& model, std::size_t through) {
    const Matrix row = x.transpose();
    return embed_full_rows(row, model, through).row(0).transpose();
}

/// Predictions of the deepest layer's classifier. Inputs must already be
/// standardized when the model carries a standardizer.
inline std::vector<Prediction> predict_rows(const HierarchicalModel& model, const MatrixRef& X) {
    detail::require(!model.layers.empty(), "predict: model has no layers");
    return predict_rows(model.layers.back().classifier, embed_full_rows(X, model, model.layers.size()));
}

namespace detail {

inline LayerModel fit_layer(const Dataset& subset, const KernelSet& kernels, const HierarchyOptions& opts,
                            std::size_t layer_index) {
    ClasmkOptions copts = opts.clasmk;
    copts.split_seed = derive_seed(opts.seed, 2 * layer_index);
    copts.basis.seed = derive_seed(opts.seed, 2 * layer_index + 1);
    ClasmkModel fitted = train_clasmk(subset.class_samples(), kernels, copts);
    LayerModel layer;
    layer.layer_index = layer_index;
    layer.nu = fitted.nu;
    layer.bank = std::move(fitted.bank);
    for (std::size_t c = 0; c < layer.bank.num_classes(); ++c) {
        for (std::size_t k = 0; k < layer.bank.num_kernels(); ++k) {
            if (layer.nu(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k)) <= 0.0) layer.bank.erase(c, k);
        }
    }
    layer.truncated = std::move(fitted.truncated);
    layer.objective = fitted.thresholded;
    layer.optimize_seconds = fitted.optimize_seconds;
    layer.train_size = subset.size();
    return layer;
}

inline bool every_class_has(const Dataset& ds, const IndexList& idx, std::size_t min_count) {
    std::vector<std::size_t> counts(ds.num_classes, 0);
    for (auto i : idx) ++counts[ds.y[i]];
    for (auto n : counts) {
        if (n < min_count) return false;
    }
    return true;
}

}  // namespace detail

/// Trains layers until l_max is reached, the weight-change signal d_nu drops to
/// epsilon, or the marginal subset loses a class. Failures after the first
/// layer keep the layers trained so far and set stopped_on_failure.
inline HierarchicalModel train_hierarchy(const Dataset& train, const KernelSet& kernels, const HierarchyOptions& opts) {
    train.validate();
    detail::require(opts.l_max >= 1, "train_hierarchy: l_max must be >= 1");
    detail::require(opts.epsilon >= 0.0, "train_hierarchy: epsilon must be nonnegative");
    detail::require(!kernels.empty(), "train_hierarchy: empty kernel set");

    HierarchicalModel model;
    model.num_classes = train.num_classes;
    model.input_dim = train.dim();
    model.kernels = kernels;

    IndexList current = detail::iota_indices(train.size());
    WeightMatrix previous = uniform_weights(train.num_classes, kernels.size());
    double delta_minus = 0.0;
    Matrix features(train.X.rows(), 0);

    for (std::size_t l = 1; l <= opts.l_max; ++l) {
        LayerModel layer;
        Matrix block;
        try {
            layer = detail::fit_layer(train.subset(current), kernels, opts, l);
            block = embed_layer_rows(train.X, layer);
            Matrix joined(features.rows(), features.cols() + block.cols());
            joined << features, block;
            const double ridge = opts.tune_ridge ? tune_ridge(joined, train.y, train.num_classes, default_ridge_grid(),
                                                              detail::derive_seed(opts.seed, 1000 + l))
                                                 : opts.ridge;
            layer.classifier = fit_lssvm(joined, train.y, train.num_classes, ridge);
            features = std::move(joined);
        } catch (const Error& e) {
            if (l == 1) throw;
            model.stopped_on_failure = true;
            model.failure_message = "layer " + std::to_string(l) + ": " + e.what();
            break;
        }

        const auto predictions = predict_rows(layer.classifier, features);
        const IndexList marginal = select_marginal(predictions, opts.t_kappa);
        layer.marginal_size = marginal.size();

        const double delta_plus = (layer.nu - previous).norm();
        model.delta_trace.push_back(delta_plus);
        double d_nu = std::numeric_limits<double>::infinity();
        if (l >= 2) {
            d_nu = std::abs(delta_plus - delta_minus);
            model.d_nu_trace.push_back(d_nu);
        }
        delta_minus = delta_plus;
        previous = layer.nu;
        model.layers.push_back(std::move(layer));

        if (d_nu <= opts.epsilon) break;
        if (!detail::every_class_has(train, marginal, 2)) break;
        current = marginal;
    }
    return model;
}

}  // namespace clask
