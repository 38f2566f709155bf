#pragma once

// Subcommand implementations behind the clask executable. Each writes its
// files and a human-readable summary to `log`.

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "clask/bounds.hpp"
#include "clask/classifier.hpp"
#include "clask/config.hpp"
#include "clask/data.hpp"
#include "clask/detail/error.hpp"
#include "clask/hierarchy.hpp"
#include "clask/model_io.hpp"
#include "clask/synth.hpp"

namespace clask {

/// Fits the configured input scaling on `train` and trains the hierarchy.
inline HierarchicalModel fit_pipeline(const RunConfig& cfg, const Dataset& train) {
    cfg.validate();
    std::optional<Standardizer> scaler;
    if (cfg.scaling != Scaling::None) scaler = Standardizer::fit(train.X, cfg.scaling);
    HierarchicalModel model =
        train_hierarchy(scaler ? scaler->apply(train) : train, cfg.kernels, cfg.hierarchy_options());
    model.standardizer = scaler;
    return model;
}

inline Matrix prepare_inputs(const HierarchicalModel& model, const Matrix& X) {
    detail::require(X.cols() == model.input_dim, "input dimension " + std::to_string(X.cols()) +
                                                     " does not match model dimension " +
                                                     std::to_string(model.input_dim));
    return model.standardizer ? model.standardizer->apply(X) : X;
}

inline std::vector<Prediction> predict_dataset(const HierarchicalModel& model, const Dataset& ds) {
    return predict_rows(model, prepare_inputs(model, ds.X));
}

inline Matrix confusion_matrix(const std::vector<Prediction>& preds, const Labels& y, std::size_t num_classes) {
    Matrix m = Matrix::Zero(static_cast<Eigen::Index>(num_classes), static_cast<Eigen::Index>(num_classes));
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (preds[i].label < num_classes) m(static_cast<Eigen::Index>(y[i]), static_cast<Eigen::Index>(preds[i].label)) += 1.0;
    }
    return m;
}

namespace detail {

inline std::string join_path(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

inline void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    require(!ec, "cannot create directory '" + dir + "'");
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    require(static_cast<bool>(out), "cannot write '" + path + "'");
    out << std::setprecision(17);
    return out;
}

inline void write_confusion(const std::string& path, const Matrix& m) {
    auto out = open_output(path);
    out << "class";
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << ",pred_" << c;
    out << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        out << r;
        for (Eigen::Index c = 0; c < m.cols(); ++c) out << ',' << static_cast<long long>(m(r, c));
        out << '\n';
    }
}

}  // namespace detail

/// Weight matrix as CSV: header "class,<kernel>,...", then one row per class.
inline void write_nu_csv(std::ostream& out, const WeightMatrix& nu, const KernelSet& kernels) {
    out << "class";
    for (const auto& k : kernels) out << ',' << k.to_string();
    out << '\n' << std::setprecision(17);
    for (Eigen::Index c = 0; c < nu.rows(); ++c) {
        out << c;
        for (Eigen::Index k = 0; k < nu.cols(); ++k) out << ',' << nu(c, k);
        out << '\n';
    }
}

/// Binary PPM (P6) grayscale heat map, 16 x 16 pixels per cell, gray = round(255 nu).
inline void write_nu_ppm(std::ostream& out, const WeightMatrix& nu) {
    constexpr int cell = 16;
    const auto width = static_cast<int>(nu.cols()) * cell;
    const auto height = static_cast<int>(nu.rows()) * cell;
    out << "P6\n" << width << ' ' << height << "\n255\n";
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double v = std::clamp(nu(y / cell, x / cell), 0.0, 1.0);
            const auto g = static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * v)));
            const char px[3] = {g, g, g};
            out.write(px, 3);
        }
    }
}

inline void export_heatmaps(const HierarchicalModel& model, const std::string& dir) {
    detail::ensure_dir(dir);
    for (const auto& layer : model.layers) {
        const std::string stem = "nu_layer" + std::to_string(layer.layer_index);
        auto csv = detail::open_output(detail::join_path(dir, stem + ".csv"));
        write_nu_csv(csv, layer.nu, model.kernels);
        std::ofstream ppm(detail::join_path(dir, stem + ".ppm"), std::ios::binary);
        detail::require(static_cast<bool>(ppm), "cannot write heat map in '" + dir + "'");
        write_nu_ppm(ppm, layer.nu);
    }
}

inline void print_layers(std::ostream& log, const HierarchicalModel& model) {
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const auto& layer = model.layers[i];
        log << "layer " << layer.layer_index << ": h = " << layer.objective.h << ", dim = " << layer.dim()
            << ", fitted on " << layer.train_size << ", marginal = " << layer.marginal_size;
        if (i >= 1 && i - 1 < model.d_nu_trace.size()) log << ", d_nu = " << model.d_nu_trace[i - 1];
        if (!layer.truncated.empty()) {
            log << ", truncated =";
            for (auto k : layer.truncated) log << ' ' << model.kernels[k].to_string();
        }
        log << '\n';
    }
    if (model.stopped_on_failure) log << "warning: stopped early: " << model.failure_message << '\n';
}

/// Trains on cfg.dataset, writes the model and per-layer weight CSVs.
inline HierarchicalModel cmd_train(const RunConfig& cfg, const std::string& model_path, std::ostream& log) {
    cfg.validate();
    const Dataset ds = load_dataset(cfg.dataset, cfg.format);
    const HierarchicalModel model = fit_pipeline(cfg, ds);
    save_model(model_path, model);
    detail::ensure_dir(cfg.output_dir);
    for (const auto& layer : model.layers) {
        auto csv = detail::open_output(detail::join_path(cfg.output_dir, "nu_layer" + std::to_string(layer.layer_index) + ".csv"));
        write_nu_csv(csv, layer.nu, model.kernels);
    }
    log << "trained " << model.layers.size() << " layer(s) on " << ds.size() << " samples, " << ds.num_classes
        << " classes\n";
    print_layers(log, model);
    log << "model written to " << model_path << '\n';
    return model;
}

struct EvalReport {
    std::vector<double> errors;  // one per fold, or a single entry
    double mean = 0.0;
    double stddev = 0.0;
    Matrix confusion;
};

inline void summarize(EvalReport& r) {
    const auto n = static_cast<double>(r.errors.size());
    r.mean = std::accumulate(r.errors.begin(), r.errors.end(), 0.0) / n;
    double ss = 0.0;
    for (double e : r.errors) ss += (e - r.mean) * (e - r.mean);
    r.stddev = r.errors.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
}

inline EvalReport cmd_eval(const std::string& model_path, const std::string& data_path, DataFormat format,
                           const std::string& output_dir, std::ostream& log) {
    const HierarchicalModel model = load_model(model_path);
    const Dataset ds = load_dataset(data_path, format);
    detail::require(ds.num_classes <= model.num_classes, "test data has more classes than the model");
    const auto preds = predict_dataset(model, ds);
    EvalReport r;
    r.errors.push_back(error_rate(preds, ds.y));
    summarize(r);
    r.confusion = confusion_matrix(preds, ds.y, model.num_classes);
    detail::ensure_dir(output_dir);
    detail::write_confusion(detail::join_path(output_dir, "confusion.csv"), r.confusion);
    log << std::fixed << std::setprecision(2) << "error: " << 100.0 * r.mean << "%\n" << std::defaultfloat;
    return r;
}

/// Stratified k-fold: retrains the full pipeline per fold.
inline EvalReport cmd_eval_kfold(const RunConfig& cfg, std::size_t k, std::ostream& log) {
    cfg.validate();
    const Dataset ds = load_dataset(cfg.dataset, cfg.format);
    EvalReport r;
    r.confusion = Matrix::Zero(static_cast<Eigen::Index>(ds.num_classes), static_cast<Eigen::Index>(ds.num_classes));
    const auto folds = kfold(ds, k, cfg.seed);
    for (std::size_t f = 0; f < folds.size(); ++f) {
        RunConfig fold_cfg = cfg;
        fold_cfg.seed = detail::derive_seed(cfg.seed, 7919 + f);
        const Dataset test = ds.subset(folds[f].test);
        const HierarchicalModel model = fit_pipeline(fold_cfg, ds.subset(folds[f].train));
        const auto preds = predict_dataset(model, test);
        r.errors.push_back(error_rate(preds, test.y));
        r.confusion += confusion_matrix(preds, test.y, ds.num_classes);
        log << "fold " << f + 1 << ": error " << std::fixed << std::setprecision(2) << 100.0 * r.errors.back()
            << "%, layers " << model.layers.size() << '\n' << std::defaultfloat;
    }
    summarize(r);
    detail::ensure_dir(cfg.output_dir);
    detail::write_confusion(detail::join_path(cfg.output_dir, "confusion.csv"), r.confusion);
    log << std::fixed << std::setprecision(2) << "error: " << 100.0 * r.mean << " +- " << 100.0 * r.stddev << "%\n"
        << std::defaultfloat;
    return r;
}

namespace detail {

inline double csv_value(double v) { return std::isfinite(v) ? v : -1.0; }

inline void write_report(const SeparabilityReport& rep, const std::string& dir, std::ostream& log) {
    ensure_dir(dir);
    const auto& st = rep.stats;
    const auto& sep = rep.separation;
    {
        auto out = open_output(join_path(dir, "bounds.csv"));
        out << "num_classes,lambda_hat,lambda_hat_mean_norm,sigma_e_sq_hat,bound_value,bound_vacuous,"
               "bound_mean_norm,empirical_ratio,empirical_prob,e_dw,e_db\n";
        out << st.priors.size() << ',' << csv_value(st.lambda_hat) << ',' << csv_value(st.lambda_hat_mean_norm) << ','
            << st.sigma_e_sq_hat << ',' << csv_value(rep.bound.value) << ',' << (rep.bound.vacuous ? 1 : 0) << ','
            << (rep.bound_mean_norm ? rep.bound_mean_norm->value : -1.0) << ',' << sep.empirical_ratio << ','
            << sep.empirical_prob << ',' << sep.e_dw << ',' << sep.e_db << '\n';
    }
    {
        auto out = open_output(join_path(dir, "bounds_classes.csv"));
        out << "class,prior,mean_norm_sq,own_energy\n";
        for (std::size_t c = 0; c < st.priors.size(); ++c) {
            out << c << ',' << st.priors[c] << ',' << st.mean_norms[c] << ',' << st.own_energy[c] << '\n';
        }
    }
    log << "lambda_hat            " << st.lambda_hat << '\n'
        << "lambda_hat (mean norm) " << st.lambda_hat_mean_norm << '\n'
        << "sigma_e^2 estimate    " << st.sigma_e_sq_hat << '\n';
    for (std::size_t c = 0; c < st.priors.size(); ++c) {
        log << "class " << c << ": prior " << st.priors[c] << ", ||m||^2 " << st.mean_norms[c] << '\n';
    }
    log << "bound                 " << rep.bound.value << (rep.bound.vacuous ? " (vacuous)" : "");
    if (!rep.bound_note.empty()) log << " [" << rep.bound_note << ']';
    log << '\n';
    if (rep.bound_mean_norm) log << "bound (mean norm)     " << rep.bound_mean_norm->value << '\n';
    log << "E(D_w) / E(D_b)       " << sep.e_dw << " / " << sep.e_db << " = " << sep.empirical_ratio << '\n'
        << "P(D_w > E(D_b))       " << sep.empirical_prob << '\n';
}

}  // namespace detail

/// Report for the embedding of `layer` (1-based) of a trained model.
inline SeparabilityReport cmd_bounds_model(const std::string& model_path, const std::string& data_path,
                                           DataFormat format, std::size_t layer, const std::string& output_dir,
                                           std::ostream& log) {
    const HierarchicalModel model = load_model(model_path);
    detail::require(layer >= 1 && layer <= model.layers.size(), "bounds: layer out of range");
    Dataset ds = load_dataset(data_path, format);
    ds.X = prepare_inputs(model, ds.X);
    detail::require(ds.num_classes == model.num_classes, "bounds: data and model class counts differ");
    const auto classes = ds.class_samples();
    const auto& L = model.layers[layer - 1];
    SeparabilityReport rep = separability_report(projections_from_bank(L.bank, L.nu, classes),
                                                 [&] {
                                                     ClassSamples emb;
                                                     for (const auto& X : classes) emb.push_back(embed_layer_rows(X, L));
                                                     return emb;
                                                 }());
    detail::write_report(rep, output_dir, log);
    return rep;
}

/// Report for explicit feature vectors with per-class PCA subspaces of the given rank.
inline SeparabilityReport cmd_bounds_features(const std::string& data_path, DataFormat format, Eigen::Index rank,
                                              const std::string& output_dir, std::ostream& log) {
    Dataset ds = load_dataset(data_path, format);
    for (Eigen::Index i = 0; i < ds.X.rows(); ++i) {
        const double n = ds.X.row(i).norm();
        if (n > 0.0) ds.X.row(i) /= n;
    }
    const auto classes = ds.class_samples();
    SeparabilityReport rep = separability_report(projections_from_subspaces(fit_pca_subspaces(classes, rank), classes), classes);
    detail::write_report(rep, output_dir, log);
    return rep;
}

/// Writes "label,features..." rows of the embedding through `through` layers
/// (0 selects all layers).
inline void cmd_embed(const std::string& model_path, const std::string& data_path, DataFormat format,
                      std::size_t through, const std::string& out_path, std::ostream& log) {
    const HierarchicalModel model = load_model(model_path);
    const Dataset ds = load_dataset(data_path, format);
    const std::size_t l = through == 0 ? model.layers.size() : through;
    Dataset out;
    out.X = embed_full_rows(prepare_inputs(model, ds.X), model, l);
    out.y = ds.y;
    out.num_classes = ds.num_classes;
    out.original_labels = ds.original_labels;
    save_csv(out_path, out);
    log << "wrote " << out.X.rows() << " x " << out.X.cols() << " embedding to " << out_path << '\n';
}

inline void cmd_heatmap(const std::string& model_path, const std::string& output_dir, std::ostream& log) {
    const HierarchicalModel model = load_model(model_path);
    export_heatmaps(model, output_dir);
    log << "wrote " << model.layers.size() << " heat map(s) to " << output_dir << '\n';
}

enum class SweepAxis { Layers, Kernels, TrainSize };

inline SweepAxis parse_sweep_axis(std::string_view name) {
    if (name == "layers") return SweepAxis::Layers;
    if (name == "kernels") return SweepAxis::Kernels;
    if (name == "train_size") return SweepAxis::TrainSize;
    detail::fail("unknown sweep axis '" + std::string(name) + "' (expected layers, kernels or train_size)");
}

struct SweepRow {
    std::size_t index = 0;
    double value = 0.0;
    bool ok = false;
    std::string error;
    double accuracy = 0.0;
    double nu_opt_seconds = 0.0;  // last layer's weight optimization only
    Eigen::Index feature_dim = 0;
    std::size_t layers = 0;
    std::vector<Eigen::Index> layer_dims;        // cumulative
    std::vector<double> layer_seconds;
    std::vector<double> layer_accuracy;          // test accuracy through each layer
};

/// One training run per grid value on a stratified 50/50 train/test split.
/// Axis values: layers = L_max; kernels = number of leading kernels of the
/// config; train_size = fraction of the training half that is used.
inline std::vector<SweepRow> cmd_sweep(const RunConfig& cfg, SweepAxis axis, const std::vector<double>& values,
                                       const std::string& out_path, std::ostream& log) {
    cfg.validate();
    detail::require(!values.empty(), "sweep: empty grid");
    const Dataset ds = load_dataset(cfg.dataset, cfg.format);
    const auto [train_all, test] = split_stratified(ds, 0.5, cfg.seed);
    std::vector<SweepRow> rows;
    for (std::size_t i = 0; i < values.size(); ++i) {
        SweepRow row;
        row.index = i;
        row.value = values[i];
        try {
            RunConfig point = cfg;
            Dataset train = train_all;
            switch (axis) {
                case SweepAxis::Layers:
                    detail::require(values[i] >= 1.0 && values[i] == std::floor(values[i]), "layer count must be a positive integer");
                    point.l_max = static_cast<std::size_t>(values[i]);
                    point.epsilon = 0.0;
                    break;
                case SweepAxis::Kernels: {
                    detail::require(values[i] >= 1.0 && values[i] <= static_cast<double>(cfg.kernels.size()) &&
                                        values[i] == std::floor(values[i]),
                                    "kernel count must be an integer between 1 and the configured kernel count");
                    point.kernels.resize(static_cast<std::size_t>(values[i]));
                    break;
                }
                case SweepAxis::TrainSize:
                    detail::require(values[i] > 0.0 && values[i] <= 1.0, "train size must lie in (0, 1]");
                    if (values[i] < 1.0) train = split_stratified(train_all, values[i], cfg.seed + 1).first;
                    break;
            }
            const HierarchicalModel model = fit_pipeline(point, train);
            const Matrix X = prepare_inputs(model, test.X);
            const Matrix F = embed_full_rows(X, model, model.layers.size());
            Eigen::Index offset = 0;
            for (const auto& layer : model.layers) {
                offset += layer.dim();
                row.layer_dims.push_back(offset);
                row.layer_seconds.push_back(layer.optimize_seconds);
                const auto preds = predict_rows(layer.classifier, F.leftCols(offset));
                row.layer_accuracy.push_back(1.0 - error_rate(preds, test.y));
            }
            row.accuracy = row.layer_accuracy.back();
            row.nu_opt_seconds = row.layer_seconds.back();
            row.feature_dim = row.layer_dims.back();
            row.layers = model.layers.size();
            row.ok = true;
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        log << "point " << i << " (" << values[i] << "): "
            << (row.ok ? "accuracy " + std::to_string(row.accuracy) : "failed: " + row.error) << '\n';
        rows.push_back(std::move(row));
    }

    auto out = detail::open_output(out_path);
    out << "point_index,value,error,accuracy,nu_opt_seconds,feature_dim,layers_trained,status\n";
    for (const auto& r : rows) {
        out << r.index << ',' << r.value << ',' << (r.ok ? 1.0 - r.accuracy : -1.0) << ',' << (r.ok ? r.accuracy : -1.0)
            << ',' << r.nu_opt_seconds << ',' << r.feature_dim << ',' << r.layers << ',' << (r.ok ? 0 : 1) << '\n';
    }
    const std::string layer_path = std::filesystem::path(out_path).replace_extension("").string() + "_layers.csv";
    auto per_layer = detail::open_output(layer_path);
    per_layer << "point_index,layer,feature_dim,nu_opt_seconds,accuracy\n";
    for (const auto& r : rows) {
        for (std::size_t l = 0; l < r.layer_dims.size(); ++l) {
            per_layer << r.index << ',' << l + 1 << ',' << r.layer_dims[l] << ',' << r.layer_seconds[l] << ','
                      << r.layer_accuracy[l] << '\n';
        }
    }
    std::size_t failed = 0;
    for (const auto& r : rows) failed += r.ok ? 0 : 1;
    if (failed > 0) {
        auto err = detail::open_output(std::filesystem::path(out_path).replace_extension("").string() + "_errors.txt");
        for (const auto& r : rows) {
            if (!r.ok) err << r.index << ": " << r.error << '\n';
        }
    }
    return rows;
}

struct SynthRequest {
    std::string kind = "subspace";  // subspace | class_specific | moons | blobs
    SubspaceParams subspace;
    ClassSpecificParams class_specific;
    std::size_t per_class = 200;
    double noise = 0.1;
    std::uint64_t seed = 0;
};

inline Dataset cmd_synth(const SynthRequest& req, const std::string& out_path, std::ostream& log) {
    Dataset ds;
    if (req.kind == "subspace") {
        SubspaceParams p = req.subspace;
        p.seed = req.seed;
        p.per_class = req.per_class;
        ds = synth_subspace(p).data;
    } else if (req.kind == "class_specific") {
        ClassSpecificParams p = req.class_specific;
        p.seed = req.seed;
        p.per_class = req.per_class;
        ds = synth_class_specific(p).data;
    } else if (req.kind == "moons") {
        ds = make_moons(req.per_class, req.noise, req.seed);
    } else if (req.kind == "blobs") {
        Matrix centers(2, 2);
        centers << -4.0, 0.0, 4.0, 0.0;
        ds = make_blobs(centers, req.per_class, req.noise, req.seed);
    } else {
        detail::fail("unknown generator '" + req.kind + "'");
    }
    save_csv(out_path, ds);
    log << "wrote " << ds.size() << " samples (" << ds.num_classes << " classes, dim " << ds.dim() << ") to " << out_path
        << '\n';
    return ds;
}

}  // namespace clask
