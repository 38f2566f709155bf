#include <CLI11.hpp>

#include <cstdlib>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "clask/clask.hpp"

namespace {

// Settings shared by train, eval --kfold and sweep: a config file plus
// individual overrides applied in command-line order.
struct ConfigFlags {
    std::string config_path;
    std::string dataset;
    std::string format;
    std::vector<std::string> kernels;
    std::vector<std::string> overrides;

    void attach(CLI::App* app) {
        app->add_option("-c,--config", config_path, "config file (key = value lines)");
        app->add_option("-d,--dataset", dataset, "dataset path");
        app->add_option("--format", format, "csv or libsvm");
        app->add_option("-k,--kernel", kernels, "kernel spec such as rbf:0.5 or poly:8 (repeatable, replaces config kernels)");
        app->add_option("-s,--set", overrides, "override any config key: key=value (repeatable)");
    }

    clask::RunConfig resolve() const {
        clask::RunConfig cfg = config_path.empty() ? clask::RunConfig{} : clask::load_config(config_path);
        if (!dataset.empty()) cfg.dataset = dataset;
        if (!format.empty()) cfg.format = clask::parse_format(format);
        if (!kernels.empty()) {
            cfg.kernels.clear();
            for (const auto& k : kernels) cfg.kernels.push_back(clask::KernelSpec::parse(k));
        }
        for (const auto& kv : overrides) {
            const auto eq = kv.find('=');
            clask::detail::require(eq != std::string::npos, "--set expects key=value, got '" + kv + "'");
            clask::apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
        }
        clask::detail::require(!cfg.dataset.empty(), "no dataset given (use --dataset or a config file)");
        cfg.validate();
        return cfg;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Class-specific multiple-kernel metric learning"};
    app.require_subcommand(1);

    auto* train = app.add_subcommand("train", "train a hierarchical model");
    ConfigFlags train_flags;
    train_flags.attach(train);
    std::string train_model = "model.clask";
    train->add_option("-o,--model", train_model, "output model file");

    auto* eval = app.add_subcommand("eval", "evaluate a model on test data, or run k-fold cross-validation");
    ConfigFlags eval_flags;
    eval_flags.attach(eval);
    std::string eval_model, eval_test, eval_out = ".";
    std::size_t eval_k = 0;
    eval->add_option("-m,--model", eval_model, "model file");
    eval->add_option("-t,--test", eval_test, "test data");
    eval->add_option("--kfold", eval_k, "retrain per fold with k folds instead of using a model");
    eval->add_option("--output-dir", eval_out, "directory for confusion.csv (model mode)");

    auto* bounds = app.add_subcommand("bounds", "separability report for model embeddings or feature vectors");
    std::string bounds_model, bounds_data, bounds_format = "csv", bounds_out = ".";
    std::size_t bounds_layer = 1;
    Eigen::Index bounds_rank = 0;
    bounds->add_option("-m,--model", bounds_model, "model file");
    bounds->add_option("-d,--data", bounds_data, "data file")->required();
    bounds->add_option("--format", bounds_format, "csv or libsvm");
    bounds->add_option("--layer", bounds_layer, "layer whose embedding is analysed");
    bounds->add_option("--pca-rank", bounds_rank, "treat data as feature vectors with per-class PCA subspaces");
    bounds->add_option("--output-dir", bounds_out, "directory for bounds.csv and bounds_classes.csv");

    auto* embed = app.add_subcommand("embed", "write embeddings of a dataset");
    std::string embed_model, embed_data, embed_format = "csv", embed_out = "embedding.csv";
    std::size_t embed_layers = 0;
    embed->add_option("-m,--model", embed_model, "model file")->required();
    embed->add_option("-d,--data", embed_data, "data file")->required();
    embed->add_option("--format", embed_format, "csv or libsvm");
    embed->add_option("--layers", embed_layers, "number of layers to concatenate (0 = all)");
    embed->add_option("-o,--output", embed_out, "output CSV");

    auto* heatmap = app.add_subcommand("heatmap", "export weight matrices as CSV and PPM");
    std::string heat_model, heat_out = ".";
    heatmap->add_option("-m,--model", heat_model, "model file")->required();
    heatmap->add_option("--output-dir", heat_out, "output directory");

    auto* sweep = app.add_subcommand("sweep", "accuracy and timing over a parameter grid");
    ConfigFlags sweep_flags;
    sweep_flags.attach(sweep);
    std::string sweep_axis, sweep_out = "sweep.csv";
    std::vector<double> sweep_values;
    sweep->add_option("--axis", sweep_axis, "layers, kernels or train_size")->required();
    sweep->add_option("--values", sweep_values, "grid values")->required();
    sweep->add_option("-o,--output", sweep_out, "results CSV");

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    clask::SynthRequest req;
    std::string synth_out = "synth.csv";
    synth->add_option("--kind", req.kind, "subspace, class_specific, moons or blobs");
    synth->add_option("--per-class", req.per_class, "samples per class");
    synth->add_option("--seed", req.seed, "random seed");
    synth->add_option("--noise", req.noise, "jitter for moons / blobs");
    synth->add_option("--classes", req.subspace.num_classes, "class count (subspace generators)");
    synth->add_option("--rank", req.subspace.rank, "subspace rank");
    synth->add_option("--dim", req.subspace.ambient_dim, "ambient dimension (per block for class_specific)");
    synth->add_option("--sigma-e-sq", req.subspace.sigma_e_sq, "noise energy");
    synth->add_option("--lambda", req.subspace.overlap_lambda, "subspace overlap");
    synth->add_option("-o,--output", synth_out, "output CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*train) {
            clask::cmd_train(train_flags.resolve(), train_model, std::cout);
        } else if (*eval) {
            if (eval_k > 0) {
                clask::cmd_eval_kfold(eval_flags.resolve(), eval_k, std::cout);
            } else {
                if (eval_model.empty() || eval_test.empty()) {
                    std::cerr << "eval: give --model and --test, or --kfold with a config\n";
                    return 1;
                }
                clask::cmd_eval(eval_model, eval_test,
                                eval_flags.format.empty() ? clask::DataFormat::Csv : clask::parse_format(eval_flags.format),
                                eval_out, std::cout);
            }
        } else if (*bounds) {
            const auto fmt = clask::parse_format(bounds_format);
            if (bounds_rank > 0) {
                clask::cmd_bounds_features(bounds_data, fmt, bounds_rank, bounds_out, std::cout);
            } else {
                if (bounds_model.empty()) {
                    std::cerr << "bounds: give --model, or --pca-rank for feature-vector input\n";
                    return 1;
                }
                clask::cmd_bounds_model(bounds_model, bounds_data, fmt, bounds_layer, bounds_out, std::cout);
            }
        } else if (*embed) {
            clask::cmd_embed(embed_model, embed_data, clask::parse_format(embed_format), embed_layers, embed_out, std::cout);
        } else if (*heatmap) {
            clask::cmd_heatmap(heat_model, heat_out, std::cout);
        } else if (*sweep) {
            clask::cmd_sweep(sweep_flags.resolve(), clask::parse_sweep_axis(sweep_axis), sweep_values, sweep_out, std::cout);
        } else if (*synth) {
            req.class_specific.num_classes = req.subspace.num_classes;
            req.class_specific.rank = req.subspace.rank;
            req.class_specific.block_dim = req.subspace.ambient_dim;
            req.class_specific.sigma_e_sq = req.subspace.sigma_e_sq;
            req.class_specific.overlap_lambda = req.subspace.overlap_lambda;
            clask::cmd_synth(req, synth_out, std::cout);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
