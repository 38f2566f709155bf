#pragma once

// Dataset loading (CSV / LIBSVM), standardization and stratified splitting.

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "clask/detail/error.hpp"
#include "clask/detail/rng.hpp"
#include "clask/kernel.hpp"
#include "clask/subspace.hpp"

namespace clask {

using Labels = std::vector<std::size_t>;
using IndexList = std::vector<std::size_t>;

struct Dataset {
    Matrix X;                 // N x p, one sample per row
    Labels y;                 // contiguous class indices in [0, num_classes)
    std::size_t num_classes = 0;
    std::vector<long long> original_labels;  // original label of each class index

    std::size_t size() const { return y.size(); }
    Eigen::Index dim() const { return X.cols(); }

    std::vector<std::size_t> class_counts() const {
        std::vector<std::size_t> counts(num_classes, 0);
        for (auto label : y) ++counts[label];
        return counts;
    }

    void validate() const {
        detail::require(static_cast<std::size_t>(X.rows()) == y.size(), "dataset: label count does not match rows");
        detail::require(num_classes >= 1, "dataset: no classes");
        for (auto label : y) detail::require(label < num_classes, "dataset: label out of range");
        detail::require(detail::all_finite(X.data(), static_cast<std::size_t>(X.size())), "dataset: non-finite value");
    }

    Dataset subset(const IndexList& idx) const {
        Dataset out;
        out.num_classes = num_classes;
        out.original_labels = original_labels;
        out.X.resize(static_cast<Eigen::Index>(idx.size()), X.cols());
        out.y.resize(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            detail::require(idx[i] < y.size(), "dataset: subset index out of range");
            out.X.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(idx[i]));
            out.y[i] = y[idx[i]];
        }
        return out;
    }

    /// Rows grouped by class, preserving their relative order.
    ClassSamples class_samples() const {
        const auto counts = class_counts();
        ClassSamples out(num_classes);
        std::vector<Eigen::Index> fill(num_classes, 0);
        for (std::size_t c = 0; c < num_classes; ++c) out[c].resize(static_cast<Eigen::Index>(counts[c]), X.cols());
        for (std::size_t i = 0; i < y.size(); ++i) out[y[i]].row(fill[y[i]]++) = X.row(static_cast<Eigen::Index>(i));
        return out;
    }
};

enum class DataFormat { Csv, Libsvm };

inline DataFormat parse_format(std::string_view name) {
    if (name == "csv") return DataFormat::Csv;
    if (name == "libsvm") return DataFormat::Libsvm;
    detail::fail("unknown data format '" + std::string(name) + "' (expected csv or libsvm)");
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline double parse_real(std::string_view tok, std::size_t line_no) {
    tok = trim(tok);
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    require(ec == std::errc() && ptr == tok.data() + tok.size() && !tok.empty(),
            "line " + std::to_string(line_no) + ": cannot parse number '" + std::string(tok) + "'");
    require(std::isfinite(v), "line " + std::to_string(line_no) + ": non-finite value");
    return v;
}

inline long long parse_label(std::string_view tok, std::size_t line_no) {
    const double v = parse_real(tok, line_no);
    require(v == std::floor(v) && std::abs(v) < 1e15,
            "line " + std::to_string(line_no) + ": label must be an integer, got '" + std::string(trim(tok)) + "'");
    return static_cast<long long>(v);
}

// Maps raw labels to contiguous indices in ascending order of the raw value.
inline Dataset assemble(std::vector<long long> raw_labels, std::vector<std::vector<double>> rows, std::size_t dim) {
    std::map<long long, std::size_t> remap;
    for (auto l : raw_labels) remap.emplace(l, 0);
    std::size_t next = 0;
    Dataset ds;
    for (auto& [raw, idx] : remap) {
        idx = next++;
        ds.original_labels.push_back(raw);
    }
    ds.num_classes = remap.size();
    ds.X = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
    ds.y.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) ds.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        ds.y[i] = remap[raw_labels[i]];
    }
    return ds;
}

}  // namespace detail

/// CSV: no header unless skip_header, integer label first, then real features.
inline Dataset parse_csv(std::istream& in, bool skip_header = false) {
    std::vector<long long> labels;
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    std::size_t dim = 0;
    bool have_dim = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (skip_header && line_no == 1) continue;
        const std::string_view sv = detail::trim(line);
        if (sv.empty()) continue;
        std::vector<std::string_view> fields;
        std::size_t start = 0;
        while (true) {
            const auto comma = sv.find(',', start);
            fields.push_back(sv.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        labels.push_back(detail::parse_label(fields[0], line_no));
        std::vector<double> row;
        row.reserve(fields.size() - 1);
        for (std::size_t j = 1; j < fields.size(); ++j) row.push_back(detail::parse_real(fields[j], line_no));
        if (!have_dim) {
            dim = row.size();
            have_dim = true;
        }
        detail::require(row.size() == dim, "line " + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                                               " features, found " + std::to_string(row.size()));
        rows.push_back(std::move(row));
    }
    detail::require(!rows.empty(), "empty dataset");
    return detail::assemble(std::move(labels), std::move(rows), dim);
}

/// LIBSVM: "label index:value ..." with 1-based indices; rows are densified to
/// the largest index seen.
inline Dataset parse_libsvm(std::istream& in) {
    std::vector<long long> labels;
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    std::size_t dim = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view sv = detail::trim(line);
        if (const auto hash = sv.find('#'); hash != std::string_view::npos) sv = detail::trim(sv.substr(0, hash));
        if (sv.empty()) continue;
        std::istringstream tokens{std::string(sv)};
        std::string tok;
        tokens >> tok;
        labels.push_back(detail::parse_label(tok, line_no));
        std::vector<double> row;
        std::size_t last_index = 0;
        while (tokens >> tok) {
            const auto colon = tok.find(':');
            detail::require(colon != std::string::npos,
                            "line " + std::to_string(line_no) + ": expected index:value, got '" + tok + "'");
            std::size_t index = 0;
            const std::string_view idx_text(tok.data(), colon);
            auto [ptr, ec] = std::from_chars(idx_text.data(), idx_text.data() + idx_text.size(), index);
            detail::require(ec == std::errc() && ptr == idx_text.data() + idx_text.size() && index >= 1,
                            "line " + std::to_string(line_no) + ": bad feature index '" + std::string(idx_text) + "'");
            detail::require(index > last_index, "line " + std::to_string(line_no) + ": feature indices must increase");
            last_index = index;
            if (row.size() < index) row.resize(index, 0.0);
            row[index - 1] = detail::parse_real(std::string_view(tok).substr(colon + 1), line_no);
        }
        dim = std::max(dim, row.size());
        rows.push_back(std::move(row));
    }
    detail::require(!rows.empty(), "empty dataset");
    for (auto& r : rows) r.resize(dim, 0.0);
    return detail::assemble(std::move(labels), std::move(rows), dim);
}

inline Dataset load_dataset(const std::string& path, DataFormat format, bool skip_header = false) {
    std::ifstream in(path);
    detail::require(static_cast<bool>(in), "cannot open dataset '" + path + "'");
    try {
        Dataset ds = format == DataFormat::Csv ? parse_csv(in, skip_header) : parse_libsvm(in);
        ds.validate();
        return ds;
    } catch (const Error& e) {
        throw Error(path + ": " + e.what());
    }
}

/// Writes label-first CSV using the original labels, full double precision.
inline void write_csv(std::ostream& out, const Dataset& ds) {
    out << std::setprecision(17);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const std::size_t c = ds.y[i];
        out << (c < ds.original_labels.size() ? ds.original_labels[c] : static_cast<long long>(c));
        for (Eigen::Index j = 0; j < ds.X.cols(); ++j) out << ',' << ds.X(static_cast<Eigen::Index>(i), j);
        out << '\n';
    }
}

inline void save_csv(const std::string& path, const Dataset& ds) {
    std::ofstream out(path);
    detail::require(static_cast<bool>(out), "cannot write '" + path + "'");
    write_csv(out, ds);
}

enum class Scaling { ZScore, MinMax, None };

inline Scaling parse_scaling(std::string_view name) {
    if (name == "zscore") return Scaling::ZScore;
    if (name == "minmax") return Scaling::MinMax;
    if (name == "none") return Scaling::None;
    detail::fail("unknown scaling '" + std::string(name) + "' (expected zscore, minmax or none)");
}

inline const char* scaling_name(Scaling s) {
    switch (s) {
        case Scaling::ZScore: return "zscore";
        case Scaling::MinMax: return "minmax";
        case Scaling::None: return "none";
    }
    return "none";
}

/// Per-dimension affine map x -> (x - offset) / scale, fitted on training data
/// only. Z-scoring uses the mean and standard deviation, min-max the minimum
/// and range; constant dimensions get scale 1.
struct Standardizer {
    Vector offset;
    Vector scale;

    static Standardizer fit(const MatrixRef& X, Scaling mode = Scaling::ZScore) {
        detail::require(X.rows() >= 1, "Standardizer: empty data");
        Standardizer s;
        s.scale = Vector::Ones(X.cols());
        if (mode == Scaling::None) {
            s.offset = Vector::Zero(X.cols());
            return s;
        }
        if (mode == Scaling::MinMax) {
            s.offset = X.colwise().minCoeff().transpose();
            for (Eigen::Index j = 0; j < X.cols(); ++j) {
                const double range = X.col(j).maxCoeff() - s.offset(j);
                if (range > 1e-12 * std::max(1.0, std::abs(s.offset(j)))) s.scale(j) = range;
            }
            return s;
        }
        s.offset = X.colwise().mean().transpose();
        for (Eigen::Index j = 0; j < X.cols(); ++j) {
            const double sd = std::sqrt((X.col(j).array() - s.offset(j)).square().mean());
            if (sd > 1e-12 * std::max(1.0, std::abs(s.offset(j)))) s.scale(j) = sd;
        }
        return s;
    }

    Matrix apply(const MatrixRef& X) const {
        detail::require(X.cols() == offset.size(), "Standardizer: dimension mismatch");
        return (X.rowwise() - offset.transpose()).array().rowwise() / scale.transpose().array();
    }

    Dataset apply(const Dataset& ds) const {
        Dataset out = ds;
        out.X = apply(ds.X);
        return out;
    }
};

struct IndexSplit {
    IndexList first;
    IndexList second;
};

namespace detail {

inline std::vector<IndexList> indices_by_class(const Labels& y, std::size_t num_classes) {
    std::vector<IndexList> by_class(num_classes);
    for (std::size_t i = 0; i < y.size(); ++i) {
        require(y[i] < num_classes, "label out of range");
        by_class[y[i]].push_back(i);
    }
    return by_class;
}

}  // namespace detail

/// Per-class random split: round(fraction * n_c) samples go to `first`, clamped
/// so both sides keep at least one sample. Indices are returned sorted.
inline IndexSplit split_indices_stratified(const Labels& y, std::size_t num_classes, double fraction,
                                           std::uint64_t seed) {
    detail::require(fraction > 0.0 && fraction < 1.0, "split: fraction must lie in (0, 1)");
    auto by_class = detail::indices_by_class(y, num_classes);
    IndexSplit out;
    for (std::size_t c = 0; c < num_classes; ++c) {
        auto& idx = by_class[c];
        if (idx.empty()) continue;
        detail::require(idx.size() >= 2, "split: class " + std::to_string(c) + " has fewer than 2 samples");
        detail::Rng rng(detail::derive_seed(seed, c));
        detail::portable_shuffle(idx, rng);
        auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
        take = std::clamp<std::size_t>(take, 1, idx.size() - 1);
        out.first.insert(out.first.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
        out.second.insert(out.second.end(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end());
    }
    std::sort(out.first.begin(), out.first.end());
    std::sort(out.second.begin(), out.second.end());
    return out;
}

inline std::pair<Dataset, Dataset> split_stratified(const Dataset& ds, double fraction, std::uint64_t seed) {
    const auto s = split_indices_stratified(ds.y, ds.num_classes, fraction, seed);
    return {ds.subset(s.first), ds.subset(s.second)};
}

/// Same rule applied to per-class matrices (used for the basis / weight split).
inline std::pair<ClassSamples, ClassSamples> split_class_samples(const ClassSamples& classes, double fraction,
                                                                 std::uint64_t seed) {
    std::pair<ClassSamples, ClassSamples> out;
    for (std::size_t c = 0; c < classes.size(); ++c) {
        const auto n = static_cast<std::size_t>(classes[c].rows());
        Labels y(n, 0);
        const auto s = split_indices_stratified(y, 1, fraction, detail::derive_seed(seed, c));
        Matrix a(static_cast<Eigen::Index>(s.first.size()), classes[c].cols());
        Matrix b(static_cast<Eigen::Index>(s.second.size()), classes[c].cols());
        for (std::size_t i = 0; i < s.first.size(); ++i) a.row(static_cast<Eigen::Index>(i)) = classes[c].row(static_cast<Eigen::Index>(s.first[i]));
        for (std::size_t i = 0; i < s.second.size(); ++i) b.row(static_cast<Eigen::Index>(i)) = classes[c].row(static_cast<Eigen::Index>(s.second[i]));
        out.first.push_back(std::move(a));
        out.second.push_back(std::move(b));
    }
    return out;
}

struct Fold {
    IndexList train;
    IndexList test;
};

/// Stratified k-fold partition; every index appears in exactly one test set.
inline std::vector<Fold> kfold(const Labels& y, std::size_t num_classes, std::size_t k, std::uint64_t seed) {
    detail::require(k >= 2, "kfold: k must be >= 2");
    auto by_class = detail::indices_by_class(y, num_classes);
    std::vector<IndexList> tests(k);
    std::size_t offset = 0;
    for (std::size_t c = 0; c < num_classes; ++c) {
        auto& idx = by_class[c];
        if (idx.empty()) continue;
        detail::require(idx.size() >= k, "kfold: class " + std::to_string(c) + " has fewer than k samples");
        detail::Rng rng(detail::derive_seed(seed, c));
        detail::portable_shuffle(idx, rng);
        for (std::size_t j = 0; j < idx.size(); ++j) tests[(offset + j) % k].push_back(idx[j]);
        offset = (offset + idx.size()) % k;
    }
    std::vector<Fold> folds(k);
    for (std::size_t f = 0; f < k; ++f) {
        std::sort(tests[f].begin(), tests[f].end());
        folds[f].test = tests[f];
        for (std::size_t g = 0; g < k; ++g) {
            if (g != f) folds[f].train.insert(folds[f].train.end(), tests[g].begin(), tests[g].end());
        }
        std::sort(folds[f].train.begin(), folds[f].train.end());
    }
    return folds;
}

inline std::vector<Fold> kfold(const Dataset& ds, std::size_t k, std::uint64_t seed) {
    return kfold(ds.y, ds.num_classes, k, seed);
}

}  // namespace clask
