#pragma once

// Binary model file. All integers are unsigned little-endian, all reals are
// little-endian IEEE-754 binary64.
//
//   magic "CLASKMDL" (8 bytes), u32 version (= 1)
//   u64 C, u64 p
//   u64 K, then K x { u8 family (0 rbf, 1 poly), f64 param }
//   u8 has_standardizer, then p f64 offset and p f64 scale if set
//   u64 L, then L layers:
//     u64 layer_index, C*K f64 nu (row-major)
//     u64 nbases, then nbases x { u64 class, u64 kernel, u64 m, u64 r,
//                                 m*p f64 landmarks, m*r f64 transform (row-major) }
//     u64 q, q*C f64 W (row-major), C f64 b, f64 ridge
//     u64 train_size, u64 marginal_size, f64 h_b, f64 h_w, f64 optimize_seconds
//     u64 ntruncated, ntruncated x u64 kernel
//   u64 n, n f64 delta trace; u64 n, n f64 d_nu trace
//   u8 stopped_on_failure, u64 length, message bytes

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "clask/detail/error.hpp"
#include "clask/hierarchy.hpp"

namespace clask {

inline constexpr std::array<char, 8> kModelMagic{'C', 'L', 'A', 'S', 'K', 'M', 'D', 'L'};
inline constexpr std::uint32_t kModelVersion = 1;

namespace detail {

template <class T>
void write_le(std::ostream& out, T value) {
    std::array<char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    out.write(bytes.data(), sizeof(T));
}

template <class T>
T read_le(std::istream& in) {
    std::array<char, sizeof(T)> bytes;
    in.read(bytes.data(), sizeof(T));
    require(static_cast<bool>(in), "model file: unexpected end of file");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
}

inline void write_u64(std::ostream& out, std::uint64_t v) { write_le(out, v); }
inline void write_f64(std::ostream& out, double v) { write_le(out, v); }
inline std::uint64_t read_u64(std::istream& in) { return read_le<std::uint64_t>(in); }
inline double read_f64(std::istream& in) { return read_le<double>(in); }

inline std::uint64_t read_count(std::istream& in, std::uint64_t limit, const char* what) {
    const auto n = read_u64(in);
    require(n <= limit, std::string("model file: implausible ") + what);
    return n;
}

// Row-major payload of a dense matrix.
inline void write_matrix(std::ostream& out, const Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) write_f64(out, m(i, j));
    }
}

inline Matrix read_matrix(std::istream& in, std::uint64_t rows, std::uint64_t cols) {
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = read_f64(in);
    }
    return m;
}

inline constexpr std::uint64_t kSizeLimit = std::uint64_t{1} << 32;

}  // namespace detail

inline void write_model(std::ostream& out, const HierarchicalModel& model) {
    using namespace detail;
    out.write(kModelMagic.data(), kModelMagic.size());
    write_le(out, kModelVersion);
    const std::size_t C = model.num_classes;
    const auto p = static_cast<std::uint64_t>(model.input_dim);
    write_u64(out, C);
    write_u64(out, p);
    write_u64(out, model.kernels.size());
    for (const auto& k : model.kernels) {
        write_le<std::uint8_t>(out, k.family == KernelFamily::Rbf ? 0 : 1);
        write_f64(out, k.param);
    }
    write_le<std::uint8_t>(out, model.standardizer ? 1 : 0);
    if (model.standardizer) {
        for (Eigen::Index j = 0; j < model.standardizer->offset.size(); ++j) write_f64(out, model.standardizer->offset(j));
        for (Eigen::Index j = 0; j < model.standardizer->scale.size(); ++j) write_f64(out, model.standardizer->scale(j));
    }
    write_u64(out, model.layers.size());
    for (const auto& layer : model.layers) {
        write_u64(out, layer.layer_index);
        write_matrix(out, layer.nu);
        std::uint64_t nbases = 0;
        for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t k = 0; k < model.kernels.size(); ++k) nbases += layer.bank.contains(c, k) ? 1 : 0;
        }
        write_u64(out, nbases);
        for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t k = 0; k < model.kernels.size(); ++k) {
                if (!layer.bank.contains(c, k)) continue;
                const auto& b = layer.bank.at(c, k);
                write_u64(out, c);
                write_u64(out, k);
                write_u64(out, static_cast<std::uint64_t>(b.landmarks.rows()));
                write_u64(out, static_cast<std::uint64_t>(b.transform.cols()));
                write_matrix(out, b.landmarks);
                write_matrix(out, b.transform);
            }
        }
        write_u64(out, static_cast<std::uint64_t>(layer.classifier.W.rows()));
        write_matrix(out, layer.classifier.W);
        for (Eigen::Index c = 0; c < layer.classifier.b.size(); ++c) write_f64(out, layer.classifier.b(c));
        write_f64(out, layer.classifier.ridge);
        write_u64(out, layer.train_size);
        write_u64(out, layer.marginal_size);
        write_f64(out, layer.objective.h_b);
        write_f64(out, layer.objective.h_w);
        write_f64(out, layer.optimize_seconds);
        write_u64(out, layer.truncated.size());
        for (auto k : layer.truncated) write_u64(out, k);
    }
    write_u64(out, model.delta_trace.size());
    for (double v : model.delta_trace) write_f64(out, v);
    write_u64(out, model.d_nu_trace.size());
    for (double v : model.d_nu_trace) write_f64(out, v);
    write_le<std::uint8_t>(out, model.stopped_on_failure ? 1 : 0);
    write_u64(out, model.failure_message.size());
    out.write(model.failure_message.data(), static_cast<std::streamsize>(model.failure_message.size()));
}

inline HierarchicalModel read_model(std::istream& in) {
    using namespace detail;
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    require(static_cast<bool>(in) && magic == kModelMagic, "model file: bad magic bytes");
    const auto version = read_le<std::uint32_t>(in);
    require(version == kModelVersion, "model file: unsupported version " + std::to_string(version));

    HierarchicalModel model;
    const auto C = read_count(in, kSizeLimit, "class count");
    const auto p = read_count(in, kSizeLimit, "input dimension");
    model.num_classes = C;
    model.input_dim = static_cast<Eigen::Index>(p);
    const auto K = read_count(in, 1u << 16, "kernel count");
    for (std::uint64_t k = 0; k < K; ++k) {
        const auto family = read_le<std::uint8_t>(in);
        require(family <= 1, "model file: unknown kernel family");
        KernelSpec spec{family == 0 ? KernelFamily::Rbf : KernelFamily::Polynomial, read_f64(in)};
        spec.validate();
        model.kernels.push_back(spec);
    }
    if (read_le<std::uint8_t>(in) != 0) {
        Standardizer s;
        s.offset.resize(static_cast<Eigen::Index>(p));
        s.scale.resize(static_cast<Eigen::Index>(p));
        for (Eigen::Index j = 0; j < s.offset.size(); ++j) s.offset(j) = read_f64(in);
        for (Eigen::Index j = 0; j < s.scale.size(); ++j) s.scale(j) = read_f64(in);
        model.standardizer = std::move(s);
    }
    const auto L = read_count(in, 1u << 16, "layer count");
    for (std::uint64_t l = 0; l < L; ++l) {
        LayerModel layer;
        layer.layer_index = read_u64(in);
        layer.nu = read_matrix(in, C, K);
        layer.bank = BasisBank(C, model.kernels);
        const auto nbases = read_count(in, C * K, "basis count");
        for (std::uint64_t i = 0; i < nbases; ++i) {
            ClassBasis b;
            b.class_id = read_u64(in);
            b.kernel_index = read_u64(in);
            require(b.class_id < C && b.kernel_index < K, "model file: basis index out of range");
            const auto m = read_count(in, kSizeLimit, "landmark count");
            const auto r = read_count(in, m, "basis rank");
            b.landmarks = read_matrix(in, m, p);
            b.transform = read_matrix(in, m, r);
            layer.bank.set(std::move(b));
        }
        const auto q = read_count(in, kSizeLimit, "feature dimension");
        layer.classifier.W = read_matrix(in, q, C);
        layer.classifier.b.resize(static_cast<Eigen::Index>(C));
        for (Eigen::Index c = 0; c < layer.classifier.b.size(); ++c) layer.classifier.b(c) = read_f64(in);
        layer.classifier.ridge = read_f64(in);
        layer.train_size = read_u64(in);
        layer.marginal_size = read_u64(in);
        layer.objective.h_b = read_f64(in);
        layer.objective.h_w = read_f64(in);
        layer.objective.h = layer.objective.h_w > 0.0 ? layer.objective.h_b / layer.objective.h_w : 0.0;
        layer.optimize_seconds = read_f64(in);
        const auto nt = read_count(in, K, "truncated count");
        for (std::uint64_t i = 0; i < nt; ++i) layer.truncated.push_back(read_u64(in));
        require(is_feasible(layer.nu), "model file: infeasible weight matrix");
        model.layers.push_back(std::move(layer));
    }
    const auto nd = read_count(in, kSizeLimit, "trace length");
    for (std::uint64_t i = 0; i < nd; ++i) model.delta_trace.push_back(read_f64(in));
    const auto nn = read_count(in, kSizeLimit, "trace length");
    for (std::uint64_t i = 0; i < nn; ++i) model.d_nu_trace.push_back(read_f64(in));
    model.stopped_on_failure = read_le<std::uint8_t>(in) != 0;
    const auto len = read_count(in, 1u << 20, "message length");
    model.failure_message.resize(len);
    in.read(model.failure_message.data(), static_cast<std::streamsize>(len));
    require(static_cast<bool>(in), "model file: unexpected end of file");
    return model;
}

inline void save_model(const std::string& path, const HierarchicalModel& model) {
    std::ofstream out(path, std::ios::binary);
    detail::require(static_cast<bool>(out), "cannot write model '" + path + "'");
    write_model(out, model);
    detail::require(static_cast<bool>(out), "failed writing model '" + path + "'");
}

inline HierarchicalModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    detail::require(static_cast<bool>(in), "cannot open model '" + path + "'");
    try {
        return read_model(in);
    } catch (const Error& e) {
        throw Error(path + ": " + e.what());
    }
}

}  // namespace clask
