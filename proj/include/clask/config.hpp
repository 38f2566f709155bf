#pragma once

// Plain-text run configuration: "key = value" lines, '#' comments, one
// "kernel = <spec>" line per kernel.

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>

#include "clask/data.hpp"
#include "clask/detail/error.hpp"
#include "clask/hierarchy.hpp"
#include "clask/kernel.hpp"

namespace clask {

struct RunConfig {
    std::string dataset;
    DataFormat format = DataFormat::Csv;
    KernelSet kernels;
    double eta = 0.1;
    double t = 0.1;
    double t_kappa = 1.0;
    std::size_t l_max = 10;
    double epsilon = 1e-3;
    double split_fraction = 0.5;
    double ridge = kDefaultRidge;
    bool tune_ridge = false;
    double tol = 1e-3;
    std::size_t max_rank = 0;
    std::uint64_t seed = 0;
    std::string output_dir = ".";
    Scaling scaling = Scaling::ZScore;
    double f_tol = 1e-8;
    std::size_t max_iters = 500;

    void validate() const {
        detail::require(!kernels.empty(), "config: at least one kernel is required");
        for (const auto& k : kernels) k.validate();
        detail::require(eta > 0.0 && eta <= 1.0, "config: eta must lie in (0, 1]");
        detail::require(t >= 0.0 && t < 1.0, "config: t must lie in [0, 1)");
        detail::require(t_kappa >= 0.0, "config: t_kappa must be nonnegative");
        detail::require(l_max >= 1, "config: l_max must be >= 1");
        detail::require(epsilon >= 0.0, "config: epsilon must be nonnegative");
        detail::require(split_fraction > 0.0 && split_fraction < 1.0, "config: split_fraction must lie in (0, 1)");
        detail::require(ridge > 0.0, "config: ridge must be positive");
        detail::require(tol >= 0.0 && tol < 1.0, "config: tol must lie in [0, 1)");
        detail::require(f_tol >= 0.0, "config: f_tol must be nonnegative");
    }

    HierarchyOptions hierarchy_options() const {
        HierarchyOptions h;
        h.l_max = l_max;
        h.t_kappa = t_kappa;
        h.epsilon = epsilon;
        h.ridge = ridge;
        h.tune_ridge = tune_ridge;
        h.seed = seed;
        h.clasmk.eta = eta;
        h.clasmk.t = t;
        h.clasmk.split_fraction = split_fraction;
        h.clasmk.basis.tol = tol;
        h.clasmk.basis.max_rank = max_rank;
        h.clasmk.optimize.f_tol = f_tol;
        h.clasmk.optimize.max_iters = max_iters;
        return h;
    }
};

namespace detail {

inline std::string format_real(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, end);
}

template <class T>
T parse_number(std::string_view text, const std::string& key) {
    T v{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    require(ec == std::errc() && ptr == text.data() + text.size() && !text.empty(),
            "config: bad value for '" + key + "': '" + std::string(text) + "'");
    return v;
}

inline bool parse_bool(std::string_view text, const std::string& key) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    fail("config: bad boolean for '" + key + "': '" + std::string(text) + "'");
}

}  // namespace detail

/// Applies one key/value pair; shared by the file parser and command-line overrides.
inline void apply_setting(RunConfig& cfg, const std::string& key, std::string_view value) {
    using detail::parse_number;
    if (key == "dataset") cfg.dataset = std::string(value);
    else if (key == "format") cfg.format = parse_format(value);
    else if (key == "kernel") cfg.kernels.push_back(KernelSpec::parse(value));
    else if (key == "eta") cfg.eta = parse_number<double>(value, key);
    else if (key == "t") cfg.t = parse_number<double>(value, key);
    else if (key == "t_kappa") cfg.t_kappa = parse_number<double>(value, key);
    else if (key == "l_max") cfg.l_max = parse_number<std::size_t>(value, key);
    else if (key == "epsilon") cfg.epsilon = parse_number<double>(value, key);
    else if (key == "split_fraction") cfg.split_fraction = parse_number<double>(value, key);
    else if (key == "ridge") cfg.ridge = parse_number<double>(value, key);
    else if (key == "tune_ridge") cfg.tune_ridge = detail::parse_bool(value, key);
    else if (key == "tol") cfg.tol = parse_number<double>(value, key);
    else if (key == "max_rank") cfg.max_rank = parse_number<std::size_t>(value, key);
    else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(value, key);
    else if (key == "output_dir") cfg.output_dir = std::string(value);
    else if (key == "scaling") cfg.scaling = parse_scaling(value);
    else if (key == "f_tol") cfg.f_tol = parse_number<double>(value, key);
    else if (key == "max_iters") cfg.max_iters = parse_number<std::size_t>(value, key);
    else detail::fail("config: unknown key '" + key + "'");
}

inline RunConfig parse_config(std::istream& in) {
    RunConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view sv = line;
        if (const auto hash = sv.find('#'); hash != std::string_view::npos) sv = sv.substr(0, hash);
        sv = detail::trim(sv);
        if (sv.empty()) continue;
        const auto eq = sv.find('=');
        detail::require(eq != std::string_view::npos,
                        "config line " + std::to_string(line_no) + ": expected 'key = value'");
        const std::string key(detail::trim(sv.substr(0, eq)));
        try {
            apply_setting(cfg, key, detail::trim(sv.substr(eq + 1)));
        } catch (const Error& e) {
            throw Error("config line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    detail::require(static_cast<bool>(in), "cannot open config '" + path + "'");
    return parse_config(in);
}

inline void write_config(std::ostream& out, const RunConfig& cfg) {
    using detail::format_real;
    out << "dataset = " << cfg.dataset << '\n';
    out << "format = " << (cfg.format == DataFormat::Csv ? "csv" : "libsvm") << '\n';
    for (const auto& k : cfg.kernels) out << "kernel = " << k.to_string() << '\n';
    out << "eta = " << format_real(cfg.eta) << '\n';
    out << "t = " << format_real(cfg.t) << '\n';
    out << "t_kappa = " << format_real(cfg.t_kappa) << '\n';
    out << "l_max = " << cfg.l_max << '\n';
    out << "epsilon = " << format_real(cfg.epsilon) << '\n';
    out << "split_fraction = " << format_real(cfg.split_fraction) << '\n';
    out << "ridge = " << format_real(cfg.ridge) << '\n';
    out << "tune_ridge = " << (cfg.tune_ridge ? "true" : "false") << '\n';
    out << "tol = " << format_real(cfg.tol) << '\n';
    out << "max_rank = " << cfg.max_rank << '\n';
    out << "seed = " << cfg.seed << '\n';
    out << "output_dir = " << cfg.output_dir << '\n';
    out << "scaling = " << scaling_name(cfg.scaling) << '\n';
    out << "f_tol = " << format_real(cfg.f_tol) << '\n';
    out << "max_iters = " << cfg.max_iters << '\n';
}

inline std::string to_string(const RunConfig& cfg) {
    std::ostringstream out;
    write_config(out, cfg);
    return out.str();
}

inline bool operator==(const RunConfig& a, const RunConfig& b) { return to_string(a) == to_string(b); }

}  // namespace clask
