#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mugnn/encoder.hpp"
#include "mugnn/error.hpp"
#include "mugnn/numeric.hpp"

namespace mugnn {

// Hyperparameters. Defaults are the best configuration reported for the
// benchmark datasets.
struct TrainConfig {
    int embedding_dim = 128;
    int layers = 2;
    double learning_rate = 0.001;
    double l2 = 0.01;
    double dropout = 0.2;
    double gamma1 = 1.0;
    double gamma2 = 1.0;
    double gamma_r = 0.12;
    int negatives_k = 25;
    int negative_refresh_epochs = 5;
    int epochs = 500;
    double train_fraction = 0.3;
    std::uint64_t rng_seed = 1;
    std::string pooling = "average";
    double leaky_slope = 0.2;
    bool cross_row_normalize = false;
    double adagrad_epsilon = 1e-10;

    void validate() const {
        auto positive = [](double v, const char* key) {
            if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(key) + " must be positive");
        };
        if (embedding_dim <= 0) throw ConfigError("embedding_dim must be positive");
        if (layers <= 0) throw ConfigError("layers must be positive");
        if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be nonnegative");
        if (!(l2 >= 0.0)) throw ConfigError("l2 must be nonnegative");
        if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
        positive(gamma1, "gamma1");
        positive(gamma2, "gamma2");
        positive(gamma_r, "gamma_r");
        if (negatives_k <= 0) throw ConfigError("negatives_k must be positive");
        if (negative_refresh_epochs <= 0) throw ConfigError("negative_refresh_epochs must be positive");
        if (epochs < 0) throw ConfigError("epochs must be nonnegative");
        if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) throw ConfigError("train_fraction must lie in [0, 1]");
        if (pooling != "average") throw ConfigError("unsupported pooling '" + pooling + "'");
        positive(adagrad_epsilon, "adagrad_epsilon");
    }
};

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace detail

// Ordered key/value view of a config; also the serialization order.
inline std::vector<std::pair<std::string, std::string>> config_entries(const TrainConfig& c) {
    using detail::format_double;
    return {
        {"embedding_dim", std::to_string(c.embedding_dim)},
        {"layers", std::to_string(c.layers)},
        {"learning_rate", format_double(c.learning_rate)},
        {"l2", format_double(c.l2)},
        {"dropout", format_double(c.dropout)},
        {"gamma1", format_double(c.gamma1)},
        {"gamma2", format_double(c.gamma2)},
        {"gamma_r", format_double(c.gamma_r)},
        {"negatives_k", std::to_string(c.negatives_k)},
        {"negative_refresh_epochs", std::to_string(c.negative_refresh_epochs)},
        {"epochs", std::to_string(c.epochs)},
        {"train_fraction", format_double(c.train_fraction)},
        {"rng_seed", std::to_string(c.rng_seed)},
        {"pooling", c.pooling},
        {"leaky_slope", format_double(c.leaky_slope)},
        {"cross_row_normalize", c.cross_row_normalize ? "true" : "false"},
        {"adagrad_epsilon", format_double(c.adagrad_epsilon)},
    };
}

inline void set_config_value(TrainConfig& c, const std::string& key, const std::string& value) {
    auto as_double = [&]() {
        std::size_t pos = 0;
        double v = 0.0;
        try {
            v = std::stod(value, &pos);
        } catch (const std::logic_error&) {
            pos = 0;
        }
        if (pos != value.size() || value.empty()) throw ConfigError("bad number for " + key + ": '" + value + "'");
        return v;
    };
    auto as_int = [&]() {
        std::size_t pos = 0;
        long long v = 0;
        try {
            v = std::stoll(value, &pos);
        } catch (const std::logic_error&) {
            pos = 0;
        }
        if (pos != value.size() || value.empty()) throw ConfigError("bad integer for " + key + ": '" + value + "'");
        return v;
    };
    if (key == "embedding_dim") c.embedding_dim = static_cast<int>(as_int());
    else if (key == "layers") c.layers = static_cast<int>(as_int());
    else if (key == "learning_rate") c.learning_rate = as_double();
    else if (key == "l2") c.l2 = as_double();
    else if (key == "dropout") c.dropout = as_double();
    else if (key == "gamma1") c.gamma1 = as_double();
    else if (key == "gamma2") c.gamma2 = as_double();
    else if (key == "gamma_r") c.gamma_r = as_double();
    else if (key == "negatives_k") c.negatives_k = static_cast<int>(as_int());
    else if (key == "negative_refresh_epochs") c.negative_refresh_epochs = static_cast<int>(as_int());
    else if (key == "epochs") c.epochs = static_cast<int>(as_int());
    else if (key == "train_fraction") c.train_fraction = as_double();
    else if (key == "rng_seed") c.rng_seed = static_cast<std::uint64_t>(as_int());
    else if (key == "pooling") c.pooling = value;
    else if (key == "leaky_slope") c.leaky_slope = as_double();
    else if (key == "adagrad_epsilon") c.adagrad_epsilon = as_double();
    else if (key == "cross_row_normalize") {
        if (value == "true" || value == "1") c.cross_row_normalize = true;
        else if (value == "false" || value == "0") c.cross_row_normalize = false;
        else throw ConfigError("bad boolean for cross_row_normalize: '" + value + "'");
    } else {
        throw ConfigError("unknown config key '" + key + "'");
    }
}

// Flat `key = value` lines; `#` starts a comment line.
inline TrainConfig read_config(std::istream& in, TrainConfig base = {}) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = detail::trim(line);
        if (t.empty() || t.front() == '#') continue;
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + " lacks '='");
        set_config_value(base, detail::trim(std::string_view(t).substr(0, eq)),
                         detail::trim(std::string_view(t).substr(eq + 1)));
    }
    base.validate();
    return base;
}

inline void write_config(std::ostream& out, const TrainConfig& c) {
    for (const auto& [k, v] : config_entries(c)) out << k << " = " << v << '\n';
}

// FNV-1a over the serialized config.
inline std::uint64_t config_hash(const TrainConfig& c) {
    std::ostringstream s;
    write_config(s, c);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s.str()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Every trainable tensor. The encoder block is a single instance used for
// both graphs.
struct ModelParams {
    std::array<Matrix, 2> entities;   // H0 per graph
    std::array<Matrix, 2> relations;  // relation table per graph
    EncoderParams encoder;

    ModelParams zeros_like() const {
        ModelParams z = *this;
        z.for_each([](const std::string&, Matrix& m) { m.setZero(); });
        return z;
    }

    template <typename F>
    void for_each(F&& f) {
        f("entity.0", entities[0]);
        f("entity.1", entities[1]);
        f("relation.0", relations[0]);
        f("relation.1", relations[1]);
        f("attention.W", encoder.attention.W);
        f("attention.p", encoder.attention.p);
        for (std::size_t l = 0; l < encoder.layers.size(); ++l)
            for (int c = 0; c < 2; ++c)
                f("channel" + std::to_string(c + 1) + ".layer" + std::to_string(l), encoder.layers[l][c]);
    }
    template <typename F>
    void for_each(F&& f) const {
        const_cast<ModelParams*>(this)->for_each(
            [&](const std::string& name, Matrix& m) { f(name, static_cast<const Matrix&>(m)); });
    }
};

struct ModelShape {
    std::array<std::size_t, 2> entities{0, 0};
    std::array<std::size_t, 2> relations{0, 0};
};

// Zero-mean uniform in [-1/sqrt(d), 1/sqrt(d)] for every tensor.
inline ModelParams init_params(const ModelShape& shape, const TrainConfig& cfg, std::mt19937_64& rng) {
    const auto d = static_cast<Eigen::Index>(cfg.embedding_dim);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    std::uniform_real_distribution<double> uni(-scale, scale);
    auto fill = [&](Eigen::Index r, Eigen::Index c) {
        Matrix m(r, c);
        for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = uni(rng);
        return m;
    };
    ModelParams p;
    for (int k = 0; k < 2; ++k) {
        p.entities[k] = fill(static_cast<Eigen::Index>(shape.entities[k]), d);
        p.relations[k] = fill(static_cast<Eigen::Index>(shape.relations[k]), d);
    }
    p.encoder.attention.W = fill(d, d);
    p.encoder.attention.p = fill(2 * d, 1);
    p.encoder.attention.leaky_slope = cfg.leaky_slope;
    p.encoder.dropout = cfg.dropout;
    p.encoder.layers.resize(static_cast<std::size_t>(cfg.layers));
    for (auto& layer : p.encoder.layers)
        for (auto& w : layer) w = fill(d, d);
    return p;
}

struct Checkpoint {
    ModelParams params;
    std::size_t epoch = 0;
    TrainConfig config;
    std::uint64_t config_hash = 0;
};

// Text checkpoint; values are written as hex floats so reading restores
// every bit.
inline void write_checkpoint(std::ostream& out, const Checkpoint& ck) {
    out << "mugnn-checkpoint 1\n";
    out << "epoch " << ck.epoch << '\n';
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(ck.config_hash));
    out << "config_hash " << hash << '\n';
    for (const auto& [k, v] : config_entries(ck.config)) out << "config " << k << " = " << v << '\n';
    ck.params.for_each([&](const std::string& name, const Matrix& m) {
        out << "tensor " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
        char buf[40];
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                std::snprintf(buf, sizeof buf, "%a", m(i, j));
                out << (j ? " " : "") << buf;
            }
            out << '\n';
        }
    });
    out << "end\n";
}

inline Checkpoint read_checkpoint(std::istream& in) {
    auto fail = [](const std::string& what) -> Checkpoint { throw ParseError("checkpoint: " + what); };
    std::string word;
    int version = 0;
    if (!(in >> word >> version) || word != "mugnn-checkpoint" || version != 1) return fail("bad header");
    Checkpoint ck;
    std::string hash;
    if (!(in >> word >> ck.epoch) || word != "epoch") return fail("missing epoch");
    if (!(in >> word >> hash) || word != "config_hash") return fail("missing config_hash");
    ck.config_hash = std::stoull(hash, nullptr, 16);
    std::map<std::string, Matrix> tensors;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line == "end") break;
        std::istringstream ls(line);
        ls >> word;
        if (word == "config") {
            auto eq = line.find('=');
            if (eq == std::string::npos) return fail("bad config line");
            set_config_value(ck.config, detail::trim(std::string_view(line).substr(7, eq - 7)),
                             detail::trim(std::string_view(line).substr(eq + 1)));
        } else if (word == "tensor") {
            std::string name;
            Eigen::Index rows = 0, cols = 0;
            if (!(ls >> name >> rows >> cols)) return fail("bad tensor header");
            Matrix m(rows, cols);
            std::string tok;
            for (Eigen::Index k = 0; k < m.size(); ++k) {
                if (!(in >> tok)) return fail("truncated tensor " + name);
                m.data()[k] = std::strtod(tok.c_str(), nullptr);
            }
            std::getline(in, line);
            tensors[name] = std::move(m);
        } else {
            return fail("unexpected line '" + line + "'");
        }
    }
    if (line != "end") return fail("missing end marker");
    ck.config.validate();
    ck.params.encoder.layers.resize(static_cast<std::size_t>(ck.config.layers));
    ck.params.encoder.attention.leaky_slope = ck.config.leaky_slope;
    ck.params.encoder.dropout = ck.config.dropout;
    ck.params.for_each([&](const std::string& name, Matrix& m) {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw ParseError("checkpoint: missing tensor " + name);
        m = std::move(it->second);
    });
    if (config_hash(ck.config) != ck.config_hash) return fail("config hash mismatch");
    return ck;
}

}  // namespace mugnn
