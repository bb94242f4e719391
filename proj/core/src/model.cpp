// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <cstring>

#include "format.hpp"
#include "wardseq/errors.hpp"
#include "wardseq/seqnet.hpp"

namespace wardseq {

// ---------------------------------------------------------------------------
// Enum names

std::string to_string(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::tanh: return "tanh";
        case Activation::sigmoid: return "sigmoid";
        case Activation::relu: return "relu";
    }
    return "?";
}

std::string to_string(Architecture a) {
    return a == Architecture::lstm_stack ? "lstm_stack" : "transformer_encoder";
}

std::string to_string(Pooling p) { return p == Pooling::last_unmasked ? "last_unmasked" : "masked_mean"; }

Activation activation_from_string(const std::string& s) {
    if (s == "identity") return Activation::identity;
    if (s == "tanh") return Activation::tanh;
    if (s == "sigmoid") return Activation::sigmoid;
    if (s == "relu") return Activation::relu;
    throw ConfigError("unknown activation '" + s + "'");
}

Architecture architecture_from_string(const std::string& s) {
    if (s == "lstm_stack" || s == "lstm") return Architecture::lstm_stack;
    if (s == "transformer_encoder" || s == "transformer") return Architecture::transformer_encoder;
    throw ConfigError("unknown architecture '" + s + "' (expected lstm_stack or transformer_encoder)");
}

Pooling pooling_from_string(const std::string& s) {
    if (s == "last_unmasked") return Pooling::last_unmasked;
    if (s == "masked_mean") return Pooling::masked_mean;
    throw ConfigError("unknown pooling '" + s + "' (expected last_unmasked or masked_mean)");
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

void require_rate(double r, const char* what) {
    if (!(r >= 0.0 && r < 1.0)) throw ConfigError(std::string(what) + " must be in [0, 1)");
}

}  // namespace

void ModelConfig::validate() const {
    if (input_width == 0) throw ConfigError("model input_width must be > 0");
    require_rate(head_dropout, "head_dropout");
    if (architecture == Architecture::lstm_stack) {
        if (lstm_blocks.empty()) throw ConfigError("lstm_stack needs at least one block");
        for (const auto& b : lstm_blocks) {
            if (b.hidden == 0) throw ConfigError("lstm hidden size must be > 0");
            require_rate(b.dropout, "lstm block dropout");
        }
    } else {
        if (encoder_blocks == 0) throw ConfigError("transformer_encoder needs at least one block");
        if (heads == 0 || key_dim == 0 || ff_dim == 0) throw ConfigError("heads, key_dim and ff_dim must be > 0");
        require_rate(dropout, "encoder dropout");
    }
}

ModelConfig ModelConfig::lstm(std::size_t input_width, std::vector<LstmBlockConfig> blocks) {
    ModelConfig c;
    c.architecture = Architecture::lstm_stack;
    c.input_width = input_width;
    c.pooling = Pooling::last_unmasked;
    c.lstm_blocks = std::move(blocks);
    return c;
}

ModelConfig ModelConfig::transformer(std::size_t input_width, std::size_t blocks, std::size_t heads,
                                     std::size_t key_dim, std::size_t ff_dim, double dropout) {
    ModelConfig c;
    c.architecture = Architecture::transformer_encoder;
    c.input_width = input_width;
    c.pooling = Pooling::masked_mean;
    c.encoder_blocks = blocks;
    c.heads = heads;
    c.key_dim = key_dim;
    c.ff_dim = ff_dim;
    c.dropout = dropout;
    return c;
}

// ---------------------------------------------------------------------------
// Parameter enumeration

namespace {

template <typename M, typename F>
void visit_params(M& m, F&& f) {
    for (std::size_t k = 0; k < m.lstm_blocks.size(); ++k) {
        auto& blk = m.lstm_blocks[k];
        const std::string p = "lstm" + std::to_string(k) + ".";
        f(p + "w_input", blk.lstm.w_input);
        f(p + "w_recurrent", blk.lstm.w_recurrent);
        f(p + "bias", blk.lstm.bias);
        if (blk.norm) {
            f(p + "norm.gain", blk.norm->gain);
            f(p + "norm.bias", blk.norm->bias);
        }
    }
    for (std::size_t k = 0; k < m.encoder_blocks.size(); ++k) {
        auto& blk = m.encoder_blocks[k];
        const std::string p = "enc" + std::to_string(k) + ".";
        f(p + "attn.w_query", blk.attention.w_query);
        f(p + "attn.b_query", blk.attention.b_query);
        f(p + "attn.w_key", blk.attention.w_key);
        f(p + "attn.b_key", blk.attention.b_key);
        f(p + "attn.w_value", blk.attention.w_value);
        f(p + "attn.b_value", blk.attention.b_value);
        f(p + "attn.w_out", blk.attention.w_out);
        f(p + "attn.b_out", blk.attention.b_out);
        f(p + "ff1.weight", blk.ff_expand.weight);
        f(p + "ff1.bias", blk.ff_expand.bias);
        f(p + "ff2.weight", blk.ff_contract.weight);
        f(p + "ff2.bias", blk.ff_contract.bias);
        f(p + "norm1.gain", blk.norm1.gain);
        f(p + "norm1.bias", blk.norm1.bias);
        f(p + "norm2.gain", blk.norm2.gain);
        f(p + "norm2.bias", blk.norm2.bias);
    }
    f(std::string("head.weight"), m.head.weight);
    f(std::string("head.bias"), m.head.bias);
}

Matrix xavier(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-limit, limit);
    Matrix m(fan_in, fan_out);
    for (double& v : m.values()) v = u(rng);
    return m;
}

LayerNormParams unit_norm(std::size_t width) { return {Matrix(1, width, 1.0), Matrix(1, width, 0.0), 1e-5}; }

std::size_t pooled_width(const ModelConfig& c) {
    return c.architecture == Architecture::lstm_stack ? c.lstm_blocks.back().hidden : c.input_width;
}

}  // namespace

std::vector<ParamView> parameters(ModelParams& m) {
    std::vector<ParamView> out;
    visit_params(m, [&](std::string name, Matrix& v) { out.push_back({std::move(name), &v}); });
    return out;
}

std::vector<ConstParamView> parameters(const ModelParams& m) {
    std::vector<ConstParamView> out;
    visit_params(m, [&](std::string name, const Matrix& v) { out.push_back({std::move(name), &v}); });
    return out;
}

std::size_t parameter_count(const ModelParams& m) {
    std::size_t n = 0;
    for (const auto& p : parameters(m)) n += p.value->size();
    return n;
}

std::uint64_t fingerprint(const ModelParams& m) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& p : parameters(m)) {
        for (double v : p.value->values()) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, sizeof bits);
            for (int i = 0; i < 8; ++i) {
                h ^= (bits >> (8 * i)) & 0xFF;
                h *= 1099511628211ULL;
            }
        }
    }
    return h;
}

ModelParams init_model(const ModelConfig& config) {
    config.validate();
    std::mt19937_64 rng(config.init_seed);
    ModelParams m;
    m.config = config;

    if (config.architecture == Architecture::lstm_stack) {
        std::size_t in = config.input_width;
        for (const auto& bc : config.lstm_blocks) {
            const std::size_t H = bc.hidden;
            LstmBlockParams blk;
            blk.lstm.w_input = xavier(in, 4 * H, rng);
            blk.lstm.w_recurrent = xavier(H, 4 * H, rng);
            blk.lstm.bias = Matrix(1, 4 * H, 0.0);
            for (std::size_t j = H; j < 2 * H; ++j) blk.lstm.bias(0, j) = 1.0;
            if (bc.layer_norm) blk.norm = unit_norm(H);
            m.lstm_blocks.push_back(std::move(blk));
            in = H;
        }
    } else {
        const std::size_t D = config.input_width;
        const std::size_t width = config.heads * config.key_dim;
        for (std::size_t k = 0; k < config.encoder_blocks; ++k) {
            EncoderBlockParams blk;
            blk.attention.heads = config.heads;
            blk.attention.key_dim = config.key_dim;
            blk.attention.w_query = xavier(D, width, rng);
            blk.attention.b_query = Matrix(1, width);
            blk.attention.w_key = xavier(D, width, rng);
            blk.attention.b_key = Matrix(1, width);
            blk.attention.w_value = xavier(D, width, rng);
            blk.attention.b_value = Matrix(1, width);
            blk.attention.w_out = xavier(width, D, rng);
            blk.attention.b_out = Matrix(1, D);
            blk.ff_expand = {xavier(D, config.ff_dim, rng), Matrix(1, config.ff_dim), Activation::relu};
            blk.ff_contract = {xavier(config.ff_dim, D, rng), Matrix(1, D), Activation::identity};
            blk.norm1 = unit_norm(D);
            blk.norm2 = unit_norm(D);
            m.encoder_blocks.push_back(std::move(blk));
        }
    }
    m.head = {xavier(pooled_width(config), 1, rng), Matrix(1, 1), Activation::sigmoid};
    return m;
}

ModelParams zeros_like(const ModelParams& m) {
    ModelParams z = m;
    for (auto& p : parameters(z)) p.value->fill(0.0);
    return z;
}

// ---------------------------------------------------------------------------
// Forward / backward

std::vector<double> model_forward(const ModelParams& m, const Tensor3& x, const MaskMatrix& mask, bool training,
                                  std::mt19937_64* rng, ForwardCache* cache) {
    const ModelConfig& cfg = m.config;
    if (x.feature() != cfg.input_width) {
        throw ShapeError("feature width mismatch: model expects " + std::to_string(cfg.input_width) +
                         ", batch has " + std::to_string(x.feature()));
    }
    if (mask.batch() != x.batch() || mask.time() != x.time()) {
        throw ShapeError("mask does not match batch " + x.shape_string());
    }
    const std::size_t B = x.batch(), T = x.time();

    // Mask layer: padded steps are zeroed before any layer sees them.
    Tensor3 seq = x;
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t t = 0; t < T; ++t)
            if (!mask.valid(b, t)) std::fill(seq.step(b, t).begin(), seq.step(b, t).end(), 0.0);

    if (cache) {
        *cache = ForwardCache{};
        cache->params_fingerprint = fingerprint(m);
        cache->batch = B;
        cache->mask = mask;
    }

    if (cfg.architecture == Architecture::lstm_stack) {
        if (cache) cache->lstm_blocks.resize(m.lstm_blocks.size());
        for (std::size_t k = 0; k < m.lstm_blocks.size(); ++k) {
            const auto& blk = m.lstm_blocks[k];
            LstmBlockCache* bc = cache ? &cache->lstm_blocks[k] : nullptr;
            seq = lstm_forward(blk.lstm, seq, mask, {}, {}, bc ? &bc->lstm : nullptr).output;
            if (blk.norm) {
                if (bc) bc->norm.emplace();
                seq = layer_norm_forward(*blk.norm, seq, mask, bc ? &*bc->norm : nullptr);
            }
            seq = dropout_forward(cfg.lstm_blocks[k].dropout, training, rng, seq, bc ? &bc->dropout : nullptr);
        }
    } else {
        if (cache) cache->encoder_blocks.resize(m.encoder_blocks.size());
        for (std::size_t k = 0; k < m.encoder_blocks.size(); ++k) {
            seq = encoder_block_forward(m.encoder_blocks[k], cfg.dropout, seq, mask, training, rng,
                                        cache ? &cache->encoder_blocks[k] : nullptr);
        }
    }

    const std::size_t D = seq.feature();
    Matrix pooled(B, D);
    for (std::size_t b = 0; b < B; ++b) {
        auto out = pooled.row(b);
        if (cfg.pooling == Pooling::last_unmasked) {
            for (std::size_t t = T; t-- > 0;) {
                if (!mask.valid(b, t)) continue;
                std::copy(seq.step(b, t).begin(), seq.step(b, t).end(), out.begin());
                break;
            }
        } else {
            const std::size_t n = mask.valid_count(b);
            if (n == 0) continue;
            for (std::size_t t = 0; t < T; ++t) {
                if (!mask.valid(b, t)) continue;
                const auto s = seq.step(b, t);
                for (std::size_t j = 0; j < D; ++j) out[j] += s[j];
            }
            for (double& v : out) v /= static_cast<double>(n);
        }
    }

    DropoutCache head_drop;
    const auto dropped = dropout_forward(cfg.head_dropout, training, rng, pooled.values(), &head_drop);
    Matrix head_in(B, D, dropped);

    std::vector<double> prob(B);
    for (std::size_t b = 0; b < B; ++b) {
        double z = m.head.bias(0, 0);
        const auto r = head_in.row(b);
        for (std::size_t j = 0; j < D; ++j) z += r[j] * m.head.weight(j, 0);
        prob[b] = sigmoid(z);
    }

    if (cache) {
        cache->final_sequence = std::move(seq);
        cache->pooled = std::move(pooled);
        cache->head_dropout = std::move(head_drop);
        cache->head_input = std::move(head_in);
        cache->probabilities = prob;
    }
    return prob;
}

ModelParams model_backward(const ModelParams& m, const ForwardCache& cache, std::span<const double> d_probability) {
    if (cache.batch != d_probability.size()) {
        throw Error("stale cache: forward saw " + std::to_string(cache.batch) + " samples, gradient has " +
                    std::to_string(d_probability.size()));
    }
    if (cache.params_fingerprint != fingerprint(m)) {
        throw Error("stale cache: parameters changed since the forward pass");
    }
    const ModelConfig& cfg = m.config;
    ModelParams g = zeros_like(m);
    const std::size_t B = cache.batch;
    const std::size_t T = cache.final_sequence.time();
    const std::size_t D = cache.final_sequence.feature();

    Matrix d_head_in(B, D);
    for (std::size_t b = 0; b < B; ++b) {
        const double p = cache.probabilities[b];
        const double dz = d_probability[b] * p * (1.0 - p);
        g.head.bias(0, 0) += dz;
        const auto r = cache.head_input.row(b);
        auto d = d_head_in.row(b);
        for (std::size_t j = 0; j < D; ++j) {
            g.head.weight(j, 0) += r[j] * dz;
            d[j] = m.head.weight(j, 0) * dz;
        }
    }
    dropout_backward(cache.head_dropout, d_head_in.values());

    Tensor3 d_seq(B, T, D);
    for (std::size_t b = 0; b < B; ++b) {
        const auto d = d_head_in.row(b);
        if (cfg.pooling == Pooling::last_unmasked) {
            for (std::size_t t = T; t-- > 0;) {
                if (!cache.mask.valid(b, t)) continue;
                std::copy(d.begin(), d.end(), d_seq.step(b, t).begin());
                break;
            }
        } else {
            const std::size_t n = cache.mask.valid_count(b);
            if (n == 0) continue;
            const double inv = 1.0 / static_cast<double>(n);
            for (std::size_t t = 0; t < T; ++t) {
                if (!cache.mask.valid(b, t)) continue;
                auto s = d_seq.step(b, t);
                for (std::size_t j = 0; j < D; ++j) s[j] = d[j] * inv;
            }
        }
    }

    if (cfg.architecture == Architecture::lstm_stack) {
        for (std::size_t k = m.lstm_blocks.size(); k-- > 0;) {
            const auto& blk = m.lstm_blocks[k];
            const auto& bc = cache.lstm_blocks.at(k);
            dropout_backward(bc.dropout, d_seq.values());
            if (blk.norm) d_seq = layer_norm_backward(*blk.norm, *bc.norm, d_seq, *g.lstm_blocks[k].norm);
            d_seq = lstm_backward(blk.lstm, bc.lstm, d_seq, g.lstm_blocks[k].lstm);
        }
    } else {
        for (std::size_t k = m.encoder_blocks.size(); k-- > 0;) {
            d_seq = encoder_block_backward(m.encoder_blocks[k], cache.encoder_blocks.at(k), d_seq,
                                           g.encoder_blocks[k]);
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Checkpoints

nlohmann::json to_json(const ModelConfig& c) {
    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& b : c.lstm_blocks)
        blocks.push_back({{"hidden", b.hidden}, {"layer_norm", b.layer_norm}, {"dropout", b.dropout}});
    return {{"architecture", to_string(c.architecture)},
            {"input_width", c.input_width},
            {"pooling", to_string(c.pooling)},
            {"head_dropout", c.head_dropout},
            {"init_seed", c.init_seed},
            {"lstm_blocks", std::move(blocks)},
            {"encoder_blocks", c.encoder_blocks},
            {"heads", c.heads},
            {"key_dim", c.key_dim},
            {"ff_dim", c.ff_dim},
            {"dropout", c.dropout}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.architecture = architecture_from_string(j.value("architecture", std::string("lstm_stack")));
    c.input_width = j.value("input_width", std::size_t{0});
    c.pooling = j.contains("pooling") ? pooling_from_string(j.at("pooling").get<std::string>())
                                      : (c.architecture == Architecture::lstm_stack ? Pooling::last_unmasked
                                                                                    : Pooling::masked_mean);
    c.head_dropout = j.value("head_dropout", 0.0);
    c.init_seed = j.value("init_seed", std::uint64_t{0});
    if (j.contains("lstm_blocks")) {
        for (const auto& b : j.at("lstm_blocks")) {
            c.lstm_blocks.push_back(
                {b.value("hidden", std::size_t{16}), b.value("layer_norm", true), b.value("dropout", 0.2)});
        }
    }
    c.encoder_blocks = j.value("encoder_blocks", c.encoder_blocks);
    c.heads = j.value("heads", c.heads);
    c.key_dim = j.value("key_dim", c.key_dim);
    c.ff_dim = j.value("ff_dim", c.ff_dim);
    c.dropout = j.value("dropout", c.dropout);
    return c;
}

nlohmann::json to_json(const ModelParams& m) {
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& p : parameters(m)) {
        tensors.push_back({{"name", p.name},
                           {"rows", p.value->rows()},
                           {"cols", p.value->cols()},
                           {"data", detail::encode_doubles(p.value->values())}});
    }
    return {{"format", "wardseq-checkpoint"},
            {"version", 1},
            {"config", to_json(m.config)},
            {"parameter_count", parameter_count(m)},
            {"tensors", std::move(tensors)}};
}

ModelParams model_from_json(const nlohmann::json& j) {
    if (j.value("format", std::string()) != "wardseq-checkpoint") throw Error("not a wardseq checkpoint");
    if (j.value("version", 0) != 1) throw Error("unsupported checkpoint version " + j.at("version").dump());
    ModelParams m = init_model(model_config_from_json(j.at("config")));
    auto views = parameters(m);
    const auto& tensors = j.at("tensors");
    if (tensors.size() != views.size()) {
        throw Error("checkpoint has " + std::to_string(tensors.size()) + " tensors, config implies " +
                    std::to_string(views.size()));
    }
    for (std::size_t i = 0; i < views.size(); ++i) {
        const auto& jt = tensors[i];
        if (jt.at("name").get<std::string>() != views[i].name) {
            throw Error("checkpoint tensor " + std::to_string(i) + " is '" + jt.at("name").get<std::string>() +
                        "', expected '" + views[i].name + "'");
        }
        const auto rows = jt.at("rows").get<std::size_t>();
        const auto cols = jt.at("cols").get<std::size_t>();
        if (rows != views[i].value->rows() || cols != views[i].value->cols()) {
            throw ShapeError("checkpoint tensor '" + views[i].name + "' has shape [" + std::to_string(rows) + "x" +
                             std::to_string(cols) + "], expected " + views[i].value->shape_string());
        }
        *views[i].value = Matrix(rows, cols, detail::decode_doubles(jt.at("data").get<std::string>()));
    }
    return m;
}

}  // namespace wardseq
