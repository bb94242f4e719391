// SPDX-License-Identifier: Apache-2.0
//
// Sequence classifiers with hand-written reverse mode: masked LSTM stacks and
// transformer-encoder stacks, each pooled into a sigmoid dense head that emits
// one probability per sample. The vanilla recurrent cell is kept as a
// forward-only reference.
//
// Masking contract: a masked (padded) step is never read. LSTM state passes
// through it unchanged, attention gives it zero weight as a key, and every
// layer writes 0 at masked positions.
#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wardseq/tensor.hpp"

namespace wardseq {

enum class Activation { identity, tanh, sigmoid, relu };
enum class Architecture { lstm_stack, transformer_encoder };
enum class Pooling { last_unmasked, masked_mean };

std::string to_string(Activation a);
std::string to_string(Architecture a);
std::string to_string(Pooling p);
Activation activation_from_string(const std::string& s);
Architecture architecture_from_string(const std::string& s);
Pooling pooling_from_string(const std::string& s);

double activate(Activation a, double x) noexcept;

// ---------------------------------------------------------------------------
// Vanilla recurrent cell

struct RnnCellParams {
    Matrix w_x;  // input x hidden
    Matrix w_h;  // hidden x hidden
    Matrix b_h;  // 1 x hidden
    Matrix w_y;  // hidden x output
    Matrix b_y;  // 1 x output
    Activation activation = Activation::tanh;
};

struct RnnSequence {
    Matrix hidden;  // T x hidden: state after consuming x_t
    Matrix output;  // T x output
};

/// h_{t+1} = f(x_t w_x + h_t w_h + b_h),  y = f(h w_y + b_y).
RnnSequence rnn_cell_forward(const RnnCellParams& p, const Matrix& x_seq, std::span<const double> h0 = {});

// ---------------------------------------------------------------------------
// Layer parameters

/// Gate blocks are packed along the columns in the order input, forget, cell, output.
struct LstmLayerParams {
    Matrix w_input;      // F x 4H
    Matrix w_recurrent;  // H x 4H
    Matrix bias;         // 1 x 4H

    std::size_t hidden() const noexcept { return w_recurrent.rows(); }
    std::size_t input_width() const noexcept { return w_input.rows(); }
};

struct LayerNormParams {
    Matrix gain;  // 1 x D
    Matrix bias;  // 1 x D
    double epsilon = 1e-5;

    std::size_t width() const noexcept { return gain.cols(); }
};

struct DenseParams {
    Matrix weight;  // in x out
    Matrix bias;    // 1 x out
    Activation activation = Activation::identity;
};

/// Per-head projections are packed along the columns: head h owns columns
/// [h * key_dim, (h + 1) * key_dim).
struct MhaParams {
    std::size_t heads = 1;
    std::size_t key_dim = 1;
    Matrix w_query, b_query;  // D x heads*key_dim, 1 x heads*key_dim
    Matrix w_key, b_key;
    Matrix w_value, b_value;
    Matrix w_out, b_out;      // heads*key_dim x D, 1 x D
};

struct EncoderBlockParams {
    MhaParams attention;
    DenseParams ff_expand;    // D -> ff_dim, relu
    DenseParams ff_contract;  // ff_dim -> D, identity
    LayerNormParams norm1;
    LayerNormParams norm2;
};

struct LstmBlockParams {
    LstmLayerParams lstm;
    std::optional<LayerNormParams> norm;
};

// ---------------------------------------------------------------------------
// Model configuration

struct LstmBlockConfig {
    std::size_t hidden = 16;
    bool layer_norm = true;
    double dropout = 0.2;

    friend bool operator==(const LstmBlockConfig&, const LstmBlockConfig&) = default;
};

struct ModelConfig {
    Architecture architecture = Architecture::lstm_stack;
    std::size_t input_width = 0;
    Pooling pooling = Pooling::last_unmasked;
    double head_dropout = 0.0;
    std::uint64_t init_seed = 0;

    // lstm_stack
    std::vector<LstmBlockConfig> lstm_blocks;

    // transformer_encoder
    std::size_t encoder_blocks = 2;
    std::size_t heads = 6;
    std::size_t key_dim = 128;
    std::size_t ff_dim = 64;
    double dropout = 0.2;

    /// Throws ConfigError for empty stacks, zero widths or dropout outside [0, 1).
    void validate() const;

    static ModelConfig lstm(std::size_t input_width, std::vector<LstmBlockConfig> blocks);
    static ModelConfig transformer(std::size_t input_width, std::size_t blocks, std::size_t heads,
                                   std::size_t key_dim, std::size_t ff_dim, double dropout);

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct ModelParams {
    ModelConfig config;
    std::vector<LstmBlockParams> lstm_blocks;
    std::vector<EncoderBlockParams> encoder_blocks;
    DenseParams head;  // pooled width -> 1, sigmoid
};

/// Xavier-uniform weights from config.init_seed, zero biases, forget-gate bias
/// 1, layer-norm gain 1.
ModelParams init_model(const ModelConfig& config);

/// Same structure, every value 0. Used as the gradient container.
ModelParams zeros_like(const ModelParams& m);

struct ParamView {
    std::string name;
    Matrix* value;
};
struct ConstParamView {
    std::string name;
    const Matrix* value;
};

/// Every trainable tensor in a fixed, documented order with dotted names
/// ("lstm0.w_input", "enc1.attn.w_query", "head.weight", ...).
std::vector<ParamView> parameters(ModelParams& m);
std::vector<ConstParamView> parameters(const ModelParams& m);
std::size_t parameter_count(const ModelParams& m);

/// FNV-1a over every parameter's bytes; identifies the exact parameter state.
std::uint64_t fingerprint(const ModelParams& m);

// ---------------------------------------------------------------------------
// Layer kernels (exposed for testing)

struct LstmCache {
    Tensor3 input;
    MaskMatrix mask;
    Tensor3 gates;     // activated i, f, g, o
    Tensor3 h_before;  // state entering step t
    Tensor3 c_before;
    Tensor3 cell;      // c_t
    Tensor3 cell_tanh;
};

struct LstmResult {
    Tensor3 output;  // B x T x H, zero at masked steps
    Matrix h_final;  // B x H
    Matrix c_final;
};

/// `h0`/`c0` default to zeros when empty.
LstmResult lstm_forward(const LstmLayerParams& p, const Tensor3& x, const MaskMatrix& mask,
                        const Matrix& h0 = {}, const Matrix& c0 = {}, LstmCache* cache = nullptr);
/// Accumulates into `grads`; returns dL/dx.
Tensor3 lstm_backward(const LstmLayerParams& p, const LstmCache& cache, const Tensor3& d_output,
                      LstmLayerParams& grads);

struct LayerNormCache {
    MaskMatrix mask;
    Tensor3 normalized;
    std::vector<double> inv_std;  // per (b, t)
};

Tensor3 layer_norm_forward(const LayerNormParams& p, const Tensor3& x, const MaskMatrix& mask,
                           LayerNormCache* cache = nullptr);
Matrix layer_norm_forward(const LayerNormParams& p, const Matrix& x);
Tensor3 layer_norm_backward(const LayerNormParams& p, const LayerNormCache& cache, const Tensor3& d_output,
                            LayerNormParams& grads);

struct DropoutCache {
    std::vector<double> scale;  // 0 or 1/(1-rate) per element; empty = identity
};

/// Inverted dropout. Draws one uniform per element in layout order, so the
/// random stream does not depend on values or the mask.
Tensor3 dropout_forward(double rate, bool training, std::mt19937_64* rng, const Tensor3& x,
                        DropoutCache* cache = nullptr);
std::vector<double> dropout_forward(double rate, bool training, std::mt19937_64* rng, std::span<const double> x,
                                    DropoutCache* cache = nullptr);
void dropout_backward(const DropoutCache& cache, std::span<double> grad);

struct DenseCache {
    Tensor3 input;
    MaskMatrix mask;
    Tensor3 output;  // post-activation
};

/// Applies `p` at every valid position; masked positions stay 0.
Tensor3 positionwise_dense_forward(const DenseParams& p, const Tensor3& x, const MaskMatrix& mask,
                                   DenseCache* cache = nullptr);
Tensor3 positionwise_dense_backward(const DenseParams& p, const DenseCache& cache, const Tensor3& d_output,
                                    DenseParams& grads);

struct MhaCache {
    Tensor3 input;
    MaskMatrix mask;
    Tensor3 query, key, value;  // B x T x heads*key_dim
    Tensor3 context;            // B x T x heads*key_dim
    std::vector<double> weights;  // [b][head][query t][key u]
};

Tensor3 mha_forward(const MhaParams& p, const Tensor3& x, const MaskMatrix& mask, MhaCache* cache = nullptr);
Tensor3 mha_backward(const MhaParams& p, const MhaCache& cache, const Tensor3& d_output, MhaParams& grads);

/// Attention weights of head `h` for sample `b` (T x T, rows = queries).
Matrix attention_weights(const MhaCache& cache, std::size_t b, std::size_t h, std::size_t heads);

struct EncoderBlockCache {
    MhaCache attention;
    DropoutCache attention_dropout;
    LayerNormCache norm1;
    DenseCache ff_expand;
    DenseCache ff_contract;
    DropoutCache ff_dropout;
    LayerNormCache norm2;
};

/// y1 = norm1(x + dropout(mha(x))),  y2 = norm2(y1 + dropout(ff(y1))).
Tensor3 encoder_block_forward(const EncoderBlockParams& p, double dropout, const Tensor3& x,
                              const MaskMatrix& mask, bool training, std::mt19937_64* rng,
                              EncoderBlockCache* cache = nullptr);
Tensor3 encoder_block_backward(const EncoderBlockParams& p, const EncoderBlockCache& cache,
                               const Tensor3& d_output, EncoderBlockParams& grads);

// ---------------------------------------------------------------------------
// Whole model

struct LstmBlockCache {
    LstmCache lstm;
    std::optional<LayerNormCache> norm;
    DropoutCache dropout;
};

struct ForwardCache {
    std::uint64_t params_fingerprint = 0;
    std::size_t batch = 0;
    MaskMatrix mask;
    std::vector<LstmBlockCache> lstm_blocks;
    std::vector<EncoderBlockCache> encoder_blocks;
    Tensor3 final_sequence;
    Matrix pooled;           // B x D before head dropout
    DropoutCache head_dropout;
    Matrix head_input;       // B x D after head dropout
    std::vector<double> probabilities;
};

/// One probability per sample. `rng` is only used when `training` is set.
std::vector<double> model_forward(const ModelParams& m, const Tensor3& x, const MaskMatrix& mask, bool training,
                                  std::mt19937_64* rng, ForwardCache* cache = nullptr);

/// Gradients of the loss w.r.t. every parameter, given dL/dp per sample.
/// Throws Error when `cache` was produced by different parameters or batch.
ModelParams model_backward(const ModelParams& m, const ForwardCache& cache, std::span<const double> d_probability);

// ---------------------------------------------------------------------------
// Checkpoints

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Versioned checkpoint: config plus every tensor's shape and base64 float64 payload.
nlohmann::json to_json(const ModelParams& m);
ModelParams model_from_json(const nlohmann::json& j);

}  // namespace wardseq
