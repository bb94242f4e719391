// SPDX-License-Identifier: Apache-2.0
//
// Forward/backward kernels for the fixed layer vocabulary of seqnet.
#include <algorithm>
#include <cmath>

#include "wardseq/errors.hpp"
#include "wardseq/seqnet.hpp"

namespace wardseq {

namespace {

void require_mask(const Tensor3& x, const MaskMatrix& mask) {
    if (mask.batch() != x.batch() || mask.time() != x.time()) {
        throw ShapeError("mask [" + std::to_string(mask.batch()) + ", " + std::to_string(mask.time()) +
                         "] does not match input " + x.shape_string());
    }
}

void require_same_shape(const Tensor3& a, const Tensor3& b, const char* what) {
    if (a.batch() != b.batch() || a.time() != b.time() || a.feature() != b.feature()) {
        throw ShapeError(std::string(what) + ": gradient " + b.shape_string() + " does not match " +
                         a.shape_string());
    }
}

void add_into(std::span<double> dst, std::span<const double> src) noexcept {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

double activation_derivative_from_output(Activation a, double y) noexcept {
    switch (a) {
        case Activation::identity: return 1.0;
        case Activation::tanh: return 1.0 - y * y;
        case Activation::sigmoid: return y * (1.0 - y);
        case Activation::relu: return y > 0.0 ? 1.0 : 0.0;
    }
    return 1.0;
}

}  // namespace

double activate(Activation a, double x) noexcept {
    switch (a) {
        case Activation::identity: return x;
        case Activation::tanh: return std::tanh(x);
        case Activation::sigmoid: return sigmoid(x);
        case Activation::relu: return x > 0.0 ? x : 0.0;
    }
    return x;
}

// ---------------------------------------------------------------------------
// Vanilla RNN

RnnSequence rnn_cell_forward(const RnnCellParams& p, const Matrix& x_seq, std::span<const double> h0) {
    const std::size_t hidden = p.w_h.rows();
    if (p.w_h.cols() != hidden || p.w_x.cols() != hidden || p.b_h.cols() != hidden || p.w_y.rows() != hidden ||
        p.b_y.cols() != p.w_y.cols()) {
        throw ShapeError("rnn cell parameters do not chain: w_x " + p.w_x.shape_string() + ", w_h " +
                         p.w_h.shape_string() + ", w_y " + p.w_y.shape_string());
    }
    if (x_seq.cols() != p.w_x.rows()) {
        throw ShapeError("rnn input width " + std::to_string(x_seq.cols()) + " does not match w_x " +
                         p.w_x.shape_string());
    }
    if (!h0.empty() && h0.size() != hidden) throw ShapeError("rnn h0 has the wrong width");

    RnnSequence out{Matrix(x_seq.rows(), hidden), Matrix(x_seq.rows(), p.w_y.cols())};
    std::vector<double> h(hidden, 0.0);
    if (!h0.empty()) std::copy(h0.begin(), h0.end(), h.begin());
    std::vector<double> z(hidden);
    for (std::size_t t = 0; t < x_seq.rows(); ++t) {
        std::copy(p.b_h.values().begin(), p.b_h.values().end(), z.begin());
        accumulate_vec_mat(x_seq.row(t), p.w_x, z);
        accumulate_vec_mat(h, p.w_h, z);
        for (std::size_t j = 0; j < hidden; ++j) h[j] = activate(p.activation, z[j]);
        std::copy(h.begin(), h.end(), out.hidden.row(t).begin());

        auto y = out.output.row(t);
        std::copy(p.b_y.values().begin(), p.b_y.values().end(), y.begin());
        accumulate_vec_mat(h, p.w_y, y);
        for (double& v : y) v = activate(p.activation, v);
    }
    return out;
}

// ---------------------------------------------------------------------------
// LSTM

LstmResult lstm_forward(const LstmLayerParams& p, const Tensor3& x, const MaskMatrix& mask, const Matrix& h0,
                        const Matrix& c0, LstmCache* cache) {
    require_mask(x, mask);
    const std::size_t B = x.batch(), T = x.time(), H = p.hidden();
    if (x.feature() != p.input_width()) {
        throw ShapeError("lstm expects input width " + std::to_string(p.input_width()) + ", got " +
                         std::to_string(x.feature()));
    }
    if (p.w_input.cols() != 4 * H || p.w_recurrent.cols() != 4 * H || p.bias.cols() != 4 * H) {
        throw ShapeError("lstm gate blocks do not share the hidden size");
    }
    auto check_state = [&](const Matrix& s, const char* name) {
        if (!s.empty() && (s.rows() != B || s.cols() != H)) {
            throw ShapeError(std::string("lstm ") + name + " " + s.shape_string() + " does not match [" +
                             std::to_string(B) + "x" + std::to_string(H) + "]");
        }
    };
    check_state(h0, "h0");
    check_state(c0, "c0");

    LstmResult r{Tensor3(B, T, H), Matrix(B, H), Matrix(B, H)};
    if (cache) {
        cache->input = x;
        cache->mask = mask;
        cache->gates = Tensor3(B, T, 4 * H);
        cache->h_before = Tensor3(B, T, H);
        cache->c_before = Tensor3(B, T, H);
        cache->cell = Tensor3(B, T, H);
        cache->cell_tanh = Tensor3(B, T, H);
    }

    std::vector<double> h(H), c(H), z(4 * H);
    for (std::size_t b = 0; b < B; ++b) {
        if (h0.empty()) std::fill(h.begin(), h.end(), 0.0);
        else std::copy(h0.row(b).begin(), h0.row(b).end(), h.begin());
        if (c0.empty()) std::fill(c.begin(), c.end(), 0.0);
        else std::copy(c0.row(b).begin(), c0.row(b).end(), c.begin());

        for (std::size_t t = 0; t < T; ++t) {
            if (cache) {
                std::copy(h.begin(), h.end(), cache->h_before.step(b, t).begin());
                std::copy(c.begin(), c.end(), cache->c_before.step(b, t).begin());
            }
            if (!mask.valid(b, t)) continue;

            std::copy(p.bias.values().begin(), p.bias.values().end(), z.begin());
            accumulate_vec_mat(x.step(b, t), p.w_input, z);
            accumulate_vec_mat(h, p.w_recurrent, z);

            auto out = r.output.step(b, t);
            for (std::size_t j = 0; j < H; ++j) {
                const double i = sigmoid(z[j]);
                const double f = sigmoid(z[H + j]);
                const double g = std::tanh(z[2 * H + j]);
                const double o = sigmoid(z[3 * H + j]);
                c[j] = f * c[j] + i * g;
                const double tc = std::tanh(c[j]);
                h[j] = o * tc;
                out[j] = h[j];
                if (cache) {
                    auto gates = cache->gates.step(b, t);
                    gates[j] = i;
                    gates[H + j] = f;
                    gates[2 * H + j] = g;
                    gates[3 * H + j] = o;
                    cache->cell(b, t, j) = c[j];
                    cache->cell_tanh(b, t, j) = tc;
                }
            }
        }
        std::copy(h.begin(), h.end(), r.h_final.row(b).begin());
        std::copy(c.begin(), c.end(), r.c_final.row(b).begin());
    }
    return r;
}

Tensor3 lstm_backward(const LstmLayerParams& p, const LstmCache& cache, const Tensor3& d_output,
                      LstmLayerParams& grads) {
    const std::size_t B = cache.input.batch(), T = cache.input.time(), H = p.hidden();
    if (d_output.batch() != B || d_output.time() != T || d_output.feature() != H) {
        throw ShapeError("lstm backward: gradient " + d_output.shape_string() + " does not match cache");
    }
    Tensor3 dx(B, T, cache.input.feature());
    std::vector<double> dh(H), dc(H), dz(4 * H), dh_prev(H);
    for (std::size_t b = 0; b < B; ++b) {
        std::fill(dh.begin(), dh.end(), 0.0);
        std::fill(dc.begin(), dc.end(), 0.0);
        for (std::size_t t = T; t-- > 0;) {
            if (!cache.mask.valid(b, t)) continue;
            const auto d_out = d_output.step(b, t);
            const auto gates = cache.gates.step(b, t);
            const auto c_prev = cache.c_before.step(b, t);
            const auto tc = cache.cell_tanh.step(b, t);
            for (std::size_t j = 0; j < H; ++j) {
                const double i = gates[j], f = gates[H + j], g = gates[2 * H + j], o = gates[3 * H + j];
                const double dhj = dh[j] + d_out[j];
                const double d_o = dhj * tc[j];
                const double dcj = dc[j] + dhj * o * (1.0 - tc[j] * tc[j]);
                dz[j] = dcj * g * i * (1.0 - i);
                dz[H + j] = dcj * c_prev[j] * f * (1.0 - f);
                dz[2 * H + j] = dcj * i * (1.0 - g * g);
                dz[3 * H + j] = d_o * o * (1.0 - o);
                dc[j] = dcj * f;
            }
            accumulate_outer(cache.input.step(b, t), dz, grads.w_input);
            accumulate_outer(cache.h_before.step(b, t), dz, grads.w_recurrent);
            add_into(grads.bias.values(), dz);
            accumulate_mat_vec(p.w_input, dz, dx.step(b, t));
            std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
            accumulate_mat_vec(p.w_recurrent, dz, dh_prev);
            dh.swap(dh_prev);
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// Layer normalization

Matrix layer_norm_forward(const LayerNormParams& p, const Matrix& x) {
    if (x.cols() != p.width()) throw ShapeError("layer norm width mismatch");
    Tensor3 t(1, x.rows(), x.cols());
    std::copy(x.values().begin(), x.values().end(), t.values().begin());
    const Tensor3 y = layer_norm_forward(p, t, MaskMatrix(1, x.rows(), true));
    return Matrix(x.rows(), x.cols(), std::vector<double>(y.values().begin(), y.values().end()));
}

Tensor3 layer_norm_forward(const LayerNormParams& p, const Tensor3& x, const MaskMatrix& mask,
                           LayerNormCache* cache) {
    require_mask(x, mask);
    const std::size_t D = x.feature();
    if (D != p.width() || p.bias.cols() != D) {
        throw ShapeError("layer norm width " + std::to_string(p.width()) + " does not match input " +
                         x.shape_string());
    }
    Tensor3 y(x.batch(), x.time(), D);
    if (cache) {
        cache->mask = mask;
        cache->normalized = Tensor3(x.batch(), x.time(), D);
        cache->inv_std.assign(x.batch() * x.time(), 0.0);
    }
    const auto gain = p.gain.values();
    const auto bias = p.bias.values();
    for (std::size_t b = 0; b < x.batch(); ++b)
        for (std::size_t t = 0; t < x.time(); ++t) {
            if (!mask.valid(b, t)) continue;
            const auto in = x.step(b, t);
            double mean = 0.0;
            for (double v : in) mean += v;
            mean /= static_cast<double>(D);
            double var = 0.0;
            for (double v : in) var += (v - mean) * (v - mean);
            var /= static_cast<double>(D);
            const double inv = 1.0 / std::sqrt(var + p.epsilon);
            auto out = y.step(b, t);
            for (std::size_t j = 0; j < D; ++j) {
                const double xhat = (in[j] - mean) * inv;
                out[j] = xhat * gain[j] + bias[j];
                if (cache) cache->normalized(b, t, j) = xhat;
            }
            if (cache) cache->inv_std[b * x.time() + t] = inv;
        }
    return y;
}

Tensor3 layer_norm_backward(const LayerNormParams& p, const LayerNormCache& cache, const Tensor3& d_output,
                            LayerNormParams& grads) {
    require_same_shape(cache.normalized, d_output, "layer norm backward");
    const std::size_t D = d_output.feature();
    const double inv_d = 1.0 / static_cast<double>(D);
    Tensor3 dx(d_output.batch(), d_output.time(), D);
    std::vector<double> dxhat(D);
    const auto gain = p.gain.values();
    auto g_gain = grads.gain.values();
    auto g_bias = grads.bias.values();
    for (std::size_t b = 0; b < d_output.batch(); ++b)
        for (std::size_t t = 0; t < d_output.time(); ++t) {
            if (!cache.mask.valid(b, t)) continue;
            const auto dy = d_output.step(b, t);
            const auto xhat = cache.normalized.step(b, t);
            double s1 = 0.0, s2 = 0.0;
            for (std::size_t j = 0; j < D; ++j) {
                dxhat[j] = dy[j] * gain[j];
                g_gain[j] += dy[j] * xhat[j];
                g_bias[j] += dy[j];
                s1 += dxhat[j];
                s2 += dxhat[j] * xhat[j];
            }
            const double inv = cache.inv_std[b * d_output.time() + t];
            auto out = dx.step(b, t);
            for (std::size_t j = 0; j < D; ++j) out[j] = inv * (dxhat[j] - inv_d * s1 - xhat[j] * inv_d * s2);
        }
    return dx;
}

// ---------------------------------------------------------------------------
// Dropout

std::vector<double> dropout_forward(double rate, bool training, std::mt19937_64* rng, std::span<const double> x,
                                    DropoutCache* cache) {
    if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must be in [0, 1)");
    std::vector<double> y(x.begin(), x.end());
    if (cache) cache->scale.clear();
    if (!training || rate == 0.0) return y;
    if (rng == nullptr) throw ConfigError("training-mode dropout needs a random generator");

    const double keep_scale = 1.0 / (1.0 - rate);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::vector<double> scale(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        scale[i] = uniform(*rng) < rate ? 0.0 : keep_scale;
        y[i] *= scale[i];
    }
    if (cache) cache->scale = std::move(scale);
    return y;
}

Tensor3 dropout_forward(double rate, bool training, std::mt19937_64* rng, const Tensor3& x, DropoutCache* cache) {
    Tensor3 y(x.batch(), x.time(), x.feature());
    const auto values = dropout_forward(rate, training, rng, x.values(), cache);
    std::copy(values.begin(), values.end(), y.values().begin());
    return y;
}

void dropout_backward(const DropoutCache& cache, std::span<double> grad) {
    if (cache.scale.empty()) return;
    if (cache.scale.size() != grad.size()) throw ShapeError("dropout backward: gradient size mismatch");
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= cache.scale[i];
}

// ---------------------------------------------------------------------------
// Position-wise dense

Tensor3 positionwise_dense_forward(const DenseParams& p, const Tensor3& x, const MaskMatrix& mask,
                                   DenseCache* cache) {
    require_mask(x, mask);
    if (x.feature() != p.weight.rows() || p.bias.cols() != p.weight.cols()) {
        throw ShapeError("dense layer " + p.weight.shape_string() + " does not accept input " + x.shape_string());
    }
    Tensor3 y(x.batch(), x.time(), p.weight.cols());
    for (std::size_t b = 0; b < x.batch(); ++b)
        for (std::size_t t = 0; t < x.time(); ++t) {
            if (!mask.valid(b, t)) continue;
            auto out = y.step(b, t);
            std::copy(p.bias.values().begin(), p.bias.values().end(), out.begin());
            accumulate_vec_mat(x.step(b, t), p.weight, out);
            for (double& v : out) v = activate(p.activation, v);
        }
    if (cache) {
        cache->input = x;
        cache->mask = mask;
        cache->output = y;
    }
    return y;
}

Tensor3 positionwise_dense_backward(const DenseParams& p, const DenseCache& cache, const Tensor3& d_output,
                                    DenseParams& grads) {
    require_same_shape(cache.output, d_output, "dense backward");
    Tensor3 dx(cache.input.batch(), cache.input.time(), cache.input.feature());
    std::vector<double> dpre(p.weight.cols());
    for (std::size_t b = 0; b < d_output.batch(); ++b)
        for (std::size_t t = 0; t < d_output.time(); ++t) {
            if (!cache.mask.valid(b, t)) continue;
            const auto dy = d_output.step(b, t);
            const auto y = cache.output.step(b, t);
            for (std::size_t j = 0; j < dpre.size(); ++j)
                dpre[j] = dy[j] * activation_derivative_from_output(p.activation, y[j]);
            accumulate_outer(cache.input.step(b, t), dpre, grads.weight);
            add_into(grads.bias.values(), dpre);
            accumulate_mat_vec(p.weight, dpre, dx.step(b, t));
        }
    return dx;
}

// ---------------------------------------------------------------------------
// Multi-head self-attention

namespace {

void project(const Tensor3& x, const MaskMatrix& mask, const Matrix& w, const Matrix& bias, Tensor3& out) {
    for (std::size_t b = 0; b < x.batch(); ++b)
        for (std::size_t t = 0; t < x.time(); ++t) {
            if (!mask.valid(b, t)) continue;
            auto o = out.step(b, t);
            std::copy(bias.values().begin(), bias.values().end(), o.begin());
            accumulate_vec_mat(x.step(b, t), w, o);
        }
}

void project_backward(const Tensor3& x, const MaskMatrix& mask, const Matrix& w, const Tensor3& d_proj,
                      Matrix& g_w, Matrix& g_bias, Tensor3& dx) {
    for (std::size_t b = 0; b < x.batch(); ++b)
        for (std::size_t t = 0; t < x.time(); ++t) {
            if (!mask.valid(b, t)) continue;
            const auto d = d_proj.step(b, t);
            accumulate_outer(x.step(b, t), d, g_w);
            add_into(g_bias.values(), d);
            accumulate_mat_vec(w, d, dx.step(b, t));
        }
}

}  // namespace

Tensor3 mha_forward(const MhaParams& p, const Tensor3& x, const MaskMatrix& mask, MhaCache* cache) {
    require_mask(x, mask);
    const std::size_t B = x.batch(), T = x.time(), D = x.feature();
    const std::size_t heads = p.heads, dk = p.key_dim, width = heads * dk;
    if (heads < 1 || dk < 1) throw ShapeError("attention needs at least one head of width >= 1");
    for (const Matrix* w : {&p.w_query, &p.w_key, &p.w_value}) {
        if (w->rows() != D || w->cols() != width) {
            throw ShapeError("attention projection " + w->shape_string() + " does not match input width " +
                             std::to_string(D) + " and " + std::to_string(heads) + "x" + std::to_string(dk));
        }
    }
    if (p.w_out.rows() != width || p.w_out.cols() != D || p.b_out.cols() != D) {
        throw ShapeError("attention output projection " + p.w_out.shape_string() + " does not chain");
    }

    Tensor3 q(B, T, width), k(B, T, width), v(B, T, width), ctx(B, T, width);
    project(x, mask, p.w_query, p.b_query, q);
    project(x, mask, p.w_key, p.b_key, k);
    project(x, mask, p.w_value, p.b_value, v);

    const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
    std::vector<double> weights(cache ? B * heads * T * T : 0, 0.0);
    std::vector<double> row(T);
    for (std::size_t b = 0; b < B; ++b) {
        std::vector<std::size_t> valid;
        for (std::size_t t = 0; t < T; ++t)
            if (mask.valid(b, t)) valid.push_back(t);
        const std::size_t n = valid.size();
        for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t off = h * dk;
            for (std::size_t qi = 0; qi < n; ++qi) {
                const auto qv = q.step(b, valid[qi]).subspan(off, dk);
                for (std::size_t ki = 0; ki < n; ++ki) {
                    const auto kv = k.step(b, valid[ki]).subspan(off, dk);
                    double s = 0.0;
                    for (std::size_t d = 0; d < dk; ++d) s += qv[d] * kv[d];
                    row[ki] = s * scale;
                }
                softmax_inplace(std::span<double>(row.data(), n));
                auto c = ctx.step(b, valid[qi]).subspan(off, dk);
                for (std::size_t ki = 0; ki < n; ++ki) {
                    const auto vv = v.step(b, valid[ki]).subspan(off, dk);
                    for (std::size_t d = 0; d < dk; ++d) c[d] += row[ki] * vv[d];
                    if (cache) weights[((b * heads + h) * T + valid[qi]) * T + valid[ki]] = row[ki];
                }
            }
        }
    }

    Tensor3 out(B, T, D);
    project(ctx, mask, p.w_out, p.b_out, out);
    if (cache) {
        cache->input = x;
        cache->mask = mask;
        cache->query = std::move(q);
        cache->key = std::move(k);
        cache->value = std::move(v);
        cache->context = std::move(ctx);
        cache->weights = std::move(weights);
    }
    return out;
}

Matrix attention_weights(const MhaCache& cache, std::size_t b, std::size_t h, std::size_t heads) {
    const std::size_t T = cache.input.time();
    Matrix w(T, T);
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t u = 0; u < T; ++u) w(t, u) = cache.weights[((b * heads + h) * T + t) * T + u];
    return w;
}

Tensor3 mha_backward(const MhaParams& p, const MhaCache& cache, const Tensor3& d_output, MhaParams& grads) {
    require_same_shape(cache.input, d_output, "attention backward");
    const std::size_t B = d_output.batch(), T = d_output.time();
    const std::size_t heads = p.heads, dk = p.key_dim, width = heads * dk;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

    Tensor3 d_ctx(B, T, width);
    project_backward(cache.context, cache.mask, p.w_out, d_output, grads.w_out, grads.b_out, d_ctx);

    Tensor3 dq(B, T, width), dk_t(B, T, width), dv(B, T, width);
    std::vector<double> da(T);
    for (std::size_t b = 0; b < B; ++b) {
        std::vector<std::size_t> valid;
        for (std::size_t t = 0; t < T; ++t)
            if (cache.mask.valid(b, t)) valid.push_back(t);
        const std::size_t n = valid.size();
        for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t off = h * dk;
            for (std::size_t qi = 0; qi < n; ++qi) {
                const std::size_t tq = valid[qi];
                const auto dc = d_ctx.step(b, tq).subspan(off, dk);
                const double* a = &cache.weights[((b * heads + h) * T + tq) * T];
                double dot = 0.0;
                for (std::size_t ki = 0; ki < n; ++ki) {
                    const std::size_t tk = valid[ki];
                    const auto vv = cache.value.step(b, tk).subspan(off, dk);
                    auto dvv = dv.step(b, tk).subspan(off, dk);
                    double s = 0.0;
                    for (std::size_t d = 0; d < dk; ++d) {
                        s += dc[d] * vv[d];
                        dvv[d] += a[tk] * dc[d];
                    }
                    da[ki] = s;
                    dot += a[tk] * s;
                }
                const auto qv = cache.query.step(b, tq).subspan(off, dk);
                auto dqv = dq.step(b, tq).subspan(off, dk);
                for (std::size_t ki = 0; ki < n; ++ki) {
                    const std::size_t tk = valid[ki];
                    const double ds = a[tk] * (da[ki] - dot) * scale;
                    const auto kv = cache.key.step(b, tk).subspan(off, dk);
                    auto dkv = dk_t.step(b, tk).subspan(off, dk);
                    for (std::size_t d = 0; d < dk; ++d) {
                        dqv[d] += ds * kv[d];
                        dkv[d] += ds * qv[d];
                    }
                }
            }
        }
    }

    Tensor3 dx(B, T, cache.input.feature());
    project_backward(cache.input, cache.mask, p.w_query, dq, grads.w_query, grads.b_query, dx);
    project_backward(cache.input, cache.mask, p.w_key, dk_t, grads.w_key, grads.b_key, dx);
    project_backward(cache.input, cache.mask, p.w_value, dv, grads.w_value, grads.b_value, dx);
    return dx;
}

// ---------------------------------------------------------------------------
// Encoder block

Tensor3 encoder_block_forward(const EncoderBlockParams& p, double dropout, const Tensor3& x,
                              const MaskMatrix& mask, bool training, std::mt19937_64* rng,
                              EncoderBlockCache* cache) {
    Tensor3 attn = mha_forward(p.attention, x, mask, cache ? &cache->attention : nullptr);
    attn = dropout_forward(dropout, training, rng, attn, cache ? &cache->attention_dropout : nullptr);
    add_into(attn.values(), x.values());
    const Tensor3 y1 = layer_norm_forward(p.norm1, attn, mask, cache ? &cache->norm1 : nullptr);

    Tensor3 ff = positionwise_dense_forward(p.ff_expand, y1, mask, cache ? &cache->ff_expand : nullptr);
    ff = positionwise_dense_forward(p.ff_contract, ff, mask, cache ? &cache->ff_contract : nullptr);
    ff = dropout_forward(dropout, training, rng, ff, cache ? &cache->ff_dropout : nullptr);
    add_into(ff.values(), y1.values());
    return layer_norm_forward(p.norm2, ff, mask, cache ? &cache->norm2 : nullptr);
}

Tensor3 encoder_block_backward(const EncoderBlockParams& p, const EncoderBlockCache& cache,
                               const Tensor3& d_output, EncoderBlockParams& grads) {
    const Tensor3 d_r2 = layer_norm_backward(p.norm2, cache.norm2, d_output, grads.norm2);
    Tensor3 d_ff = d_r2;
    dropout_backward(cache.ff_dropout, d_ff.values());
    d_ff = positionwise_dense_backward(p.ff_contract, cache.ff_contract, d_ff, grads.ff_contract);
    d_ff = positionwise_dense_backward(p.ff_expand, cache.ff_expand, d_ff, grads.ff_expand);
    Tensor3 d_y1 = d_r2;
    add_into(d_y1.values(), d_ff.values());

    const Tensor3 d_r1 = layer_norm_backward(p.norm1, cache.norm1, d_y1, grads.norm1);
    Tensor3 d_attn = d_r1;
    dropout_backward(cache.attention_dropout, d_attn.values());
    Tensor3 dx = mha_backward(p.attention, cache.attention, d_attn, grads.attention);
    add_into(dx.values(), d_r1.values());
    return dx;
}

}  // namespace wardseq
