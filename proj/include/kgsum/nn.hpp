#pragma once

// Neural building blocks on top of the autodiff tape: linear layers,
// multi-head attention (optionally salience-modulated), feed-forward
// sublayers, multi-head pooling, graph-transformer steps and sinusoidal
// positional encodings.

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "kgsum/autodiff.hpp"
#include "kgsum/params.hpp"
#include "kgsum/util.hpp"

namespace kgsum::nn {

using ad::Mat;
using ad::Tape;
using ad::Var;
using ad::Vec;

struct LinearP {
    Param* W = nullptr;
    Param* b = nullptr;
};

struct AttnP {
    LinearP q, k, v, o;
};

struct NormP {
    Param* gain = nullptr;
    Param* bias = nullptr;
};

struct FfnP {
    LinearP hidden, out;
};

struct EncLayerP {
    AttnP self;
    NormP norm_attn, norm_ffn;
    FfnP ffn;
};

struct PoolP {
    Param* probe = nullptr;  // [d x heads]
    Param* value = nullptr;  // [d x d]
    LinearP out;
};

struct GraphAttnP {
    Param* Wq = nullptr;  // [d x d], no biases, no output projection
    Param* Wk = nullptr;
    Param* Wv = nullptr;
};

// Copies of intermediate quantities for invariant checks; filled only when a
// collector is supplied, never used by the computation itself.
struct ForwardTrace {
    std::vector<Mat> attention;      // post-softmax (and post-renormalization) weight rows
    std::vector<Mat> gates;          // fusion gate activations
    std::vector<Mat> distributions;  // final generation distributions
};

// ---------------------------------------------------------------------------
// Parameter bundle construction (deterministic creation order).

inline LinearP make_linear(ParameterStore& ps, const std::string& name, int in, int out) {
    LinearP p;
    p.W = &ps.create(name + ".W", in, out, Init::Glorot);
    p.b = &ps.create(name + ".b", 1, out, Init::Zeros);
    return p;
}

inline AttnP make_attn(ParameterStore& ps, const std::string& name, int d) {
    AttnP p;
    p.q = make_linear(ps, name + ".q", d, d);
    p.k = make_linear(ps, name + ".k", d, d);
    p.v = make_linear(ps, name + ".v", d, d);
    p.o = make_linear(ps, name + ".o", d, d);
    return p;
}

inline NormP make_norm(ParameterStore& ps, const std::string& name, int d) {
    NormP p;
    p.gain = &ps.create(name + ".gain", 1, d, Init::Ones);
    p.bias = &ps.create(name + ".bias", 1, d, Init::Zeros);
    return p;
}

inline FfnP make_ffn(ParameterStore& ps, const std::string& name, int d, int ffn_dim) {
    FfnP p;
    p.hidden = make_linear(ps, name + ".hidden", d, ffn_dim);
    p.out = make_linear(ps, name + ".out", ffn_dim, d);
    return p;
}

inline EncLayerP make_enc_layer(ParameterStore& ps, const std::string& name, int d, int ffn_dim) {
    EncLayerP p;
    p.self = make_attn(ps, name + ".self", d);
    p.norm_attn = make_norm(ps, name + ".norm_attn", d);
    p.norm_ffn = make_norm(ps, name + ".norm_ffn", d);
    p.ffn = make_ffn(ps, name + ".ffn", d, ffn_dim);
    return p;
}

inline PoolP make_pool(ParameterStore& ps, const std::string& name, int d, int heads) {
    PoolP p;
    p.probe = &ps.create(name + ".probe", d, heads, Init::Glorot);
    p.value = &ps.create(name + ".value", d, d, Init::Glorot);
    p.out = make_linear(ps, name + ".out", d, d);
    return p;
}

inline GraphAttnP make_graph_attn(ParameterStore& ps, const std::string& name, int d) {
    GraphAttnP p;
    p.Wq = &ps.create(name + ".Wq", d, d, Init::Glorot);
    p.Wk = &ps.create(name + ".Wk", d, d, Init::Glorot);
    p.Wv = &ps.create(name + ".Wv", d, d, Init::Glorot);
    return p;
}

// ---------------------------------------------------------------------------
// Forward building blocks.

inline Var linear(Tape& t, Var x, const LinearP& p) {
    return t.add_rowvec(t.matmul(x, use(t, *p.W)), use(t, *p.b));
}

// Inverted dropout with an externally seeded RNG; identity when rate == 0 or
// no RNG is supplied (evaluation mode).
inline Var dropout(Tape& t, Var x, double rate, Rng* rng) {
    if (rate <= 0.0 || rng == nullptr) return x;
    Mat mask(t.rows(x), t.cols(x));
    const double keep = 1.0 - rate;
    for (Eigen::Index i = 0; i < mask.rows(); ++i)
        for (Eigen::Index j = 0; j < mask.cols(); ++j)
            mask(i, j) = (rng->uniform() < keep) ? 1.0 / keep : 0.0;
    return t.hadamard(x, t.constant(std::move(mask)));
}

struct MhaOut {
    Var out;          // [m_q x d]
    Var avg_weights;  // head-average of the applied attention, when requested
};

// Scaled dot-product multi-head attention. When `salience` is given, each
// head's post-softmax weights are multiplied per key by the salience vector
// and renormalized to sum one, so S == 1 reproduces plain attention.
inline MhaOut multi_head_attention(Tape& t, Var query_in, Var kv_in, int heads, const AttnP& p,
                                   const Mat* add_mask = nullptr, const Vec* salience = nullptr,
                                   ForwardTrace* trace = nullptr, bool want_avg_weights = false) {
    const int d = t.cols(query_in);
    const int dh = d / heads;
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

    Var Q = linear(t, query_in, p.q);
    Var K = linear(t, kv_in, p.k);
    Var V = linear(t, kv_in, p.v);

    std::vector<Var> ctx_heads;
    Var weight_sum{};
    for (int h = 0; h < heads; ++h) {
        Var Qh = t.slice_cols(Q, h * dh, dh);
        Var Kh = t.slice_cols(K, h * dh, dh);
        Var Vh = t.slice_cols(V, h * dh, dh);
        Var logits = t.scale(t.matmul(Qh, t.transpose(Kh)), inv_sqrt_dh);
        Var A = t.softmax_rows(logits, add_mask);
        if (trace) trace->attention.push_back(t.val(A));
        if (salience) {
            A = t.normalize_rows(t.col_scale(A, *salience));
            if (trace) trace->attention.push_back(t.val(A));
        }
        ctx_heads.push_back(t.matmul(A, Vh));
        if (want_avg_weights) weight_sum = weight_sum.valid() ? t.add(weight_sum, A) : A;
    }
    MhaOut out;
    out.out = linear(t, t.concat_cols(ctx_heads), p.o);
    if (want_avg_weights) out.avg_weights = t.scale(weight_sum, 1.0 / static_cast<double>(heads));
    return out;
}

inline Var feed_forward(Tape& t, Var x, const FfnP& p) {
    return linear(t, t.relu(linear(t, x, p.hidden)), p.out);
}

// One post-norm transformer encoder layer:
//   h' = LayerNorm(x + MHAtt(x)); out = LayerNorm(h' + FFN(h'))
inline Var encoder_layer(Tape& t, Var x, int heads, const EncLayerP& p, const Mat* attn_mask,
                         double dropout_rate, Rng* drop_rng, ForwardTrace* trace = nullptr) {
    MhaOut att = multi_head_attention(t, x, x, heads, p.self, attn_mask, nullptr, trace, false);
    Var a = dropout(t, att.out, dropout_rate, drop_rng);
    Var h = t.layer_norm(t.add(x, a), use(t, *p.norm_attn.gain), use(t, *p.norm_attn.bias));
    Var f = dropout(t, feed_forward(t, h, p.ffn), dropout_rate, drop_rng);
    return t.layer_norm(t.add(h, f), use(t, *p.norm_ffn.gain), use(t, *p.norm_ffn.bias));
}

// Attention-weighted pooling of token rows into one unit vector. Per head, a
// learned probe scores every token, softmax gives the weight distribution,
// and the weighted value projections are concatenated and mixed.
inline Var multi_head_pool(Tape& t, Var x, int heads, const PoolP& p, const Mat* add_mask = nullptr,
                           ForwardTrace* trace = nullptr) {
    if (t.rows(x) < 1) throw DataError("multi_head_pool: empty unit");
    const int d = t.cols(x);
    const int dh = d / heads;
    Var scores = t.matmul(x, use(t, *p.probe));  // [m x heads]
    Var values = t.matmul(x, use(t, *p.value));  // [m x d]
    std::vector<Var> pooled;
    for (int h = 0; h < heads; ++h) {
        Var s = t.transpose(t.slice_cols(scores, h, 1));  // [1 x m]
        Var w = t.softmax_rows(s, add_mask);
        if (trace) trace->attention.push_back(t.val(w));
        pooled.push_back(t.matmul(w, t.slice_cols(values, h * dh, dh)));
    }
    return linear(t, t.concat_cols(pooled), p.out);
}

// One graph-transformer step: each vertex attends over its in-neighborhood
// (mask) and adds the concatenated head contexts to its representation.
// Plain dot-product logits, no scaling, no biases, no output projection.
inline Var graph_attention_step(Tape& t, Var nodes, int heads, const GraphAttnP& p, const Mat& mask,
                                ForwardTrace* trace = nullptr) {
    const int d = t.cols(nodes);
    const int dh = d / heads;
    Var Q = t.matmul(nodes, use(t, *p.Wq));
    Var K = t.matmul(nodes, use(t, *p.Wk));
    Var V = t.matmul(nodes, use(t, *p.Wv));
    std::vector<Var> ctx;
    for (int h = 0; h < heads; ++h) {
        Var logits = t.matmul(t.slice_cols(Q, h * dh, dh), t.transpose(t.slice_cols(K, h * dh, dh)));
        Var A = t.softmax_rows(logits, &mask);
        if (trace) trace->attention.push_back(t.val(A));
        ctx.push_back(t.matmul(A, t.slice_cols(V, h * dh, dh)));
    }
    return t.add(nodes, t.concat_cols(ctx));
}

// ---------------------------------------------------------------------------
// Masks and positional encodings (constants).

inline double neg_inf() { return -std::numeric_limits<double>::infinity(); }

inline Mat causal_mask(int n) {
    Mat m = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) m(i, j) = neg_inf();
    return m;
}

// mask(i, j) = 0 where j is an in-neighbor of i, -inf elsewhere.
inline Mat neighborhood_mask(const std::vector<std::vector<int>>& in_neighbors) {
    const int n = static_cast<int>(in_neighbors.size());
    Mat m = Mat::Constant(n, n, neg_inf());
    for (int i = 0; i < n; ++i)
        for (int j : in_neighbors[static_cast<std::size_t>(i)]) m(i, j) = 0.0;
    return m;
}

// Transformer sinusoid of dimension `dim` at position `pos` (row vector):
// pair m occupies slots 2m (sin) and 2m+1 (cos) with angular frequency
// 10000^(-2m/dim).
inline Mat sinusoid_position(int pos, int dim) {
    Mat out(1, dim);
    for (int k = 0; k < dim; k += 2) {
        const double angle = pos * std::pow(10000.0, -static_cast<double>(k) / dim);
        out(0, k) = std::sin(angle);
        if (k + 1 < dim) out(0, k + 1) = std::cos(angle);
    }
    return out;
}

// Dual positional encoding: concat of half-width sinusoids at the sentence
// index and the word index.
inline Mat dual_position(int sentence_idx, int word_idx, int d_model) {
    const int half = d_model / 2;
    Mat out(1, d_model);
    out.leftCols(half) = sinusoid_position(sentence_idx, half);
    out.rightCols(d_model - half) = sinusoid_position(word_idx, d_model - half);
    return out;
}

inline Mat dual_position_rows(int sentence_idx, int len, int d_model) {
    Mat out(len, d_model);
    for (int j = 0; j < len; ++j) out.row(j) = dual_position(sentence_idx, j, d_model);
    return out;
}

inline Mat sequence_position_rows(int len, int d_model) {
    Mat out(len, d_model);
    for (int j = 0; j < len; ++j) out.row(j) = sinusoid_position(j, d_model);
    return out;
}

}  // namespace kgsum::nn
