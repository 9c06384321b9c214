#pragma once

// Transformer building blocks: scaled dot-product attention, multi-head
// self-attention, the GELU MLP, pre-norm residual blocks, learned positional
// tables, and single-query attention pooling.

#include <cmath>
#include <string>
#include <vector>

#include "bicnet/errors.hpp"
#include "bicnet/ops.hpp"
#include "bicnet/params.hpp"
#include "bicnet/trace.hpp"

namespace bicnet {

struct BlockConfig {
    std::size_t model_dim = 64;  // d
    std::size_t heads = 4;       // M
    std::size_t mlp_hidden = 0;  // d_m; 0 means 4*d
    std::size_t layers = 2;      // L

    std::size_t head_dim() const { return model_dim / heads; } // d_k == d_v
    std::size_t mlp_dim() const { return mlp_hidden ? mlp_hidden : 4 * model_dim; }

    void validate() const {
        if (model_dim == 0 || heads == 0 || layers == 0)
            throw ConfigError("block config: model_dim, heads and layers must be positive");
        if (model_dim % heads != 0)
            throw ConfigError("block config: model_dim " + std::to_string(model_dim) +
                              " not divisible by heads " + std::to_string(heads));
    }
};

// Weights of a single block. Per-head projections are kept as separate
// d x d_k / d x d_v matrices.
template <typename S>
struct BlockWeights {
    std::vector<Tensor<S>> wq, wk, wv;
    Tensor<S> wo;
    Tensor<S> w1, b1, w2, b2;
    Tensor<S> ln1_gamma, ln1_beta, ln2_gamma, ln2_beta;

    static BlockWeights create(const BlockConfig& cfg, const std::string& prefix,
                               ParameterStore<S>& store, Rng& rng) {
        cfg.validate();
        const std::size_t d = cfg.model_dim, dk = cfg.head_dim(), dm = cfg.mlp_dim();
        BlockWeights w;
        for (std::size_t h = 0; h < cfg.heads; ++h) {
            const std::string hs = std::to_string(h);
            w.wq.push_back(store.add(prefix + ".attn.wq." + hs, init::linear_weight<S>(d, dk, rng)));
            w.wk.push_back(store.add(prefix + ".attn.wk." + hs, init::linear_weight<S>(d, dk, rng)));
            w.wv.push_back(store.add(prefix + ".attn.wv." + hs, init::linear_weight<S>(d, dk, rng)));
        }
        w.wo = store.add(prefix + ".attn.wo", init::linear_weight<S>(cfg.heads * dk, d, rng));
        w.w1 = store.add(prefix + ".mlp.w1", init::linear_weight<S>(d, dm, rng));
        w.b1 = store.add(prefix + ".mlp.b1", init::zeros_vec<S>(dm));
        w.w2 = store.add(prefix + ".mlp.w2", init::linear_weight<S>(dm, d, rng));
        w.b2 = store.add(prefix + ".mlp.b2", init::zeros_vec<S>(d));
        w.ln1_gamma = store.add(prefix + ".ln1.gamma", init::ones_vec<S>(d));
        w.ln1_beta = store.add(prefix + ".ln1.beta", init::zeros_vec<S>(d));
        w.ln2_gamma = store.add(prefix + ".ln2.gamma", init::ones_vec<S>(d));
        w.ln2_beta = store.add(prefix + ".ln2.beta", init::zeros_vec<S>(d));
        return w;
    }
};

// softmax(Q K^T / sqrt(d_k)) V. The row-stochastic weight matrix is recorded
// into the trace when a sink is attached.
template <typename S>
Tensor<S> attention(const Tensor<S>& q, const Tensor<S>& k, const Tensor<S>& v,
                    const TraceCtx& trace = {}) {
    opdetail::require_rank(q, 2, "attention Q");
    opdetail::require_rank(k, 2, "attention K");
    opdetail::require_rank(v, 2, "attention V");
    if (q.cols() != k.cols())
        throw DimensionError("attention: Q and K key dims differ: " + shape_str(q.shape()) +
                             " vs " + shape_str(k.shape()));
    if (k.rows() != v.rows())
        throw DimensionError("attention: K and V row counts differ");
    const S inv_sqrt_dk = S(1) / std::sqrt(S(q.cols()));
    auto logits = scale(matmul_nt(q, k), inv_sqrt_dk);
    auto weights = softmax(logits, std::size_t(1));
    trace.record("weights", weights);
    return matmul(weights, v);
}

// Concat over heads of attention(X Wq_i, X Wk_i, X Wv_i), then Wo.
template <typename S>
Tensor<S> multi_head_attention(const Tensor<S>& x, const BlockWeights<S>& w,
                               const TraceCtx& trace = {}) {
    if (w.wq.empty()) throw ConfigError("multi_head_attention: no heads");
    const std::size_t d = x.cols();
    for (const auto& m : {&w.wq, &w.wk, &w.wv})
        for (const auto& t : *m)
            if (t.rows() != d)
                throw ConfigError("multi_head_attention: head projection " +
                                  shape_str(t.shape()) + " does not accept input " +
                                  shape_str(x.shape()));
    if (w.wo.rows() != w.wq.size() * w.wv[0].cols())
        throw ConfigError("multi_head_attention: output projection shape " +
                          shape_str(w.wo.shape()) + " inconsistent with heads");
    std::vector<Tensor<S>> heads;
    heads.reserve(w.wq.size());
    for (std::size_t h = 0; h < w.wq.size(); ++h) {
        auto ctx = trace.sub("h" + std::to_string(h));
        heads.push_back(
            attention(matmul(x, w.wq[h]), matmul(x, w.wk[h]), matmul(x, w.wv[h]), ctx));
    }
    return matmul(concat_cols(heads), w.wo);
}

// GELU(X W1 + b1) W2 + b2, row-wise.
template <typename S>
Tensor<S> mlp(const Tensor<S>& x, const BlockWeights<S>& w) {
    return add_bias(matmul(gelu(add_bias(matmul(x, w.w1), w.b1)), w.w2), w.b2);
}

// Pre-norm residual block: X' = X + MSA(LN(X)); X'' = X' + MLP(LN(X')).
template <typename S>
Tensor<S> t_block(const Tensor<S>& x, const BlockWeights<S>& w, const TraceCtx& trace = {}) {
    auto h = add(x, multi_head_attention(layer_norm(x, w.ln1_gamma, w.ln1_beta), w, trace));
    return add(h, mlp(layer_norm(h, w.ln2_gamma, w.ln2_beta), w));
}

// Single-learned-query attention pooling. Scores use a layer-normed view of
// the rows; the pooled output mixes the raw rows.
template <typename S>
struct AggregatorWeights {
    Tensor<S> query; // 1 x d
    Tensor<S> ln_gamma, ln_beta;

    static AggregatorWeights create(std::size_t d, const std::string& prefix,
                                    ParameterStore<S>& store, Rng& rng) {
        AggregatorWeights w;
        w.query = store.add(prefix + ".query", init::query_row<S>(d, rng));
        w.ln_gamma = store.add(prefix + ".ln.gamma", init::ones_vec<S>(d));
        w.ln_beta = store.add(prefix + ".ln.beta", init::zeros_vec<S>(d));
        return w;
    }
};

template <typename S>
Tensor<S> aggregate(const Tensor<S>& x, const AggregatorWeights<S>& w,
                    const TraceCtx& trace = {}) {
    opdetail::require_rank(x, 2, "aggregate input");
    const std::size_t d = x.cols();
    if (w.query.cols() != d)
        throw DimensionError("aggregate: query dim " + shape_str(w.query.shape()) +
                             " vs rows of dim " + std::to_string(d));
    auto normed = layer_norm(x, w.ln_gamma, w.ln_beta);
    auto scores = scale(matmul_nt(normed, w.query), S(1) / std::sqrt(S(d))); // n x 1
    auto alpha = softmax(scores, std::size_t(0));
    trace.record("alpha", alpha);
    return matmul_tn(alpha, x); // 1 x d
}

// Learned per-position rows added to the first n rows of a sequence.
template <typename S>
struct PositionalTable {
    Tensor<S> table; // max_len x d
    bool enabled = false;

    std::size_t max_len() const { return table.defined() ? table.rows() : 0; }

    static PositionalTable create(std::size_t max_len, std::size_t d, const std::string& prefix,
                                  ParameterStore<S>& store, Rng& rng, bool enabled) {
        PositionalTable p;
        p.enabled = enabled;
        if (enabled) p.table = store.add(prefix + ".table", init::positional_table<S>(max_len, d, rng));
        return p;
    }
};

template <typename S>
Tensor<S> positional_add(const Tensor<S>& x, const PositionalTable<S>& p) {
    if (!p.enabled) return x;
    opdetail::require_rank(x, 2, "positional_add input");
    const std::size_t n = x.rows();
    if (n > p.max_len())
        throw CapacityError("positional table holds " + std::to_string(p.max_len()) +
                            " rows, sequence has " + std::to_string(n));
    return add(x, slice_rows(p.table, 0, n));
}

} // namespace bicnet
