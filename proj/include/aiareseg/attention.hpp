#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "aiareseg/tensor.hpp"

namespace aia {

// Multi-head projection weights, stored per head: wq/wk/wv are [C, C/h]
// column blocks, wo is the matching [C/h, C] output block. Summing the
// per-head output projections equals concatenating heads and applying one
// [C,C] output matrix.
template <typename T>
struct AttentionWeights {
    std::vector<Tensor<T>> wq, wk, wv;  // each [C, Ch]
    std::vector<Tensor<T>> wo;          // each [Ch, C]

    static AttentionWeights init(size_t C, size_t heads, Rng& rng) {
        if (heads == 0 || C % heads != 0)
            throw contract_error("attention: heads must divide channel width C");
        size_t Ch = C / heads;
        T s = static_cast<T>(1.0 / std::sqrt(static_cast<double>(C)));
        AttentionWeights w;
        for (size_t h = 0; h < heads; ++h) {
            w.wq.push_back(Tensor<T>::randn({C, Ch}, rng, s, true));
            w.wk.push_back(Tensor<T>::randn({C, Ch}, rng, s, true));
            w.wv.push_back(Tensor<T>::randn({C, Ch}, rng, s, true));
            w.wo.push_back(Tensor<T>::randn({Ch, C}, rng, s, true));
        }
        return w;
    }

    size_t heads() const { return wq.size(); }
    size_t channels() const { return wq.at(0).shape()[0]; }
    size_t head_width() const { return wq.at(0).shape()[1]; }

    void collect(const std::string& prefix, std::map<std::string, Tensor<T>>& out) const {
        for (size_t h = 0; h < heads(); ++h) {
            std::string hp = prefix + "/head" + std::to_string(h);
            out.emplace(hp + "/wq", wq[h]);
            out.emplace(hp + "/wk", wk[h]);
            out.emplace(hp + "/wv", wv[h]);
            out.emplace(hp + "/wo", wo[h]);
        }
    }
};

// Inner attention weights over attention-map columns. D is the map height
// (query token count); queries and keys project to a width of 64.
template <typename T>
struct InnerAttentionWeights {
    Tensor<T> wq, wk;  // [D, inner_width]
    Tensor<T> wv, wo;  // [D, D]
    size_t inner_width = 64;

    static InnerAttentionWeights init(size_t D, Rng& rng, size_t inner_width = 64) {
        T s = static_cast<T>(1.0 / std::sqrt(static_cast<double>(D)));
        InnerAttentionWeights w;
        w.inner_width = inner_width;
        w.wq = Tensor<T>::randn({D, inner_width}, rng, s, true);
        w.wk = Tensor<T>::randn({D, inner_width}, rng, s, true);
        w.wv = Tensor<T>::randn({D, D}, rng, s, true);
        // zero output projection makes the inner module start as a pure
        // identity residual on the mixed values
        w.wo = Tensor<T>::zeros({D, D}, true);
        return w;
    }

    size_t height() const { return wq.shape()[0]; }

    void collect(const std::string& prefix, std::map<std::string, Tensor<T>>& out) const {
        out.emplace(prefix + "/wq", wq);
        out.emplace(prefix + "/wk", wk);
        out.emplace(prefix + "/wv", wv);
        out.emplace(prefix + "/wo", wo);
    }
};

template <typename T>
struct AttentionResult {
    Tensor<T> output;               // [N_q, C]
    std::vector<Tensor<T>> maps;    // per-head pre-softmax score matrices [N_q, N_k]
};

namespace detail_attn {

template <typename T>
void check_qkv(const Tensor<T>& Q, const Tensor<T>& K, const Tensor<T>& V,
               const AttentionWeights<T>& w) {
    size_t C = w.channels();
    if (Q.rank() != 2 || K.rank() != 2 || V.rank() != 2)
        throw shape_error("attention: Q,K,V must be token matrices [N,C]");
    if (Q.shape()[1] != C || K.shape()[1] != C || V.shape()[1] != C)
        throw shape_error("attention: channel width mismatch, weights expect C=" +
                          std::to_string(C));
    if (K.shape()[0] != V.shape()[0])
        throw shape_error("attention: key/value token counts differ");
}

} // namespace detail_attn

// Pre-softmax per-head score matrices M_h = Qbar_h Kbar_h^T / sqrt(C_head).
template <typename T>
std::vector<Tensor<T>> attention_maps(const Tensor<T>& Q, const Tensor<T>& K,
                                      const AttentionWeights<T>& w) {
    T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(w.head_width())));
    std::vector<Tensor<T>> maps;
    for (size_t h = 0; h < w.heads(); ++h) {
        auto Qh = matmul(Q, w.wq[h]);
        auto Kh = matmul(K, w.wk[h]);
        maps.push_back(scale(matmul(Qh, transpose2d(Kh)), inv_sqrt));
    }
    return maps;
}

namespace detail_attn {

// Shared tail: softmax over given per-head score matrices, value mixing,
// and the per-head output projections summed into [N_q, C].
template <typename T>
Tensor<T> mix_values(const std::vector<Tensor<T>>& scores, const Tensor<T>& V,
                     const AttentionWeights<T>& w) {
    Tensor<T> out;
    for (size_t h = 0; h < scores.size(); ++h) {
        auto A = softmax(scores[h], 1);
        auto head = matmul(matmul(A, matmul(V, w.wv[h])), w.wo[h]);
        out = h == 0 ? head : add(out, head);
    }
    return out;
}

} // namespace detail_attn

// Plain scaled dot-product attention, returning the per-head maps for reuse.
template <typename T>
AttentionResult<T> dot_product_attention(const Tensor<T>& Q, const Tensor<T>& K,
                                         const Tensor<T>& V, const AttentionWeights<T>& w) {
    detail_attn::check_qkv(Q, K, V, w);
    AttentionResult<T> r;
    r.maps = attention_maps(Q, K, w);
    r.output = detail_attn::mix_values(r.maps, V, w);
    return r;
}

// Attention over the columns of an attention map M. Columns are tokens of
// dimension D = height(M); output is shaped like M. The output projection is
// applied as the multiplicative factor (1 + W'_o), i.e. Y W'_o + Y.
template <typename T>
Tensor<T> inner_attention(const Tensor<T>& M, const InnerAttentionWeights<T>& w) {
    if (M.rank() != 2) throw shape_error("inner_attention: M must be [N_q, N_k]");
    size_t D = M.shape()[0];
    if (D != w.height())
        throw contract_error("inner_attention: weights built for D=" +
                             std::to_string(w.height()) + ", map height is " + std::to_string(D));
    auto X = transpose2d(M);  // [N_k, D], one row per column-token
    auto Qb = matmul(X, w.wq);
    auto Kb = matmul(X, w.wk);
    auto Vb = matmul(X, w.wv);
    T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(D)));
    auto A = softmax(scale(matmul(Qb, transpose2d(Kb)), inv_sqrt), 1);
    auto Y = matmul(A, Vb);              // [N_k, D]
    auto out = add(matmul(Y, w.wo), Y);  // (1 + W'_o)
    return transpose2d(out);             // back to [N_q, N_k]
}

// Full AiA head: softmax(M + InnerAttn(M)) mixes the values.
template <typename T>
AttentionResult<T> aia_attention(const Tensor<T>& Q, const Tensor<T>& K, const Tensor<T>& V,
                                 const AttentionWeights<T>& w,
                                 const InnerAttentionWeights<T>& inner) {
    detail_attn::check_qkv(Q, K, V, w);
    AttentionResult<T> r;
    r.maps = attention_maps(Q, K, w);
    std::vector<Tensor<T>> corrected;
    for (const auto& M : r.maps) corrected.push_back(add(M, inner_attention(M, inner)));
    r.output = detail_attn::mix_values(corrected, V, w);
    return r;
}

// Fixed 2D sinusoidal positional encodings for an h x w token grid, [h*w, C].
template <typename T>
Tensor<T> sinusoidal_positions(size_t h, size_t w, size_t C) {
    if (C % 4 != 0) throw contract_error("positional encoding needs C divisible by 4");
    size_t quarter = C / 4;
    std::vector<T> data(h * w * C, T(0));
    for (size_t y = 0; y < h; ++y)
        for (size_t x = 0; x < w; ++x) {
            size_t tok = y * w + x;
            for (size_t i = 0; i < quarter; ++i) {
                double freq = std::pow(10000.0, -2.0 * static_cast<double>(i) /
                                                    static_cast<double>(C / 2));
                data[tok * C + i] = static_cast<T>(std::sin(y * freq));
                data[tok * C + quarter + i] = static_cast<T>(std::cos(y * freq));
                data[tok * C + 2 * quarter + i] = static_cast<T>(std::sin(x * freq));
                data[tok * C + 3 * quarter + i] = static_cast<T>(std::cos(x * freq));
            }
        }
    return Tensor<T>::from_data({h * w, C}, std::move(data));
}

} // namespace aia
