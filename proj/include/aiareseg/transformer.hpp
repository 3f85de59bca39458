#pragma once

#include <deque>
#include <map>
#include <string>
#include <vector>

#include "aiareseg/attention.hpp"

namespace aia {

template <typename T>
struct Linear {
    Tensor<T> w;  // [in, out]
    Tensor<T> b;  // [out]

    static Linear init(size_t in, size_t out, Rng& rng) {
        Linear l;
        l.w = Tensor<T>::randn({in, out}, rng, static_cast<T>(1.0 / std::sqrt(double(in))), true);
        l.b = Tensor<T>::zeros({out}, true);
        return l;
    }

    Tensor<T> apply(const Tensor<T>& x) const { return add_rows(matmul(x, w), b); }

    void collect(const std::string& prefix, std::map<std::string, Tensor<T>>& out) const {
        out.emplace(prefix + "/w", w);
        out.emplace(prefix + "/b", b);
    }
};

template <typename T>
struct NormParams {
    Tensor<T> gamma, beta;

    static NormParams init(size_t n) {
        NormParams p;
        p.gamma = Tensor<T>::filled({n}, T(1), true);
        p.beta = Tensor<T>::zeros({n}, true);
        return p;
    }

    void collect(const std::string& prefix, std::map<std::string, Tensor<T>>& out) const {
        out.emplace(prefix + "/gamma", gamma);
        out.emplace(prefix + "/beta", beta);
    }
};

// AiA attention + feed-forward block with residuals and layer norm. Serves
// both as the self-attention encoder (q = kv) and as a cross-attention block.
template <typename T>
struct AiaBlock {
    AttentionWeights<T> attn;
    InnerAttentionWeights<T> inner;
    Linear<T> ff1, ff2;
    NormParams<T> norm1, norm2;

    static AiaBlock init(size_t C, size_t heads, size_t D, Rng& rng, size_t ff_width = 0,
                         size_t inner_width = 64) {
        if (ff_width == 0) ff_width = 2 * C;
        AiaBlock b;
        b.attn = AttentionWeights<T>::init(C, heads, rng);
        b.inner = InnerAttentionWeights<T>::init(D, rng, inner_width);
        b.ff1 = Linear<T>::init(C, ff_width, rng);
        b.ff2 = Linear<T>::init(ff_width, C, rng);
        b.norm1 = NormParams<T>::init(C);
        b.norm2 = NormParams<T>::init(C);
        return b;
    }

    // q_tokens attend over kv_tokens; positional encodings are added to the
    // query/key paths only, values stay positional-free
    Tensor<T> apply(const Tensor<T>& q_tokens, const Tensor<T>& q_pos, const Tensor<T>& kv_tokens,
                    const Tensor<T>& kv_pos) const {
        auto q = add(q_tokens, q_pos);
        auto k = add(kv_tokens, kv_pos);
        auto attn_out = aia_attention(q, k, kv_tokens, attn, inner).output;
        auto x = layer_norm(add(q_tokens, attn_out), size_t(1), norm1.gamma, norm1.beta);
        auto f = ff2.apply(relu(ff1.apply(x)));
        return layer_norm(add(x, f), size_t(1), norm2.gamma, norm2.beta);
    }

    Tensor<T> apply_self(const Tensor<T>& tokens, const Tensor<T>& pos) const {
        return apply(tokens, pos, tokens, pos);
    }

    void collect(const std::string& prefix, std::map<std::string, Tensor<T>>& out) const {
        attn.collect(prefix, out);
        inner.collect(prefix + "/inner", out);
        ff1.collect(prefix + "/ff1", out);
        ff2.collect(prefix + "/ff2", out);
        norm1.collect(prefix + "/norm1", out);
        norm2.collect(prefix + "/norm2", out);
    }
};

// Bounded store of high-quality past reference tokens, admitted by Dice score
// and evicted oldest-first.
template <typename T>
struct ReferenceMemory {
    struct Entry {
        Tensor<T> tokens;  // encoded reference tokens [N, C]
        Tensor<T> mask;    // the predicted mask that earned admission
        double dice = 0;
    };

    size_t capacity = 3;
    double threshold = 0.7;
    std::deque<Entry> entries;

    // returns true when the example was admitted
    bool update(const Tensor<T>& tokens, const Tensor<T>& mask, double dice) {
        if (dice < 0.0 || dice > 1.0)
            throw contract_error("reference memory: dice must be in [0,1]");
        if (dice < threshold) return false;
        if (entries.size() == capacity) entries.pop_front();
        entries.push_back({tokens.detach_copy(), mask.detach_copy(), dice});
        return true;
    }

    size_t size() const { return entries.size(); }
};

// Three-branch transformer: shared self-attention encoder, long-term (initial
// frame + admitted memory) and short-term (intermediate frame) cross
// attention, fused by channel concatenation and a learned projection.
template <typename T>
struct AiaTransformer {
    AiaBlock<T> encoder;
    AiaBlock<T> lt;
    AiaBlock<T> st;
    Linear<T> fuse;  // [2C -> C]

    static AiaTransformer init(size_t C, size_t heads, size_t tokens, Rng& rng,
                               size_t inner_width = 64) {
        AiaTransformer t;
        t.encoder = AiaBlock<T>::init(C, heads, tokens, rng, 0, inner_width);
        t.lt = AiaBlock<T>::init(C, heads, tokens, rng, 0, inner_width);
        t.st = AiaBlock<T>::init(C, heads, tokens, rng, 0, inner_width);
        t.fuse = Linear<T>::init(2 * C, C, rng);
        return t;
    }

    Tensor<T> encode(const Tensor<T>& tokens, const Tensor<T>& pos) const {
        return encoder.apply_self(tokens, pos);
    }

    // search tokens cross-attend to the references; memory tokens extend the
    // long-term keys/values
    Tensor<T> cross(const Tensor<T>& search, const Tensor<T>& initial, const Tensor<T>& inter,
                    const Tensor<T>& pos, const ReferenceMemory<T>& memory) const {
        if (initial.size() == 0) throw contract_error("cross attention: empty reference set");
        std::vector<Tensor<T>> lt_tokens{initial};
        std::vector<Tensor<T>> lt_pos{pos};
        for (const auto& e : memory.entries) {
            lt_tokens.push_back(e.tokens);
            lt_pos.push_back(pos);
        }
        auto lt_kv = lt_tokens.size() == 1 ? lt_tokens[0] : concat(lt_tokens, 0);
        auto lt_p = lt_pos.size() == 1 ? lt_pos[0] : concat(lt_pos, 0);
        auto lt_out = lt.apply(search, pos, lt_kv, lt_p);
        auto st_out = st.apply(search, pos, inter, pos);
        return fuse.apply(concat<T>({lt_out, st_out}, 1));
    }

    void collect(const std::string& prefix, std::map<std::string, Tensor<T>>& out) const {
        encoder.collect(prefix + "/encoder", out);
        lt.collect(prefix + "/lt", out);
        st.collect(prefix + "/st", out);
        fuse.collect(prefix + "/fuse", out);
    }
};

} // namespace aia
