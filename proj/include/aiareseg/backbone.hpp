#pragma once

#include <map>
#include <string>
#include <vector>

#include "aiareseg/conv.hpp"
#include "aiareseg/transformer.hpp"

namespace aia {

// 4-stage stride-2 convolutional feature extractor. Total downsampling 16,
// so 320 -> 20 at full scale and 64 -> 4 at desk scale.
struct BackboneConfig {
    std::vector<size_t> widths{8, 16, 32, 64};  // per-stage channels
    size_t in_channels = 1;

    void validate() const {
        if (widths.size() != 4) throw contract_error("backbone: exactly 4 stages expected");
    }
};

template <typename T>
struct ConvLayer {
    Tensor<T> w;  // [Co,Ci,k,k]
    Tensor<T> b;  // [Co]
    NormParams<T> norm;
    size_t stride = 1;

    static ConvLayer init(size_t ci, size_t co, size_t k, size_t stride, Rng& rng) {
        ConvLayer l;
        T s = static_cast<T>(std::sqrt(2.0 / static_cast<double>(ci * k * k)));
        l.w = Tensor<T>::randn({co, ci, k, k}, rng, s, true);
        l.b = Tensor<T>::zeros({co}, true);
        l.norm = NormParams<T>::init(co);
        l.stride = stride;
        return l;
    }

    Tensor<T> apply(const Tensor<T>& x) const {
        auto y = add_chan(conv2d(x, w, stride, w.shape()[2] / 2), b);
        return relu(layer_norm(y, size_t(0), norm.gamma, norm.beta));
    }

    void collect(const std::string& prefix, std::map<std::string, Tensor<T>>& out) const {
        out.emplace(prefix + "/w", w);
        out.emplace(prefix + "/b", b);
        norm.collect(prefix + "/norm", out);
    }
};

template <typename T>
using FeaturePyramid = std::vector<Tensor<T>>;  // levels L1..L4, [C_l, H/2^l, W/2^l]

template <typename T>
struct Backbone {
    BackboneConfig config;
    std::vector<ConvLayer<T>> down;    // stride-2 conv per stage
    std::vector<ConvLayer<T>> refine;  // stride-1 conv per stage

    static Backbone init(const BackboneConfig& cfg, Rng& rng) {
        cfg.validate();
        Backbone b;
        b.config = cfg;
        size_t ci = cfg.in_channels;
        for (size_t s = 0; s < cfg.widths.size(); ++s) {
            size_t co = cfg.widths[s];
            b.down.push_back(ConvLayer<T>::init(ci, co, 3, 2, rng));
            b.refine.push_back(ConvLayer<T>::init(co, co, 3, 1, rng));
            ci = co;
        }
        return b;
    }

    FeaturePyramid<T> extract_features(const Tensor<T>& image) const {
        if (image.rank() != 3 || image.shape()[0] != config.in_channels)
            throw shape_error("backbone: expected [" + std::to_string(config.in_channels) +
                              ",H,W] input, got " + shape_str(image.shape()));
        if (image.shape()[1] % 16 != 0 || image.shape()[2] % 16 != 0)
            throw shape_error("backbone: input extents must be divisible by 16, got " +
                              shape_str(image.shape()));
        FeaturePyramid<T> pyramid;
        Tensor<T> x = image;
        for (size_t s = 0; s < down.size(); ++s) {
            x = refine[s].apply(down[s].apply(x));
            pyramid.push_back(x);
        }
        return pyramid;
    }

    void collect(const std::string& prefix, std::map<std::string, Tensor<T>>& out) const {
        for (size_t s = 0; s < down.size(); ++s) {
            std::string sp = prefix + "/stage" + std::to_string(s + 1);
            down[s].collect(sp + "/down", out);
            refine[s].collect(sp + "/refine", out);
        }
    }
};

// Per-level 1x1 convolutions matching backbone widths to the decoder's
// expected input widths at each skip level.
template <typename T>
struct ChannelReducer {
    std::vector<Tensor<T>> w;  // per level, [C_dec, C_l, 1, 1]
    std::vector<Tensor<T>> b;  // per level, [C_dec]

    static ChannelReducer init(const std::vector<size_t>& backbone_widths,
                               const std::vector<size_t>& decoder_widths, Rng& rng) {
        if (backbone_widths.size() != decoder_widths.size())
            throw contract_error("channel reducer: level count mismatch");
        ChannelReducer r;
        for (size_t l = 0; l < backbone_widths.size(); ++l) {
            T s = static_cast<T>(1.0 / std::sqrt(static_cast<double>(backbone_widths[l])));
            r.w.push_back(Tensor<T>::randn({decoder_widths[l], backbone_widths[l], 1, 1}, rng, s, true));
            r.b.push_back(Tensor<T>::zeros({decoder_widths[l]}, true));
        }
        return r;
    }

    Tensor<T> reduce_level(const Tensor<T>& feat, size_t level) const {
        if (level >= w.size()) throw contract_error("channel reducer: level out of range");
        if (feat.shape()[0] != w[level].shape()[1])
            throw shape_error("channel reducer: level " + std::to_string(level) + " expects " +
                              std::to_string(w[level].shape()[1]) + " channels, got " +
                              std::to_string(feat.shape()[0]));
        return add_chan(conv2d(feat, w[level], 1, 0), b[level]);
    }

    FeaturePyramid<T> reduce(const FeaturePyramid<T>& pyramid) const {
        if (pyramid.size() != w.size()) throw contract_error("channel reducer: pyramid size mismatch");
        FeaturePyramid<T> out;
        for (size_t l = 0; l < pyramid.size(); ++l) out.push_back(reduce_level(pyramid[l], l));
        return out;
    }

    void collect(const std::string& prefix, std::map<std::string, Tensor<T>>& out) const {
        for (size_t l = 0; l < w.size(); ++l) {
            out.emplace(prefix + "/level" + std::to_string(l + 1) + "/w", w[l]);
            out.emplace(prefix + "/level" + std::to_string(l + 1) + "/b", b[l]);
        }
    }
};

// [C,h,w] -> [h*w, C]; token i sits at spatial site (i / w, i % w)
template <typename T>
Tensor<T> flatten_tokens(const Tensor<T>& level) {
    if (level.rank() != 3) throw shape_error("flatten_tokens: need [C,h,w]");
    size_t C = level.shape()[0], h = level.shape()[1], w = level.shape()[2];
    return reshape(permute(level, {1, 2, 0}), {h * w, C});
}

template <typename T>
Tensor<T> unflatten_tokens(const Tensor<T>& tokens, size_t h, size_t w) {
    if (tokens.rank() != 2 || tokens.shape()[0] != h * w)
        throw shape_error("unflatten_tokens: token count does not match grid");
    size_t C = tokens.shape()[1];
    return permute(reshape(tokens, {h, w, C}), {2, 0, 1});
}

} // namespace aia
