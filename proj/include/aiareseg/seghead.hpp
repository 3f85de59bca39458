#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aiareseg/backbone.hpp"
#include "aiareseg/conv.hpp"

namespace aia {

struct DecoderConfig {
    // input slice width per stage, deepest first (stage 4 .. stage 1)
    std::vector<size_t> stage_widths{64, 32, 16, 8};
    size_t final_width = 8;  // stage-1 output, fed to the 1x1 mask head
    // when true, one 2x2x2 transposed convolution acts jointly over (T,H,W)
    // and the residual time axis is averaged out, instead of the sequential
    // reduce-then-upsample reading
    bool joint_upsample = false;
};

// One deconvolution stage: stack T feature maps, reduce the time axis to 1,
// upsample spatially by 2, then channel norm + relu.
template <typename T>
struct DecoderStage {
    Tensor<T> treduce_w;  // [C_in, C_in, T, 1, 1]
    Tensor<T> treduce_b;  // [C_in]
    Tensor<T> up_w;       // sequential: [C_in, C_out, 1, 2, 2]; joint: [C_in, C_out, 2, 2, 2]
    Tensor<T> up_b;       // [C_out]
    NormParams<T> norm;
    size_t time_slices = 4;
    bool joint = false;

    static DecoderStage init(size_t c_in, size_t c_out, size_t time_slices, bool joint, Rng& rng) {
        DecoderStage s;
        s.time_slices = time_slices;
        s.joint = joint;
        T sw = static_cast<T>(std::sqrt(2.0 / static_cast<double>(c_in * time_slices)));
        s.treduce_w = Tensor<T>::randn({c_in, c_in, time_slices, 1, 1}, rng, sw, true);
        s.treduce_b = Tensor<T>::zeros({c_in}, true);
        size_t kt = joint ? 2 : 1;
        T uw = static_cast<T>(std::sqrt(2.0 / static_cast<double>(c_in * kt * 4)));
        s.up_w = Tensor<T>::randn({c_in, c_out, kt, 2, 2}, rng, uw, true);
        s.up_b = Tensor<T>::zeros({c_out}, true);
        s.norm = NormParams<T>::init(c_out);
        return s;
    }

    // stack: [C_in, T, H, W] -> [C_out, 2H, 2W]
    Tensor<T> apply(const Tensor<T>& stack) const {
        if (stack.rank() != 4 || stack.shape()[1] != time_slices)
            throw shape_error("decoder stage: expected " + std::to_string(time_slices) +
                              " time slices, got " + shape_str(stack.shape()));
        Tensor<T> up;
        if (joint) {
            // joint 2x2x2 transposed conv over (T,H,W), then average the
            // residual T+1 time steps away
            auto y = conv_transpose3d(stack, up_w, {1, 2, 2});
            size_t To = y.shape()[1];
            Tensor<T> acc = slice(y, 1, 0, 1);
            for (size_t t = 1; t < To; ++t) acc = add(acc, slice(y, 1, t, 1));
            up = scale(acc, T(1) / static_cast<T>(To));
        } else {
            auto reduced = add_chan3(conv3d(stack, treduce_w), treduce_b);
            up = conv_transpose3d(reduced, up_w, {1, 2, 2});
        }
        auto flat = reshape(add_chan3(up, up_b),
                            {up.shape()[0], up.shape()[2], up.shape()[3]});
        return relu(layer_norm(flat, size_t(0), norm.gamma, norm.beta));
    }

    static Tensor<T> add_chan3(const Tensor<T>& x, const Tensor<T>& b) { return add_chan(x, b); }

    void collect(const std::string& prefix, std::map<std::string, Tensor<T>>& out) const {
        out.emplace(prefix + "/treduce/w", treduce_w);
        out.emplace(prefix + "/treduce/b", treduce_b);
        out.emplace(prefix + "/upconv/w", up_w);
        out.emplace(prefix + "/upconv/b", up_b);
        norm.collect(prefix + "/norm", out);
    }
};

// Temporal 3D-deconvolution decoder. The deepest stage stacks the three
// branch maps (T=3); every later stage also stacks the previous decoder
// output (T=4) with fixed order: initial, intermediate, search, previous.
template <typename T>
struct SegDecoder {
    DecoderConfig config;
    std::vector<DecoderStage<T>> stages;  // deepest first
    Tensor<T> head_w;                     // [1, final_width, 1, 1]
    Tensor<T> head_b;                     // [1]

    static SegDecoder init(const DecoderConfig& cfg, Rng& rng) {
        if (cfg.stage_widths.size() != 4) throw contract_error("decoder: 4 stages expected");
        SegDecoder d;
        d.config = cfg;
        for (size_t s = 0; s < 4; ++s) {
            size_t c_in = cfg.stage_widths[s];
            size_t c_out = s + 1 < 4 ? cfg.stage_widths[s + 1] : cfg.final_width;
            size_t time_slices = s == 0 ? 3 : 4;
            d.stages.push_back(DecoderStage<T>::init(c_in, c_out, time_slices,
                                                     cfg.joint_upsample, rng));
        }
        T s = static_cast<T>(1.0 / std::sqrt(static_cast<double>(cfg.final_width)));
        d.head_w = Tensor<T>::randn({1, cfg.final_width, 1, 1}, rng, s, true);
        d.head_b = Tensor<T>::zeros({1}, true);
        return d;
    }

    // One skip level: stacking order initial, intermediate, search, previous.
    Tensor<T> fuse_level(size_t stage_idx, const Tensor<T>& init_feat, const Tensor<T>& inter_feat,
                         const Tensor<T>& search_feat,
                         const std::optional<Tensor<T>>& prev) const {
        const auto& st = stages.at(stage_idx);
        std::vector<Tensor<T>> slices{init_feat, inter_feat, search_feat};
        if (prev) slices.push_back(*prev);
        if (slices.size() != st.time_slices)
            throw shape_error("fuse_level: stage " + std::to_string(stage_idx) + " expects " +
                              std::to_string(st.time_slices) + " slices, got " +
                              std::to_string(slices.size()));
        for (const auto& s : slices)
            if (s.shape() != init_feat.shape())
                throw shape_error("fuse_level: misaligned slice shapes at stage " +
                                  std::to_string(stage_idx));
        return st.apply(stack_time(slices));
    }

    // Reduced-channel skip pyramids for the three branches plus the search
    // branch's transformer tokens (already unflattened to the deepest level).
    Tensor<T> decode(const FeaturePyramid<T>& init_skips, const FeaturePyramid<T>& inter_skips,
                     const Tensor<T>& deepest_init, const Tensor<T>& deepest_inter,
                     const Tensor<T>& search_tokens_map,
                     const FeaturePyramid<T>& search_skips) const {
        if (init_skips.size() != 4 || inter_skips.size() != 4 || search_skips.size() != 4)
            throw shape_error("decode: pyramid/stage count mismatch");
        auto x = fuse_level(0, deepest_init, deepest_inter, search_tokens_map, std::nullopt);
        for (size_t s = 1; s < 4; ++s) {
            size_t level = 3 - s;  // skip level matching the stage's input size
            x = fuse_level(s, init_skips[level], inter_skips[level], search_skips[level], x);
        }
        return sigmoid(add_chan(conv2d(x, head_w, 1, 0), head_b));
    }

    void collect(const std::string& prefix, std::map<std::string, Tensor<T>>& out) const {
        for (size_t s = 0; s < stages.size(); ++s)
            stages[s].collect(prefix + "/stage" + std::to_string(4 - s), out);
        out.emplace(prefix + "/head/w", head_w);
        out.emplace(prefix + "/head/b", head_b);
    }
};

// prob map [1,H,W] or [H,W] -> binary mask of the same shape
template <typename T>
Tensor<T> binarize(const Tensor<T>& prob, T threshold = T(0.5)) {
    if (threshold <= T(0) || threshold >= T(1))
        throw contract_error("binarize: threshold must be in (0,1)");
    std::vector<T> out(prob.size());
    for (size_t i = 0; i < prob.size(); ++i) out[i] = prob.data()[i] >= threshold ? T(1) : T(0);
    return Tensor<T>::from_data(prob.shape(), std::move(out));
}

} // namespace aia
