#pragma once

#include <map>
#include <string>
#include <vector>

#include "aiareseg/backbone.hpp"
#include "aiareseg/seghead.hpp"
#include "aiareseg/serialize.hpp"
#include "aiareseg/transformer.hpp"

namespace aia {

struct ModelConfig {
    size_t image_size = 64;
    size_t channels = 64;  // transformer token width C
    size_t heads = 4;
    size_t inner_width = 64;
    BackboneConfig backbone;
    DecoderConfig decoder;

    size_t grid() const { return image_size / 16; }
    size_t tokens() const { return grid() * grid(); }

    void validate() const {
        backbone.validate();
        if (image_size % 16 != 0) throw contract_error("model: image_size must be divisible by 16");
        if (heads == 0 || channels % heads != 0)
            throw contract_error("model: heads must divide the channel width");
        if (backbone.widths.back() != channels)
            throw contract_error("model: deepest backbone width must equal the token width");
        if (decoder.stage_widths.size() != 4 || decoder.stage_widths[0] != channels)
            throw contract_error("model: deepest decoder width must equal the token width");
    }

    // skip widths the decoder expects per pyramid level L1..L4
    std::vector<size_t> skip_widths() const {
        return {decoder.stage_widths[3], decoder.stage_widths[2], decoder.stage_widths[1],
                decoder.stage_widths[0]};
    }
};

// Full three-branch segmentation model: shared backbone and encoder, mask
// embedding on the reference branches, LT/ST cross attention over the search
// branch, and the temporal 3D-deconvolution decoder.
template <typename T>
struct SegModel {
    ModelConfig config;
    Backbone<T> backbone;
    ChannelReducer<T> reducer;
    AiaTransformer<T> transformer;
    SegDecoder<T> decoder;
    Tensor<T> mask_embed;  // [C], scaled per token by the pooled reference mask
    Tensor<T> pos;         // fixed sinusoidal positional encodings [N, C]

    static SegModel init(const ModelConfig& cfg, uint64_t seed) {
        cfg.validate();
        SegModel m;
        m.config = cfg;
        Rng rng(substream(seed, 0x5eed));
        m.backbone = Backbone<T>::init(cfg.backbone, rng);
        m.reducer = ChannelReducer<T>::init(cfg.backbone.widths, cfg.skip_widths(), rng);
        m.transformer = AiaTransformer<T>::init(cfg.channels, cfg.heads, cfg.tokens(), rng,
                                                cfg.inner_width);
        m.decoder = SegDecoder<T>::init(cfg.decoder, rng);
        m.mask_embed = Tensor<T>::randn({cfg.channels}, rng,
                                        static_cast<T>(1.0 / std::sqrt(double(cfg.channels))),
                                        true);
        m.pos = sinusoidal_positions<T>(cfg.grid(), cfg.grid(), cfg.channels);
        return m;
    }

    struct BranchFeatures {
        FeaturePyramid<T> skips;  // reduced pyramid, levels L1..L4
        Tensor<T> tokens;         // deepest level flattened to [N, C]
    };

    BranchFeatures extract(const Tensor<T>& image) const {
        if (image.rank() != 3 || image.shape()[1] != config.image_size ||
            image.shape()[2] != config.image_size)
            throw shape_error("model: expected [1," + std::to_string(config.image_size) + "," +
                              std::to_string(config.image_size) + "] image, got " +
                              shape_str(image.shape()));
        BranchFeatures f;
        f.skips = reducer.reduce(backbone.extract_features(image));
        f.tokens = flatten_tokens(f.skips.back());
        return f;
    }

    // Add the learned mask embedding to reference tokens, scaled per token by
    // the average of the binary mask over that token's receptive block.
    Tensor<T> embed_mask_tokens(const Tensor<T>& tokens, const Tensor<T>& mask) const {
        size_t g = config.grid(), block = config.image_size / g;
        if (mask.rank() != 2 || mask.shape()[0] != config.image_size ||
            mask.shape()[1] != config.image_size)
            throw shape_error("model: reference mask must be [" +
                              std::to_string(config.image_size) + "," +
                              std::to_string(config.image_size) + "], got " +
                              shape_str(mask.shape()));
        std::vector<T> pooled(g * g, T(0));
        for (size_t ty = 0; ty < g; ++ty)
            for (size_t tx = 0; tx < g; ++tx) {
                double acc = 0;
                for (size_t y = ty * block; y < (ty + 1) * block; ++y)
                    for (size_t x = tx * block; x < (tx + 1) * block; ++x)
                        acc += static_cast<double>(mask.data()[y * config.image_size + x]);
                pooled[ty * g + tx] = static_cast<T>(acc / double(block * block));
            }
        auto p = Tensor<T>::from_data({g * g, 1}, std::move(pooled));
        return add(tokens, matmul(p, reshape(mask_embed, Shape{1, config.channels})));
    }

    struct Output {
        Tensor<T> prob;           // [1, H, W] probability map
        Tensor<T> search_tokens;  // encoded search tokens [N, C], memory candidate
    };

    Output forward(const Tensor<T>& search_img, const Tensor<T>& init_img,
                   const Tensor<T>& init_mask, const Tensor<T>& inter_img,
                   const Tensor<T>& inter_mask, const ReferenceMemory<T>& memory) const {
        auto s = extract(search_img);
        auto i = extract(init_img);
        auto m = extract(inter_img);
        auto enc_s = transformer.encode(s.tokens, pos);
        auto enc_i = transformer.encode(embed_mask_tokens(i.tokens, init_mask), pos);
        auto enc_m = transformer.encode(embed_mask_tokens(m.tokens, inter_mask), pos);
        auto fused = transformer.cross(enc_s, enc_i, enc_m, pos, memory);
        size_t g = config.grid();
        Output out;
        out.prob = decoder.decode(i.skips, m.skips, unflatten_tokens(enc_i, g, g),
                                  unflatten_tokens(enc_m, g, g), unflatten_tokens(fused, g, g),
                                  s.skips);
        out.search_tokens = enc_s;
        return out;
    }

    std::map<std::string, Tensor<T>> named_params() const {
        std::map<std::string, Tensor<T>> out;
        backbone.collect("backbone", out);
        reducer.collect("reducer", out);
        transformer.collect("transformer", out);
        decoder.collect("decoder", out);
        out.emplace("mask_embed", mask_embed);
        return out;
    }

    // name-ordered parameter list, the canonical optimizer ordering
    std::vector<Tensor<T>> params() const {
        std::vector<Tensor<T>> out;
        for (auto& [name, t] : named_params()) out.push_back(t);
        return out;
    }

    void save(const std::string& path) const { save_checkpoint(path, named_params()); }

    void load_params(const std::map<std::string, Tensor<T>>& entries) {
        for (auto& [name, t] : named_params()) {
            auto it = entries.find(name);
            if (it == entries.end()) throw io_error("checkpoint: missing parameter " + name);
            if (it->second.shape() != t.shape())
                throw io_error("checkpoint: shape mismatch for " + name + ": expected " +
                               shape_str(t.shape()) + ", got " + shape_str(it->second.shape()));
            t.data() = it->second.data();
        }
    }

    void load(const std::string& path) { load_params(load_checkpoint<T>(path)); }
};

} // namespace aia
