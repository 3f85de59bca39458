#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>

#include "aiareseg/backbone.hpp"
#include "aiareseg/seghead.hpp"

using namespace aia;

namespace {

FeaturePyramid<float> random_pyramid(const std::vector<size_t>& widths, size_t base, Rng& rng) {
    FeaturePyramid<float> p;
    size_t hw = base / 2;
    for (size_t w : widths) {
        p.push_back(Tensor32::randn({w, hw, hw}, rng, 1.0f, true));
        hw /= 2;
    }
    return p;
}

} // namespace

TEST_CASE("backbone: 64x64 input yields the 4-level stride-2 pyramid") {
    Rng rng(1);
    auto bb = Backbone<float>::init(BackboneConfig{}, rng);
    auto img = Tensor32::randn({1, 64, 64}, rng, 1.0f, false);
    auto pyr = bb.extract_features(img);
    REQUIRE(pyr.size() == 4);
    CHECK(pyr[0].shape() == Shape{8, 32, 32});
    CHECK(pyr[1].shape() == Shape{16, 16, 16});
    CHECK(pyr[2].shape() == Shape{32, 8, 8});
    CHECK(pyr[3].shape() == Shape{64, 4, 4});
}

TEST_CASE("backbone: 320x320 input reaches a 20x20 deepest level") {
    Rng rng(2);
    auto bb = Backbone<float>::init(BackboneConfig{}, rng);
    auto img = Tensor32::randn({1, 320, 320}, rng, 1.0f, false);
    auto pyr = bb.extract_features(img);
    CHECK(pyr[3].shape() == Shape{64, 20, 20});
}

TEST_CASE("backbone rejects bad inputs") {
    Rng rng(3);
    auto bb = Backbone<float>::init(BackboneConfig{}, rng);
    CHECK_THROWS_AS(bb.extract_features(Tensor32::zeros({1, 60, 64})), shape_error);
    CHECK_THROWS_AS(bb.extract_features(Tensor32::zeros({3, 64, 64})), shape_error);
    BackboneConfig bad;
    bad.widths = {8, 16};
    CHECK_THROWS_AS(Backbone<float>::init(bad, rng), contract_error);
}

TEST_CASE("backbone parameter names cover every stage") {
    Rng rng(4);
    auto bb = Backbone<float>::init(BackboneConfig{}, rng);
    std::map<std::string, Tensor32> params;
    bb.collect("backbone", params);
    for (int s = 1; s <= 4; ++s) {
        std::string sp = "backbone/stage" + std::to_string(s);
        CHECK(params.count(sp + "/down/w") == 1);
        CHECK(params.count(sp + "/refine/w") == 1);
        CHECK(params.count(sp + "/down/norm/gamma") == 1);
    }
}

TEST_CASE("channel reducer maps pyramid widths and checks them") {
    Rng rng(5);
    auto bb = Backbone<float>::init(BackboneConfig{}, rng);
    auto pyr = bb.extract_features(Tensor32::randn({1, 64, 64}, rng, 1.0f, false));
    auto red = ChannelReducer<float>::init({8, 16, 32, 64}, {4, 8, 16, 32}, rng);
    auto out = red.reduce(pyr);
    CHECK(out[0].shape() == Shape{4, 32, 32});
    CHECK(out[3].shape() == Shape{32, 4, 4});
    CHECK_THROWS_AS(red.reduce_level(pyr[0], 3), shape_error);  // wrong channel count
    CHECK_THROWS_AS(red.reduce_level(pyr[0], 7), contract_error);
    CHECK_THROWS_AS(ChannelReducer<float>::init({8, 16}, {8}, rng), contract_error);
}

TEST_CASE("flatten_tokens round-trips and places token i at (i / w, i % w)") {
    Rng rng(6);
    auto level = Tensor32::randn({3, 2, 4}, rng, 1.0f, false);
    auto tokens = flatten_tokens(level);
    REQUIRE(tokens.shape() == Shape{8, 3});
    // token (y=1, x=2) carries the channel fiber at that site
    for (size_t c = 0; c < 3; ++c)
        CHECK(tokens.data()[(1 * 4 + 2) * 3 + c] ==
              level.data()[c * 8 + 1 * 4 + 2]);
    auto back = unflatten_tokens(tokens, 2, 4);
    REQUIRE(back.shape() == level.shape());
    for (size_t i = 0; i < level.size(); ++i) CHECK(back.data()[i] == level.data()[i]);
    CHECK_THROWS_AS(unflatten_tokens(tokens, 3, 4), shape_error);
}

TEST_CASE("decoder stage: sequential reading doubles H and W") {
    Rng rng(7);
    auto st = DecoderStage<float>::init(8, 4, 4, false, rng);
    auto x = Tensor32::randn({8, 4, 6, 6}, rng, 1.0f, false);
    auto y = st.apply(x);
    CHECK(y.shape() == Shape{4, 12, 12});
    CHECK_THROWS_AS(st.apply(Tensor32::zeros({8, 3, 6, 6})), shape_error);
}

TEST_CASE("decoder stage: joint 2x2x2 reading yields the same output shape") {
    Rng rng(8);
    auto st = DecoderStage<float>::init(8, 4, 3, true, rng);
    auto x = Tensor32::randn({8, 3, 6, 6}, rng, 1.0f, false);
    CHECK(st.apply(x).shape() == Shape{4, 12, 12});
}

TEST_CASE("one-hot time reduction makes the output depend on a single slice") {
    Rng rng(9);
    size_t C = 4, T = 4, hw = 5, pick = 2;
    auto st = DecoderStage<float>::init(C, 3, T, false, rng);
    // overwrite the time-reduce kernel: channel identity on slice `pick` only
    std::fill(st.treduce_w.data().begin(), st.treduce_w.data().end(), 0.0f);
    for (size_t c = 0; c < C; ++c)
        st.treduce_w.data()[(c * C + c) * T + pick] = 1.0f;
    auto x = Tensor32::randn({C, T, hw, hw}, rng, 1.0f, false);
    auto base = st.apply(x);
    auto perturbed = Tensor32::from_data(x.shape(), x.data());
    for (size_t t = 0; t < T; ++t) {
        if (t == pick) continue;
        for (size_t c = 0; c < C; ++c)
            for (size_t i = 0; i < hw * hw; ++i)
                perturbed.data()[(c * T + t) * hw * hw + i] += 10.0f;
    }
    auto shifted = st.apply(perturbed);
    for (size_t i = 0; i < base.size(); ++i)
        CHECK(shifted.data()[i] == doctest::Approx(base.data()[i]).epsilon(1e-6));
}

TEST_CASE("segmentation decoder: desk-scale decode produces a [1,64,64] probability map") {
    Rng rng(10);
    DecoderConfig cfg;
    auto dec = SegDecoder<float>::init(cfg, rng);
    auto init_skips = random_pyramid({8, 16, 32, 64}, 64, rng);
    auto inter_skips = random_pyramid({8, 16, 32, 64}, 64, rng);
    auto search_skips = random_pyramid({8, 16, 32, 64}, 64, rng);
    auto deep_init = Tensor32::randn({64, 4, 4}, rng, 1.0f, true);
    auto deep_inter = Tensor32::randn({64, 4, 4}, rng, 1.0f, true);
    auto search_map = Tensor32::randn({64, 4, 4}, rng, 1.0f, true);
    auto prob = dec.decode(init_skips, inter_skips, deep_init, deep_inter, search_map, search_skips);
    REQUIRE(prob.shape() == Shape{1, 64, 64});
    for (float v : prob.data()) {
        CHECK(v > 0.0f);
        CHECK(v < 1.0f);
    }

    // gradients reach the deepest stage and the head through the full decode
    auto loss = sum(prob);
    backward(loss);
    double g_head = 0, g_deep = 0, g_search = 0;
    for (float v : dec.head_w.grad()) g_head += std::abs(v);
    for (float v : dec.stages[0].treduce_w.grad()) g_deep += std::abs(v);
    for (float v : search_map.grad()) g_search += std::abs(v);
    CHECK(g_head > 0);
    CHECK(g_deep > 0);
    CHECK(g_search > 0);
}

TEST_CASE("segmentation decoder: joint upsampling variant decodes to the same shape") {
    Rng rng(11);
    DecoderConfig cfg;
    cfg.joint_upsample = true;
    auto dec = SegDecoder<float>::init(cfg, rng);
    auto init_skips = random_pyramid({8, 16, 32, 64}, 64, rng);
    auto inter_skips = random_pyramid({8, 16, 32, 64}, 64, rng);
    auto search_skips = random_pyramid({8, 16, 32, 64}, 64, rng);
    auto deep = Tensor32::randn({64, 4, 4}, rng, 1.0f, false);
    auto prob = dec.decode(init_skips, inter_skips, deep, deep, deep, search_skips);
    CHECK(prob.shape() == Shape{1, 64, 64});
}

TEST_CASE("fuse_level enforces slice count and alignment") {
    Rng rng(12);
    auto dec = SegDecoder<float>::init(DecoderConfig{}, rng);
    auto a = Tensor32::zeros({64, 4, 4});
    CHECK_THROWS_AS(dec.fuse_level(0, a, a, a, a), shape_error);  // deepest wants 3 slices
    CHECK_THROWS_AS(dec.fuse_level(1, a, a, a, std::nullopt), shape_error);
    auto b = Tensor32::zeros({64, 8, 8});
    CHECK_THROWS_AS(dec.fuse_level(0, a, a, b, std::nullopt), shape_error);
}

TEST_CASE("decoder parameter names enumerate stages 4..1 and the head") {
    Rng rng(13);
    auto dec = SegDecoder<float>::init(DecoderConfig{}, rng);
    std::map<std::string, Tensor32> params;
    dec.collect("decoder", params);
    for (int s = 1; s <= 4; ++s) {
        std::string sp = "decoder/stage" + std::to_string(s);
        CHECK(params.count(sp + "/treduce/w") == 1);
        CHECK(params.count(sp + "/upconv/w") == 1);
        CHECK(params.count(sp + "/norm/gamma") == 1);
    }
    CHECK(params.count("decoder/head/w") == 1);
    CHECK(params.count("decoder/head/b") == 1);
}

TEST_CASE("binarize thresholds at 0.5 and validates the threshold") {
    auto p = Tensor32::from_data({2, 2}, {0.2f, 0.5f, 0.7f, 0.49f});
    auto m = binarize(p);
    CHECK(m.data() == std::vector<float>{0, 1, 1, 0});
    CHECK_THROWS_AS(binarize(p, 1.5f), contract_error);
}
