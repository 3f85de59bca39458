#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>

#include "aiareseg/losses.hpp"
#include "aiareseg/model.hpp"
#include "aiareseg/synth.hpp"

using namespace aia;

namespace {

struct Inputs {
    Tensor32 search, init, init_mask, inter, inter_mask;
};

Inputs desk_inputs(uint64_t seed) {
    SequenceSpec spec;
    spec.seed = seed;
    auto frames = generate_sequence(spec);
    Inputs in;
    in.init = reshape(frames[0].image, Shape{1, 64, 64});
    in.init_mask = frames[0].catheter_mask;
    in.inter = reshape(frames[2].image, Shape{1, 64, 64});
    in.inter_mask = frames[2].catheter_mask;
    in.search = reshape(frames[4].image, Shape{1, 64, 64});
    return in;
}

} // namespace

TEST_CASE("model config validation") {
    ModelConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.image_size = 60;
    CHECK_THROWS_AS(cfg.validate(), contract_error);
    cfg = ModelConfig{};
    cfg.heads = 5;
    CHECK_THROWS_AS(cfg.validate(), contract_error);
    cfg = ModelConfig{};
    cfg.channels = 32;  // deepest backbone width stays 64
    CHECK_THROWS_AS(cfg.validate(), contract_error);
}

TEST_CASE("forward pass: desk-scale shapes and probability range") {
    auto model = SegModel<float>::init(ModelConfig{}, 7);
    auto in = desk_inputs(1);
    ReferenceMemory<float> memory;
    auto out = model.forward(in.search, in.init, in.init_mask, in.inter, in.inter_mask, memory);
    REQUIRE(out.prob.shape() == Shape{1, 64, 64});
    REQUIRE(out.search_tokens.shape() == Shape{16, 64});
    for (float v : out.prob.data()) {
        CHECK(v > 0.0f);
        CHECK(v < 1.0f);
    }
}

TEST_CASE("forward pass is deterministic under the model seed") {
    auto in = desk_inputs(2);
    ReferenceMemory<float> memory;
    auto a = SegModel<float>::init(ModelConfig{}, 11)
                 .forward(in.search, in.init, in.init_mask, in.inter, in.inter_mask, memory);
    auto b = SegModel<float>::init(ModelConfig{}, 11)
                 .forward(in.search, in.init, in.init_mask, in.inter, in.inter_mask, memory);
    CHECK(a.prob.data() == b.prob.data());
    auto c = SegModel<float>::init(ModelConfig{}, 12)
                 .forward(in.search, in.init, in.init_mask, in.inter, in.inter_mask, memory);
    bool same = true;
    for (size_t i = 0; i < a.prob.size() && same; ++i)
        same = a.prob.data()[i] == c.prob.data()[i];
    CHECK_FALSE(same);
}

TEST_CASE("memory entries extend long-term keys without changing output shape") {
    auto model = SegModel<float>::init(ModelConfig{}, 5);
    auto in = desk_inputs(3);
    ReferenceMemory<float> memory;
    auto base = model.forward(in.search, in.init, in.init_mask, in.inter, in.inter_mask, memory);
    REQUIRE(memory.update(base.search_tokens, base.prob, 0.95));
    auto with_mem =
        model.forward(in.search, in.init, in.init_mask, in.inter, in.inter_mask, memory);
    CHECK(with_mem.prob.shape() == Shape{1, 64, 64});
    bool same = true;
    for (size_t i = 0; i < base.prob.size() && same; ++i)
        same = base.prob.data()[i] == with_mem.prob.data()[i];
    CHECK_FALSE(same);  // extra reference tokens must influence the output
}

TEST_CASE("named parameters expose the documented checkpoint names") {
    auto model = SegModel<float>::init(ModelConfig{}, 3);
    auto params = model.named_params();
    for (const char* branch : {"encoder", "lt", "st"}) {
        for (int h = 0; h < 4; ++h)
            for (const char* w : {"wq", "wk", "wv", "wo"})
                CHECK(params.count("transformer/" + std::string(branch) + "/head" +
                                   std::to_string(h) + "/" + w) == 1);
        for (const char* w : {"wq", "wk", "wv", "wo"})
            CHECK(params.count("transformer/" + std::string(branch) + "/inner/" + w) == 1);
    }
    CHECK(params.count("mask_embed") == 1);
    CHECK(params.count("backbone/stage1/down/w") == 1);
    CHECK(params.count("decoder/stage4/treduce/w") == 1);
    for (const auto& [name, t] : params) {
        CAPTURE(name);
        CHECK(t.requires_grad());
    }
}

TEST_CASE("checkpoint save/load round-trips bit-exactly") {
    auto a = SegModel<float>::init(ModelConfig{}, 21);
    auto b = SegModel<float>::init(ModelConfig{}, 22);
    std::string path = "model_roundtrip.ckpt";
    a.save(path);
    b.load(path);
    auto pa = a.named_params();
    auto pb = b.named_params();
    for (const auto& [name, t] : pa) {
        CAPTURE(name);
        CHECK(t.data() == pb.at(name).data());
    }
    std::remove(path.c_str());

    auto in = desk_inputs(4);
    ReferenceMemory<float> memory;
    auto oa = a.forward(in.search, in.init, in.init_mask, in.inter, in.inter_mask, memory);
    auto ob = b.forward(in.search, in.init, in.init_mask, in.inter, in.inter_mask, memory);
    CHECK(oa.prob.data() == ob.prob.data());
}

TEST_CASE("gradients reach every component through the combined loss") {
    auto model = SegModel<float>::init(ModelConfig{}, 9);
    auto in = desk_inputs(5);
    ReferenceMemory<float> memory;
    auto out = model.forward(in.search, in.init, in.init_mask, in.inter, in.inter_mask, memory);
    auto truth = reshape(desk_inputs(5).init_mask, Shape{1, 64, 64});
    auto loss = combined_loss(out.prob, truth, LossConfig{});
    backward(loss);
    auto grad_mass = [](const Tensor32& t) {
        double acc = 0;
        for (float v : t.grad()) acc += std::abs(v);
        return acc;
    };
    auto params = model.named_params();
    CHECK(grad_mass(params.at("backbone/stage1/down/w")) > 0);
    CHECK(grad_mass(params.at("reducer/level1/w")) > 0);
    CHECK(grad_mass(params.at("transformer/encoder/head0/wq")) > 0);
    CHECK(grad_mass(params.at("transformer/lt/inner/wv")) > 0);
    CHECK(grad_mass(params.at("transformer/st/head2/wv")) > 0);
    CHECK(grad_mass(params.at("transformer/fuse/w")) > 0);
    CHECK(grad_mass(params.at("decoder/stage4/treduce/w")) > 0);
    CHECK(grad_mass(params.at("decoder/stage1/upconv/w")) > 0);
    CHECK(grad_mass(params.at("decoder/head/w")) > 0);
    CHECK(grad_mass(params.at("mask_embed")) > 0);
}

TEST_CASE("reference mask outside the frame geometry is rejected") {
    auto model = SegModel<float>::init(ModelConfig{}, 13);
    auto in = desk_inputs(6);
    ReferenceMemory<float> memory;
    auto bad_mask = Tensor32::zeros({32, 32});
    CHECK_THROWS_AS(model.forward(in.search, in.init, bad_mask, in.inter, in.inter_mask, memory),
                    shape_error);
    auto bad_img = Tensor32::zeros({1, 32, 32});
    CHECK_THROWS_AS(model.forward(bad_img, in.init, in.init_mask, in.inter, in.inter_mask, memory),
                    shape_error);
}
