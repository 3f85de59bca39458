#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "aiareseg/optim.hpp"
#include "aiareseg/serialize.hpp"

using namespace aia;

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    auto p = Tensor32::from_data({3}, {1, 2, 3}, true);
    p.zero_grad();
    std::vector<Tensor32> params{p};
    AdamState<float> st;
    st.init(params);
    adam_step(params, st);
    CHECK(p.data() == std::vector<float>{1, 2, 3});
}

TEST_CASE("adam: constant positive gradient decreases a scalar monotonically") {
    auto p = Tensor32::from_data({1}, {5.0f}, true);
    std::vector<Tensor32> params{p};
    AdamState<float> st;
    st.lr = 0.01f;
    st.init(params);
    float prev = p.item();
    for (int i = 0; i < 50; ++i) {
        p.zero_grad();
        auto loss = sum(p);  // dL/dp = 1
        backward(loss);
        adam_step(params, st);
        CHECK(p.item() < prev);
        prev = p.item();
    }
}

TEST_CASE("adam: first step displacement matches the closed form at t=1") {
    // with g=1 and fresh state: mhat = g, vhat = g^2, step = lr*g/(|g|+eps) ~ lr
    auto p = Tensor64::from_data({1}, {0.0}, true);
    std::vector<Tensor64> params{p};
    AdamState<double> st;
    st.lr = 1e-3;
    st.init(params);
    p.zero_grad();
    backward(sum(p));
    adam_step(params, st);
    double expect = -st.lr * 1.0 / (1.0 + st.eps);
    CHECK(p.item() == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("adam: missing grad is a contract error") {
    auto p = Tensor32::from_data({2}, {1, 2}, true);
    std::vector<Tensor32> params{p};
    AdamState<float> st;
    st.init(params);
    CHECK_THROWS_AS(adam_step(params, st), contract_error);
}

TEST_CASE("tensor file round trip is bit exact") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "aia_io_test";
    fs::create_directories(dir);
    Rng rng(21);
    auto t32 = Tensor32::randn({3, 4, 5}, rng);
    auto t64 = Tensor64::randn({2, 7}, rng);
    save_tensor((dir / "a.tns").string(), t32);
    save_tensor((dir / "b.tns").string(), t64);
    auto r32 = load_tensor<float>((dir / "a.tns").string());
    auto r64 = load_tensor<double>((dir / "b.tns").string());
    CHECK(r32.shape() == t32.shape());
    CHECK(r32.data() == t32.data());
    CHECK(r64.data() == t64.data());
    fs::remove_all(dir);
}

TEST_CASE("tensor file header layout is pinned") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "aia_io_hdr";
    fs::create_directories(dir);
    auto t = Tensor32::from_data({2, 3}, {0, 1, 2, 3, 4, 5});
    auto path = (dir / "h.tns").string();
    save_tensor(path, t);
    std::ifstream f(path, std::ios::binary);
    char magic[8];
    f.read(magic, 8);
    CHECK(std::string(magic, 8) == "AIARTNSR");
    CHECK(f.get() == 0);  // dtype f32
    CHECK(f.get() == 2);  // rank
    uint32_t e0 = 0, e1 = 0;
    f.read(reinterpret_cast<char*>(&e0), 4);
    f.read(reinterpret_cast<char*>(&e1), 4);
    CHECK(e0 == 2);
    CHECK(e1 == 3);
    float first = -1;
    f.read(reinterpret_cast<char*>(&first), 4);
    CHECK(first == 0.0f);
    fs::remove_all(dir);
}

TEST_CASE("corrupt tensor file raises a parse error with the path") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "aia_io_bad";
    fs::create_directories(dir);
    auto path = (dir / "bad.tns").string();
    std::ofstream(path) << "not a tensor";
    CHECK_THROWS_WITH_AS(load_tensor<float>(path), doctest::Contains("bad.tns"), io_error);
    fs::remove_all(dir);
}

TEST_CASE("checkpoint archive round trip") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "aia_ckpt";
    fs::create_directories(dir);
    Rng rng(31);
    std::map<std::string, Tensor32> entries;
    entries.emplace("backbone/stage1/w", Tensor32::randn({4, 1, 3, 3}, rng));
    entries.emplace("transformer/encoder/wq", Tensor32::randn({8, 8}, rng));
    auto path = (dir / "model.ckpt").string();
    save_checkpoint(path, entries);
    auto loaded = load_checkpoint<float>(path);
    REQUIRE(loaded.size() == 2);
    for (auto& [name, t] : entries) {
        REQUIRE(loaded.count(name) == 1);
        CHECK(loaded.at(name).shape() == t.shape());
        CHECK(loaded.at(name).data() == t.data());
    }
    fs::remove_all(dir);
}
