#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "aiareseg/tensor.hpp"

namespace aia {

// Adam with bias correction, beta = (0.9, 0.999), eps = 1e-8.
template <typename T>
struct AdamState {
    std::vector<std::vector<T>> m;  // first moments, one per parameter
    std::vector<std::vector<T>> v;  // second moments
    long step = 0;
    T lr = T(1e-3);
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T eps = T(1e-8);

    void init(const std::vector<Tensor<T>>& params) {
        m.clear();
        v.clear();
        for (const auto& p : params) {
            m.emplace_back(p.size(), T(0));
            v.emplace_back(p.size(), T(0));
        }
        step = 0;
    }
};

// Scale all gradients so their global L2 norm does not exceed max_norm.
// Returns the pre-clip norm.
template <typename T>
double clip_gradients(std::vector<Tensor<T>>& params, double max_norm) {
    double total = 0;
    for (const auto& p : params) {
        if (!p.has_grad()) continue;
        for (T g : p.grad()) total += static_cast<double>(g) * static_cast<double>(g);
    }
    total = std::sqrt(total);
    if (total > max_norm) {
        T s = static_cast<T>(max_norm / total);
        for (auto& p : params) {
            if (!p.has_grad()) continue;
            for (auto& g : p.grad()) g *= s;
        }
    }
    return total;
}

template <typename T>
void adam_step(std::vector<Tensor<T>>& params, AdamState<T>& state) {
    if (state.m.size() != params.size())
        throw contract_error("adam_step: state not initialized for this parameter set");
    state.step += 1;
    T bc1 = T(1) - std::pow(state.beta1, static_cast<T>(state.step));
    T bc2 = T(1) - std::pow(state.beta2, static_cast<T>(state.step));
    for (size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        if (!p.has_grad())
            throw contract_error("adam_step: parameter " + std::to_string(i) + " has no gradient");
        if (state.m[i].size() != p.size())
            throw contract_error("adam_step: moment shape mismatch at parameter " +
                                 std::to_string(i));
        auto& data = p.data();
        const auto& g = p.grad();
        for (size_t j = 0; j < data.size(); ++j) {
            state.m[i][j] = state.beta1 * state.m[i][j] + (T(1) - state.beta1) * g[j];
            state.v[i][j] = state.beta2 * state.v[i][j] + (T(1) - state.beta2) * g[j] * g[j];
            T mhat = state.m[i][j] / bc1;
            T vhat = state.v[i][j] / bc2;
            data[j] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

} // namespace aia
