#pragma once

#include "aiareseg/tensor.hpp"

namespace aia {

struct LossConfig {
    double w_dice = 5;
    double w_bce = 2;
    double w_mse = 2;
    double dice_eps = 1e-6;

    void validate() const {
        if (w_dice <= 0 || w_bce <= 0 || w_mse <= 0)
            throw contract_error("loss weights must be positive");
    }
};

// reciprocal as an op (used only on positive scalars here)
template <typename T>
Tensor<T> pow_neg1(const Tensor<T>& a) {
    auto an = a.node();
    return detail::make_op<T>(
        "reciprocal", a.shape(), {a},
        [&](std::vector<T>& out) {
            for (size_t i = 0; i < out.size(); ++i) out[i] = T(1) / an->value[i];
        },
        [an](detail::Node<T>& o) {
            if (!an->requires_grad) return;
            an->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i)
                an->grad[i] -= o.grad[i] / (an->value[i] * an->value[i]);
        });
}

// 1 - (2*sum(p*t)+eps) / (sum(p)+sum(t)+eps)
template <typename T>
Tensor<T> dice_loss(const Tensor<T>& pred, const Tensor<T>& truth, T eps = T(1e-6)) {
    check_same_shape(pred, truth, "dice_loss");
    auto inter = scale(sum(mul(pred, truth)), T(2));
    auto denom = add(sum(pred), sum(truth));
    // (2i+eps)/(s+eps) via elementwise scalar ops on the 1-element tensors
    auto num = add_scalar(inter, eps);
    auto den = add_scalar(denom, eps);
    auto ratio = mul(num, pow_neg1(den));
    return add_scalar(scale(ratio, T(-1)), T(1));
}

// mean binary cross entropy, probabilities clamped to [1e-7, 1-1e-7]
template <typename T>
Tensor<T> bce_loss(const Tensor<T>& pred, const Tensor<T>& truth) {
    check_same_shape(pred, truth, "bce_loss");
    auto p = clamp(pred, T(1e-7), T(1) - T(1e-7));
    auto pos = mul(truth, log_op(p));
    auto one_minus_t = add_scalar(scale(truth, T(-1)), T(1));
    auto one_minus_p = add_scalar(scale(p, T(-1)), T(1));
    auto neg = mul(one_minus_t, log_op(one_minus_p));
    return scale(mean(add(pos, neg)), T(-1));
}

template <typename T>
Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& truth) {
    check_same_shape(pred, truth, "mse_loss");
    auto d = sub(pred, truth);
    return mean(mul(d, d));
}

// 5*dice + 2*bce + 2*mse with configured weights
template <typename T>
Tensor<T> combined_loss(const Tensor<T>& pred, const Tensor<T>& truth, const LossConfig& cfg) {
    cfg.validate();
    auto l = scale(dice_loss(pred, truth, static_cast<T>(cfg.dice_eps)),
                   static_cast<T>(cfg.w_dice));
    l = add(l, scale(bce_loss(pred, truth), static_cast<T>(cfg.w_bce)));
    l = add(l, scale(mse_loss(pred, truth), static_cast<T>(cfg.w_mse)));
    return l;
}

} // namespace aia
