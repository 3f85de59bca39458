#pragma once

#include <array>

#include "aiareseg/tensor.hpp"

namespace aia {

// x: [C_in,H,W], w: [C_out,C_in,kh,kw]
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, size_t stride = 1, size_t padding = 0) {
    if (x.rank() != 3 || w.rank() != 4)
        throw shape_error("conv2d: need x[C,H,W] and w[Co,Ci,kh,kw], got " + shape_str(x.shape()) +
                          " and " + shape_str(w.shape()));
    size_t Ci = x.shape()[0], H = x.shape()[1], W = x.shape()[2];
    size_t Co = w.shape()[0], kh = w.shape()[2], kw = w.shape()[3];
    if (w.shape()[1] != Ci)
        throw shape_error("conv2d: input channels " + std::to_string(Ci) + " vs kernel " +
                          std::to_string(w.shape()[1]));
    if (kh > H + 2 * padding || kw > W + 2 * padding)
        throw shape_error("conv2d: kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
                          " larger than padded input " + std::to_string(H + 2 * padding) + "x" +
                          std::to_string(W + 2 * padding));
    size_t Ho = (H + 2 * padding - kh) / stride + 1;
    size_t Wo = (W + 2 * padding - kw) / stride + 1;
    auto xn = x.node(), wn = w.node();
    return detail::make_op<T>(
        "conv2d", {Co, Ho, Wo}, {x, w},
        [&](std::vector<T>& out) {
            for (size_t co = 0; co < Co; ++co)
                for (size_t oy = 0; oy < Ho; ++oy)
                    for (size_t ox = 0; ox < Wo; ++ox) {
                        T acc = 0;
                        for (size_t ci = 0; ci < Ci; ++ci)
                            for (size_t ky = 0; ky < kh; ++ky) {
                                long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(padding);
                                if (iy < 0 || iy >= static_cast<long>(H)) continue;
                                for (size_t kx = 0; kx < kw; ++kx) {
                                    long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(padding);
                                    if (ix < 0 || ix >= static_cast<long>(W)) continue;
                                    acc += xn->value[(ci * H + iy) * W + ix] *
                                           wn->value[((co * Ci + ci) * kh + ky) * kw + kx];
                                }
                            }
                        out[(co * Ho + oy) * Wo + ox] = acc;
                    }
        },
        [xn, wn, Ci, H, W, Co, kh, kw, Ho, Wo, stride, padding](detail::Node<T>& o) {
            bool gx = xn->requires_grad, gw = wn->requires_grad;
            if (gx) xn->ensure_grad();
            if (gw) wn->ensure_grad();
            for (size_t co = 0; co < Co; ++co)
                for (size_t oy = 0; oy < Ho; ++oy)
                    for (size_t ox = 0; ox < Wo; ++ox) {
                        T go = o.grad[(co * Ho + oy) * Wo + ox];
                        if (go == T(0)) continue;
                        for (size_t ci = 0; ci < Ci; ++ci)
                            for (size_t ky = 0; ky < kh; ++ky) {
                                long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(padding);
                                if (iy < 0 || iy >= static_cast<long>(H)) continue;
                                for (size_t kx = 0; kx < kw; ++kx) {
                                    long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(padding);
                                    if (ix < 0 || ix >= static_cast<long>(W)) continue;
                                    size_t xi = (ci * H + iy) * W + ix;
                                    size_t wi = ((co * Ci + ci) * kh + ky) * kw + kx;
                                    if (gx) xn->grad[xi] += go * wn->value[wi];
                                    if (gw) wn->grad[wi] += go * xn->value[xi];
                                }
                            }
                    }
        });
}

// x: [C_in,T,H,W], w: [C_out,C_in,kt,kh,kw], no padding
template <typename T>
Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& w,
                 std::array<size_t, 3> stride = {1, 1, 1}) {
    if (x.rank() != 4 || w.rank() != 5)
        throw shape_error("conv3d: need x[C,T,H,W] and w[Co,Ci,kt,kh,kw], got " +
                          shape_str(x.shape()) + " and " + shape_str(w.shape()));
    size_t Ci = x.shape()[0], Tt = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
    size_t Co = w.shape()[0], kt = w.shape()[2], kh = w.shape()[3], kw = w.shape()[4];
    if (w.shape()[1] != Ci) throw shape_error("conv3d: channel mismatch");
    if (kt > Tt || kh > H || kw > W)
        throw shape_error("conv3d: kernel exceeds input extents");
    size_t To = (Tt - kt) / stride[0] + 1;
    size_t Ho = (H - kh) / stride[1] + 1;
    size_t Wo = (W - kw) / stride[2] + 1;
    auto xn = x.node(), wn = w.node();
    auto idx_x = [=](size_t c, size_t t, size_t y, size_t xx) {
        return ((c * Tt + t) * H + y) * W + xx;
    };
    auto idx_w = [=](size_t co, size_t ci, size_t t, size_t y, size_t xx) {
        return (((co * Ci + ci) * kt + t) * kh + y) * kw + xx;
    };
    return detail::make_op<T>(
        "conv3d", {Co, To, Ho, Wo}, {x, w},
        [&](std::vector<T>& out) {
            for (size_t co = 0; co < Co; ++co)
                for (size_t ot = 0; ot < To; ++ot)
                    for (size_t oy = 0; oy < Ho; ++oy)
                        for (size_t ox = 0; ox < Wo; ++ox) {
                            T acc = 0;
                            for (size_t ci = 0; ci < Ci; ++ci)
                                for (size_t p = 0; p < kt; ++p)
                                    for (size_t q = 0; q < kh; ++q)
                                        for (size_t r = 0; r < kw; ++r)
                                            acc += xn->value[idx_x(ci, ot * stride[0] + p,
                                                                   oy * stride[1] + q,
                                                                   ox * stride[2] + r)] *
                                                   wn->value[idx_w(co, ci, p, q, r)];
                            out[((co * To + ot) * Ho + oy) * Wo + ox] = acc;
                        }
        },
        [xn, wn, Ci, Co, kt, kh, kw, To, Ho, Wo, stride, idx_x, idx_w](detail::Node<T>& o) {
            bool gx = xn->requires_grad, gw = wn->requires_grad;
            if (gx) xn->ensure_grad();
            if (gw) wn->ensure_grad();
            for (size_t co = 0; co < Co; ++co)
                for (size_t ot = 0; ot < To; ++ot)
                    for (size_t oy = 0; oy < Ho; ++oy)
                        for (size_t ox = 0; ox < Wo; ++ox) {
                            T go = o.grad[((co * To + ot) * Ho + oy) * Wo + ox];
                            if (go == T(0)) continue;
                            for (size_t ci = 0; ci < Ci; ++ci)
                                for (size_t p = 0; p < kt; ++p)
                                    for (size_t q = 0; q < kh; ++q)
                                        for (size_t r = 0; r < kw; ++r) {
                                            size_t xi = idx_x(ci, ot * stride[0] + p,
                                                              oy * stride[1] + q,
                                                              ox * stride[2] + r);
                                            size_t wi = idx_w(co, ci, p, q, r);
                                            if (gx) xn->grad[xi] += go * wn->value[wi];
                                            if (gw) wn->grad[wi] += go * xn->value[xi];
                                        }
                        }
        });
}

// Transposed 3D convolution, the linear adjoint of conv3d at the same stride.
// x: [C_in,T,H,W], w: [C_in,C_out,kt,kh,kw]; out extent = (in-1)*stride + k.
template <typename T>
Tensor<T> conv_transpose3d(const Tensor<T>& x, const Tensor<T>& w,
                           std::array<size_t, 3> stride = {1, 1, 1}) {
    if (x.rank() != 4 || w.rank() != 5)
        throw shape_error("conv_transpose3d: need x[C,T,H,W] and w[Ci,Co,kt,kh,kw], got " +
                          shape_str(x.shape()) + " and " + shape_str(w.shape()));
    size_t Ci = x.shape()[0], Tt = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
    if (w.shape()[0] != Ci)
        throw shape_error("conv_transpose3d: channel mismatch " + std::to_string(Ci) + " vs " +
                          std::to_string(w.shape()[0]));
    size_t Co = w.shape()[1], kt = w.shape()[2], kh = w.shape()[3], kw = w.shape()[4];
    size_t To = (Tt - 1) * stride[0] + kt;
    size_t Ho = (H - 1) * stride[1] + kh;
    size_t Wo = (W - 1) * stride[2] + kw;
    auto xn = x.node(), wn = w.node();
    auto idx_w = [=](size_t ci, size_t co, size_t t, size_t y, size_t xx) {
        return (((ci * Co + co) * kt + t) * kh + y) * kw + xx;
    };
    return detail::make_op<T>(
        "conv_transpose3d", {Co, To, Ho, Wo}, {x, w},
        [&](std::vector<T>& out) {
            for (size_t ci = 0; ci < Ci; ++ci)
                for (size_t t = 0; t < Tt; ++t)
                    for (size_t y = 0; y < H; ++y)
                        for (size_t xx = 0; xx < W; ++xx) {
                            T xv = xn->value[((ci * Tt + t) * H + y) * W + xx];
                            if (xv == T(0)) continue;
                            for (size_t co = 0; co < Co; ++co)
                                for (size_t p = 0; p < kt; ++p)
                                    for (size_t q = 0; q < kh; ++q)
                                        for (size_t r = 0; r < kw; ++r)
                                            out[((co * To + t * stride[0] + p) * Ho +
                                                 y * stride[1] + q) * Wo +
                                                xx * stride[2] + r] +=
                                                xv * wn->value[idx_w(ci, co, p, q, r)];
                        }
        },
        [xn, wn, Ci, Co, Tt, H, W, kt, kh, kw, To, Ho, Wo, stride, idx_w](detail::Node<T>& o) {
            bool gx = xn->requires_grad, gw = wn->requires_grad;
            if (gx) xn->ensure_grad();
            if (gw) wn->ensure_grad();
            for (size_t ci = 0; ci < Ci; ++ci)
                for (size_t t = 0; t < Tt; ++t)
                    for (size_t y = 0; y < H; ++y)
                        for (size_t xx = 0; xx < W; ++xx) {
                            size_t xi = ((ci * Tt + t) * H + y) * W + xx;
                            for (size_t co = 0; co < Co; ++co)
                                for (size_t p = 0; p < kt; ++p)
                                    for (size_t q = 0; q < kh; ++q)
                                        for (size_t r = 0; r < kw; ++r) {
                                            T go = o.grad[((co * To + t * stride[0] + p) * Ho +
                                                           y * stride[1] + q) * Wo +
                                                          xx * stride[2] + r];
                                            if (go == T(0)) continue;
                                            size_t wi = idx_w(ci, co, p, q, r);
                                            if (gx) xn->grad[xi] += go * wn->value[wi];
                                            if (gw) wn->grad[wi] += go * xn->value[xi];
                                        }
                        }
        });
}

// Stack same-shaped [C,H,W] maps along a new time axis -> [C,T,H,W].
template <typename T>
Tensor<T> stack_time(const std::vector<Tensor<T>>& maps) {
    if (maps.empty()) throw contract_error("stack_time: empty input");
    std::vector<Tensor<T>> reshaped;
    for (const auto& m : maps) {
        if (m.rank() != 3) throw shape_error("stack_time: need [C,H,W] maps");
        if (m.shape() != maps[0].shape())
            throw shape_error("stack_time: mismatched slice shapes " + shape_str(m.shape()) +
                              " vs " + shape_str(maps[0].shape()));
        reshaped.push_back(reshape(m, {m.shape()[0], 1, m.shape()[1], m.shape()[2]}));
    }
    return concat(reshaped, 1);
}

} // namespace aia
