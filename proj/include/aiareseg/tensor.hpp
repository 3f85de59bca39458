#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "aiareseg/rng.hpp"

namespace aia {

using Shape = std::vector<size_t>;

inline size_t numel(const Shape& s) {
    size_t n = 1;
    for (size_t e : s) n *= e;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        out += std::to_string(s[i]);
        if (i + 1 < s.size()) out += ",";
    }
    return out + "]";
}

struct shape_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct contract_error : std::logic_error {
    using std::logic_error::logic_error;
};

namespace detail {
template <typename T>
struct Node {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;   // sized lazily on first backward touch
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Pulls this node's grad and scatters contributions into parents' grads.
    std::function<void(Node&)> backward;

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    }
};
} // namespace detail

// Dense row-major tensor participating in a reverse-mode autodiff graph.
// Copies are shallow handles onto the same node.
template <typename T>
class Tensor {
public:
    using Node = detail::Node<T>;

    Tensor() : n_(std::make_shared<Node>()) {}
    explicit Tensor(std::shared_ptr<Node> n) : n_(std::move(n)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        return filled(std::move(shape), T(0), requires_grad);
    }

    static Tensor filled(Shape shape, T v, bool requires_grad = false) {
        auto n = std::make_shared<Node>();
        n->value.assign(numel(shape), v);
        n->shape = std::move(shape);
        n->requires_grad = requires_grad;
        return Tensor(n);
    }

    static Tensor from_data(Shape shape, std::vector<T> data, bool requires_grad = false) {
        if (numel(shape) != data.size())
            throw shape_error("from_data: shape " + shape_str(shape) + " does not match " +
                              std::to_string(data.size()) + " elements");
        auto n = std::make_shared<Node>();
        n->shape = std::move(shape);
        n->value = std::move(data);
        n->requires_grad = requires_grad;
        return Tensor(n);
    }

    static Tensor randn(Shape shape, Rng& rng, T stddev = T(1), bool requires_grad = false) {
        auto n = std::make_shared<Node>();
        n->shape = std::move(shape);
        n->value.resize(numel(n->shape));
        for (auto& v : n->value) v = static_cast<T>(rng.next_normal()) * stddev;
        n->requires_grad = requires_grad;
        return Tensor(n);
    }

    const Shape& shape() const { return n_->shape; }
    size_t rank() const { return n_->shape.size(); }
    size_t size() const { return n_->value.size(); }
    bool requires_grad() const { return n_->requires_grad; }
    void set_requires_grad(bool b) { n_->requires_grad = b; }

    const std::vector<T>& data() const { return n_->value; }
    std::vector<T>& data() { return n_->value; }
    const std::vector<T>& grad() const { return n_->grad; }
    std::vector<T>& grad() { return n_->grad; }
    bool has_grad() const { return n_->grad.size() == n_->value.size(); }

    T item() const {
        if (size() != 1) throw contract_error("item() on non-scalar tensor " + shape_str(shape()));
        return n_->value[0];
    }

    void zero_grad() { n_->grad.assign(n_->value.size(), T(0)); }

    std::shared_ptr<Node> node() const { return n_; }
    bool same_node(const Tensor& other) const { return n_ == other.n_; }

    // Deep copy detached from the graph.
    Tensor detach_copy() const {
        auto n = std::make_shared<Node>();
        n->shape = n_->shape;
        n->value = n_->value;
        return Tensor(n);
    }

private:
    std::shared_ptr<Node> n_;
};

using Tensor32 = Tensor<float>;
using Tensor64 = Tensor<double>;

namespace detail {

template <typename T>
void check_finite(const Tensor<T>& t, const char* op) {
#if !defined(NDEBUG) || defined(AIA_CHECK_FINITE)
    for (T v : t.data())
        if (!std::isfinite(v))
            throw numeric_error(std::string("non-finite value produced by ") + op);
#else
    (void)t;
    (void)op;
#endif
}

template <typename T, typename Fwd, typename Bwd>
Tensor<T> make_op(const char* name, Shape out_shape,
                  std::vector<Tensor<T>> inputs, Fwd&& fwd, Bwd&& bwd) {
    auto n = std::make_shared<Node<T>>();
    n->shape = std::move(out_shape);
    n->value.assign(numel(n->shape), T(0));
    fwd(n->value);
    bool needs = false;
    for (auto& in : inputs) needs = needs || in.requires_grad();
    n->requires_grad = needs;
    if (needs) {
        for (auto& in : inputs) n->parents.push_back(in.node());
        n->backward = std::forward<Bwd>(bwd);
    }
    Tensor<T> out(n);
    check_finite(out, name);
    return out;
}

// scatter += into a parent grad if that parent wants it
template <typename T>
inline bool wants_grad(const std::shared_ptr<Node<T>>& p) {
    // Intermediate nodes need grads too so the chain keeps flowing; only
    // graph leaves without requires_grad are skipped.
    return p->requires_grad;
}

} // namespace detail

// --- graph traversal -------------------------------------------------------

// Runs reverse-mode accumulation from a scalar loss. Grads accumulate across
// repeated calls until zero_grad.
template <typename T>
void backward(const Tensor<T>& loss) {
    if (loss.size() != 1)
        throw contract_error("backward requires a scalar loss, got " + shape_str(loss.shape()));

    using NodeT = detail::Node<T>;
    // iterative post-order topological sort
    std::vector<NodeT*> order;
    std::unordered_set<NodeT*> seen;
    std::vector<std::pair<NodeT*, size_t>> stack;
    stack.push_back({loss.node().get(), 0});
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            NodeT* p = node->parents[idx++].get();
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    // order is now children-after-parents reversed; the tape replay walks it
    // from the loss backwards. Interior op-node grads are scratch and reset
    // per call; only leaf grads accumulate across calls.
    for (NodeT* node : order)
        if (node->backward) node->grad.assign(node->value.size(), T(0));
    loss.node()->ensure_grad();
    loss.node()->grad[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        NodeT* node = *it;
        if (node->backward) {
            node->ensure_grad();
            node->backward(*node);
        }
    }
}

// --- elementwise -----------------------------------------------------------

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape())
        throw shape_error(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                          " vs " + shape_str(b.shape()));
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "add");
    auto an = a.node(), bn = b.node();
    return detail::make_op<T>(
        "add", a.shape(), {a, b},
        [&](std::vector<T>& out) {
            for (size_t i = 0; i < out.size(); ++i) out[i] = an->value[i] + bn->value[i];
        },
        [an, bn](detail::Node<T>& o) {
            if (an->requires_grad) {
                an->ensure_grad();
                for (size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (size_t i = 0; i < o.grad.size(); ++i) bn->grad[i] += o.grad[i];
            }
        });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "sub");
    auto an = a.node(), bn = b.node();
    return detail::make_op<T>(
        "sub", a.shape(), {a, b},
        [&](std::vector<T>& out) {
            for (size_t i = 0; i < out.size(); ++i) out[i] = an->value[i] - bn->value[i];
        },
        [an, bn](detail::Node<T>& o) {
            if (an->requires_grad) {
                an->ensure_grad();
                for (size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (size_t i = 0; i < o.grad.size(); ++i) bn->grad[i] -= o.grad[i];
            }
        });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "mul");
    auto an = a.node(), bn = b.node();
    return detail::make_op<T>(
        "mul", a.shape(), {a, b},
        [&](std::vector<T>& out) {
            for (size_t i = 0; i < out.size(); ++i) out[i] = an->value[i] * bn->value[i];
        },
        [an, bn](detail::Node<T>& o) {
            if (an->requires_grad) {
                an->ensure_grad();
                for (size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i] * bn->value[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (size_t i = 0; i < o.grad.size(); ++i) bn->grad[i] += o.grad[i] * an->value[i];
            }
        });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
    auto an = a.node();
    return detail::make_op<T>(
        "scale", a.shape(), {a},
        [&](std::vector<T>& out) {
            for (size_t i = 0; i < out.size(); ++i) out[i] = an->value[i] * s;
        },
        [an, s](detail::Node<T>& o) {
            if (!an->requires_grad) return;
            an->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i] * s;
        });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T s) {
    auto an = a.node();
    return detail::make_op<T>(
        "add_scalar", a.shape(), {a},
        [&](std::vector<T>& out) {
            for (size_t i = 0; i < out.size(); ++i) out[i] = an->value[i] + s;
        },
        [an](detail::Node<T>& o) {
            if (!an->requires_grad) return;
            an->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i];
        });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
    auto an = a.node();
    return detail::make_op<T>(
        "relu", a.shape(), {a},
        [&](std::vector<T>& out) {
            for (size_t i = 0; i < out.size(); ++i) out[i] = an->value[i] > T(0) ? an->value[i] : T(0);
        },
        [an](detail::Node<T>& o) {
            if (!an->requires_grad) return;
            an->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i)
                if (an->value[i] > T(0)) an->grad[i] += o.grad[i];
        });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
    auto an = a.node();
    return detail::make_op<T>(
        "sigmoid", a.shape(), {a},
        [&](std::vector<T>& out) {
            for (size_t i = 0; i < out.size(); ++i) {
                T x = an->value[i];
                out[i] = x >= T(0) ? T(1) / (T(1) + std::exp(-x))
                                   : std::exp(x) / (T(1) + std::exp(x));
            }
        },
        [an](detail::Node<T>& o) {
            if (!an->requires_grad) return;
            an->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) {
                T y = o.value[i];
                an->grad[i] += o.grad[i] * y * (T(1) - y);
            }
        });
}

template <typename T>
Tensor<T> log_op(const Tensor<T>& a) {
    auto an = a.node();
    return detail::make_op<T>(
        "log", a.shape(), {a},
        [&](std::vector<T>& out) {
            for (size_t i = 0; i < out.size(); ++i) out[i] = std::log(an->value[i]);
        },
        [an](detail::Node<T>& o) {
            if (!an->requires_grad) return;
            an->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i] / an->value[i];
        });
}

// Gradient is passed through only where the value was not clamped.
template <typename T>
Tensor<T> clamp(const Tensor<T>& a, T lo, T hi) {
    auto an = a.node();
    return detail::make_op<T>(
        "clamp", a.shape(), {a},
        [&](std::vector<T>& out) {
            for (size_t i = 0; i < out.size(); ++i)
                out[i] = std::min(hi, std::max(lo, an->value[i]));
        },
        [an, lo, hi](detail::Node<T>& o) {
            if (!an->requires_grad) return;
            an->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i)
                if (an->value[i] > lo && an->value[i] < hi) an->grad[i] += o.grad[i];
        });
}

// [N,C] + [C], broadcast over rows
template <typename T>
Tensor<T> add_rows(const Tensor<T>& a, const Tensor<T>& bias) {
    if (a.rank() != 2 || bias.rank() != 1 || a.shape()[1] != bias.shape()[0])
        throw shape_error("add_rows: need [N,C] + [C], got " + shape_str(a.shape()) + " + " +
                          shape_str(bias.shape()));
    auto an = a.node(), bn = bias.node();
    size_t N = a.shape()[0], C = a.shape()[1];
    return detail::make_op<T>(
        "add_rows", a.shape(), {a, bias},
        [&](std::vector<T>& out) {
            for (size_t i = 0; i < N; ++i)
                for (size_t j = 0; j < C; ++j) out[i * C + j] = an->value[i * C + j] + bn->value[j];
        },
        [an, bn, N, C](detail::Node<T>& o) {
            if (an->requires_grad) {
                an->ensure_grad();
                for (size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (size_t i = 0; i < N; ++i)
                    for (size_t j = 0; j < C; ++j) bn->grad[j] += o.grad[i * C + j];
            }
        });
}

// [C,...spatial] + [C], broadcast per channel
template <typename T>
Tensor<T> add_chan(const Tensor<T>& a, const Tensor<T>& bias) {
    if (a.rank() < 1 || bias.rank() != 1 || a.shape()[0] != bias.shape()[0])
        throw shape_error("add_chan: channel mismatch " + shape_str(a.shape()) + " + " +
                          shape_str(bias.shape()));
    size_t C = a.shape()[0];
    size_t inner = a.size() / C;
    auto an = a.node(), bn = bias.node();
    return detail::make_op<T>(
        "add_chan", a.shape(), {a, bias},
        [&](std::vector<T>& out) {
            for (size_t c = 0; c < C; ++c)
                for (size_t i = 0; i < inner; ++i)
                    out[c * inner + i] = an->value[c * inner + i] + bn->value[c];
        },
        [an, bn, C, inner](detail::Node<T>& o) {
            if (an->requires_grad) {
                an->ensure_grad();
                for (size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (size_t c = 0; c < C; ++c)
                    for (size_t i = 0; i < inner; ++i) bn->grad[c] += o.grad[c * inner + i];
            }
        });
}

// --- matmul / reshaping ----------------------------------------------------

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0])
        throw shape_error("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                          shape_str(b.shape()));
    size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    auto an = a.node(), bn = b.node();
    return detail::make_op<T>(
        "matmul", {m, n}, {a, b},
        [&](std::vector<T>& out) {
            for (size_t i = 0; i < m; ++i)
                for (size_t p = 0; p < k; ++p) {
                    T av = an->value[i * k + p];
                    if (av == T(0)) continue;
                    for (size_t j = 0; j < n; ++j) out[i * n + j] += av * bn->value[p * n + j];
                }
        },
        [an, bn, m, k, n](detail::Node<T>& o) {
            if (an->requires_grad) {
                an->ensure_grad();
                // dA = dO * B^T
                for (size_t i = 0; i < m; ++i)
                    for (size_t p = 0; p < k; ++p) {
                        T acc = 0;
                        for (size_t j = 0; j < n; ++j)
                            acc += o.grad[i * n + j] * bn->value[p * n + j];
                        an->grad[i * k + p] += acc;
                    }
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                // dB = A^T * dO
                for (size_t p = 0; p < k; ++p)
                    for (size_t i = 0; i < m; ++i) {
                        T av = an->value[i * k + p];
                        if (av == T(0)) continue;
                        for (size_t j = 0; j < n; ++j)
                            bn->grad[p * n + j] += av * o.grad[i * n + j];
                    }
            }
        });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape new_shape) {
    if (numel(new_shape) != a.size())
        throw shape_error("reshape: " + shape_str(a.shape()) + " -> " + shape_str(new_shape) +
                          " changes element count");
    auto an = a.node();
    return detail::make_op<T>(
        "reshape", std::move(new_shape), {a},
        [&](std::vector<T>& out) { out = an->value; },
        [an](detail::Node<T>& o) {
            if (!an->requires_grad) return;
            an->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i];
        });
}

inline std::vector<size_t> row_major_strides(const Shape& s) {
    std::vector<size_t> st(s.size(), 1);
    for (size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
    return st;
}

template <typename T>
Tensor<T> permute(const Tensor<T>& a, const std::vector<size_t>& perm) {
    if (perm.size() != a.rank()) throw shape_error("permute: rank mismatch");
    Shape out_shape(perm.size());
    for (size_t i = 0; i < perm.size(); ++i) {
        if (perm[i] >= a.rank()) throw shape_error("permute: axis out of range");
        out_shape[i] = a.shape()[perm[i]];
    }
    auto an = a.node();
    auto in_strides = row_major_strides(a.shape());
    auto out_strides = row_major_strides(out_shape);
    size_t rank = perm.size();
    size_t total = a.size();
    // out index -> in index map, reused in the backward pass
    auto map = std::make_shared<std::vector<size_t>>(total);
    {
        std::vector<size_t> idx(rank, 0);
        for (size_t o = 0; o < total; ++o) {
            size_t rem = o, in = 0;
            for (size_t d = 0; d < rank; ++d) {
                size_t c = rem / out_strides[d];
                rem %= out_strides[d];
                in += c * in_strides[perm[d]];
            }
            (*map)[o] = in;
        }
    }
    return detail::make_op<T>(
        "permute", out_shape, {a},
        [&](std::vector<T>& out) {
            for (size_t o = 0; o < total; ++o) out[o] = an->value[(*map)[o]];
        },
        [an, map](detail::Node<T>& o) {
            if (!an->requires_grad) return;
            an->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) an->grad[(*map)[i]] += o.grad[i];
        });
}

template <typename T>
Tensor<T> transpose2d(const Tensor<T>& a) {
    if (a.rank() != 2) throw shape_error("transpose2d: need rank 2, got " + shape_str(a.shape()));
    return permute(a, {1, 0});
}

template <typename T>
Tensor<T> slice(const Tensor<T>& a, size_t axis, size_t start, size_t len) {
    if (axis >= a.rank()) throw shape_error("slice: axis out of range");
    if (start + len > a.shape()[axis]) throw shape_error("slice: range out of bounds");
    Shape out_shape = a.shape();
    out_shape[axis] = len;
    size_t outer = 1, inner = 1;
    for (size_t i = 0; i < axis; ++i) outer *= a.shape()[i];
    for (size_t i = axis + 1; i < a.rank(); ++i) inner *= a.shape()[i];
    size_t in_axis = a.shape()[axis];
    auto an = a.node();
    return detail::make_op<T>(
        "slice", out_shape, {a},
        [&](std::vector<T>& out) {
            for (size_t o = 0; o < outer; ++o)
                for (size_t j = 0; j < len; ++j)
                    std::copy_n(an->value.begin() + ((o * in_axis + start + j) * inner), inner,
                                out.begin() + ((o * len + j) * inner));
        },
        [an, outer, inner, len, in_axis, start](detail::Node<T>& o) {
            if (!an->requires_grad) return;
            an->ensure_grad();
            for (size_t ot = 0; ot < outer; ++ot)
                for (size_t j = 0; j < len; ++j) {
                    size_t src = (ot * len + j) * inner;
                    size_t dst = (ot * in_axis + start + j) * inner;
                    for (size_t i = 0; i < inner; ++i) an->grad[dst + i] += o.grad[src + i];
                }
        });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, size_t axis) {
    if (parts.empty()) throw contract_error("concat: empty input list");
    const Shape& s0 = parts[0].shape();
    if (axis >= s0.size()) throw shape_error("concat: axis out of range");
    size_t axis_total = 0;
    for (const auto& p : parts) {
        if (p.rank() != s0.size()) throw shape_error("concat: rank mismatch");
        for (size_t d = 0; d < s0.size(); ++d)
            if (d != axis && p.shape()[d] != s0[d])
                throw shape_error("concat: shape mismatch " + shape_str(p.shape()) + " vs " +
                                  shape_str(s0));
        axis_total += p.shape()[axis];
    }
    Shape out_shape = s0;
    out_shape[axis] = axis_total;
    size_t outer = 1, inner = 1;
    for (size_t i = 0; i < axis; ++i) outer *= s0[i];
    for (size_t i = axis + 1; i < s0.size(); ++i) inner *= s0[i];

    std::vector<std::shared_ptr<detail::Node<T>>> nodes;
    std::vector<size_t> extents;
    for (const auto& p : parts) {
        nodes.push_back(p.node());
        extents.push_back(p.shape()[axis]);
    }
    return detail::make_op<T>(
        "concat", out_shape, parts,
        [&](std::vector<T>& out) {
            size_t off = 0;
            for (size_t k = 0; k < nodes.size(); ++k) {
                size_t e = extents[k];
                for (size_t o = 0; o < outer; ++o)
                    std::copy_n(nodes[k]->value.begin() + o * e * inner, e * inner,
                                out.begin() + (o * axis_total + off) * inner);
                off += e;
            }
        },
        [nodes, extents, outer, inner, axis_total](detail::Node<T>& o) {
            size_t off = 0;
            for (size_t k = 0; k < nodes.size(); ++k) {
                size_t e = extents[k];
                if (nodes[k]->requires_grad) {
                    nodes[k]->ensure_grad();
                    for (size_t ot = 0; ot < outer; ++ot) {
                        size_t src = (ot * axis_total + off) * inner;
                        size_t dst = ot * e * inner;
                        for (size_t i = 0; i < e * inner; ++i)
                            nodes[k]->grad[dst + i] += o.grad[src + i];
                    }
                }
                off += e;
            }
        });
}

// --- reductions ------------------------------------------------------------

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
    auto an = a.node();
    return detail::make_op<T>(
        "sum", Shape{1}, {a},
        [&](std::vector<T>& out) {
            out[0] = std::accumulate(an->value.begin(), an->value.end(), T(0));
        },
        [an](detail::Node<T>& o) {
            if (!an->requires_grad) return;
            an->ensure_grad();
            for (auto& g : an->grad) g += o.grad[0];
        });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
    if (a.size() == 0) throw contract_error("mean of empty tensor");
    return scale(sum(a), T(1) / static_cast<T>(a.size()));
}

// --- softmax / layer norm --------------------------------------------------

template <typename T>
Tensor<T> softmax(const Tensor<T>& a, size_t axis) {
    if (axis >= a.rank()) throw shape_error("softmax: axis out of range for " + shape_str(a.shape()));
    size_t outer = 1, inner = 1, n = a.shape()[axis];
    for (size_t i = 0; i < axis; ++i) outer *= a.shape()[i];
    for (size_t i = axis + 1; i < a.rank(); ++i) inner *= a.shape()[i];
    auto an = a.node();
    return detail::make_op<T>(
        "softmax", a.shape(), {a},
        [&](std::vector<T>& out) {
            for (size_t o = 0; o < outer; ++o)
                for (size_t i = 0; i < inner; ++i) {
                    size_t base = o * n * inner + i;
                    T mx = an->value[base];
                    for (size_t j = 1; j < n; ++j)
                        mx = std::max(mx, an->value[base + j * inner]);
                    T denom = 0;
                    for (size_t j = 0; j < n; ++j) {
                        T e = std::exp(an->value[base + j * inner] - mx);
                        out[base + j * inner] = e;
                        denom += e;
                    }
                    for (size_t j = 0; j < n; ++j) out[base + j * inner] /= denom;
                }
        },
        [an, outer, inner, n](detail::Node<T>& o) {
            if (!an->requires_grad) return;
            an->ensure_grad();
            for (size_t ot = 0; ot < outer; ++ot)
                for (size_t i = 0; i < inner; ++i) {
                    size_t base = ot * n * inner + i;
                    T dot = 0;
                    for (size_t j = 0; j < n; ++j)
                        dot += o.grad[base + j * inner] * o.value[base + j * inner];
                    for (size_t j = 0; j < n; ++j) {
                        size_t k = base + j * inner;
                        an->grad[k] += o.value[k] * (o.grad[k] - dot);
                    }
                }
        });
}

// Normalizes slices along `axis` to zero mean / unit variance, then applies
// learned scale and shift (both sized like the axis extent).
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, size_t axis, const Tensor<T>& gamma,
                     const Tensor<T>& beta, T eps = T(1e-5)) {
    if (axis >= x.rank()) throw shape_error("layer_norm: axis out of range");
    size_t n = x.shape()[axis];
    if (gamma.shape() != Shape{n} || beta.shape() != Shape{n})
        throw shape_error("layer_norm: scale/shift must have shape [" + std::to_string(n) + "]");
    size_t outer = 1, inner = 1;
    for (size_t i = 0; i < axis; ++i) outer *= x.shape()[i];
    for (size_t i = axis + 1; i < x.rank(); ++i) inner *= x.shape()[i];
    auto xn = x.node(), gn = gamma.node(), bn = beta.node();
    // cache xhat and inv-std per slice for the backward pass
    auto xhat = std::make_shared<std::vector<T>>(x.size());
    auto istd = std::make_shared<std::vector<T>>(outer * inner);
    return detail::make_op<T>(
        "layer_norm", x.shape(), {x, gamma, beta},
        [&](std::vector<T>& out) {
            for (size_t o = 0; o < outer; ++o)
                for (size_t i = 0; i < inner; ++i) {
                    size_t base = o * n * inner + i;
                    T mu = 0;
                    for (size_t j = 0; j < n; ++j) mu += xn->value[base + j * inner];
                    mu /= static_cast<T>(n);
                    T var = 0;
                    for (size_t j = 0; j < n; ++j) {
                        T d = xn->value[base + j * inner] - mu;
                        var += d * d;
                    }
                    var /= static_cast<T>(n);
                    T is = T(1) / std::sqrt(var + eps);
                    (*istd)[o * inner + i] = is;
                    for (size_t j = 0; j < n; ++j) {
                        size_t k = base + j * inner;
                        T xh = (xn->value[k] - mu) * is;
                        (*xhat)[k] = xh;
                        out[k] = xh * gn->value[j] + bn->value[j];
                    }
                }
        },
        [xn, gn, bn, xhat, istd, outer, inner, n](detail::Node<T>& o) {
            for (size_t ot = 0; ot < outer; ++ot)
                for (size_t i = 0; i < inner; ++i) {
                    size_t base = ot * n * inner + i;
                    T is = (*istd)[ot * inner + i];
                    T sum_dxhat = 0, sum_dxhat_xhat = 0;
                    for (size_t j = 0; j < n; ++j) {
                        size_t k = base + j * inner;
                        T dxhat = o.grad[k] * gn->value[j];
                        sum_dxhat += dxhat;
                        sum_dxhat_xhat += dxhat * (*xhat)[k];
                    }
                    if (xn->requires_grad) {
                        xn->ensure_grad();
                        for (size_t j = 0; j < n; ++j) {
                            size_t k = base + j * inner;
                            T dxhat = o.grad[k] * gn->value[j];
                            xn->grad[k] += is * (dxhat - sum_dxhat / static_cast<T>(n) -
                                                 (*xhat)[k] * sum_dxhat_xhat / static_cast<T>(n));
                        }
                    }
                    if (gn->requires_grad) {
                        gn->ensure_grad();
                        for (size_t j = 0; j < n; ++j) {
                            size_t k = base + j * inner;
                            gn->grad[j] += o.grad[k] * (*xhat)[k];
                        }
                    }
                    if (bn->requires_grad) {
                        bn->ensure_grad();
                        for (size_t j = 0; j < n; ++j) bn->grad[j] += o.grad[base + j * inner];
                    }
                }
        });
}

} // namespace aia
