#pragma once

// Reverse-mode automatic differentiation on small dense tensors.
//
// A computation is a DAG of shared_ptr<Node>; each node stores its value,
// an optional gradient buffer and a closure that scatters the node's
// gradient into its parents. backward() seeds a scalar root with 1 and
// walks the graph in reverse topological order. Gradients accumulate, so
// one parameter may appear in many graphs per batch.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "certwatch/gamma.hpp"
#include "certwatch/rng.hpp"
#include "certwatch/tensor.hpp"

namespace certwatch {

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
    Tensor value;
    Tensor grad; // allocated only when requires_grad
    bool requires_grad = false;
    std::vector<Var> parents;
    std::function<void(Node&)> backprop;

    void zero_grad() {
        std::fill(grad.data.begin(), grad.data.end(), 0.0f);
    }
};

inline Var leaf(Tensor value, bool requires_grad = false) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    if (requires_grad) n->grad = Tensor(n->value.shape);
    return n;
}

inline Var constant(Tensor value) { return leaf(std::move(value), false); }
inline Var constant(float v) { return leaf(Tensor::scalar(v), false); }

namespace detail {

inline Var make_op(Tensor value, std::vector<Var> parents,
                   std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    for (const auto& p : parents)
        if (p->requires_grad) { n->requires_grad = true; break; }
    if (n->requires_grad) {
        n->grad = Tensor(n->value.shape);
        n->parents = std::move(parents);
        n->backprop = std::move(backprop);
    }
    return n;
}

} // namespace detail

// ---- elementwise arithmetic ------------------------------------------------

inline Var add(const Var& a, const Var& b) {
    require_same_shape(a->value, b->value, "add");
    Tensor out = a->value;
    for (int i = 0; i < out.numel(); ++i) out[i] += b->value[i];
    return detail::make_op(std::move(out), {a, b}, [](Node& n) {
        auto& a = *n.parents[0];
        auto& b = *n.parents[1];
        for (int i = 0; i < n.value.numel(); ++i) {
            if (a.requires_grad) a.grad[i] += n.grad[i];
            if (b.requires_grad) b.grad[i] += n.grad[i];
        }
    });
}

inline Var sub(const Var& a, const Var& b) {
    require_same_shape(a->value, b->value, "sub");
    Tensor out = a->value;
    for (int i = 0; i < out.numel(); ++i) out[i] -= b->value[i];
    return detail::make_op(std::move(out), {a, b}, [](Node& n) {
        auto& a = *n.parents[0];
        auto& b = *n.parents[1];
        for (int i = 0; i < n.value.numel(); ++i) {
            if (a.requires_grad) a.grad[i] += n.grad[i];
            if (b.requires_grad) b.grad[i] -= n.grad[i];
        }
    });
}

inline Var mul(const Var& a, const Var& b) {
    require_same_shape(a->value, b->value, "mul");
    Tensor out = a->value;
    for (int i = 0; i < out.numel(); ++i) out[i] *= b->value[i];
    return detail::make_op(std::move(out), {a, b}, [](Node& n) {
        auto& a = *n.parents[0];
        auto& b = *n.parents[1];
        for (int i = 0; i < n.value.numel(); ++i) {
            if (a.requires_grad) a.grad[i] += n.grad[i] * b.value[i];
            if (b.requires_grad) b.grad[i] += n.grad[i] * a.value[i];
        }
    });
}

inline Var cmul(const Var& a, float c) {
    Tensor out = a->value;
    for (auto& v : out.data) v *= c;
    return detail::make_op(std::move(out), {a}, [c](Node& n) {
        auto& a = *n.parents[0];
        for (int i = 0; i < n.value.numel(); ++i) a.grad[i] += n.grad[i] * c;
    });
}

inline Var cadd(const Var& a, float c) {
    Tensor out = a->value;
    for (auto& v : out.data) v += c;
    return detail::make_op(std::move(out), {a}, [](Node& n) {
        auto& a = *n.parents[0];
        for (int i = 0; i < n.value.numel(); ++i) a.grad[i] += n.grad[i];
    });
}

inline Var neg(const Var& a) { return cmul(a, -1.0f); }

// Multiply every element of `a` by the scalar var `s`.
inline Var scale(const Var& a, const Var& s) {
    if (s->value.numel() != 1) throw std::invalid_argument("scale: scalar expected");
    float sv = s->value[0];
    Tensor out = a->value;
    for (auto& v : out.data) v *= sv;
    return detail::make_op(std::move(out), {a, s}, [](Node& n) {
        auto& a = *n.parents[0];
        auto& s = *n.parents[1];
        float sv = s.value[0];
        for (int i = 0; i < n.value.numel(); ++i) {
            if (a.requires_grad) a.grad[i] += n.grad[i] * sv;
            if (s.requires_grad) s.grad[0] += n.grad[i] * a.value[i];
        }
    });
}

inline Var reciprocal(const Var& s) {
    if (s->value.numel() != 1) throw std::invalid_argument("reciprocal: scalar expected");
    Tensor out = Tensor::scalar(1.0f / s->value[0]);
    return detail::make_op(std::move(out), {s}, [](Node& n) {
        auto& s = *n.parents[0];
        float sv = s.value[0];
        s.grad[0] += -n.grad[0] / (sv * sv);
    });
}

inline Var exp_v(const Var& a) {
    Tensor out = a->value;
    for (auto& v : out.data) v = std::exp(v);
    return detail::make_op(std::move(out), {a}, [](Node& n) {
        auto& a = *n.parents[0];
        for (int i = 0; i < n.value.numel(); ++i) a.grad[i] += n.grad[i] * n.value[i];
    });
}

inline Var log_v(const Var& a) {
    Tensor out = a->value;
    for (auto& v : out.data) v = std::log(v);
    return detail::make_op(std::move(out), {a}, [](Node& n) {
        auto& a = *n.parents[0];
        for (int i = 0; i < n.value.numel(); ++i) a.grad[i] += n.grad[i] / a.value[i];
    });
}

inline Var abs_v(const Var& a) {
    Tensor out = a->value;
    for (auto& v : out.data) v = std::fabs(v);
    return detail::make_op(std::move(out), {a}, [](Node& n) {
        auto& a = *n.parents[0];
        for (int i = 0; i < n.value.numel(); ++i)
            a.grad[i] += n.grad[i] * (a.value[i] < 0.0f ? -1.0f : 1.0f);
    });
}

// Gradient passes through strictly inside (lo, hi) and is cut at the rails.
inline Var clamp_v(const Var& a, float lo, float hi) {
    Tensor out = a->value;
    for (auto& v : out.data) v = std::min(hi, std::max(lo, v));
    return detail::make_op(std::move(out), {a}, [lo, hi](Node& n) {
        auto& a = *n.parents[0];
        for (int i = 0; i < n.value.numel(); ++i)
            if (a.value[i] > lo && a.value[i] < hi) a.grad[i] += n.grad[i];
    });
}

inline Var lgamma_v(const Var& a) {
    Tensor out = a->value;
    for (auto& v : out.data) v = static_cast<float>(lgamma_lanczos(v));
    return detail::make_op(std::move(out), {a}, [](Node& n) {
        auto& a = *n.parents[0];
        for (int i = 0; i < n.value.numel(); ++i)
            a.grad[i] += n.grad[i] * static_cast<float>(digamma(a.value[i]));
    });
}

inline Var digamma_v(const Var& a) {
    Tensor out = a->value;
    for (auto& v : out.data) v = static_cast<float>(digamma(v));
    return detail::make_op(std::move(out), {a}, [](Node& n) {
        auto& a = *n.parents[0];
        for (int i = 0; i < n.value.numel(); ++i)
            a.grad[i] += n.grad[i] * static_cast<float>(trigamma(a.value[i]));
    });
}

// ---- reductions / indexing -------------------------------------------------

inline Var sum(const Var& a) {
    float s = 0.0f;
    for (float v : a->value.data) s += v;
    return detail::make_op(Tensor::scalar(s), {a}, [](Node& n) {
        auto& a = *n.parents[0];
        for (int i = 0; i < a.value.numel(); ++i) a.grad[i] += n.grad[0];
    });
}

inline Var mean(const Var& a) {
    return cmul(sum(a), 1.0f / static_cast<float>(a->value.numel()));
}

inline Var select(const Var& a, int index) {
    if (index < 0 || index >= a->value.numel())
        throw std::out_of_range("select: index out of range");
    return detail::make_op(Tensor::scalar(a->value[index]), {a}, [index](Node& n) {
        n.parents[0]->grad[index] += n.grad[0];
    });
}

inline Var stack_scalars(const std::vector<Var>& xs) {
    Tensor out({static_cast<int>(xs.size())});
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (xs[i]->value.numel() != 1)
            throw std::invalid_argument("stack_scalars: scalar inputs expected");
        out[static_cast<int>(i)] = xs[i]->value[0];
    }
    return detail::make_op(std::move(out), xs, [](Node& n) {
        for (std::size_t i = 0; i < n.parents.size(); ++i)
            if (n.parents[i]->requires_grad)
                n.parents[i]->grad[0] += n.grad[static_cast<int>(i)];
    });
}

inline Var reshape(const Var& a, std::vector<int> new_shape) {
    if (Tensor::numel_of(new_shape) != a->value.numel())
        throw std::invalid_argument("reshape: element count mismatch");
    Tensor out(std::move(new_shape), a->value.data);
    return detail::make_op(std::move(out), {a}, [](Node& n) {
        auto& a = *n.parents[0];
        for (int i = 0; i < n.value.numel(); ++i) a.grad[i] += n.grad[i];
    });
}

// ---- activations -----------------------------------------------------------

inline Var leaky_relu(const Var& a, float slope) {
    Tensor out = a->value;
    for (auto& v : out.data)
        if (v < 0.0f) v *= slope;
    return detail::make_op(std::move(out), {a}, [slope](Node& n) {
        auto& a = *n.parents[0];
        for (int i = 0; i < n.value.numel(); ++i)
            a.grad[i] += n.grad[i] * (a.value[i] >= 0.0f ? 1.0f : slope);
    });
}

inline Var logsig(const Var& a) {
    Tensor out = a->value;
    // Output pinned strictly inside (0,1); float saturates to exactly 0/1
    // around |x| ~ 17 otherwise.
    for (auto& v : out.data)
        v = std::min(1.0f - 1e-7f, std::max(1e-7f, 1.0f / (1.0f + std::exp(-v))));
    return detail::make_op(std::move(out), {a}, [](Node& n) {
        auto& a = *n.parents[0];
        for (int i = 0; i < n.value.numel(); ++i)
            a.grad[i] += n.grad[i] * n.value[i] * (1.0f - n.value[i]);
    });
}

// Softmax over the final axis.
inline Var softmax(const Var& a) {
    const Tensor& x = a->value;
    int cols = x.shape.back();
    int rows = x.numel() / cols;
    Tensor out = x;
    for (int r = 0; r < rows; ++r) {
        float* p = out.data.data() + static_cast<std::size_t>(r) * cols;
        float mx = p[0];
        for (int j = 1; j < cols; ++j) mx = std::max(mx, p[j]);
        float s = 0.0f;
        for (int j = 0; j < cols; ++j) { p[j] = std::exp(p[j] - mx); s += p[j]; }
        for (int j = 0; j < cols; ++j) p[j] /= s;
    }
    return detail::make_op(std::move(out), {a}, [cols, rows](Node& n) {
        auto& a = *n.parents[0];
        for (int r = 0; r < rows; ++r) {
            const float* y = n.value.data.data() + static_cast<std::size_t>(r) * cols;
            const float* g = n.grad.data.data() + static_cast<std::size_t>(r) * cols;
            float dot = 0.0f;
            for (int j = 0; j < cols; ++j) dot += g[j] * y[j];
            float* ga = a.grad.data.data() + static_cast<std::size_t>(r) * cols;
            for (int j = 0; j < cols; ++j) ga[j] += y[j] * (g[j] - dot);
        }
    });
}

// Inverted dropout: survivors scaled by 1/(1-p); identity in eval mode.
inline Var dropout(const Var& a, float p, CounterRng& rng, bool training) {
    if (p < 0.0f || p >= 1.0f)
        throw std::invalid_argument("dropout: p must be in [0, 1)");
    if (!training || p == 0.0f) return a;
    auto mask = std::make_shared<Tensor>(a->value.shape);
    float keep = 1.0f - p;
    Tensor out = a->value;
    for (int i = 0; i < out.numel(); ++i) {
        float m = (rng.next_float() < p) ? 0.0f : 1.0f / keep;
        (*mask)[i] = m;
        out[i] *= m;
    }
    return detail::make_op(std::move(out), {a}, [mask](Node& n) {
        auto& a = *n.parents[0];
        for (int i = 0; i < n.value.numel(); ++i) a.grad[i] += n.grad[i] * (*mask)[i];
    });
}

// ---- backward --------------------------------------------------------------

inline std::vector<Node*> topo_order(const Var& root) {
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    // Iterative post-order DFS; graphs can get deep with long loss chains.
    std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    return order;
}

// Reverse-mode sweep from a scalar loss. Fills .grad on every reachable
// node with requires_grad (accumulating on top of what is already there).
inline void backward(const Var& loss) {
    if (loss->value.numel() != 1)
        throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                    loss->value.shape_str());
    if (!loss->requires_grad) return;
    auto order = topo_order(loss);
    loss->grad[0] += 1.0f;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backprop) (*it)->backprop(**it);
}

} // namespace certwatch
