// Copyright (c) 2026 tinyvsr contributors
// SPDX-License-Identifier: Apache-2.0
#include "tinyvsr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace tinyvsr::nn {

namespace {
bool g_grad_enabled = true;
}

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }
bool grad_enabled() { return g_grad_enabled; }

std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
    return out + "]";
}

Tensor Tensor::leaf(Shape shape, bool requires_grad, std::string name) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value.assign(shape_numel(n->shape), 0.0);
    n->requires_grad = requires_grad;
    n->name = std::move(name);
    return Tensor(std::move(n));
}

Tensor Tensor::constant(Shape shape, std::vector<double> data) {
    if (shape_numel(shape) != data.size())
        throw DimensionError(str_cat("constant: shape ", shape_str(shape), " vs ", data.size(), " values"));
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    return Tensor(std::move(n));
}

Tensor Tensor::scalar(double v) { return constant({1}, {v}); }
Tensor Tensor::zeros(Shape shape) { return leaf(std::move(shape), false); }

Tensor Tensor::full(Shape shape, double v) {
    auto t = leaf(std::move(shape), false);
    std::fill(t.data().begin(), t.data().end(), v);
    return t;
}

double Tensor::item() const {
    if (numel() != 1) throw ContractError(str_cat("item() on tensor of ", numel(), " elements"));
    return n_->value[0];
}

Tensor Tensor::detach() const {
    auto n = std::make_shared<Node>();
    n->shape = n_->shape;
    n->value = n_->value;
    return Tensor(std::move(n));
}

void Tensor::backward() const {
    if (numel() != 1) throw ContractError("backward() requires a scalar output");
    if (!n_->requires_grad) return;

    // iterative topological order over the requires_grad subgraph
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, size_t>> stack{{n_.get(), 0}};
    visited.insert(n_.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    n_->ensure_grad();
    n_->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backward_fn) (*it)->backward_fn(**it);
}

// ---- helpers for op construction ----

namespace {

bool any_requires_grad(const std::vector<Tensor>& ts) {
    for (const auto& t : ts)
        if (t.requires_grad()) return true;
    return false;
}

Tensor make_op(Shape shape, std::vector<Tensor> inputs, std::vector<double> value,
               std::function<void(Node&)> backward) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    if (g_grad_enabled && any_requires_grad(inputs)) {
        n->requires_grad = true;
        n->parents.reserve(inputs.size());
        for (auto& t : inputs) n->parents.push_back(t.node());
        n->backward_fn = std::move(backward);
    }
    return Tensor(std::move(n));
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw DimensionError(str_cat(op, ": shape mismatch ", shape_str(a.shape()), " vs ",
                                     shape_str(b.shape())));
}

}  // namespace

// ---- elementwise ----

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    std::vector<double> v(a.numel());
    for (size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] + b.data()[i];
    return make_op(a.shape(), {a, b}, std::move(v), [](Node& n) {
        for (auto& p : n.parents)
            if (p->requires_grad) {
                p->ensure_grad();
                for (size_t i = 0; i < n.grad.size(); ++i) p->grad[i] += n.grad[i];
            }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    std::vector<double> v(a.numel());
    for (size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] - b.data()[i];
    return make_op(a.shape(), {a, b}, std::move(v), [](Node& n) {
        auto& pa = n.parents[0];
        auto& pb = n.parents[1];
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += n.grad[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) pb->grad[i] -= n.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    std::vector<double> v(a.numel());
    for (size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] * b.data()[i];
    return make_op(a.shape(), {a, b}, std::move(v), [](Node& n) {
        auto& pa = n.parents[0];
        auto& pb = n.parents[1];
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += n.grad[i] * pb->value[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) pb->grad[i] += n.grad[i] * pa->value[i];
        }
    });
}

Tensor affine(const Tensor& x, double scale, double shift) {
    std::vector<double> v(x.numel());
    for (size_t i = 0; i < v.size(); ++i) v[i] = scale * x.data()[i] + shift;
    return make_op(x.shape(), {x}, std::move(v), [scale](Node& n) {
        auto& p = n.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) p->grad[i] += scale * n.grad[i];
    });
}

Tensor square(const Tensor& x) {
    std::vector<double> v(x.numel());
    for (size_t i = 0; i < v.size(); ++i) v[i] = x.data()[i] * x.data()[i];
    return make_op(x.shape(), {x}, std::move(v), [](Node& n) {
        auto& p = n.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) p->grad[i] += 2.0 * p->value[i] * n.grad[i];
    });
}

Tensor sqrt_op(const Tensor& x) {
    std::vector<double> v(x.numel());
    for (size_t i = 0; i < v.size(); ++i) v[i] = std::sqrt(x.data()[i]);
    return make_op(x.shape(), {x}, std::move(v), [](Node& n) {
        auto& p = n.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) p->grad[i] += 0.5 / n.value[i] * n.grad[i];
    });
}

Tensor abs_op(const Tensor& x) {
    std::vector<double> v(x.numel());
    for (size_t i = 0; i < v.size(); ++i) v[i] = std::abs(x.data()[i]);
    return make_op(x.shape(), {x}, std::move(v), [](Node& n) {
        auto& p = n.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) {
            const double s = p->value[i] > 0.0 ? 1.0 : (p->value[i] < 0.0 ? -1.0 : 0.0);
            p->grad[i] += s * n.grad[i];
        }
    });
}

Tensor relu(const Tensor& x) {
    std::vector<double> v(x.numel());
    for (size_t i = 0; i < v.size(); ++i) v[i] = x.data()[i] > 0.0 ? x.data()[i] : 0.0;
    return make_op(x.shape(), {x}, std::move(v), [](Node& n) {
        auto& p = n.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i)
            if (p->value[i] > 0.0) p->grad[i] += n.grad[i];
    });
}

Tensor leaky_relu(const Tensor& x, double slope) {
    std::vector<double> v(x.numel());
    for (size_t i = 0; i < v.size(); ++i) v[i] = x.data()[i] > 0.0 ? x.data()[i] : slope * x.data()[i];
    return make_op(x.shape(), {x}, std::move(v), [slope](Node& n) {
        auto& p = n.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i)
            p->grad[i] += (p->value[i] > 0.0 ? 1.0 : slope) * n.grad[i];
    });
}

Tensor silu(const Tensor& x) {
    std::vector<double> v(x.numel());
    for (size_t i = 0; i < v.size(); ++i) {
        const double s = 1.0 / (1.0 + std::exp(-x.data()[i]));
        v[i] = x.data()[i] * s;
    }
    return make_op(x.shape(), {x}, std::move(v), [](Node& n) {
        auto& p = n.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) {
            const double s = 1.0 / (1.0 + std::exp(-p->value[i]));
            p->grad[i] += s * (1.0 + p->value[i] * (1.0 - s)) * n.grad[i];
        }
    });
}

Tensor clamp01(const Tensor& x) {
    std::vector<double> v(x.numel());
    for (size_t i = 0; i < v.size(); ++i) v[i] = std::clamp(x.data()[i], 0.0, 1.0);
    return make_op(x.shape(), {x}, std::move(v), [](Node& n) {
        auto& p = n.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i)
            if (p->value[i] > 0.0 && p->value[i] < 1.0) p->grad[i] += n.grad[i];
    });
}

// ---- broadcasts ----

Tensor add_bias(const Tensor& x, const Tensor& bias) {
    if (x.shape().size() != 3 || bias.shape().size() != 1 || bias.dim(0) != x.dim(0))
        throw DimensionError("add_bias: expected CHW input and [C] bias");
    const size_t plane = static_cast<size_t>(x.dim(1)) * x.dim(2);
    std::vector<double> v(x.numel());
    for (int c = 0; c < x.dim(0); ++c)
        for (size_t i = 0; i < plane; ++i) v[c * plane + i] = x.data()[c * plane + i] + bias.data()[c];
    const int C = x.dim(0);
    return make_op(x.shape(), {x, bias}, std::move(v), [plane, C](Node& n) {
        auto& px = n.parents[0];
        auto& pb = n.parents[1];
        if (px->requires_grad) {
            px->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) px->grad[i] += n.grad[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (int c = 0; c < C; ++c) {
                double acc = 0.0;
                for (size_t i = 0; i < plane; ++i) acc += n.grad[c * plane + i];
                pb->grad[c] += acc;
            }
        }
    });
}

Tensor mul_channel_map(const Tensor& x, const Tensor& m) {
    if (x.shape().size() != 3 || m.shape().size() != 2 || m.dim(0) != x.dim(1) || m.dim(1) != x.dim(2))
        throw DimensionError("mul_channel_map: expected CHW input and [H,W] map");
    const size_t plane = static_cast<size_t>(x.dim(1)) * x.dim(2);
    const int C = x.dim(0);
    std::vector<double> v(x.numel());
    for (int c = 0; c < C; ++c)
        for (size_t i = 0; i < plane; ++i) v[c * plane + i] = x.data()[c * plane + i] * m.data()[i];
    return make_op(x.shape(), {x, m}, std::move(v), [plane, C](Node& n) {
        auto& px = n.parents[0];
        auto& pm = n.parents[1];
        if (px->requires_grad) {
            px->ensure_grad();
            for (int c = 0; c < C; ++c)
                for (size_t i = 0; i < plane; ++i)
                    px->grad[c * plane + i] += n.grad[c * plane + i] * pm->value[i];
        }
        if (pm->requires_grad) {
            pm->ensure_grad();
            for (int c = 0; c < C; ++c)
                for (size_t i = 0; i < plane; ++i)
                    pm->grad[i] += n.grad[c * plane + i] * px->value[c * plane + i];
        }
    });
}

// ---- reductions / indexing ----

Tensor sum(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.data()) acc += v;
    return make_op({1}, {x}, {acc}, [](Node& n) {
        auto& p = n.parents[0];
        p->ensure_grad();
        for (double& g : p->grad) g += n.grad[0];
    });
}

Tensor mean(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.data()) acc += v;
    const double inv = 1.0 / static_cast<double>(x.numel());
    return make_op({1}, {x}, {acc * inv}, [inv](Node& n) {
        auto& p = n.parents[0];
        p->ensure_grad();
        for (double& g : p->grad) g += n.grad[0] * inv;
    });
}

Tensor pick(const Tensor& x, size_t flat_index) {
    if (flat_index >= x.numel()) throw ContractError("pick: index out of range");
    return make_op({1}, {x}, {x.data()[flat_index]}, [flat_index](Node& n) {
        auto& p = n.parents[0];
        p->ensure_grad();
        p->grad[flat_index] += n.grad[0];
    });
}

Tensor add_scalars(const std::vector<Tensor>& xs) {
    if (xs.empty()) return Tensor::scalar(0.0);
    return weighted_sum(xs, std::vector<double>(xs.size(), 1.0));
}

Tensor weighted_sum(const std::vector<Tensor>& xs, const std::vector<double>& w) {
    if (xs.size() != w.size()) throw ContractError("weighted_sum: arity mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        if (xs[i].numel() != 1) throw ContractError("weighted_sum: scalar terms only");
        acc += w[i] * xs[i].item();
    }
    std::vector<Tensor> inputs(xs.begin(), xs.end());
    std::vector<double> weights = w;
    return make_op({1}, std::move(inputs), {acc}, [weights](Node& n) {
        for (size_t i = 0; i < n.parents.size(); ++i) {
            auto& p = n.parents[i];
            if (!p->requires_grad) continue;
            p->ensure_grad();
            p->grad[0] += weights[i] * n.grad[0];
        }
    });
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.numel())
        throw DimensionError(str_cat("reshape: ", shape_str(x.shape()), " -> ", shape_str(shape)));
    return make_op(std::move(shape), {x}, x.data(), [](Node& n) {
        auto& p = n.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) p->grad[i] += n.grad[i];
    });
}

// ---- frame bridging ----

Tensor from_frame(const Frame& f) {
    std::vector<double> v(f.size());
    const size_t plane = static_cast<size_t>(f.height) * f.width;
    for (int y = 0; y < f.height; ++y)
        for (int x = 0; x < f.width; ++x)
            for (int c = 0; c < f.channels; ++c)
                v[c * plane + static_cast<size_t>(y) * f.width + x] = f.at(y, x, c);
    return Tensor::constant({f.channels, f.height, f.width}, std::move(v));
}

Frame to_frame(const Tensor& t) {
    if (t.shape().size() != 3) throw DimensionError("to_frame: expected CHW tensor");
    Frame f(t.dim(1), t.dim(2), t.dim(0));
    const size_t plane = static_cast<size_t>(f.height) * f.width;
    for (int y = 0; y < f.height; ++y)
        for (int x = 0; x < f.width; ++x)
            for (int c = 0; c < f.channels; ++c)
                f.at(y, x, c) = t.data()[c * plane + static_cast<size_t>(y) * f.width + x];
    return f;
}

Tensor from_weight_map(const Frame& map) {
    if (map.channels != 1) throw DimensionError("from_weight_map: single-channel frame expected");
    return Tensor::constant({map.height, map.width}, map.pixels);
}

}  // namespace tinyvsr::nn
