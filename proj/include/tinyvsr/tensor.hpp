// Copyright (c) 2026 tinyvsr contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "tinyvsr/flow.hpp"
#include "tinyvsr/image.hpp"

namespace tinyvsr::nn {

using Shape = std::vector<int>;

inline size_t shape_numel(const Shape& s) {
    size_t n = 1;
    for (int d : s) n *= static_cast<size_t>(d);
    return n;
}
std::string shape_str(const Shape& s);

// One node of the dynamically built reverse-mode graph. Values and grads
// are flat double buffers; shape is interpreted per op (images are CHW).
struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    std::string name;  // nonempty for parameters
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};
using NodePtr = std::shared_ptr<Node>;

// Disables graph recording in scope (rollout context passes, inference).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};
bool grad_enabled();

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(NodePtr n) : n_(std::move(n)) {}

    static Tensor leaf(Shape shape, bool requires_grad, std::string name = "");
    static Tensor constant(Shape shape, std::vector<double> data);
    static Tensor scalar(double v);
    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double v);

    bool defined() const { return static_cast<bool>(n_); }
    const Shape& shape() const { return n_->shape; }
    size_t numel() const { return n_->value.size(); }
    int dim(int i) const { return n_->shape[static_cast<size_t>(i)]; }
    std::vector<double>& data() { return n_->value; }
    const std::vector<double>& data() const { return n_->value; }
    std::vector<double>& grad() { return n_->grad; }
    const std::vector<double>& grad() const { return n_->grad; }
    bool requires_grad() const { return n_->requires_grad; }
    const std::string& name() const { return n_->name; }
    double item() const;

    void zero_grad() { n_->grad.assign(n_->value.size(), 0.0); }
    // Freezing a pretrained net before attaching adapters flips this off.
    void set_trainable(bool trainable) { n_->requires_grad = trainable; }
    // Reverse pass from a scalar output (seeds d(out)/d(out) = 1).
    void backward() const;

    // Value copy severed from the graph.
    Tensor detach() const;

    NodePtr node() const { return n_; }

private:
    NodePtr n_;
};

// ---- elementwise / scalar ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor affine(const Tensor& x, double scale, double shift);  // scale * x + shift
Tensor square(const Tensor& x);
Tensor sqrt_op(const Tensor& x);
Tensor abs_op(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope);
Tensor silu(const Tensor& x);
Tensor clamp01(const Tensor& x);

// ---- broadcasts over CHW ----
Tensor add_bias(const Tensor& x, const Tensor& bias);       // bias: [C]
Tensor mul_channel_map(const Tensor& x, const Tensor& m);   // m: [H, W], broadcast over C

// ---- reductions / indexing ----
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor pick(const Tensor& x, size_t flat_index);
Tensor add_scalars(const std::vector<Tensor>& xs);                 // sum of scalars
Tensor weighted_sum(const std::vector<Tensor>& xs, const std::vector<double>& w);

// ---- linear algebra ----
Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k] x [k,n]
Tensor softmax_rows(const Tensor& x);             // [m,n], softmax over n
Tensor reshape(const Tensor& x, Shape shape);
Tensor transpose2d(const Tensor& x);  // [m,n] -> [n,m]

// ---- image ops on CHW ----
enum class PadMode { kZero, kReplicate, kCircular };
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad,
              PadMode pad_mode = PadMode::kReplicate);
Tensor group_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, int groups,
                  double eps = 1e-5);
Tensor upsample_nearest2x(const Tensor& x);
Tensor concat_channels(const std::vector<Tensor>& xs);
Tensor pixel_unshuffle(const Tensor& x, int u);
Tensor pixel_shuffle(const Tensor& x, int u);
Tensor bicubic_warp(const Tensor& x, const FlowField& flow);  // no clamp
Tensor bicubic_upsample(const Tensor& x, int factor);
Tensor area_downsample(const Tensor& x, int factor);

// Forward differences with replicate padding (last column/row is zero).
Tensor forward_diff_x(const Tensor& x);
Tensor forward_diff_y(const Tensor& x);

// ---- frame bridging ----
Tensor from_frame(const Frame& f);          // HWC -> CHW constant
Frame to_frame(const Tensor& t);            // CHW -> HWC value copy
Tensor from_weight_map(const Frame& map);   // [H, W] from single-channel frame

}  // namespace tinyvsr::nn
