// Copyright (c) 2026 tinyvsr contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tinyvsr/common.hpp"
#include "tinyvsr/tensor.hpp"

namespace tinyvsr::nn {

// Flat named-parameter registry owned by each model. Names are
// hierarchical ("enc.block0.conv1.w") so structural audits can grep roles.
class ParamStore {
public:
    Tensor add(const std::string& name, Shape shape, bool trainable);
    Tensor find(const std::string& name) const;  // throws if absent
    bool contains(const std::string& name) const;

    const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
    std::vector<Tensor> trainable() const;
    size_t param_count() const;
    void zero_grad();

    void save(const std::filesystem::path& path) const;
    // Loads by name; every stored tensor must exist here with the same shape.
    void load(const std::filesystem::path& path);

private:
    std::vector<std::pair<std::string, Tensor>> items_;
    std::map<std::string, size_t> index_;
};

// raw named-tensor archive (used for optimizer state too)
void save_tensor_archive(const std::filesystem::path& path,
                         const std::vector<std::pair<std::string, std::vector<double>>>& tensors);
std::vector<std::pair<std::string, std::vector<double>>> load_tensor_archive(
    const std::filesystem::path& path);

// ---- initializers ----
void init_he_normal(Tensor& t, int fan_in, Rng& rng, double gain = 1.0);
void init_uniform(Tensor& t, double lo, double hi, Rng& rng);
void fill(Tensor& t, double v);

// ---- layers ----

struct Conv2d {
    Tensor w, b;
    int stride = 1, pad = 1;
    PadMode pad_mode = PadMode::kReplicate;

    Conv2d() = default;
    Conv2d(ParamStore& ps, const std::string& name, int in_ch, int out_ch, int kernel, int stride,
           Rng& rng, bool trainable = true, PadMode pad_mode = PadMode::kReplicate);
    Tensor forward(const Tensor& x) const { return conv2d(x, w, b, stride, pad, pad_mode); }
    int in_channels() const { return w.dim(1); }
    int out_channels() const { return w.dim(0); }
};

struct Linear {
    Tensor w, b;  // w: [out, in]

    Linear() = default;
    Linear(ParamStore& ps, const std::string& name, int in_dim, int out_dim, Rng& rng,
           bool trainable = true);
    // x: [m, in] -> [m, out]
    Tensor forward(const Tensor& x) const;
};

struct GroupNormLayer {
    Tensor gamma, beta;
    int groups = 8;

    GroupNormLayer() = default;
    GroupNormLayer(ParamStore& ps, const std::string& name, int channels, Rng& rng,
                   bool trainable = true);
    Tensor forward(const Tensor& x) const { return group_norm(x, gamma, beta, groups); }
};

// Low-rank adapter around a frozen convolution: effective kernel
// W_frozen + scale * (B @ A), B zero-initialized so a fresh adapter is an
// exact no-op. Only A and B train.
struct LoraConv2d {
    Conv2d base;           // frozen
    Tensor lora_a, lora_b;  // a: [r, in*k*k], b: [out, r]
    double scale = 1.0;
    int rank = 0;

    LoraConv2d() = default;
    LoraConv2d(ParamStore& ps, const std::string& name, int in_ch, int out_ch, int kernel,
               int stride, int rank, double scale, Rng& rng);
    // Attach to an existing frozen conv (spec op apply_lora).
    LoraConv2d(ParamStore& ps, const std::string& name, const Conv2d& frozen, int rank, double scale,
               Rng& rng);
    Tensor effective_weight() const;
    Tensor forward(const Tensor& x) const;
    size_t adapter_param_count() const { return lora_a.numel() + lora_b.numel(); }
};

// ---- optimizer ----

// Adam with (0.9, 0.999), no weight decay.
class Adam {
public:
    Adam() = default;
    explicit Adam(std::vector<Tensor> params, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8);
    void step(double lr);
    void zero_grad();
    long steps_taken() const { return t_; }

    void save(const std::filesystem::path& path) const;
    void load(const std::filesystem::path& path);

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_, v_;
    double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    long t_ = 0;
};

// FD harness shared by the gradient-check tests: relative error between
// analytic and central-difference derivative, guarded near zero.
double grad_rel_err(double analytic, double fd);

}  // namespace tinyvsr::nn
