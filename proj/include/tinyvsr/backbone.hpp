// Copyright (c) 2026 tinyvsr contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "tinyvsr/flow.hpp"
#include "tinyvsr/image.hpp"
#include "tinyvsr/layers.hpp"
#include "tinyvsr/tensor.hpp"

namespace tinyvsr {

// Trunk configuration. The pruned preset drops cross-attention, timestep
// embedding and all but one bottleneck block; the reference preset re-enables
// them so the parameter-reduction property is measurable at equal widths.
struct ModelConfig {
    int context_radius = 2;  // k: window holds 2k+1 frames
    int upscale_factor = 4;  // s
    int unshuffle_factor = 2;  // u: input stem works at LR/u resolution
    int in_channels = 3;
    int base_channels = 32;
    std::vector<int> channel_multipliers = {1, 2, 4};
    int num_res_blocks_per_level = 1;
    int bottleneck_blocks = 1;
    bool use_cross_attention = false;
    bool use_timestep_embedding = false;
    // circular padding keeps the trunk exactly shift-covariant on periodic
    // content; the default replicates borders
    bool circular_padding = false;
    std::uint64_t seed = 17;

    void validate() const;
    int window_size() const { return 2 * context_radius + 1; }
    int stack_channels() const {
        return window_size() * in_channels * unshuffle_factor * unshuffle_factor;
    }

    static ModelConfig pruned_preset();
    static ModelConfig reference_preset();  // attention + temb + 4-block bottleneck

    std::string to_json_string() const;
    static ModelConfig from_json_string(const std::string& s);
};

// Aligned multi-frame input: neighbors are backward-warped onto the center
// grid, the center passes through unwarped, channels concatenate in temporal
// order, then pixel-unshuffle by u. flows[i] maps center-grid coordinates
// into neighbor i (2k entries, center excluded).
nn::Tensor build_input(const std::vector<Frame>& window, const std::vector<FlowField>& flows,
                       const ModelConfig& cfg);

class Generator {
public:
    explicit Generator(const ModelConfig& cfg);

    const ModelConfig& config() const { return cfg_; }
    nn::ParamStore& params() { return *store_; }
    const nn::ParamStore& params() const { return *store_; }
    size_t param_count() const { return store_->param_count(); }

    // Single forward pass: input stack [(2k+1)*C*u^2, H/u, W/u] plus the
    // center LR frame [C, H, W] feeding the bicubic global residual.
    // Output [C, s*H, s*W], clamped to [0, 1].
    nn::Tensor forward(const nn::Tensor& input_stack, const nn::Tensor& center_lr) const;

    // Frame-level convenience around build_input + forward.
    Frame super_resolve(const std::vector<Frame>& window, const std::vector<FlowField>& flows) const;

    void save(const std::filesystem::path& dir) const;
    static std::unique_ptr<Generator> load(const std::filesystem::path& dir);

private:
    struct Impl;
    ModelConfig cfg_;
    std::shared_ptr<nn::ParamStore> store_;
    std::shared_ptr<Impl> impl_;
};

size_t param_count(const ModelConfig& cfg);
// 1 - count(pruned)/count(reference)
double reduction_ratio(const ModelConfig& pruned, const ModelConfig& reference);

}  // namespace tinyvsr
