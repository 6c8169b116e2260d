// Copyright (c) 2026 tinyvsr contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "tinyvsr/flow.hpp"
#include "tinyvsr/tensor.hpp"

namespace tinyvsr {

struct LossConfig {
    double eps = 1e-3;      // Charbonnier knee
    double sigma_m = 8.0;   // motion decay, px
    double gamma = 0.8;     // multi-frame decay
    int window_D = 2;       // consistency window
    double tau = 0.05;      // TV edge temperature
    double occlusion_alpha = 0.01;
    double occlusion_beta = 0.5;
    double lambda_rec = 1.0;
    double lambda_temp = 0.5;
    double lambda_tv = 0.05;
    double lambda_adv_latent = 0.1;
    double lambda_adv_pixel = 0.05;

    void validate() const;
    std::string to_json_string() const;
    static LossConfig from_json_string(const std::string& s);
};

struct LossReport {
    std::vector<std::pair<std::string, double>> terms;
    double total = 0.0;

    void set(const std::string& name, double v) { terms.emplace_back(name, v); }
    double get(const std::string& name) const;
    bool all_finite(std::string* offender = nullptr) const;
};

// mean(sqrt(x^2 + eps^2)); smooth, >= eps everywhere
nn::Tensor charbonnier(const nn::Tensor& x, double eps);

// mean over elements of w(p) * Phi(sr_t(p) - warp(sr_t1, flow)(p)).
// flow lives on sr_t's grid and points into sr_t1; weights is an [H, W]
// single-channel frame (motion_weight output), broadcast over channels.
nn::Tensor temporal_loss(const nn::Tensor& sr_t, const nn::Tensor& sr_t1, const FlowField& flow,
                         const Frame& weights, double eps);

// sum_{d=1..D} gamma^{d-1} * temporal_loss(sr[n-1-d], sr[n-1], chained flow).
// sr_frames are temporally ascending with the anchor last; step flows are the
// adjacent-pair fields at SR resolution (fwd: grid j into j+1; bwd: grid j+1
// into j). d-step flows are composed by chaining, visibility comes from the
// forward/backward consistency check on the composed pair.
nn::Tensor multi_frame_temporal_loss(const std::vector<nn::Tensor>& sr_frames,
                                     const std::vector<FlowField>& step_flows_fwd,
                                     const std::vector<FlowField>& step_flows_bwd,
                                     const LossConfig& cfg);

// mean over elements of w_ij * (|dx sr| + |dy sr|), w = exp(-|grad gt|/tau)
// with |grad gt| the channel-mean |dx|+|dy| magnitude. Gradients are forward
// differences with replicate padding.
nn::Tensor region_aware_tv(const nn::Tensor& sr, const Frame& gt, double tau);

// charbonnier(sr - gt, eps)
nn::Tensor reconstruction_loss(const nn::Tensor& sr, const Frame& gt, double eps);

// Plain (unweighted) mean TV of a frame; the adversarial smoothness report uses it.
double mean_tv(const Frame& f);

}  // namespace tinyvsr
