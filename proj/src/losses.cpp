// Copyright (c) 2026 tinyvsr contributors
// SPDX-License-Identifier: Apache-2.0
#include "tinyvsr/losses.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

namespace tinyvsr {

using nn::Tensor;
using json = nlohmann::json;

void LossConfig::validate() const {
    if (eps <= 0) throw ConfigError("eps must be > 0");
    if (sigma_m <= 0) throw ConfigError("sigma_m must be > 0");
    if (!(gamma > 0 && gamma < 1)) throw ConfigError("gamma must lie in (0, 1)");
    if (window_D < 1) throw ConfigError("window_D must be >= 1");
    if (tau <= 0) throw ConfigError("tau must be > 0");
    if (lambda_rec < 0 || lambda_temp < 0 || lambda_tv < 0 || lambda_adv_latent < 0 ||
        lambda_adv_pixel < 0)
        throw ConfigError("loss weights must be non-negative");
}

std::string LossConfig::to_json_string() const {
    json j = {{"eps", eps},
              {"sigma_m", sigma_m},
              {"gamma", gamma},
              {"window_D", window_D},
              {"tau", tau},
              {"occlusion_alpha", occlusion_alpha},
              {"occlusion_beta", occlusion_beta},
              {"lambda_rec", lambda_rec},
              {"lambda_temp", lambda_temp},
              {"lambda_tv", lambda_tv},
              {"lambda_adv_latent", lambda_adv_latent},
              {"lambda_adv_pixel", lambda_adv_pixel}};
    return j.dump(2);
}

LossConfig LossConfig::from_json_string(const std::string& s) {
    json j;
    try {
        j = json::parse(s);
    } catch (const json::exception& e) {
        throw ConfigError(str_cat("bad loss config json: ", e.what()));
    }
    LossConfig cfg;
    cfg.eps = j.value("eps", cfg.eps);
    cfg.sigma_m = j.value("sigma_m", cfg.sigma_m);
    cfg.gamma = j.value("gamma", cfg.gamma);
    cfg.window_D = j.value("window_D", cfg.window_D);
    cfg.tau = j.value("tau", cfg.tau);
    cfg.occlusion_alpha = j.value("occlusion_alpha", cfg.occlusion_alpha);
    cfg.occlusion_beta = j.value("occlusion_beta", cfg.occlusion_beta);
    cfg.lambda_rec = j.value("lambda_rec", cfg.lambda_rec);
    cfg.lambda_temp = j.value("lambda_temp", cfg.lambda_temp);
    cfg.lambda_tv = j.value("lambda_tv", cfg.lambda_tv);
    cfg.lambda_adv_latent = j.value("lambda_adv_latent", cfg.lambda_adv_latent);
    cfg.lambda_adv_pixel = j.value("lambda_adv_pixel", cfg.lambda_adv_pixel);
    cfg.validate();
    return cfg;
}

double LossReport::get(const std::string& name) const {
    for (const auto& [k, v] : terms)
        if (k == name) return v;
    throw ContractError(str_cat("loss report has no term ", name));
}

bool LossReport::all_finite(std::string* offender) const {
    for (const auto& [k, v] : terms)
        if (!std::isfinite(v)) {
            if (offender) *offender = k;
            return false;
        }
    if (!std::isfinite(total)) {
        if (offender) *offender = "total";
        return false;
    }
    return true;
}

Tensor charbonnier(const nn::Tensor& x, double eps) {
    if (eps <= 0) throw ConfigError("charbonnier: eps must be > 0");
    return nn::mean(nn::sqrt_op(nn::affine(nn::square(x), 1.0, eps * eps)));
}

Tensor temporal_loss(const nn::Tensor& sr_t, const nn::Tensor& sr_t1, const FlowField& flow,
                     const Frame& weights, double eps) {
    if (sr_t.shape() != sr_t1.shape())
        throw DimensionError("temporal_loss: frame shape mismatch");
    if (weights.height != sr_t.dim(1) || weights.width != sr_t.dim(2) || weights.channels != 1)
        throw DimensionError("temporal_loss: weight map shape mismatch");
    // the later frame is warped back onto the earlier grid so the earlier
    // target stays blur-free
    Tensor diff = nn::sub(sr_t, nn::bicubic_warp(sr_t1, flow));
    Tensor phi = nn::sqrt_op(nn::affine(nn::square(diff), 1.0, eps * eps));
    return nn::mean(nn::mul_channel_map(phi, nn::from_weight_map(weights)));
}

Tensor multi_frame_temporal_loss(const std::vector<nn::Tensor>& sr_frames,
                                 const std::vector<FlowField>& step_flows_fwd,
                                 const std::vector<FlowField>& step_flows_bwd,
                                 const LossConfig& cfg) {
    cfg.validate();
    const int n = static_cast<int>(sr_frames.size());
    if (n < cfg.window_D + 1)
        throw ContractError(str_cat("multi_frame_temporal_loss: need ", cfg.window_D + 1,
                                    " frames, got ", n));
    if (static_cast<int>(step_flows_fwd.size()) != n - 1 ||
        static_cast<int>(step_flows_bwd.size()) != n - 1)
        throw ContractError("multi_frame_temporal_loss: need one flow pair per adjacent frame pair");

    const int anchor = n - 1;
    std::vector<Tensor> terms;
    std::vector<double> coeffs;
    double coeff = 1.0;
    // chains grow incrementally: earlier->anchor on the earlier grid, and
    // anchor->earlier on the anchor grid
    FlowField to_anchor;   // grid e -> frame a
    FlowField from_anchor; // grid a -> frame e
    for (int d = 1; d <= cfg.window_D; ++d) {
        const int e = anchor - d;
        if (d == 1) {
            to_anchor = step_flows_fwd[static_cast<size_t>(e)];
            from_anchor = step_flows_bwd[static_cast<size_t>(anchor - 1)];
        } else {
            to_anchor = chain_flows(step_flows_fwd[static_cast<size_t>(e)], to_anchor);
            from_anchor = chain_flows(from_anchor, step_flows_bwd[static_cast<size_t>(e)]);
        }
        // consistency check on the composed pair; output grid is frame e's
        const VisibilityMask vis = occlusion_mask(from_anchor, to_anchor, cfg.occlusion_alpha,
                                                  cfg.occlusion_beta);
        const Frame w = motion_weight(to_anchor, cfg.sigma_m, vis);
        terms.push_back(temporal_loss(sr_frames[static_cast<size_t>(e)],
                                      sr_frames[static_cast<size_t>(anchor)], to_anchor, w, cfg.eps));
        coeffs.push_back(coeff);
        coeff *= cfg.gamma;
    }
    return nn::weighted_sum(terms, coeffs);
}

namespace {

Frame tv_weight_map(const Frame& gt, double tau) {
    Frame w(gt.height, gt.width, 1);
    for (int y = 0; y < gt.height; ++y)
        for (int x = 0; x < gt.width; ++x) {
            double mag = 0.0;
            for (int c = 0; c < gt.channels; ++c) {
                const double dx = x + 1 < gt.width ? gt.at(y, x + 1, c) - gt.at(y, x, c) : 0.0;
                const double dy = y + 1 < gt.height ? gt.at(y + 1, x, c) - gt.at(y, x, c) : 0.0;
                mag += std::abs(dx) + std::abs(dy);
            }
            mag /= gt.channels;
            w.at(y, x, 0) = std::exp(-mag / tau);
        }
    return w;
}

}  // namespace

Tensor region_aware_tv(const nn::Tensor& sr, const Frame& gt, double tau) {
    if (tau <= 0) throw ConfigError("region_aware_tv: tau must be > 0");
    if (sr.dim(1) != gt.height || sr.dim(2) != gt.width || sr.dim(0) != gt.channels)
        throw DimensionError("region_aware_tv: shape mismatch");
    Tensor tv = nn::add(nn::abs_op(nn::forward_diff_x(sr)), nn::abs_op(nn::forward_diff_y(sr)));
    return nn::mean(nn::mul_channel_map(tv, nn::from_weight_map(tv_weight_map(gt, tau))));
}

Tensor reconstruction_loss(const nn::Tensor& sr, const Frame& gt, double eps) {
    if (sr.dim(1) != gt.height || sr.dim(2) != gt.width || sr.dim(0) != gt.channels)
        throw DimensionError("reconstruction_loss: shape mismatch");
    return charbonnier(nn::sub(sr, nn::from_frame(gt)), eps);
}

double mean_tv(const Frame& f) {
    double acc = 0.0;
    for (int c = 0; c < f.channels; ++c)
        for (int y = 0; y < f.height; ++y)
            for (int x = 0; x < f.width; ++x) {
                if (x + 1 < f.width) acc += std::abs(f.at(y, x + 1, c) - f.at(y, x, c));
                if (y + 1 < f.height) acc += std::abs(f.at(y + 1, x, c) - f.at(y, x, c));
            }
    return acc / static_cast<double>(f.size());
}

}  // namespace tinyvsr
