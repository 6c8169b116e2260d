// Copyright (c) 2026 tinyvsr contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tinyvsr/flow.hpp"
#include "tinyvsr/image.hpp"

namespace tinyvsr {

struct MetricReport {
    std::string clip_id;
    double psnr = 0.0;  // +inf when frames identical; serialized as "inf"
    double ssim = 0.0;
    double e_warp = 0.0;            // estimated-flow mode
    std::optional<double> e_warp_gt;  // ground-truth-flow mode, when flows given
    double e_tc = 0.0;
    std::vector<double> psnr_frames, ssim_frames, e_warp_pairs, e_tc_pairs;

    std::string to_json_string() const;
    static MetricReport from_json_string(const std::string& s);
};

// 10*log10(1/MSE) on [0,1] frames; +inf for identical frames.
double psnr(const Frame& a, const Frame& b);

// 11x11 Gaussian window, sigma 1.5, K1 = 0.01, K2 = 0.03, per-channel mean.
double ssim(const Frame& a, const Frame& b);

// mean over consecutive pairs of mean |warp(frame_t, flows[t]) - frame_{t+1}|;
// flows[t] lives on grid t+1 and points into frame t.
double e_warp(const VideoClip& clip, const std::vector<FlowField>& flows);

// mean over consecutive pairs of mean |frame_t - frame_{t+1}| (no alignment).
double e_tc(const VideoClip& clip);

// Row r of the profile is scanline y of frame r, copied bit-exactly.
Frame temporal_profile(const VideoClip& clip, int scanline_y);

// Aggregates PSNR/SSIM against gt plus both temporal metrics on the SR clip.
// E_warp uses flows estimated from the SR clip itself; when ground-truth
// flows are supplied that mode is reported as well.
MetricReport evaluate_clip(const VideoClip& sr, const VideoClip& gt,
                           const std::vector<FlowField>* gt_flows = nullptr);

void write_summary_csv(const std::filesystem::path& path, const std::vector<MetricReport>& reports);

}  // namespace tinyvsr
