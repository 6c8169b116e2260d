// Copyright (c) 2026 tinyvsr contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "tinyvsr/image.hpp"

namespace tinyvsr {

// Per-pixel 2D displacement in pixel units. A flow field lives on the grid
// of the frame it produces (the warp target): the sample source for output
// pixel p is p + flow(p). For a pair (t, t+1):
//   - the "bwd" field lives on grid t+1 and points into frame t,
//     so backward_warp(frame_t, bwd) reproduces frame t+1;
//   - the "fwd" field lives on grid t and points into frame t+1.
struct FlowField {
    int height = 0;
    int width = 0;
    std::vector<double> vectors;  // row-major (y, x, {u, v}); u horizontal, v vertical

    FlowField() = default;
    FlowField(int h, int w, double u0 = 0.0, double v0 = 0.0) : height(h), width(w) {
        if (h <= 0 || w <= 0) throw DimensionError("bad flow shape");
        vectors.resize(static_cast<size_t>(h) * w * 2);
        for (size_t i = 0; i < vectors.size(); i += 2) {
            vectors[i] = u0;
            vectors[i + 1] = v0;
        }
    }

    double& u(int y, int x) { return vectors[(static_cast<size_t>(y) * width + x) * 2]; }
    double u(int y, int x) const { return vectors[(static_cast<size_t>(y) * width + x) * 2]; }
    double& v(int y, int x) { return vectors[(static_cast<size_t>(y) * width + x) * 2 + 1]; }
    double v(int y, int x) const { return vectors[(static_cast<size_t>(y) * width + x) * 2 + 1]; }

    bool same_shape(const FlowField& o) const { return height == o.height && width == o.width; }
};

struct VisibilityMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> mask;  // {0, 1}

    VisibilityMask() = default;
    VisibilityMask(int h, int w, std::uint8_t fill = 1)
        : height(h), width(w), mask(static_cast<size_t>(h) * w, fill) {
        if (h <= 0 || w <= 0) throw DimensionError("bad mask shape");
    }

    std::uint8_t& at(int y, int x) { return mask[static_cast<size_t>(y) * width + x]; }
    std::uint8_t at(int y, int x) const { return mask[static_cast<size_t>(y) * width + x]; }
    double visible_fraction() const {
        size_t n = 0;
        for (auto m : mask) n += m ? 1 : 0;
        return mask.empty() ? 0.0 : static_cast<double>(n) / mask.size();
    }
};

// output(p) = bicubic_sample(frame, p + flow(p)), replicate borders,
// clamped to [0, 1]. Flow shape must match the frame.
Frame backward_warp(const Frame& frame, const FlowField& flow);

// Same sampling without the [0,1] clamp; this is the value the loss path
// differentiates through, and it is exactly linear in the frame argument.
Frame backward_warp_unclamped(const Frame& frame, const FlowField& flow);

// Resample a flow field by another flow (used by occlusion checks and for
// chaining): out(p) = field(p + by(p)), bicubic, replicate borders.
FlowField warp_flow(const FlowField& field, const FlowField& by);

// a_to_b on grid A into B; b_to_c on grid B into C. Result on grid A into C:
// out(p) = a_to_b(p) + b_to_c(p + a_to_b(p)).
FlowField chain_flows(const FlowField& a_to_b, const FlowField& b_to_c);

// Bicubic-resize a flow field and rescale its vectors to the new grid.
FlowField resize_flow(const FlowField& flow, int out_h, int out_w);

// Coarse-to-fine Lucas-Kanade. Returns the flow on dst's grid pointing into
// src, i.e. backward_warp(src, flow) ~ dst. Constant images give exact zero.
FlowField estimate_flow(const Frame& src, const Frame& dst, int levels = 3);

// Forward/backward consistency check. flow_bwd lives on the output grid,
// flow_fwd on the opposite frame. Pixel p is visible iff
//   |flow_bwd(p) + flow_fwd(p + flow_bwd(p))|^2
//     <= alpha * (|flow_bwd(p)|^2 + |flow_fwd(p + flow_bwd(p))|^2) + beta.
VisibilityMask occlusion_mask(const FlowField& flow_fwd, const FlowField& flow_bwd,
                              double alpha = 0.01, double beta = 0.5);

// w(p) = exp(-|flow(p)|_2 / sigma_m) * visibility(p), returned as a
// single-channel frame in [0, 1].
Frame motion_weight(const FlowField& flow, double sigma_m, const VisibilityMask& visibility);

}  // namespace tinyvsr
