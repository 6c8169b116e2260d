// Copyright (c) 2026 tinyvsr contributors
// SPDX-License-Identifier: Apache-2.0
#include "tinyvsr/flow.hpp"

#include <algorithm>
#include <cmath>

namespace tinyvsr {

namespace {

void check_match(const Frame& frame, const FlowField& flow) {
    if (frame.height != flow.height || frame.width != flow.width)
        throw DimensionError(str_cat("warp: frame ", frame.height, "x", frame.width,
                                     " vs flow ", flow.height, "x", flow.width));
}

Frame warp_impl(const Frame& frame, const FlowField& flow, bool clamp) {
    check_match(frame, flow);
    Frame out(frame.height, frame.width, frame.channels);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) {
            const double sx = x + flow.u(y, x);
            const double sy = y + flow.v(y, x);
            for (int c = 0; c < out.channels; ++c) {
                double v = sample_bicubic(frame, sx, sy, c);
                if (clamp) v = std::clamp(v, 0.0, 1.0);
                out.at(y, x, c) = v;
            }
        }
    return out;
}

double sample_bicubic_flow(const FlowField& f, double x, double y, int comp) {
    const int ix = static_cast<int>(std::floor(x));
    const int iy = static_cast<int>(std::floor(y));
    double wx[4], wy[4];
    bicubic_weights(x - ix, wx);
    bicubic_weights(y - iy, wy);
    const auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi - 1); };
    double acc = 0.0;
    for (int j = 0; j < 4; ++j) {
        const int yy = clampi(iy - 1 + j, f.height);
        double row = 0.0;
        for (int i = 0; i < 4; ++i) {
            const int xx = clampi(ix - 1 + i, f.width);
            row += wx[i] * f.vectors[(static_cast<size_t>(yy) * f.width + xx) * 2 + comp];
        }
        acc += wy[j] * row;
    }
    return acc;
}

}  // namespace

Frame backward_warp(const Frame& frame, const FlowField& flow) { return warp_impl(frame, flow, true); }

Frame backward_warp_unclamped(const Frame& frame, const FlowField& flow) {
    return warp_impl(frame, flow, false);
}

FlowField warp_flow(const FlowField& field, const FlowField& by) {
    if (!field.same_shape(by)) throw DimensionError("warp_flow: shape mismatch");
    FlowField out(field.height, field.width);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) {
            const double sx = x + by.u(y, x);
            const double sy = y + by.v(y, x);
            out.u(y, x) = sample_bicubic_flow(field, sx, sy, 0);
            out.v(y, x) = sample_bicubic_flow(field, sx, sy, 1);
        }
    return out;
}

FlowField chain_flows(const FlowField& a_to_b, const FlowField& b_to_c) {
    if (!a_to_b.same_shape(b_to_c)) throw DimensionError("chain_flows: shape mismatch");
    FlowField out(a_to_b.height, a_to_b.width);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) {
            const double sx = x + a_to_b.u(y, x);
            const double sy = y + a_to_b.v(y, x);
            out.u(y, x) = a_to_b.u(y, x) + sample_bicubic_flow(b_to_c, sx, sy, 0);
            out.v(y, x) = a_to_b.v(y, x) + sample_bicubic_flow(b_to_c, sx, sy, 1);
        }
    return out;
}

FlowField resize_flow(const FlowField& flow, int out_h, int out_w) {
    const double scale_x = static_cast<double>(out_w) / flow.width;
    const double scale_y = static_cast<double>(out_h) / flow.height;
    FlowField out(out_h, out_w);
    const double sy = static_cast<double>(flow.height) / out_h;
    const double sx = static_cast<double>(flow.width) / out_w;
    for (int y = 0; y < out_h; ++y) {
        const double src_y = (y + 0.5) * sy - 0.5;
        for (int x = 0; x < out_w; ++x) {
            const double src_x = (x + 0.5) * sx - 0.5;
            out.u(y, x) = sample_bicubic_flow(flow, src_x, src_y, 0) * scale_x;
            out.v(y, x) = sample_bicubic_flow(flow, src_x, src_y, 1) * scale_y;
        }
    }
    return out;
}

namespace {

Frame to_gray(const Frame& f) {
    if (f.channels == 1) return f;
    Frame g(f.height, f.width, 1);
    for (int y = 0; y < f.height; ++y)
        for (int x = 0; x < f.width; ++x)
            g.at(y, x, 0) = (f.at(y, x, 0) + f.at(y, x, 1) + f.at(y, x, 2)) / 3.0;
    return g;
}

Frame half_size(const Frame& f) {
    const Frame blurred = gaussian_blur(f, 0.8);
    const int oh = std::max(1, f.height / 2);
    const int ow = std::max(1, f.width / 2);
    Frame out(oh, ow, 1);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x)
            out.at(y, x, 0) = blurred.at(std::min(2 * y, f.height - 1), std::min(2 * x, f.width - 1), 0);
    return out;
}

// One dense Lucas-Kanade refinement sweep at a single scale.
void lk_refine(const Frame& src, const Frame& dst, FlowField& flow, int window_radius, int iters) {
    const int h = src.height, w = src.width;
    const auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi - 1); };
    for (int it = 0; it < iters; ++it) {
        const Frame warped = backward_warp_unclamped(src, flow);
        // spatial gradients of the warped source (central differences)
        Frame gx(h, w, 1), gy(h, w, 1);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                gx.at(y, x, 0) = 0.5 * (warped.at(y, clampi(x + 1, w), 0) - warped.at(y, clampi(x - 1, w), 0));
                gy.at(y, x, 0) = 0.5 * (warped.at(clampi(y + 1, h), x, 0) - warped.at(clampi(y - 1, h), x, 0));
            }
        FlowField next = flow;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double a11 = 0, a12 = 0, a22 = 0, b1 = 0, b2 = 0;
                for (int dy = -window_radius; dy <= window_radius; ++dy)
                    for (int dx = -window_radius; dx <= window_radius; ++dx) {
                        const int yy = clampi(y + dy, h), xx = clampi(x + dx, w);
                        const double ix = gx.at(yy, xx, 0), iy = gy.at(yy, xx, 0);
                        const double it_err = dst.at(yy, xx, 0) - warped.at(yy, xx, 0);
                        a11 += ix * ix;
                        a12 += ix * iy;
                        a22 += iy * iy;
                        b1 += ix * it_err;
                        b2 += iy * it_err;
                    }
                const double det = a11 * a22 - a12 * a12;
                const double trace = a11 + a22;
                // aperture-degenerate: leave the estimate untouched
                if (det < 1e-12 || trace < 1e-9) continue;
                const double du = (a22 * b1 - a12 * b2) / det;
                const double dv = (a11 * b2 - a12 * b1) / det;
                if (!std::isfinite(du) || !std::isfinite(dv)) continue;
                next.u(y, x) = flow.u(y, x) + std::clamp(du, -2.0, 2.0);
                next.v(y, x) = flow.v(y, x) + std::clamp(dv, -2.0, 2.0);
            }
        flow = std::move(next);
    }
}

// 3x3 component-wise median; standard outlier cleanup between pyramid levels
FlowField median_filter_flow(const FlowField& f) {
    FlowField out(f.height, f.width);
    const auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi - 1); };
    double vals[9];
    for (int y = 0; y < f.height; ++y)
        for (int x = 0; x < f.width; ++x)
            for (int comp = 0; comp < 2; ++comp) {
                int n = 0;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int yy = clampi(y + dy, f.height), xx = clampi(x + dx, f.width);
                        vals[n++] = f.vectors[(static_cast<size_t>(yy) * f.width + xx) * 2 + comp];
                    }
                std::nth_element(vals, vals + 4, vals + 9);
                out.vectors[(static_cast<size_t>(y) * f.width + x) * 2 + comp] = vals[4];
            }
    return out;
}

}  // namespace

FlowField estimate_flow(const Frame& src, const Frame& dst, int levels) {
    if (!src.same_shape(dst)) throw DimensionError("estimate_flow: shape mismatch");
    if (levels < 1) throw ConfigError("estimate_flow: levels must be >= 1");

    std::vector<Frame> src_pyr{to_gray(src)}, dst_pyr{to_gray(dst)};
    for (int l = 1; l < levels; ++l) {
        if (src_pyr.back().height < 8 || src_pyr.back().width < 8) break;
        src_pyr.push_back(half_size(src_pyr.back()));
        dst_pyr.push_back(half_size(dst_pyr.back()));
    }

    FlowField flow(src_pyr.back().height, src_pyr.back().width);
    for (int l = static_cast<int>(src_pyr.size()) - 1; l >= 0; --l) {
        if (flow.height != src_pyr[l].height || flow.width != src_pyr[l].width)
            flow = resize_flow(flow, src_pyr[l].height, src_pyr[l].width);
        lk_refine(src_pyr[l], dst_pyr[l], flow, 4, 4);
        flow = median_filter_flow(flow);
    }
    // a constant pair never produces spurious motion: degenerate pixels keep
    // their zero estimate through every stage, so this is exact
    return flow;
}

VisibilityMask occlusion_mask(const FlowField& flow_fwd, const FlowField& flow_bwd,
                              double alpha, double beta) {
    if (!flow_fwd.same_shape(flow_bwd)) throw DimensionError("occlusion_mask: shape mismatch");
    const FlowField fwd_at_p = warp_flow(flow_fwd, flow_bwd);
    VisibilityMask vis(flow_bwd.height, flow_bwd.width, 0);
    for (int y = 0; y < vis.height; ++y)
        for (int x = 0; x < vis.width; ++x) {
            const double su = flow_bwd.u(y, x) + fwd_at_p.u(y, x);
            const double sv = flow_bwd.v(y, x) + fwd_at_p.v(y, x);
            const double lhs = su * su + sv * sv;
            const double nb = flow_bwd.u(y, x) * flow_bwd.u(y, x) + flow_bwd.v(y, x) * flow_bwd.v(y, x);
            const double nf = fwd_at_p.u(y, x) * fwd_at_p.u(y, x) + fwd_at_p.v(y, x) * fwd_at_p.v(y, x);
            vis.at(y, x) = lhs <= alpha * (nb + nf) + beta ? 1 : 0;
        }
    return vis;
}

Frame motion_weight(const FlowField& flow, double sigma_m, const VisibilityMask& visibility) {
    if (sigma_m <= 0.0) throw ConfigError("motion_weight: sigma_m must be positive");
    if (flow.height != visibility.height || flow.width != visibility.width)
        throw DimensionError("motion_weight: shape mismatch");
    Frame w(flow.height, flow.width, 1);
    for (int y = 0; y < w.height; ++y)
        for (int x = 0; x < w.width; ++x) {
            const double mag = std::hypot(flow.u(y, x), flow.v(y, x));
            w.at(y, x, 0) = std::exp(-mag / sigma_m) * (visibility.at(y, x) ? 1.0 : 0.0);
        }
    return w;
}

}  // namespace tinyvsr
