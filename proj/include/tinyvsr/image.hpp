// Copyright (c) 2026 tinyvsr contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "tinyvsr/common.hpp"

namespace tinyvsr {

// Planar-free HWC image, values nominally in [0, 1], double precision.
struct Frame {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> pixels;  // row-major (y, x, c)

    Frame() = default;
    Frame(int h, int w, int c, double fill = 0.0)
        : height(h), width(w), channels(c), pixels(static_cast<size_t>(h) * w * c, fill) {
        if (h <= 0 || w <= 0 || (c != 1 && c != 3))
            throw DimensionError(str_cat("bad frame shape ", h, "x", w, "x", c));
    }

    double& at(int y, int x, int c) { return pixels[(static_cast<size_t>(y) * width + x) * channels + c]; }
    double at(int y, int x, int c) const { return pixels[(static_cast<size_t>(y) * width + x) * channels + c]; }

    size_t size() const { return pixels.size(); }
    bool same_shape(const Frame& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }

    Frame& clamp01() {
        for (double& v : pixels) v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        return *this;
    }
};

struct VideoClip {
    std::vector<Frame> frames;
    double fps = 30.0;
    std::string id;

    int num_frames() const { return static_cast<int>(frames.size()); }
    int height() const { return frames.empty() ? 0 : frames[0].height; }
    int width() const { return frames.empty() ? 0 : frames[0].width; }
    int channels() const { return frames.empty() ? 0 : frames[0].channels; }

    void validate() const {
        if (frames.empty()) throw ContractError("clip must hold at least one frame");
        for (size_t i = 1; i < frames.size(); ++i)
            if (!frames[i].same_shape(frames[0]))
                throw DimensionError(str_cat("clip frame ", i, " shape differs from frame 0"));
        if (fps <= 0.0) throw ConfigError("fps must be positive");
    }
};

// Elementwise helpers used all over tests and metrics.
double max_abs_diff(const Frame& a, const Frame& b);
double mean_abs_diff(const Frame& a, const Frame& b);
double mse(const Frame& a, const Frame& b);

Frame random_frame(int h, int w, int c, Rng& rng, double lo = 0.0, double hi = 1.0);

// Separable Gaussian blur, replicate borders. sigma <= 0 is the identity.
Frame gaussian_blur(const Frame& src, double sigma);

// Catmull-Rom bicubic resize to (out_h, out_w), replicate borders,
// half-pixel center alignment. Output is not clamped.
Frame resize_bicubic(const Frame& src, int out_h, int out_w);

// Mean over factor x factor blocks; dims must divide.
Frame downsample_area(const Frame& src, int factor);

// Catmull-Rom (a = -0.5) weights for samples at offsets {-1, 0, 1, 2},
// t in [0, 1). t = 0 yields {0, 1, 0, 0} exactly.
void bicubic_weights(double t, double w[4]);

// Point sample at continuous (x, y) with replicate borders, no clamp.
double sample_bicubic(const Frame& src, double x, double y, int c);

}  // namespace tinyvsr
