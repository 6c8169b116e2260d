// Copyright (c) 2026 tinyvsr contributors
// SPDX-License-Identifier: Apache-2.0
#include "tinyvsr/image.hpp"

#include <algorithm>
#include <cmath>

namespace tinyvsr {

double max_abs_diff(const Frame& a, const Frame& b) {
    if (!a.same_shape(b)) throw DimensionError("max_abs_diff: shape mismatch");
    double m = 0.0;
    for (size_t i = 0; i < a.pixels.size(); ++i) m = std::max(m, std::abs(a.pixels[i] - b.pixels[i]));
    return m;
}

double mean_abs_diff(const Frame& a, const Frame& b) {
    if (!a.same_shape(b)) throw DimensionError("mean_abs_diff: shape mismatch");
    double s = 0.0;
    for (size_t i = 0; i < a.pixels.size(); ++i) s += std::abs(a.pixels[i] - b.pixels[i]);
    return s / static_cast<double>(a.pixels.size());
}

double mse(const Frame& a, const Frame& b) {
    if (!a.same_shape(b)) throw DimensionError("mse: shape mismatch");
    double s = 0.0;
    for (size_t i = 0; i < a.pixels.size(); ++i) {
        const double d = a.pixels[i] - b.pixels[i];
        s += d * d;
    }
    return s / static_cast<double>(a.pixels.size());
}

Frame random_frame(int h, int w, int c, Rng& rng, double lo, double hi) {
    Frame f(h, w, c);
    for (double& v : f.pixels) v = rng.uniform(lo, hi);
    return f;
}

Frame gaussian_blur(const Frame& src, double sigma) {
    if (sigma <= 0.0) return src;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += kernel[i + radius];
    }
    for (double& k : kernel) k /= sum;

    const auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi - 1); };
    Frame tmp(src.height, src.width, src.channels);
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x)
            for (int c = 0; c < src.channels; ++c) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += kernel[i + radius] * src.at(y, clampi(x + i, src.width), c);
                tmp.at(y, x, c) = acc;
            }
    Frame out(src.height, src.width, src.channels);
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x)
            for (int c = 0; c < src.channels; ++c) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += kernel[i + radius] * tmp.at(clampi(y + i, src.height), x, c);
                out.at(y, x, c) = acc;
            }
    return out;
}

void bicubic_weights(double t, double w[4]) {
    // Catmull-Rom: a = -0.5
    constexpr double a = -0.5;
    const double t2 = t * t;
    const double t3 = t2 * t;
    w[0] = a * (t3 - 2.0 * t2 + t);
    w[1] = (a + 2.0) * t3 - (a + 3.0) * t2 + 1.0;
    w[2] = -(a + 2.0) * t3 + (2.0 * a + 3.0) * t2 - a * t;
    w[3] = a * (t2 - t3);
}

double sample_bicubic(const Frame& src, double x, double y, int c) {
    const int ix = static_cast<int>(std::floor(x));
    const int iy = static_cast<int>(std::floor(y));
    double wx[4], wy[4];
    bicubic_weights(x - ix, wx);
    bicubic_weights(y - iy, wy);
    const auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi - 1); };
    double acc = 0.0;
    for (int j = 0; j < 4; ++j) {
        const int yy = clampi(iy - 1 + j, src.height);
        double row = 0.0;
        for (int i = 0; i < 4; ++i) row += wx[i] * src.at(yy, clampi(ix - 1 + i, src.width), c);
        acc += wy[j] * row;
    }
    return acc;
}

Frame resize_bicubic(const Frame& src, int out_h, int out_w) {
    if (out_h <= 0 || out_w <= 0) throw DimensionError("resize_bicubic: bad output size");
    Frame out(out_h, out_w, src.channels);
    const double sy = static_cast<double>(src.height) / out_h;
    const double sx = static_cast<double>(src.width) / out_w;
    for (int y = 0; y < out_h; ++y) {
        const double src_y = (y + 0.5) * sy - 0.5;
        for (int x = 0; x < out_w; ++x) {
            const double src_x = (x + 0.5) * sx - 0.5;
            for (int c = 0; c < src.channels; ++c) out.at(y, x, c) = sample_bicubic(src, src_x, src_y, c);
        }
    }
    return out;
}

Frame downsample_area(const Frame& src, int factor) {
    if (factor < 1) throw ConfigError("downsample_area: factor must be >= 1");
    if (factor == 1) return src;
    if (src.height % factor != 0 || src.width % factor != 0)
        throw DimensionError(str_cat("downsample_area: ", src.height, "x", src.width,
                                     " not divisible by ", factor));
    Frame out(src.height / factor, src.width / factor, src.channels);
    const double inv = 1.0 / (factor * factor);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            for (int c = 0; c < src.channels; ++c) {
                double acc = 0.0;
                for (int dy = 0; dy < factor; ++dy)
                    for (int dx = 0; dx < factor; ++dx) acc += src.at(y * factor + dy, x * factor + dx, c);
                out.at(y, x, c) = acc * inv;
            }
    return out;
}

}  // namespace tinyvsr
