// Copyright (c) 2026 tinyvsr contributors
// SPDX-License-Identifier: Apache-2.0
#include "tinyvsr/synth.hpp"

#include <algorithm>
#include <cmath>

namespace tinyvsr {

ScenePattern scene_pattern_from_string(const std::string& s) {
    if (s == "checker") return ScenePattern::kChecker;
    if (s == "sinusoid-texture") return ScenePattern::kSinusoid;
    if (s == "textured-sprites") return ScenePattern::kTexturedSprites;
    throw ConfigError(str_cat("unknown scene pattern: ", s));
}

std::string to_string(ScenePattern p) {
    switch (p) {
        case ScenePattern::kChecker: return "checker";
        case ScenePattern::kSinusoid: return "sinusoid-texture";
        case ScenePattern::kTexturedSprites: return "textured-sprites";
    }
    return "?";
}

void SceneSpec::validate() const {
    if (height <= 0 || width <= 0) throw ConfigError(str_cat("bad scene dims ", height, "x", width));
    if (num_frames < 1) throw ConfigError("num_frames must be >= 1");
    if (supersample < 1) throw ConfigError("supersample must be >= 1");
    auto check_rect = [](const RectSpec& r, const char* kind) {
        if (!(std::isfinite(r.vx) && std::isfinite(r.vy)))
            throw ConfigError(str_cat(kind, " velocity must be finite"));
        if (r.w <= 0 || r.h <= 0) throw ConfigError(str_cat(kind, " must have positive extent"));
    };
    for (const auto& s : sprites) check_rect(s, "sprite");
    for (const auto& o : occluders) check_rect(o, "occluder");
    if (!(std::isfinite(background_vx) && std::isfinite(background_vy)))
        throw ConfigError("background velocity must be finite");
}

namespace {

// Analytic layer texture: a low-frequency sinusoid mixture or a checker,
// in layer-local coordinates so content translates rigidly with the layer.
struct Texture {
    bool checker = false;
    double checker_size = 8.0;
    double base[3] = {0.5, 0.5, 0.5};
    double alt[3] = {0.2, 0.2, 0.2};
    struct Wave {
        double fx, fy, phase, amp;
    };
    std::vector<Wave> waves;  // shared across channels, per-channel phase shift

    double eval(double x, double y, int c) const {
        if (checker) {
            const long cx = static_cast<long>(std::floor(x / checker_size));
            const long cy = static_cast<long>(std::floor(y / checker_size));
            return ((cx + cy) & 1) ? alt[c] : base[c];
        }
        double v = base[c];
        for (const auto& w : waves)
            v += w.amp * std::sin(6.283185307179586 * (w.fx * x + w.fy * y) + w.phase + 1.7 * c);
        return std::clamp(v, 0.0, 1.0);
    }
};

Texture make_texture(Rng& rng, bool checker) {
    Texture t;
    t.checker = checker;
    if (checker) {
        t.checker_size = static_cast<double>(rng.uniform_int(4, 10));
        for (int c = 0; c < 3; ++c) {
            t.base[c] = rng.uniform(0.55, 0.9);
            t.alt[c] = rng.uniform(0.1, 0.45);
        }
        return t;
    }
    for (int c = 0; c < 3; ++c) t.base[c] = rng.uniform(0.35, 0.65);
    const int n_waves = static_cast<int>(rng.uniform_int(3, 5));
    for (int i = 0; i < n_waves; ++i) {
        Texture::Wave w;
        w.fx = rng.uniform(0.02, 0.09);
        w.fy = rng.uniform(0.02, 0.09);
        if (rng.uniform() < 0.5) w.fx = -w.fx;
        w.phase = rng.uniform(0.0, 6.283185307179586);
        w.amp = rng.uniform(0.05, 0.13);
        t.waves.push_back(w);
    }
    return t;
}

struct Layer {
    bool is_background = false;
    RectSpec rect;  // ignored for background
    Texture texture;
    int z = 0;  // higher occludes lower

    bool contains(double x, double y, int t) const {
        if (is_background) return true;
        const double rx = rect.x + t * rect.vx;
        const double ry = rect.y + t * rect.vy;
        return x >= rx && x < rx + rect.w && y >= ry && y < ry + rect.h;
    }
    double vx() const { return rect.vx; }
    double vy() const { return rect.vy; }
};

struct Scene {
    std::vector<Layer> layers;  // ascending z; last drawn on top

    // highest layer covering (x, y) at frame t
    int top_layer(double x, double y, int t) const {
        for (int i = static_cast<int>(layers.size()) - 1; i >= 0; --i)
            if (layers[i].contains(x, y, t)) return i;
        return 0;
    }

    double color(double x, double y, int t, int c) const {
        const Layer& l = layers[top_layer(x, y, t)];
        // layer-local coordinates: texture rides along with the motion
        return l.texture.eval(x - t * l.vx(), y - t * l.vy(), c);
    }
};

Scene build_scene(const SceneSpec& spec) {
    Rng rng(mix_seed(spec.seed, 0xC0FFEE));
    Scene scene;

    Layer bg;
    bg.is_background = true;
    bg.rect.vx = spec.background_vx;
    bg.rect.vy = spec.background_vy;
    bg.texture = make_texture(rng, spec.pattern == ScenePattern::kChecker);
    bg.z = 0;
    scene.layers.push_back(bg);

    int z = 1;
    for (const auto& s : spec.sprites) {
        Layer l;
        l.rect = s;
        l.texture = make_texture(rng, rng.uniform() < 0.35);
        l.z = z++;
        scene.layers.push_back(l);
    }
    for (const auto& o : spec.occluders) {
        Layer l;
        l.rect = o;
        l.texture = make_texture(rng, false);
        // near-flat occluder so it reads as a solid foreground object
        l.texture.waves.resize(1);
        l.texture.waves[0].amp = 0.03;
        l.z = z++;
        scene.layers.push_back(l);
    }
    return scene;
}

}  // namespace

SyntheticClip generate_synthetic_clip(const SceneSpec& spec) {
    spec.validate();
    const Scene scene = build_scene(spec);
    const int ss = spec.supersample;
    const double inv_ss2 = 1.0 / (ss * ss);

    SyntheticClip out;
    out.clip.fps = spec.fps;
    out.clip.id = spec.id.empty() ? str_cat("scene_", spec.seed) : spec.id;

    for (int t = 0; t < spec.num_frames; ++t) {
        Frame f(spec.height, spec.width, 3);
        for (int y = 0; y < spec.height; ++y)
            for (int x = 0; x < spec.width; ++x)
                for (int c = 0; c < 3; ++c) {
                    double acc = 0.0;
                    for (int sy = 0; sy < ss; ++sy)
                        for (int sx = 0; sx < ss; ++sx)
                            acc += scene.color(x + (sx + 0.5) / ss - 0.5, y + (sy + 0.5) / ss - 0.5, t, c);
                    f.at(y, x, c) = acc * inv_ss2;
                }
        out.clip.frames.push_back(std::move(f));
    }

    const auto in_bounds = [&](double x, double y) {
        return x >= 0.0 && x <= spec.width - 1.0 && y >= 0.0 && y <= spec.height - 1.0;
    };
    // A pixel belongs to a single surface only when every AA subsample sees
    // the same top layer; mixed-coverage boundary pixels have no well-defined
    // correspondence and are masked invisible.
    const auto pure_layer = [&](double px, double py, int t) -> int {
        const int first = scene.top_layer(px + 0.5 / ss - 0.5, py + 0.5 / ss - 0.5, t);
        for (int sy = 0; sy < ss; ++sy)
            for (int sx = 0; sx < ss; ++sx)
                if (scene.top_layer(px + (sx + 0.5) / ss - 0.5, py + (sy + 0.5) / ss - 0.5, t) != first)
                    return -1;
        return first;
    };

    for (int t = 0; t + 1 < spec.num_frames; ++t) {
        FlowField fwd(spec.height, spec.width), bwd(spec.height, spec.width);
        VisibilityMask vfwd(spec.height, spec.width), vbwd(spec.height, spec.width);
        for (int y = 0; y < spec.height; ++y)
            for (int x = 0; x < spec.width; ++x) {
                {  // grid t -> frame t+1
                    const int li = scene.top_layer(x, y, t);
                    const Layer& l = scene.layers[li];
                    fwd.u(y, x) = l.vx();
                    fwd.v(y, x) = l.vy();
                    const double qx = x + l.vx(), qy = y + l.vy();
                    vfwd.at(y, x) = in_bounds(qx, qy) && pure_layer(x, y, t) == li &&
                                            pure_layer(qx, qy, t + 1) == li
                                        ? 1
                                        : 0;
                }
                {  // grid t+1 -> frame t
                    const int li = scene.top_layer(x, y, t + 1);
                    const Layer& l = scene.layers[li];
                    bwd.u(y, x) = -l.vx();
                    bwd.v(y, x) = -l.vy();
                    const double qx = x - l.vx(), qy = y - l.vy();
                    vbwd.at(y, x) = in_bounds(qx, qy) && pure_layer(x, y, t + 1) == li &&
                                            pure_layer(qx, qy, t) == li
                                        ? 1
                                        : 0;
                }
            }
        out.flows_fwd.push_back(std::move(fwd));
        out.flows_bwd.push_back(std::move(bwd));
        out.vis_fwd.push_back(std::move(vfwd));
        out.vis_bwd.push_back(std::move(vbwd));
    }
    return out;
}

SceneSpec random_scene_spec(ScenePattern pattern, int height, int width, int num_frames,
                            std::uint64_t seed) {
    Rng rng(mix_seed(seed, 0x5CE7E));
    SceneSpec spec;
    spec.pattern = pattern;
    spec.height = height;
    spec.width = width;
    spec.num_frames = num_frames;
    spec.seed = seed;
    spec.id = str_cat("clip_", seed);

    auto int_vel = [&](int lo, int hi) { return static_cast<double>(rng.uniform_int(lo, hi)); };

    if (pattern == ScenePattern::kTexturedSprites) {
        const int n_sprites = static_cast<int>(rng.uniform_int(2, 3));
        for (int i = 0; i < n_sprites; ++i) {
            RectSpec r;
            r.w = std::max(8.0, std::floor(width * rng.uniform(0.2, 0.4)));
            r.h = std::max(8.0, std::floor(height * rng.uniform(0.2, 0.4)));
            r.x = std::floor(rng.uniform(0.0, width - r.w));
            r.y = std::floor(rng.uniform(0.0, height - r.h));
            r.vx = int_vel(-3, 3);
            r.vy = int_vel(-2, 2);
            spec.sprites.push_back(r);
        }
        RectSpec occ;
        occ.w = std::max(6.0, std::floor(width * rng.uniform(0.12, 0.22)));
        occ.h = std::max(6.0, std::floor(height * rng.uniform(0.3, 0.6)));
        occ.x = std::floor(rng.uniform(width * 0.25, width * 0.6));
        occ.y = std::floor(rng.uniform(0.0, height - occ.h));
        occ.vx = int_vel(-2, 2);
        occ.vy = 0;
        spec.occluders.push_back(occ);
    } else if (pattern == ScenePattern::kSinusoid) {
        spec.background_vx = int_vel(-2, 2);
        spec.background_vy = int_vel(-1, 1);
    }
    return spec;
}

void DegradationConfig::validate() const {
    if (blur_sigma_lo > blur_sigma_hi || noise_sigma_lo > noise_sigma_hi ||
        jpeg_quality_lo > jpeg_quality_hi)
        throw ConfigError("degradation ranges must satisfy lo <= hi");
    if (blur_sigma_lo < 0 || noise_sigma_lo < 0) throw ConfigError("degradation sigmas must be >= 0");
    if (downscale_factor < 1) throw ConfigError("downscale_factor must be >= 1");
    if (jpeg_quality_lo < 1 || jpeg_quality_hi > 100) throw ConfigError("jpeg quality must lie in [1, 100]");
}

namespace {

// Orthonormal 8x8 DCT-II basis, computed once.
struct Dct8 {
    double basis[8][8];
    Dct8() {
        for (int k = 0; k < 8; ++k) {
            const double scale = k == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
            for (int n = 0; n < 8; ++n)
                basis[k][n] = scale * std::cos((2 * n + 1) * k * 3.141592653589793 / 16.0);
        }
    }
};

// Standard JPEG luminance quantization table (Annex K), applied per channel.
constexpr int kQuantTable[64] = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

}  // namespace

Frame jpeg_quantize(const Frame& src, int quality) {
    if (quality < 1 || quality > 100) throw ConfigError("jpeg quality must lie in [1, 100]");
    if (quality == 100) return src;  // exact bypass
    static const Dct8 dct;
    const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
    double q[64];
    for (int i = 0; i < 64; ++i) q[i] = std::max(1, (kQuantTable[i] * scale + 50) / 100);

    const int bh = (src.height + 7) / 8, bw = (src.width + 7) / 8;
    Frame out(src.height, src.width, src.channels);
    const auto clampi = [](int v, int hi) { return std::min(v, hi - 1); };
    double block[8][8], coef[8][8];
    for (int c = 0; c < src.channels; ++c)
        for (int by = 0; by < bh; ++by)
            for (int bx = 0; bx < bw; ++bx) {
                for (int y = 0; y < 8; ++y)  // replicate-pad partial edge blocks
                    for (int x = 0; x < 8; ++x)
                        block[y][x] = src.at(clampi(by * 8 + y, src.height), clampi(bx * 8 + x, src.width), c) * 255.0 - 128.0;
                for (int ky = 0; ky < 8; ++ky)
                    for (int kx = 0; kx < 8; ++kx) {
                        double acc = 0.0;
                        for (int y = 0; y < 8; ++y)
                            for (int x = 0; x < 8; ++x)
                                acc += dct.basis[ky][y] * dct.basis[kx][x] * block[y][x];
                        const double qv = q[ky * 8 + kx];
                        coef[ky][kx] = std::round(acc / qv) * qv;
                    }
                for (int y = 0; y < 8; ++y)
                    for (int x = 0; x < 8; ++x) {
                        if (by * 8 + y >= src.height || bx * 8 + x >= src.width) continue;
                        double acc = 0.0;
                        for (int ky = 0; ky < 8; ++ky)
                            for (int kx = 0; kx < 8; ++kx)
                                acc += dct.basis[ky][y] * dct.basis[kx][x] * coef[ky][kx];
                        out.at(by * 8 + y, bx * 8 + x, c) = std::clamp((acc + 128.0) / 255.0, 0.0, 1.0);
                    }
            }
    return out;
}

VideoClip degrade_clip(const VideoClip& hr, const DegradationConfig& cfg) {
    hr.validate();
    cfg.validate();
    if (hr.height() % cfg.downscale_factor != 0 || hr.width() % cfg.downscale_factor != 0)
        throw DimensionError(str_cat("clip ", hr.height(), "x", hr.width(), " not divisible by factor ",
                                     cfg.downscale_factor));

    // one parameter draw per clip; per-frame noise continues the same stream
    Rng rng(mix_seed(cfg.seed, 0xDE64ADE));
    const double blur_sigma = rng.uniform(cfg.blur_sigma_lo, cfg.blur_sigma_hi);
    const double noise_sigma = rng.uniform(cfg.noise_sigma_lo, cfg.noise_sigma_hi);
    const int quality = static_cast<int>(rng.uniform_int(cfg.jpeg_quality_lo, cfg.jpeg_quality_hi));

    VideoClip lr;
    lr.fps = hr.fps;
    lr.id = hr.id;
    for (const Frame& frame : hr.frames) {
        Frame f = gaussian_blur(frame, blur_sigma);
        if (cfg.downscale_factor > 1)
            f = resize_bicubic(f, frame.height / cfg.downscale_factor, frame.width / cfg.downscale_factor);
        if (noise_sigma > 0.0)
            for (double& v : f.pixels) v += rng.normal(0.0, noise_sigma);
        f.clamp01();
        f = jpeg_quantize(f, quality);
        lr.frames.push_back(std::move(f));
    }
    return lr;
}

}  // namespace tinyvsr
