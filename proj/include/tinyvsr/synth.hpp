// Copyright (c) 2026 tinyvsr contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tinyvsr/flow.hpp"
#include "tinyvsr/image.hpp"

namespace tinyvsr {

enum class ScenePattern { kChecker, kSinusoid, kTexturedSprites };

ScenePattern scene_pattern_from_string(const std::string& s);
std::string to_string(ScenePattern p);

// Axis-aligned rect translating rigidly at (vx, vy) px/frame.
struct RectSpec {
    double x = 0, y = 0, w = 0, h = 0;
    double vx = 0, vy = 0;
};

// Piecewise-rigid scene: textured background, translating textured sprites,
// opaque occluders on top. Rigid translation keeps ground-truth flow and
// visibility exactly computable.
struct SceneSpec {
    ScenePattern pattern = ScenePattern::kTexturedSprites;
    std::vector<RectSpec> sprites;
    std::vector<RectSpec> occluders;
    double background_vx = 0.0, background_vy = 0.0;
    int num_frames = 7;
    int height = 128, width = 128;
    std::uint64_t seed = 0;
    int supersample = 2;  // box AA samples per axis
    double fps = 30.0;
    std::string id;

    void validate() const;
};

// Ground truth for every adjacent pair (t, t+1).
//   flows_bwd[t] lives on grid t+1 and points into frame t (the sprite
//   example: motion (+2, 0) px/frame gives u = -2 inside the sprite);
//   vis_bwd[t] marks pixels of frame t+1 whose surface is visible in frame t.
//   flows_fwd[t] / vis_fwd[t] are the grid-t counterparts pointing into t+1.
struct SyntheticClip {
    VideoClip clip;
    std::vector<FlowField> flows_bwd;
    std::vector<FlowField> flows_fwd;
    std::vector<VisibilityMask> vis_bwd;
    std::vector<VisibilityMask> vis_fwd;
};

SyntheticClip generate_synthetic_clip(const SceneSpec& spec);

// Deterministic scene with a few sprites and an occluder, integer
// velocities. Used by gen-data and the test corpus.
SceneSpec random_scene_spec(ScenePattern pattern, int height, int width, int num_frames,
                            std::uint64_t seed);

struct DegradationConfig {
    double blur_sigma_lo = 0.4, blur_sigma_hi = 1.6;
    int downscale_factor = 4;
    double noise_sigma_lo = 0.0, noise_sigma_hi = 0.06;
    int jpeg_quality_lo = 40, jpeg_quality_hi = 95;
    std::uint64_t seed = 0;

    void validate() const;
};

// Gaussian blur -> bicubic downsample -> additive Gaussian noise ->
// JPEG-style DCT quantization. One parameter draw per clip; noise samples
// differ per frame. Pure given (clip, cfg). quality == 100, sigma == 0 and
// factor == 1 each bypass their stage exactly.
VideoClip degrade_clip(const VideoClip& hr, const DegradationConfig& cfg);

// Single-frame JPEG-style quantization, exposed for tests.
Frame jpeg_quantize(const Frame& src, int quality);

}  // namespace tinyvsr
