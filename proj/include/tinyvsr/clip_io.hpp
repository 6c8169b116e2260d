// Copyright (c) 2026 tinyvsr contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

#include "tinyvsr/flow.hpp"
#include "tinyvsr/image.hpp"

namespace tinyvsr {

// Frames persist as PNG sequences (frame_%05d.png) plus manifest.json:
// {fps, num_frames, height, width, channels, bit_depth}.

void save_frame_png(const Frame& frame, const std::filesystem::path& path, int bit_depth = 16);
Frame load_frame_png(const std::filesystem::path& path);

void save_clip(const VideoClip& clip, const std::filesystem::path& dir, int bit_depth = 16);
VideoClip load_clip(const std::filesystem::path& dir);

// Middlebury .flo: little-endian, magic float 202021.25, int32 width,
// int32 height, then row-major interleaved (u, v) float32.
void save_flo(const FlowField& flow, const std::filesystem::path& path);
FlowField load_flo(const std::filesystem::path& path);

}  // namespace tinyvsr
