// Copyright (c) 2026 tinyvsr contributors
// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "tinyvsr/clip_io.hpp"
#include "tinyvsr/image.hpp"

using namespace tinyvsr;
namespace fs = std::filesystem;

namespace {
fs::path temp_dir(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("tinyvsr_test_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}
}  // namespace

TEST_CASE("png 16-bit round trip stays within quantization bound") {
    Rng rng(101);
    const Frame f = random_frame(13, 17, 3, rng);
    const fs::path dir = temp_dir("png");
    save_frame_png(f, dir / "a.png", 16);
    const Frame g = load_frame_png(dir / "a.png");
    CHECK(g.same_shape(f));
    CHECK(max_abs_diff(f, g) <= 1.0 / 65535.0);
}

TEST_CASE("clip save/load preserves count, shape and fps exactly") {
    Rng rng(7);
    VideoClip clip;
    clip.fps = 24.0;
    clip.id = "c";
    for (int i = 0; i < 5; ++i) clip.frames.push_back(random_frame(8, 12, 3, rng));
    const fs::path dir = temp_dir("clip");
    save_clip(clip, dir);

    // layout: frame_00000..frame_00004 + manifest
    for (int i = 0; i < 5; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%05d.png", i);
        CHECK(fs::exists(dir / name));
    }
    CHECK(fs::exists(dir / "manifest.json"));

    const VideoClip loaded = load_clip(dir);
    CHECK(loaded.num_frames() == 5);
    CHECK(loaded.fps == 24.0);
    CHECK(loaded.height() == 8);
    CHECK(loaded.width() == 12);
    for (int i = 0; i < 5; ++i)
        CHECK(max_abs_diff(clip.frames[i], loaded.frames[i]) <= 1.0 / 65535.0);
}

TEST_CASE("loading an empty directory raises an io error, not an empty clip") {
    const fs::path dir = temp_dir("empty");
    CHECK_THROWS_AS(load_clip(dir), IoError);
}

TEST_CASE("corrupt manifest reports an io error") {
    const fs::path dir = temp_dir("corrupt");
    std::ofstream(dir / "manifest.json") << "{not json";
    CHECK_THROWS_AS(load_clip(dir), IoError);
}

TEST_CASE("missing frame error carries the frame index") {
    Rng rng(7);
    VideoClip clip;
    clip.frames.push_back(random_frame(4, 4, 1, rng));
    clip.frames.push_back(random_frame(4, 4, 1, rng));
    const fs::path dir = temp_dir("missing_frame");
    save_clip(clip, dir);
    fs::remove(dir / "frame_00001.png");
    try {
        load_clip(dir);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("frame 1") != std::string::npos);
    }
}

TEST_CASE("flo round trip is exact at float32") {
    Rng rng(33);
    FlowField f(6, 9);
    for (double& v : f.vectors) v = static_cast<float>(rng.uniform(-20.0, 20.0));
    const fs::path dir = temp_dir("flo");
    save_flo(f, dir / "a.flo");

    // header bytes pinned by the format
    std::ifstream in(dir / "a.flo", std::ios::binary);
    float magic;
    std::int32_t w, h;
    in.read(reinterpret_cast<char*>(&magic), 4);
    in.read(reinterpret_cast<char*>(&w), 4);
    in.read(reinterpret_cast<char*>(&h), 4);
    CHECK(magic == 202021.25f);
    CHECK(w == 9);
    CHECK(h == 6);

    const FlowField g = load_flo(dir / "a.flo");
    CHECK(g.height == 6);
    CHECK(g.width == 9);
    for (size_t i = 0; i < f.vectors.size(); ++i) CHECK(g.vectors[i] == f.vectors[i]);
}

TEST_CASE("bicubic weights at integer offset are exact identity") {
    double w[4];
    bicubic_weights(0.0, w);
    CHECK(w[0] == 0.0);
    CHECK(w[1] == 1.0);
    CHECK(w[2] == 0.0);
    CHECK(w[3] == 0.0);
}

TEST_CASE("area downsample averages blocks") {
    Frame f(2, 2, 1);
    f.at(0, 0, 0) = 0.1;
    f.at(0, 1, 0) = 0.2;
    f.at(1, 0, 0) = 0.3;
    f.at(1, 1, 0) = 0.4;
    const Frame d = downsample_area(f, 2);
    CHECK(d.height == 1);
    CHECK(d.at(0, 0, 0) == doctest::Approx(0.25).epsilon(1e-12));
    Rng rng(1);
    const Frame odd = random_frame(3, 3, 1, rng);
    CHECK_THROWS_AS(downsample_area(odd, 2), DimensionError);
}
