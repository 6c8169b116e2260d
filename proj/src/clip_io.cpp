// Copyright (c) 2026 tinyvsr contributors
// SPDX-License-Identifier: Apache-2.0
#include "tinyvsr/clip_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <nlohmann/json.hpp>

namespace tinyvsr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::string frame_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%05d.png", index);
    return buf;
}

}  // namespace

void save_frame_png(const Frame& frame, const fs::path& path, int bit_depth) {
    if (bit_depth != 8 && bit_depth != 16) throw ConfigError("png bit depth must be 8 or 16");
    FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) throw IoError(str_cat("cannot open for write: ", path.string()));

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError(str_cat("png write failed: ", path.string()));
    }
    png_init_io(png, fp.get());
    const int color = frame.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    png_set_IHDR(png, info, frame.width, frame.height, bit_depth, color, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    const double maxv = bit_depth == 16 ? 65535.0 : 255.0;
    if (bit_depth == 16) {
        png_set_swap(png);  // rows below are native little-endian
        std::vector<std::uint16_t> row(static_cast<size_t>(frame.width) * frame.channels);
        for (int y = 0; y < frame.height; ++y) {
            for (int x = 0; x < frame.width; ++x)
                for (int c = 0; c < frame.channels; ++c) {
                    const double v = std::clamp(frame.at(y, x, c), 0.0, 1.0);
                    row[static_cast<size_t>(x) * frame.channels + c] =
                        static_cast<std::uint16_t>(std::lround(v * maxv));
                }
            png_write_row(png, reinterpret_cast<png_bytep>(row.data()));
        }
    } else {
        std::vector<std::uint8_t> row(static_cast<size_t>(frame.width) * frame.channels);
        for (int y = 0; y < frame.height; ++y) {
            for (int x = 0; x < frame.width; ++x)
                for (int c = 0; c < frame.channels; ++c) {
                    const double v = std::clamp(frame.at(y, x, c), 0.0, 1.0);
                    row[static_cast<size_t>(x) * frame.channels + c] =
                        static_cast<std::uint8_t>(std::lround(v * maxv));
                }
            png_write_row(png, row.data());
        }
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Frame load_frame_png(const fs::path& path) {
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) throw IoError(str_cat("cannot open: ", path.string()));

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError(str_cat("corrupt png: ", path.string()));
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    const int width = static_cast<int>(png_get_image_width(png, info));
    const int height = static_cast<int>(png_get_image_height(png, info));
    const int bit_depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);

    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    if (bit_depth == 16) png_set_swap(png);
    png_read_update_info(png, info);

    const int channels = png_get_channels(png, info);
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError(str_cat("unsupported channel count ", channels, " in ", path.string()));
    }

    Frame frame(height, width, channels);
    const double scale = bit_depth == 16 ? 1.0 / 65535.0 : 1.0 / 255.0;
    if (bit_depth == 16) {
        std::vector<std::uint16_t> row(static_cast<size_t>(width) * channels);
        for (int y = 0; y < height; ++y) {
            png_read_row(png, reinterpret_cast<png_bytep>(row.data()), nullptr);
            for (int x = 0; x < width; ++x)
                for (int c = 0; c < channels; ++c)
                    frame.at(y, x, c) = row[static_cast<size_t>(x) * channels + c] * scale;
        }
    } else {
        std::vector<std::uint8_t> row(static_cast<size_t>(width) * channels);
        for (int y = 0; y < height; ++y) {
            png_read_row(png, row.data(), nullptr);
            for (int x = 0; x < width; ++x)
                for (int c = 0; c < channels; ++c)
                    frame.at(y, x, c) = row[static_cast<size_t>(x) * channels + c] * scale;
        }
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return frame;
}

void save_clip(const VideoClip& clip, const fs::path& dir, int bit_depth) {
    clip.validate();
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError(str_cat("cannot create directory ", dir.string(), ": ", ec.message()));

    for (int i = 0; i < clip.num_frames(); ++i) save_frame_png(clip.frames[i], dir / frame_name(i), bit_depth);

    json manifest = {
        {"fps", clip.fps},           {"num_frames", clip.num_frames()}, {"height", clip.height()},
        {"width", clip.width()},     {"channels", clip.channels()},     {"bit_depth", bit_depth},
    };
    std::ofstream out(dir / "manifest.json");
    if (!out) throw IoError(str_cat("cannot write manifest in ", dir.string()));
    out << manifest.dump(2) << "\n";
}

VideoClip load_clip(const fs::path& dir) {
    const fs::path manifest_path = dir / "manifest.json";
    std::ifstream in(manifest_path);
    if (!in) throw IoError(str_cat("missing manifest: ", manifest_path.string()));
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw IoError(str_cat("corrupt manifest ", manifest_path.string(), ": ", e.what()));
    }

    VideoClip clip;
    clip.fps = manifest.at("fps").get<double>();
    clip.id = dir.filename().string();
    const int n = manifest.at("num_frames").get<int>();
    const int h = manifest.at("height").get<int>();
    const int w = manifest.at("width").get<int>();
    const int c = manifest.at("channels").get<int>();
    clip.frames.reserve(n);
    for (int i = 0; i < n; ++i) {
        Frame f;
        try {
            f = load_frame_png(dir / frame_name(i));
        } catch (const IoError& e) {
            throw IoError(str_cat("frame ", i, ": ", e.what()));
        }
        if (f.height != h || f.width != w || f.channels != c)
            throw IoError(str_cat("frame ", i, " shape disagrees with manifest in ", dir.string()));
        clip.frames.push_back(std::move(f));
    }
    clip.validate();
    return clip;
}

void save_flo(const FlowField& flow, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(str_cat("cannot open for write: ", path.string()));
    const float magic = 202021.25f;
    const std::int32_t w = flow.width, h = flow.height;
    out.write(reinterpret_cast<const char*>(&magic), 4);
    out.write(reinterpret_cast<const char*>(&w), 4);
    out.write(reinterpret_cast<const char*>(&h), 4);
    std::vector<float> row(static_cast<size_t>(w) * 2);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            row[2 * x] = static_cast<float>(flow.u(y, x));
            row[2 * x + 1] = static_cast<float>(flow.v(y, x));
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * 4));
    }
    if (!out) throw IoError(str_cat("short write: ", path.string()));
}

FlowField load_flo(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(str_cat("cannot open: ", path.string()));
    float magic = 0.0f;
    std::int32_t w = 0, h = 0;
    in.read(reinterpret_cast<char*>(&magic), 4);
    in.read(reinterpret_cast<char*>(&w), 4);
    in.read(reinterpret_cast<char*>(&h), 4);
    if (!in || magic != 202021.25f) throw IoError(str_cat("bad .flo magic in ", path.string()));
    if (w <= 0 || h <= 0 || w > 1 << 20 || h > 1 << 20)
        throw IoError(str_cat("bad .flo dimensions in ", path.string()));
    FlowField flow(h, w);
    std::vector<float> row(static_cast<size_t>(w) * 2);
    for (int y = 0; y < h; ++y) {
        in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * 4));
        if (!in) throw IoError(str_cat("truncated .flo at row ", y, " in ", path.string()));
        for (int x = 0; x < w; ++x) {
            flow.u(y, x) = row[2 * x];
            flow.v(y, x) = row[2 * x + 1];
        }
    }
    return flow;
}

}  // namespace tinyvsr
