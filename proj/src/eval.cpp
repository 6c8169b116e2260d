// Copyright (c) 2026 tinyvsr contributors
// SPDX-License-Identifier: Apache-2.0
#include "tinyvsr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>

namespace tinyvsr {

using json = nlohmann::json;

namespace {

json num_or_inf(double v) {
    if (std::isinf(v)) return "inf";
    return v;
}

double parse_num_or_inf(const json& j) {
    if (j.is_string()) return std::numeric_limits<double>::infinity();
    return j.get<double>();
}

double mean_of(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

}  // namespace

std::string MetricReport::to_json_string() const {
    json per_psnr = json::array();
    for (double v : psnr_frames) per_psnr.push_back(num_or_inf(v));
    json j = {{"clip_id", clip_id},
              {"psnr", num_or_inf(psnr)},
              {"ssim", ssim},
              {"e_warp", e_warp},
              {"e_tc", e_tc},
              {"psnr_frames", per_psnr},
              {"ssim_frames", ssim_frames},
              {"e_warp_pairs", e_warp_pairs},
              {"e_tc_pairs", e_tc_pairs}};
    if (e_warp_gt) j["e_warp_gt"] = *e_warp_gt;
    return j.dump(2);
}

MetricReport MetricReport::from_json_string(const std::string& s) {
    json j;
    try {
        j = json::parse(s);
    } catch (const json::exception& e) {
        throw IoError(str_cat("bad metric report json: ", e.what()));
    }
    MetricReport r;
    r.clip_id = j.value("clip_id", "");
    r.psnr = parse_num_or_inf(j.at("psnr"));
    r.ssim = j.at("ssim").get<double>();
    r.e_warp = j.at("e_warp").get<double>();
    r.e_tc = j.at("e_tc").get<double>();
    if (j.contains("e_warp_gt")) r.e_warp_gt = j["e_warp_gt"].get<double>();
    for (const auto& v : j.value("psnr_frames", json::array())) r.psnr_frames.push_back(parse_num_or_inf(v));
    for (const auto& v : j.value("ssim_frames", json::array())) r.ssim_frames.push_back(v.get<double>());
    for (const auto& v : j.value("e_warp_pairs", json::array())) r.e_warp_pairs.push_back(v.get<double>());
    for (const auto& v : j.value("e_tc_pairs", json::array())) r.e_tc_pairs.push_back(v.get<double>());
    return r;
}

double psnr(const Frame& a, const Frame& b) {
    const double m = mse(a, b);
    if (m <= 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / m);
}

double ssim(const Frame& a, const Frame& b) {
    if (!a.same_shape(b)) throw DimensionError("ssim: shape mismatch");
    constexpr int radius = 5;  // 11x11 window
    constexpr double sigma = 1.5;
    constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double kernel[2 * radius + 1];
    double ksum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        ksum += kernel[i + radius];
    }
    for (double& k : kernel) k /= ksum;
    const auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi - 1); };

    // Gaussian-filtered local moments, separable with replicate borders.
    auto blur = [&](const std::vector<double>& src, int h, int w) {
        std::vector<double> tmp(src.size()), out(src.size());
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += kernel[i + radius] * src[static_cast<size_t>(y) * w + clampi(x + i, w)];
                tmp[static_cast<size_t>(y) * w + x] = acc;
            }
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += kernel[i + radius] * tmp[static_cast<size_t>(clampi(y + i, h)) * w + x];
                out[static_cast<size_t>(y) * w + x] = acc;
            }
        return out;
    };

    const int h = a.height, w = a.width;
    const size_t plane = static_cast<size_t>(h) * w;
    double total = 0.0;
    for (int c = 0; c < a.channels; ++c) {
        std::vector<double> xa(plane), xb(plane), xaa(plane), xbb(plane), xab(plane);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double va = a.at(y, x, c), vb = b.at(y, x, c);
                const size_t i = static_cast<size_t>(y) * w + x;
                xa[i] = va;
                xb[i] = vb;
                xaa[i] = va * va;
                xbb[i] = vb * vb;
                xab[i] = va * vb;
            }
        const auto mu_a = blur(xa, h, w), mu_b = blur(xb, h, w);
        const auto m_aa = blur(xaa, h, w), m_bb = blur(xbb, h, w), m_ab = blur(xab, h, w);
        double acc = 0.0;
        for (size_t i = 0; i < plane; ++i) {
            const double va = m_aa[i] - mu_a[i] * mu_a[i];
            const double vb = m_bb[i] - mu_b[i] * mu_b[i];
            const double cov = m_ab[i] - mu_a[i] * mu_b[i];
            acc += ((2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2)) /
                   ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2));
        }
        total += acc / static_cast<double>(plane);
    }
    return total / a.channels;
}

double e_warp(const VideoClip& clip, const std::vector<FlowField>& flows) {
    clip.validate();
    if (static_cast<int>(flows.size()) != clip.num_frames() - 1)
        throw ContractError(str_cat("e_warp: ", flows.size(), " flows for ", clip.num_frames(),
                                    " frames"));
    double acc = 0.0;
    for (int t = 0; t + 1 < clip.num_frames(); ++t)
        acc += mean_abs_diff(backward_warp(clip.frames[static_cast<size_t>(t)], flows[static_cast<size_t>(t)]),
                             clip.frames[static_cast<size_t>(t) + 1]);
    return acc / static_cast<double>(clip.num_frames() - 1);
}

double e_tc(const VideoClip& clip) {
    clip.validate();
    if (clip.num_frames() < 2) throw ContractError("e_tc: at least two frames required");
    double acc = 0.0;
    for (int t = 0; t + 1 < clip.num_frames(); ++t)
        acc += mean_abs_diff(clip.frames[static_cast<size_t>(t)], clip.frames[static_cast<size_t>(t) + 1]);
    return acc / static_cast<double>(clip.num_frames() - 1);
}

Frame temporal_profile(const VideoClip& clip, int scanline_y) {
    clip.validate();
    if (scanline_y < 0 || scanline_y >= clip.height())
        throw ContractError(str_cat("temporal_profile: scanline ", scanline_y, " outside [0, ",
                                    clip.height() - 1, "]"));
    Frame profile(clip.num_frames(), clip.width(), clip.channels());
    for (int r = 0; r < clip.num_frames(); ++r)
        for (int x = 0; x < clip.width(); ++x)
            for (int c = 0; c < clip.channels(); ++c)
                profile.at(r, x, c) = clip.frames[static_cast<size_t>(r)].at(scanline_y, x, c);
    return profile;
}

MetricReport evaluate_clip(const VideoClip& sr, const VideoClip& gt,
                           const std::vector<FlowField>* gt_flows) {
    sr.validate();
    gt.validate();
    if (sr.num_frames() != gt.num_frames() || !sr.frames[0].same_shape(gt.frames[0]))
        throw ContractError("evaluate_clip: sr/gt clip shapes disagree");

    MetricReport r;
    r.clip_id = sr.id.empty() ? gt.id : sr.id;
    for (int t = 0; t < sr.num_frames(); ++t) {
        r.psnr_frames.push_back(psnr(sr.frames[static_cast<size_t>(t)], gt.frames[static_cast<size_t>(t)]));
        r.ssim_frames.push_back(ssim(sr.frames[static_cast<size_t>(t)], gt.frames[static_cast<size_t>(t)]));
    }
    r.psnr = mean_of(r.psnr_frames);
    r.ssim = mean_of(r.ssim_frames);

    for (int t = 0; t + 1 < sr.num_frames(); ++t)
        r.e_tc_pairs.push_back(mean_abs_diff(sr.frames[static_cast<size_t>(t)],
                                             sr.frames[static_cast<size_t>(t) + 1]));
    r.e_tc = mean_of(r.e_tc_pairs);

    // evaluation-practice mode: flows estimated from the SR output itself
    for (int t = 0; t + 1 < sr.num_frames(); ++t) {
        const FlowField flow = estimate_flow(sr.frames[static_cast<size_t>(t)],
                                             sr.frames[static_cast<size_t>(t) + 1], 3);
        r.e_warp_pairs.push_back(
            mean_abs_diff(backward_warp(sr.frames[static_cast<size_t>(t)], flow),
                          sr.frames[static_cast<size_t>(t) + 1]));
    }
    r.e_warp = mean_of(r.e_warp_pairs);

    if (gt_flows) r.e_warp_gt = e_warp(sr, *gt_flows);
    return r;
}

void write_summary_csv(const std::filesystem::path& path, const std::vector<MetricReport>& reports) {
    std::ofstream out(path);
    if (!out) throw IoError(str_cat("cannot write ", path.string()));
    out << "clip_id,psnr,ssim,e_warp,e_warp_gt,e_tc\n";
    for (const auto& r : reports) {
        out << r.clip_id << ',';
        if (std::isinf(r.psnr))
            out << "inf";
        else
            out << r.psnr;
        out << ',' << r.ssim << ',' << r.e_warp << ',';
        if (r.e_warp_gt) out << *r.e_warp_gt;
        out << ',' << r.e_tc << "\n";
    }
}

}  // namespace tinyvsr
