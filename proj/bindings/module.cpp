// Copyright (c) 2026 tinyvsr contributors
// SPDX-License-Identifier: Apache-2.0
//
// Python bindings over the core operations. Frames cross the boundary as
// float64 numpy arrays in HWC layout, flows as (H, W, 2), masks as (H, W).
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tinyvsr/backbone.hpp"
#include "tinyvsr/clip_io.hpp"
#include "tinyvsr/eval.hpp"
#include "tinyvsr/losses.hpp"
#include "tinyvsr/synth.hpp"
#include "tinyvsr/trainer.hpp"

namespace py = pybind11;
using namespace tinyvsr;

namespace {

Frame frame_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() == 2) {
        Frame f(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)), 1);
        std::copy(arr.data(), arr.data() + arr.size(), f.pixels.begin());
        return f;
    }
    if (arr.ndim() != 3) throw DimensionError("expected a (H, W) or (H, W, C) array");
    Frame f(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)),
            static_cast<int>(arr.shape(2)));
    std::copy(arr.data(), arr.data() + arr.size(), f.pixels.begin());
    return f;
}

py::array_t<double> frame_to_array(const Frame& f) {
    py::array_t<double> arr({f.height, f.width, f.channels});
    std::copy(f.pixels.begin(), f.pixels.end(), arr.mutable_data());
    return arr;
}

FlowField flow_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 3 || arr.shape(2) != 2) throw DimensionError("expected a (H, W, 2) flow array");
    FlowField f(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)));
    std::copy(arr.data(), arr.data() + arr.size(), f.vectors.begin());
    return f;
}

py::array_t<double> flow_to_array(const FlowField& f) {
    py::array_t<double> arr({f.height, f.width, 2});
    std::copy(f.vectors.begin(), f.vectors.end(), arr.mutable_data());
    return arr;
}

VisibilityMask mask_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 2) throw DimensionError("expected a (H, W) mask array");
    VisibilityMask m(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)));
    for (py::ssize_t i = 0; i < arr.size(); ++i) m.mask[static_cast<size_t>(i)] = arr.data()[i] != 0.0;
    return m;
}

py::array_t<double> mask_to_array(const VisibilityMask& m) {
    py::array_t<double> arr({m.height, m.width});
    for (size_t i = 0; i < m.mask.size(); ++i) arr.mutable_data()[i] = m.mask[i] ? 1.0 : 0.0;
    return arr;
}

VideoClip clip_from_list(const std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>>& frames,
                         double fps = 30.0) {
    VideoClip clip;
    clip.fps = fps;
    for (const auto& f : frames) clip.frames.push_back(frame_from_array(f));
    clip.validate();
    return clip;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "tinyvsr core operations";
    m.attr("__version__") = "0.1.0";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_IOError);

    // ---- synthetic data ----
    m.def(
        "generate_clip",
        [](const std::string& pattern, int height, int width, int num_frames, std::uint64_t seed) {
            const SceneSpec spec =
                random_scene_spec(scene_pattern_from_string(pattern), height, width, num_frames, seed);
            const SyntheticClip syn = generate_synthetic_clip(spec);
            py::dict out;
            py::list frames, flows_fwd, flows_bwd, vis_fwd, vis_bwd;
            for (const auto& f : syn.clip.frames) frames.append(frame_to_array(f));
            for (const auto& f : syn.flows_fwd) flows_fwd.append(flow_to_array(f));
            for (const auto& f : syn.flows_bwd) flows_bwd.append(flow_to_array(f));
            for (const auto& v : syn.vis_fwd) vis_fwd.append(mask_to_array(v));
            for (const auto& v : syn.vis_bwd) vis_bwd.append(mask_to_array(v));
            out["frames"] = frames;
            out["flows_fwd"] = flows_fwd;
            out["flows_bwd"] = flows_bwd;
            out["vis_fwd"] = vis_fwd;
            out["vis_bwd"] = vis_bwd;
            return out;
        },
        py::arg("pattern") = "textured-sprites", py::arg("height") = 64, py::arg("width") = 64,
        py::arg("num_frames") = 5, py::arg("seed") = 0,
        "Render a synthetic clip with exact flow and visibility ground truth");

    m.def(
        "degrade_clip",
        [](const std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>>& frames,
           double blur_sigma, int factor, double noise_sigma, int jpeg_quality, std::uint64_t seed) {
            DegradationConfig cfg;
            cfg.blur_sigma_lo = cfg.blur_sigma_hi = blur_sigma;
            cfg.downscale_factor = factor;
            cfg.noise_sigma_lo = cfg.noise_sigma_hi = noise_sigma;
            cfg.jpeg_quality_lo = cfg.jpeg_quality_hi = jpeg_quality;
            cfg.seed = seed;
            const VideoClip lr = degrade_clip(clip_from_list(frames), cfg);
            py::list out;
            for (const auto& f : lr.frames) out.append(frame_to_array(f));
            return out;
        },
        py::arg("frames"), py::arg("blur_sigma") = 1.0, py::arg("factor") = 4,
        py::arg("noise_sigma") = 0.02, py::arg("jpeg_quality") = 80, py::arg("seed") = 0,
        "Blur, downsample, add noise and JPEG-quantize a clip (one draw per clip)");

    // ---- clip io ----
    m.def("save_clip",
          [](const std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>>& frames,
             const std::string& dir, double fps) { save_clip(clip_from_list(frames, fps), dir); },
          py::arg("frames"), py::arg("dir"), py::arg("fps") = 30.0);
    m.def("load_clip", [](const std::string& dir) {
        const VideoClip clip = load_clip(dir);
        py::list out;
        for (const auto& f : clip.frames) out.append(frame_to_array(f));
        return out;
    });
    m.def("save_flo",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& flow,
             const std::string& path) { save_flo(flow_from_array(flow), path); });
    m.def("load_flo", [](const std::string& path) { return flow_to_array(load_flo(path)); });

    // ---- flow ----
    m.def("backward_warp",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& frame,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& flow) {
              return frame_to_array(backward_warp(frame_from_array(frame), flow_from_array(flow)));
          },
          py::arg("frame"), py::arg("flow"),
          "output(p) = bicubic_sample(frame, p + flow(p)), replicate borders, clamped");
    m.def("estimate_flow",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& src,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& dst, int levels) {
              return flow_to_array(estimate_flow(frame_from_array(src), frame_from_array(dst), levels));
          },
          py::arg("src"), py::arg("dst"), py::arg("levels") = 3);
    m.def("occlusion_mask",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& fwd,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& bwd, double alpha,
             double beta) {
              return mask_to_array(occlusion_mask(flow_from_array(fwd), flow_from_array(bwd), alpha, beta));
          },
          py::arg("flow_fwd"), py::arg("flow_bwd"), py::arg("alpha") = 0.01, py::arg("beta") = 0.5);
    m.def("motion_weight",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& flow, double sigma_m,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& visibility) {
              const Frame w =
                  motion_weight(flow_from_array(flow), sigma_m, mask_from_array(visibility));
              py::array_t<double> arr({w.height, w.width});
              std::copy(w.pixels.begin(), w.pixels.end(), arr.mutable_data());
              return arr;
          },
          py::arg("flow"), py::arg("sigma_m"), py::arg("visibility"));

    // ---- pixel shuffle ----
    m.def("pixel_unshuffle",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& frame, int u) {
              const Frame f = frame_from_array(frame);
              const nn::Tensor t = nn::pixel_unshuffle(nn::from_frame(f), u);
              const int C = t.dim(0), H = t.dim(1), W = t.dim(2);
              py::array_t<double> arr({H, W, C});
              for (int y = 0; y < H; ++y)
                  for (int x = 0; x < W; ++x)
                      for (int c = 0; c < C; ++c)
                          arr.mutable_data()[(static_cast<size_t>(y) * W + x) * C + c] =
                              t.data()[(static_cast<size_t>(c) * H + y) * W + x];
              return arr;
          },
          py::arg("frame"), py::arg("u"), "(H, W, C) -> (H/u, W/u, C*u^2), lossless");
    m.def("pixel_shuffle",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& packed, int u) {
              if (packed.ndim() != 3) throw DimensionError("expected (H, W, C)");
              const int H = static_cast<int>(packed.shape(0)), W = static_cast<int>(packed.shape(1)),
                        C = static_cast<int>(packed.shape(2));
              std::vector<double> chw(static_cast<size_t>(C) * H * W);
              for (int y = 0; y < H; ++y)
                  for (int x = 0; x < W; ++x)
                      for (int c = 0; c < C; ++c)
                          chw[(static_cast<size_t>(c) * H + y) * W + x] =
                              packed.data()[(static_cast<size_t>(y) * W + x) * C + c];
              const nn::Tensor t =
                  nn::pixel_shuffle(nn::Tensor::constant({C, H, W}, std::move(chw)), u);
              const int OC = t.dim(0), OH = t.dim(1), OW = t.dim(2);
              py::array_t<double> arr({OH, OW, OC});
              for (int y = 0; y < OH; ++y)
                  for (int x = 0; x < OW; ++x)
                      for (int c = 0; c < OC; ++c)
                          arr.mutable_data()[(static_cast<size_t>(y) * OW + x) * OC + c] =
                              t.data()[(static_cast<size_t>(c) * OH + y) * OW + x];
              return arr;
          },
          py::arg("packed"), py::arg("u"), "exact inverse of pixel_unshuffle");

    // ---- losses (values) ----
    m.def("charbonnier",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& x, double eps) {
              std::vector<double> v(x.data(), x.data() + x.size());
              const int n = static_cast<int>(v.size());
              return charbonnier(nn::Tensor::constant({n}, std::move(v)), eps).item();
          },
          py::arg("x"), py::arg("eps") = 1e-3);
    m.def("reconstruction_loss",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& sr,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& gt, double eps) {
              return reconstruction_loss(nn::from_frame(frame_from_array(sr)), frame_from_array(gt), eps)
                  .item();
          },
          py::arg("sr"), py::arg("gt"), py::arg("eps") = 1e-3);
    m.def("region_aware_tv",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& sr,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& gt, double tau) {
              return region_aware_tv(nn::from_frame(frame_from_array(sr)), frame_from_array(gt), tau)
                  .item();
          },
          py::arg("sr"), py::arg("gt"), py::arg("tau") = 0.05);
    m.def("temporal_loss",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& sr_t,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& sr_t1,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& flow,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& weights, double eps) {
              return temporal_loss(nn::from_frame(frame_from_array(sr_t)),
                                   nn::from_frame(frame_from_array(sr_t1)), flow_from_array(flow),
                                   frame_from_array(weights), eps)
                  .item();
          },
          py::arg("sr_t"), py::arg("sr_t1"), py::arg("flow"), py::arg("weights"), py::arg("eps") = 1e-3);

    // ---- metrics ----
    m.def("psnr", [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
                     const py::array_t<double, py::array::c_style | py::array::forcecast>& b) {
        return psnr(frame_from_array(a), frame_from_array(b));
    });
    m.def("ssim", [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
                     const py::array_t<double, py::array::c_style | py::array::forcecast>& b) {
        return ssim(frame_from_array(a), frame_from_array(b));
    });
    m.def("e_tc",
          [](const std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>>& frames) {
              return e_tc(clip_from_list(frames));
          });
    m.def("e_warp",
          [](const std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>>& frames,
             const std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>>& flows) {
              std::vector<FlowField> ff;
              for (const auto& f : flows) ff.push_back(flow_from_array(f));
              return e_warp(clip_from_list(frames), ff);
          });
    m.def("temporal_profile",
          [](const std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>>& frames,
             int row) { return frame_to_array(temporal_profile(clip_from_list(frames), row)); },
          py::arg("frames"), py::arg("row"));

    // ---- model ----
    m.def("param_count",
          [](const std::string& config_json) { return param_count(ModelConfig::from_json_string(config_json)); });
    m.def("reduction_ratio", [](const std::string& pruned_json, const std::string& reference_json) {
        return reduction_ratio(ModelConfig::from_json_string(pruned_json),
                               ModelConfig::from_json_string(reference_json));
    });
    m.def("pruned_preset", [] { return ModelConfig::pruned_preset().to_json_string(); });
    m.def("reference_preset", [] { return ModelConfig::reference_preset().to_json_string(); });
    m.def("lr_schedule",
          [](int epoch, double base_lr, int halving_period, int total_epochs) {
              TrainConfig cfg;
              cfg.lr = base_lr;
              cfg.lr_halving_period_epochs = halving_period;
              cfg.total_epochs = total_epochs;
              return lr_at(epoch, cfg);
          },
          py::arg("epoch"), py::arg("base_lr") = 2e-5, py::arg("halving_period") = 50,
          py::arg("total_epochs") = 200);

    py::class_<Generator>(m, "Generator")
        .def_static("load", [](const std::string& dir) { return Generator::load(dir); })
        .def("param_count", &Generator::param_count)
        .def("config_json", [](const Generator& g) { return g.config().to_json_string(); })
        .def("infer_clip",
             [](const Generator& g,
                const std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>>& frames,
                bool recurrent) {
                 const VideoClip sr = infer_clip(g, clip_from_list(frames), recurrent);
                 py::list out;
                 for (const auto& f : sr.frames) out.append(frame_to_array(f));
                 return out;
             },
             py::arg("frames"), py::arg("recurrent") = true);
}
