// Copyright (c) 2026 tinyvsr contributors
// SPDX-License-Identifier: Apache-2.0
//
// Batch entry point: data generation, training, inference, evaluation and
// temporal-profile extraction. Exit codes: 0 ok, 1 runtime/io failure,
// 2 configuration or contract failure. Errors go to stderr as one JSON line.
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <thread>

#include "CLI11.hpp"
#include "tinyvsr/clip_io.hpp"
#include "tinyvsr/eval.hpp"
#include "tinyvsr/synth.hpp"
#include "tinyvsr/trainer.hpp"

using namespace tinyvsr;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

void append_run_manifest(const fs::path& out_dir, const std::string& command, json detail) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    const auto now = std::chrono::system_clock::now();
    detail["command"] = command;
    detail["tool_version"] = kVersion;
    detail["timestamp_unix"] =
        std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
    std::ofstream out(out_dir / "run_manifest.jsonl", std::ios::app);
    if (!out) throw IoError(str_cat("cannot append manifest in ", out_dir.string()));
    out << detail.dump() << "\n";
}

json load_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(str_cat("cannot open ", path.string()));
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::exception& e) {
        throw ConfigError(str_cat("bad json in ", path.string(), ": ", e.what()));
    }
}

// --set a.b.c=value overrides, value parsed as JSON when possible
void apply_override(json& config, const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError(str_cat("--set expects key=value, got ", kv));
    const std::string key = kv.substr(0, eq);
    const std::string raw = kv.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::exception&) {
        value = raw;  // plain string
    }
    json* node = &config;
    size_t start = 0;
    while (true) {
        const size_t dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
        if (part.empty()) throw ConfigError(str_cat("bad --set key: ", key));
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        node = &(*node)[part];
        start = dot + 1;
    }
}

struct SceneTemplate {
    ScenePattern pattern = ScenePattern::kTexturedSprites;
    int height = 128, width = 128, num_frames = 7;
    double fps = 30.0;
    int supersample = 2;
    DegradationConfig degradation;
};

SceneTemplate parse_scene_template(const json& j) {
    SceneTemplate t;
    t.degradation.downscale_factor = 4;
    if (j.contains("pattern")) t.pattern = scene_pattern_from_string(j["pattern"].get<std::string>());
    t.height = j.value("height", t.height);
    t.width = j.value("width", t.width);
    t.num_frames = j.value("num_frames", t.num_frames);
    t.fps = j.value("fps", t.fps);
    t.supersample = j.value("supersample", t.supersample);
    if (j.contains("degradation")) {
        const json& d = j["degradation"];
        if (d.contains("blur_sigma")) {
            t.degradation.blur_sigma_lo = d["blur_sigma"][0].get<double>();
            t.degradation.blur_sigma_hi = d["blur_sigma"][1].get<double>();
        }
        if (d.contains("noise_sigma")) {
            t.degradation.noise_sigma_lo = d["noise_sigma"][0].get<double>();
            t.degradation.noise_sigma_hi = d["noise_sigma"][1].get<double>();
        }
        if (d.contains("jpeg_quality")) {
            t.degradation.jpeg_quality_lo = d["jpeg_quality"][0].get<int>();
            t.degradation.jpeg_quality_hi = d["jpeg_quality"][1].get<int>();
        }
        t.degradation.downscale_factor = d.value("downscale_factor", t.degradation.downscale_factor);
    }
    return t;
}

void save_visibility_png(const VisibilityMask& vis, const fs::path& path) {
    Frame f(vis.height, vis.width, 1);
    for (size_t i = 0; i < vis.mask.size(); ++i) f.pixels[i] = vis.mask[i] ? 1.0 : 0.0;
    save_frame_png(f, path, 8);
}

void write_one_clip(const SceneTemplate& tmpl, const fs::path& dir, std::uint64_t clip_seed) {
    SceneSpec spec = random_scene_spec(tmpl.pattern, tmpl.height, tmpl.width, tmpl.num_frames, clip_seed);
    spec.fps = tmpl.fps;
    spec.supersample = tmpl.supersample;
    const SyntheticClip syn = generate_synthetic_clip(spec);

    DegradationConfig dc = tmpl.degradation;
    dc.seed = mix_seed(clip_seed, 0x1);
    const VideoClip lr = degrade_clip(syn.clip, dc);
    const int factor = dc.downscale_factor;

    save_clip(syn.clip, dir / "hr");
    save_clip(lr, dir / "lr");
    fs::create_directories(dir / "flow");
    fs::create_directories(dir / "vis");
    char name[48];
    for (int t = 0; t + 1 < tmpl.num_frames; ++t) {
        const auto& fwd = syn.flows_fwd[static_cast<size_t>(t)];
        const auto& bwd = syn.flows_bwd[static_cast<size_t>(t)];
        std::snprintf(name, sizeof name, "hr_fwd_%05d.flo", t);
        save_flo(fwd, dir / "flow" / name);
        std::snprintf(name, sizeof name, "hr_bwd_%05d.flo", t);
        save_flo(bwd, dir / "flow" / name);
        std::snprintf(name, sizeof name, "lr_fwd_%05d.flo", t);
        save_flo(resize_flow(fwd, tmpl.height / factor, tmpl.width / factor), dir / "flow" / name);
        std::snprintf(name, sizeof name, "lr_bwd_%05d.flo", t);
        save_flo(resize_flow(bwd, tmpl.height / factor, tmpl.width / factor), dir / "flow" / name);
        std::snprintf(name, sizeof name, "fwd_%05d.png", t);
        save_visibility_png(syn.vis_fwd[static_cast<size_t>(t)], dir / "vis" / name);
        std::snprintf(name, sizeof name, "bwd_%05d.png", t);
        save_visibility_png(syn.vis_bwd[static_cast<size_t>(t)], dir / "vis" / name);
    }
}

int cmd_gen_data(const std::string& scenes_path, const std::string& out, int count,
                 std::uint64_t seed, int jobs) {
    const SceneTemplate tmpl =
        scenes_path.empty() ? SceneTemplate{} : parse_scene_template(load_json_file(scenes_path));
    if (tmpl.height % tmpl.degradation.downscale_factor != 0 ||
        tmpl.width % tmpl.degradation.downscale_factor != 0)
        throw ConfigError("scene dimensions must divide by the downscale factor");
    if (count < 0) throw ConfigError("--count must be >= 0");

    const fs::path root(out);
    fs::create_directories(root);

    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::string error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (int i = next.fetch_add(1); i < count && !failed; i = next.fetch_add(1)) {
            char name[32];
            std::snprintf(name, sizeof name, "clip_%03d", i);
            try {
                write_one_clip(tmpl, root / name, mix_seed(seed, static_cast<std::uint64_t>(i)));
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(error_mutex);
                failed = true;
                error = e.what();
            }
        }
    };
    const int n_threads = std::max(1, std::min(jobs, count == 0 ? 1 : count));
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (failed) throw IoError(error);

    append_run_manifest(root, "gen-data",
                        {{"seed", seed},
                         {"count", count},
                         {"pattern", to_string(tmpl.pattern)},
                         {"height", tmpl.height},
                         {"width", tmpl.width},
                         {"num_frames", tmpl.num_frames},
                         {"downscale_factor", tmpl.degradation.downscale_factor},
                         {"out", out}});
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_dir, const std::string& out,
              const std::string& resume, bool no_temporal, bool no_recurrent, bool no_latent,
              bool no_pixel, const std::vector<std::string>& overrides) {
    json config = config_path.empty() ? json::object() : load_json_file(config_path);
    for (const auto& kv : overrides) apply_override(config, kv);
    TrainConfig cfg = TrainConfig::from_json_string(config.dump());
    // ablation arms of the temporal/adversarial studies map 1:1 onto flags
    if (no_temporal) cfg.use_temporal_loss = false;
    if (no_recurrent) cfg.recurrent = false;
    if (no_latent) cfg.use_latent_disc = false;
    if (no_pixel) cfg.use_pixel_disc = false;

    if (!fs::exists(data_dir)) throw ConfigError(str_cat("data dir does not exist: ", data_dir));
    Dataset dataset = Dataset::load(data_dir);
    Trainer trainer(cfg, std::move(dataset), out);
    if (!resume.empty()) trainer.load_checkpoint(resume);
    trainer.train();

    append_run_manifest(out, "train",
                        {{"seed", cfg.seed},
                         {"data", data_dir},
                         {"out", out},
                         {"resume", resume},
                         {"steps", trainer.step()},
                         {"config", json::parse(cfg.to_json_string())}});
    return 0;
}

std::unique_ptr<Generator> load_generator(const fs::path& ckpt) {
    if (fs::exists(ckpt / "generator" / "config.json")) return Generator::load(ckpt / "generator");
    if (fs::exists(ckpt / "config.json")) return Generator::load(ckpt);
    throw ConfigError(str_cat("no generator checkpoint under ", ckpt.string()));
}

int cmd_infer(const std::string& ckpt, const std::string& in_dir, const std::string& out,
              bool recurrent, const std::string& flows_dir) {
    auto gen = load_generator(ckpt);
    const VideoClip lr = load_clip(in_dir);
    VideoClip sr;
    if (flows_dir.empty()) {
        sr = infer_clip(*gen, lr, recurrent);  // Lucas-Kanade alignment
    } else {
        std::vector<FlowField> fwd, bwd;
        char name[48];
        for (int t = 0; t + 1 < lr.num_frames(); ++t) {
            std::snprintf(name, sizeof name, "lr_fwd_%05d.flo", t);
            fs::path fp = fs::path(flows_dir) / name;
            if (!fs::exists(fp)) {
                std::snprintf(name, sizeof name, "fwd_%05d.flo", t);
                fp = fs::path(flows_dir) / name;
            }
            fwd.push_back(load_flo(fp));
            std::snprintf(name, sizeof name, "lr_bwd_%05d.flo", t);
            fs::path bp = fs::path(flows_dir) / name;
            if (!fs::exists(bp)) {
                std::snprintf(name, sizeof name, "bwd_%05d.flo", t);
                bp = fs::path(flows_dir) / name;
            }
            bwd.push_back(load_flo(bp));
        }
        const ChainedFlowProvider provider(std::move(fwd), std::move(bwd));
        sr = infer_clip(*gen, lr, recurrent, &provider);
    }
    save_clip(sr, fs::path(out));
    append_run_manifest(out, "infer",
                        {{"ckpt", ckpt}, {"in", in_dir}, {"recurrent", recurrent},
                         {"flows", flows_dir}, {"frames", sr.num_frames()}});
    return 0;
}

// a clip dir has manifest.json; a dataset dir has clip_* children
bool is_clip_dir(const fs::path& p) { return fs::exists(p / "manifest.json"); }

struct EvalItem {
    std::string id;
    fs::path sr, gt, flow_dir;  // flow_dir may be empty
};

std::vector<EvalItem> resolve_eval_items(const fs::path& sr_root, const fs::path& gt_root,
                                         const fs::path& flows_root) {
    std::vector<EvalItem> items;
    auto gt_for = [&](const fs::path& gt_base) {
        return is_clip_dir(gt_base) ? gt_base : gt_base / "hr";
    };
    if (is_clip_dir(sr_root)) {
        EvalItem item;
        item.id = sr_root.filename().string();
        item.sr = sr_root;
        item.gt = gt_for(gt_root);
        if (!flows_root.empty()) item.flow_dir = flows_root;
        items.push_back(item);
        return items;
    }
    std::vector<fs::path> children;
    for (const auto& entry : fs::directory_iterator(sr_root))
        if (entry.is_directory() && entry.path().filename().string().rfind("clip_", 0) == 0)
            children.push_back(entry.path());
    std::sort(children.begin(), children.end());
    if (children.empty()) throw ConfigError(str_cat("no clips under ", sr_root.string()));
    for (const auto& child : children) {
        EvalItem item;
        item.id = child.filename().string();
        if (is_clip_dir(child))
            item.sr = child;
        else if (fs::exists(child / "sr" / "manifest.json"))
            item.sr = child / "sr";
        else
            item.sr = child / "hr";
        item.gt = gt_for(gt_root / item.id);
        if (!flows_root.empty()) {
            const fs::path candidate = flows_root / item.id / "flow";
            item.flow_dir = fs::exists(candidate) ? candidate : flows_root / item.id;
        }
        items.push_back(item);
    }
    return items;
}

std::vector<FlowField> load_gt_flows(const fs::path& dir, int pairs) {
    std::vector<FlowField> flows;
    char name[48];
    for (int t = 0; t < pairs; ++t) {
        std::snprintf(name, sizeof name, "hr_bwd_%05d.flo", t);
        fs::path p = dir / name;
        if (!fs::exists(p)) {
            std::snprintf(name, sizeof name, "bwd_%05d.flo", t);
            p = dir / name;
        }
        flows.push_back(load_flo(p));
    }
    return flows;
}

int cmd_eval(const std::string& sr_dir, const std::string& gt_dir, const std::string& flows_dir,
             const std::string& out, int jobs) {
    const auto items = resolve_eval_items(sr_dir, gt_dir, flows_dir.empty() ? fs::path() : fs::path(flows_dir));
    std::vector<MetricReport> reports(items.size());

    std::atomic<size_t> next{0};
    std::atomic<bool> failed{false};
    std::string error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (size_t i = next.fetch_add(1); i < items.size() && !failed; i = next.fetch_add(1)) {
            try {
                const VideoClip sr = load_clip(items[i].sr);
                const VideoClip gt = load_clip(items[i].gt);
                if (sr.num_frames() != gt.num_frames())
                    throw ContractError(str_cat("frame count mismatch for ", items[i].id, ": sr ",
                                                sr.num_frames(), " vs gt ", gt.num_frames()));
                std::vector<FlowField> flows;
                MetricReport r;
                if (!items[i].flow_dir.empty()) {
                    flows = load_gt_flows(items[i].flow_dir, sr.num_frames() - 1);
                    r = evaluate_clip(sr, gt, &flows);
                } else {
                    r = evaluate_clip(sr, gt);
                }
                r.clip_id = items[i].id;
                reports[i] = std::move(r);
            } catch (const ConfigError& e) {
                std::lock_guard<std::mutex> lock(error_mutex);
                failed = true;
                error = e.what();
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(error_mutex);
                failed = true;
                error = e.what();
            }
        }
    };
    const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(items.size())));
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (failed) throw ContractError(error);

    const fs::path out_path(out);
    if (items.size() == 1 && is_clip_dir(sr_dir)) {
        std::ofstream f(out_path);
        if (!f) throw IoError(str_cat("cannot write ", out));
        f << reports[0].to_json_string() << "\n";
        append_run_manifest(out_path.parent_path().empty() ? "." : out_path.parent_path(), "eval",
                            {{"sr", sr_dir}, {"gt", gt_dir}, {"out", out}});
    } else {
        fs::create_directories(out_path);
        for (const auto& r : reports) {
            std::ofstream f(out_path / (r.clip_id + ".report.json"));
            f << r.to_json_string() << "\n";
        }
        write_summary_csv(out_path / "summary.csv", reports);
        append_run_manifest(out_path, "eval",
                            {{"sr", sr_dir}, {"gt", gt_dir}, {"clips", items.size()}, {"out", out}});
    }
    return 0;
}

int cmd_profile(const std::string& clip_dir, int row, const std::string& out) {
    const VideoClip clip = load_clip(clip_dir);
    if (row < 0 || row >= clip.height())
        throw ContractError(str_cat("row ", row, " outside valid range [0, ", clip.height() - 1, "]"));
    const Frame profile = temporal_profile(clip, row);
    save_frame_png(profile, out, 16);
    const fs::path parent = fs::path(out).parent_path();
    append_run_manifest(parent.empty() ? "." : parent, "profile",
                        {{"clip", clip_dir}, {"row", row}, {"out", out}});
    return 0;
}

int fail(const std::string& message, int code) {
    std::cerr << json{{"error", message}, {"exit_code", code}}.dump() << std::endl;
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tinyvsr: synthetic-video super-resolution toolbench"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "Render synthetic clips with LR/flow/visibility ground truth");
    std::string gen_scenes, gen_out;
    int gen_count = 4, gen_jobs = 1;
    std::uint64_t gen_seed = 0;
    gen->add_option("--scenes", gen_scenes, "Scene template json");
    gen->add_option("--out", gen_out, "Output dataset directory")->required();
    gen->add_option("--count", gen_count, "Number of clips");
    gen->add_option("--seed", gen_seed, "Base seed");
    gen->add_option("--jobs", gen_jobs, "Parallel workers");

    // train
    auto* tr = app.add_subcommand("train", "Train the one-step generator");
    std::string tr_config, tr_data, tr_out, tr_resume;
    bool tr_no_temporal = false, tr_no_recurrent = false, tr_no_latent = false, tr_no_pixel = false;
    std::vector<std::string> tr_overrides;
    tr->add_option("--config", tr_config, "Train config json");
    tr->add_option("--data", tr_data, "Dataset directory")->required();
    tr->add_option("--out", tr_out, "Run output directory")->required();
    tr->add_option("--resume", tr_resume, "Checkpoint directory to resume from");
    tr->add_flag("--no-temporal-loss", tr_no_temporal, "Disable the flow-guided temporal loss");
    tr->add_flag("--no-recurrent", tr_no_recurrent, "Teacher-forced windows instead of buffer rollout");
    tr->add_flag("--no-latent-disc", tr_no_latent, "Disable the latent discriminator");
    tr->add_flag("--no-pixel-disc", tr_no_pixel, "Disable the pixel discriminator");
    tr->add_option("--set", tr_overrides, "Config override key=value (repeatable)");

    // infer
    auto* inf = app.add_subcommand("infer", "Super-resolve a clip with a trained checkpoint");
    std::string inf_ckpt, inf_in, inf_out, inf_flows;
    bool inf_recurrent = true;
    inf->add_option("--ckpt", inf_ckpt, "Checkpoint directory")->required();
    inf->add_option("--in", inf_in, "LR clip directory")->required();
    inf->add_option("--out", inf_out, "SR clip output directory")->required();
    inf->add_option("--flows", inf_flows, "LR-scale .flo directory (default: estimate flows)");
    inf->add_flag("--recurrent,!--no-recurrent", inf_recurrent, "Buffer self-conditioning (default on)");

    // eval
    auto* ev = app.add_subcommand("eval", "Compute fidelity and temporal metrics");
    std::string ev_sr, ev_gt, ev_flows, ev_out;
    int ev_jobs = 1;
    ev->add_option("--sr", ev_sr, "SR clip or dataset directory")->required();
    ev->add_option("--gt", ev_gt, "GT clip or dataset directory")->required();
    ev->add_option("--flows", ev_flows, "Ground-truth flow directory (optional)");
    ev->add_option("--out", ev_out, "report.json path (clip) or output directory (dataset)")->required();
    ev->add_option("--jobs", ev_jobs, "Parallel workers");

    // profile
    auto* pr = app.add_subcommand("profile", "Stack one scanline from every frame into a profile image");
    std::string pr_clip, pr_out;
    int pr_row = 0;
    pr->add_option("--clip", pr_clip, "Clip directory")->required();
    pr->add_option("--row", pr_row, "Scanline y")->required();
    pr->add_option("--out", pr_out, "Output png path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
        std::cerr << json{{"error", e.what()}, {"exit_code", 2}}.dump() << std::endl;
        return 2;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(gen_scenes, gen_out, gen_count, gen_seed, gen_jobs);
        if (tr->parsed())
            return cmd_train(tr_config, tr_data, tr_out, tr_resume, tr_no_temporal, tr_no_recurrent,
                             tr_no_latent, tr_no_pixel, tr_overrides);
        if (inf->parsed()) return cmd_infer(inf_ckpt, inf_in, inf_out, inf_recurrent, inf_flows);
        if (ev->parsed()) return cmd_eval(ev_sr, ev_gt, ev_flows, ev_out, ev_jobs);
        if (pr->parsed()) return cmd_profile(pr_clip, pr_row, pr_out);
    } catch (const ConfigError& e) {
        return fail(e.what(), 2);
    } catch (const std::exception& e) {
        return fail(e.what(), 1);
    }
    return 0;
}
