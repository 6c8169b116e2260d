// Copyright (c) 2026 tinyvsr contributors
// SPDX-License-Identifier: Apache-2.0
#include "tinyvsr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "tinyvsr/clip_io.hpp"

namespace tinyvsr {

using nn::Tensor;
using json = nlohmann::json;
namespace fs = std::filesystem;

// ---- FrameBuffer ----

FrameBuffer FrameBuffer::from_clip(const VideoClip& lr) {
    lr.validate();
    FrameBuffer b;
    b.slots = lr.frames;
    b.origin_tags.assign(lr.frames.size(), Origin::kLR);
    return b;
}

void FrameBuffer::write_sr(int t, const Frame& sr, int factor) {
    if (t < 0 || t >= static_cast<int>(slots.size())) throw ContractError("buffer index out of range");
    Frame down = downsample_area(sr, factor);
    if (!down.same_shape(slots[static_cast<size_t>(t)]))
        throw DimensionError("buffer write would change slot resolution");
    slots[static_cast<size_t>(t)] = std::move(down);
    origin_tags[static_cast<size_t>(t)] = Origin::kSRDownsampled;
}

// ---- flow providers ----

ChainedFlowProvider::ChainedFlowProvider(std::vector<FlowField> fwd, std::vector<FlowField> bwd)
    : fwd_(std::move(fwd)), bwd_(std::move(bwd)) {
    if (fwd_.size() != bwd_.size()) throw ContractError("flow provider: fwd/bwd count mismatch");
}

FlowField ChainedFlowProvider::window_flow(int center, int neighbor) const {
    const int n_pairs = static_cast<int>(fwd_.size());
    if (center < 0 || center > n_pairs || neighbor < 0 || neighbor > n_pairs)
        throw ContractError("window_flow: frame index out of range");
    if (neighbor == center) {
        const auto& ref = fwd_.empty() ? bwd_ : fwd_;
        if (ref.empty()) throw ContractError("window_flow: no flows available");
        return FlowField(ref[0].height, ref[0].width);
    }
    if (neighbor > center) {
        FlowField f = fwd_[static_cast<size_t>(center)];
        for (int j = center + 1; j < neighbor; ++j) f = chain_flows(f, fwd_[static_cast<size_t>(j)]);
        return f;
    }
    FlowField f = bwd_[static_cast<size_t>(center - 1)];
    for (int j = center - 2; j >= neighbor; --j) f = chain_flows(f, bwd_[static_cast<size_t>(j)]);
    return f;
}

std::unique_ptr<ChainedFlowProvider> make_estimated_flow_provider(const VideoClip& lr, int levels) {
    std::vector<FlowField> fwd, bwd;
    for (int t = 0; t + 1 < lr.num_frames(); ++t) {
        // fwd[t] lives on grid t pointing into t+1: dst = frame t, src = t+1
        fwd.push_back(estimate_flow(lr.frames[static_cast<size_t>(t) + 1],
                                    lr.frames[static_cast<size_t>(t)], levels));
        bwd.push_back(estimate_flow(lr.frames[static_cast<size_t>(t)],
                                    lr.frames[static_cast<size_t>(t) + 1], levels));
    }
    return std::make_unique<ChainedFlowProvider>(std::move(fwd), std::move(bwd));
}

WindowModel generator_window_model(const Generator& gen) {
    return [&gen](const std::vector<Frame>& window, const std::vector<FlowField>& flows) {
        const Tensor stack = build_input(window, flows, gen.config());
        const Tensor center = nn::from_frame(window[static_cast<size_t>(gen.config().context_radius)]);
        return gen.forward(stack, center);
    };
}

// ---- rollout ----

namespace {

std::vector<Frame> gather_window(const FrameBuffer& buffer, int t, int k) {
    const int n = static_cast<int>(buffer.slots.size());
    std::vector<Frame> window;
    window.reserve(static_cast<size_t>(2 * k + 1));
    for (int i = -k; i <= k; ++i)
        window.push_back(buffer.slots[static_cast<size_t>(std::clamp(t + i, 0, n - 1))]);
    return window;
}

std::vector<FlowField> gather_flows(const FlowProvider& flows, int t, int k, int n) {
    std::vector<FlowField> out;
    out.reserve(static_cast<size_t>(2 * k));
    for (int i = -k; i <= k; ++i) {
        if (i == 0) continue;
        out.push_back(flows.window_flow(std::clamp(t, 0, n - 1), std::clamp(t + i, 0, n - 1)));
    }
    return out;
}

}  // namespace

RolloutResult recurrent_rollout(const WindowModel& model, const VideoClip& lr_clip,
                                const FlowProvider& flows, int k, int anchor, int sr_factor,
                                bool recurrent, int passes) {
    const int n = lr_clip.num_frames();
    if (n < 2 * k + 1) throw ContractError(str_cat("rollout: clip of ", n, " frames < window ", 2 * k + 1));
    if (anchor < k || anchor > n - k - 1)
        throw ContractError(str_cat("rollout: anchor ", anchor, " outside [", k, ", ", n - k - 1, "]"));
    if (passes < 1) throw ContractError("rollout: passes must be >= 1");

    RolloutResult result;
    result.buffer = FrameBuffer::from_clip(lr_clip);

    for (int pass = 0; pass < passes; ++pass) {
        result.sr_context.clear();
        for (int t = k; t <= anchor; ++t) {
            const std::vector<Frame> window = gather_window(result.buffer, t, k);
            const std::vector<FlowField> wflows = gather_flows(flows, t, k, n);
            Tensor out;
            if (pass == passes - 1 && t == anchor) {
                out = model(window, wflows);
                result.sr_anchor = out;
            } else {
                nn::NoGradGuard ng;
                out = model(window, wflows);
            }
            Frame frame = nn::to_frame(out);
            if (recurrent) result.buffer.write_sr(t, frame, sr_factor);
            result.sr_context.push_back(std::move(frame));
        }
        if (!recurrent) break;  // extra passes change nothing without buffer updates
    }
    return result;
}

VideoClip infer_clip(const Generator& gen, const VideoClip& lr, bool recurrent,
                     const FlowProvider* flows_in) {
    lr.validate();
    const ModelConfig& cfg = gen.config();
    if (lr.height() % cfg.unshuffle_factor != 0 || lr.width() % cfg.unshuffle_factor != 0)
        throw DimensionError(str_cat("input ", lr.height(), "x", lr.width(),
                                     " not divisible by unshuffle factor ", cfg.unshuffle_factor,
                                     "; pad the clip to a multiple of ", cfg.unshuffle_factor));
    const int k = cfg.context_radius, n = lr.num_frames();
    std::unique_ptr<ChainedFlowProvider> estimated;
    if (!flows_in) {
        estimated = make_estimated_flow_provider(lr);
        flows_in = estimated.get();
    }
    const FlowProvider& flows = *flows_in;
    const WindowModel model = generator_window_model(gen);

    VideoClip sr;
    sr.fps = lr.fps;
    sr.id = lr.id;
    FrameBuffer buffer = FrameBuffer::from_clip(lr);
    nn::NoGradGuard ng;
    for (int t = 0; t < n; ++t) {
        const std::vector<Frame> window = gather_window(buffer, t, k);
        const std::vector<FlowField> wflows = gather_flows(flows, t, k, n);
        Frame frame = nn::to_frame(model(window, wflows));
        if (recurrent) buffer.write_sr(t, frame, cfg.upscale_factor);
        sr.frames.push_back(std::move(frame));
    }
    return sr;
}

// ---- dataset ----

Dataset Dataset::load(const fs::path& root) {
    if (!fs::exists(root)) throw IoError(str_cat("dataset root does not exist: ", root.string()));
    std::vector<fs::path> clip_dirs;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory() && entry.path().filename().string().rfind("clip_", 0) == 0)
            clip_dirs.push_back(entry.path());
    std::sort(clip_dirs.begin(), clip_dirs.end());
    if (clip_dirs.empty()) throw IoError(str_cat("no clip_* directories under ", root.string()));

    Dataset ds;
    for (const auto& dir : clip_dirs) {
        TrainingClip clip;
        clip.dir = dir.string();
        clip.hr = load_clip(dir / "hr");
        clip.lr = load_clip(dir / "lr");
        const int pairs = clip.hr.num_frames() - 1;
        char name[64];
        for (int t = 0; t < pairs; ++t) {
            auto flo = [&](const char* fmt, int i) {
                std::snprintf(name, sizeof name, fmt, i);
                return load_flo(dir / "flow" / name);
            };
            clip.hr_fwd.push_back(flo("hr_fwd_%05d.flo", t));
            clip.hr_bwd.push_back(flo("hr_bwd_%05d.flo", t));
            clip.lr_fwd.push_back(flo("lr_fwd_%05d.flo", t));
            clip.lr_bwd.push_back(flo("lr_bwd_%05d.flo", t));
        }
        ds.clips.push_back(std::move(clip));
    }
    return ds;
}

// ---- config ----

void TrainConfig::validate() const {
    if (lr <= 0) throw ConfigError("lr must be positive");
    if (lr_halving_period_epochs < 1) throw ConfigError("lr halving period must be >= 1");
    if (total_epochs < 0) throw ConfigError("total_epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    model.validate();
    loss.validate();
}

std::string TrainConfig::to_json_string() const {
    json j;
    j["train"] = {{"lr", lr},
                  {"lr_halving_period_epochs", lr_halving_period_epochs},
                  {"total_epochs", total_epochs},
                  {"batch_size", batch_size},
                  {"max_steps", max_steps},
                  {"checkpoint_period_epochs", checkpoint_period_epochs},
                  {"seed", seed},
                  {"recurrent", recurrent},
                  {"use_temporal_loss", use_temporal_loss},
                  {"use_latent_disc", use_latent_disc},
                  {"use_pixel_disc", use_pixel_disc},
                  {"pretrain_ae_steps", pretrain_ae_steps},
                  {"pretrain_dn_steps", pretrain_dn_steps},
                  {"pretrain_lr", pretrain_lr},
                  {"rollout_passes", rollout_passes},
                  {"flow_source", flow_source}};
    j["model"] = json::parse(model.to_json_string());
    j["loss"] = json::parse(loss.to_json_string());
    j["latent"] = {{"latent_channels", latent.latent_channels},
                   {"downsample", latent.downsample},
                   {"base_channels", latent.base_channels},
                   {"denoiser_channels", latent.denoiser_channels},
                   {"sigma_lo", latent.sigma_lo},
                   {"sigma_hi", latent.sigma_hi},
                   {"lora_rank", latent.lora_rank},
                   {"lora_scale", latent.lora_scale},
                   {"adapt_encoder", latent.adapt_encoder},
                   {"seed", latent.seed}};
    j["pixel_disc"] = {{"stem_channels", pixel_disc.stem_channels},
                       {"head_channels", pixel_disc.head_channels},
                       {"leak", pixel_disc.leak},
                       {"seed", pixel_disc.seed}};
    return j.dump(2);
}

TrainConfig TrainConfig::from_json_string(const std::string& s) {
    json j;
    try {
        j = json::parse(s);
    } catch (const json::exception& e) {
        throw ConfigError(str_cat("bad train config json: ", e.what()));
    }
    TrainConfig cfg;
    if (j.contains("train")) {
        const json& t = j["train"];
        cfg.lr = t.value("lr", cfg.lr);
        cfg.lr_halving_period_epochs = t.value("lr_halving_period_epochs", cfg.lr_halving_period_epochs);
        cfg.total_epochs = t.value("total_epochs", cfg.total_epochs);
        cfg.batch_size = t.value("batch_size", cfg.batch_size);
        cfg.max_steps = t.value("max_steps", cfg.max_steps);
        cfg.checkpoint_period_epochs = t.value("checkpoint_period_epochs", cfg.checkpoint_period_epochs);
        cfg.seed = t.value("seed", cfg.seed);
        cfg.recurrent = t.value("recurrent", cfg.recurrent);
        cfg.use_temporal_loss = t.value("use_temporal_loss", cfg.use_temporal_loss);
        cfg.use_latent_disc = t.value("use_latent_disc", cfg.use_latent_disc);
        cfg.use_pixel_disc = t.value("use_pixel_disc", cfg.use_pixel_disc);
        cfg.pretrain_ae_steps = t.value("pretrain_ae_steps", cfg.pretrain_ae_steps);
        cfg.pretrain_dn_steps = t.value("pretrain_dn_steps", cfg.pretrain_dn_steps);
        cfg.pretrain_lr = t.value("pretrain_lr", cfg.pretrain_lr);
        cfg.rollout_passes = t.value("rollout_passes", cfg.rollout_passes);
        cfg.flow_source = t.value("flow_source", cfg.flow_source);
    }
    if (j.contains("model")) cfg.model = ModelConfig::from_json_string(j["model"].dump());
    if (j.contains("loss")) cfg.loss = LossConfig::from_json_string(j["loss"].dump());
    if (j.contains("latent")) {
        const json& l = j["latent"];
        cfg.latent.latent_channels = l.value("latent_channels", cfg.latent.latent_channels);
        cfg.latent.downsample = l.value("downsample", cfg.latent.downsample);
        cfg.latent.base_channels = l.value("base_channels", cfg.latent.base_channels);
        cfg.latent.denoiser_channels = l.value("denoiser_channels", cfg.latent.denoiser_channels);
        cfg.latent.sigma_lo = l.value("sigma_lo", cfg.latent.sigma_lo);
        cfg.latent.sigma_hi = l.value("sigma_hi", cfg.latent.sigma_hi);
        cfg.latent.lora_rank = l.value("lora_rank", cfg.latent.lora_rank);
        cfg.latent.lora_scale = l.value("lora_scale", cfg.latent.lora_scale);
        cfg.latent.adapt_encoder = l.value("adapt_encoder", cfg.latent.adapt_encoder);
        cfg.latent.seed = l.value("seed", cfg.latent.seed);
    }
    if (j.contains("pixel_disc")) {
        const json& p = j["pixel_disc"];
        cfg.pixel_disc.stem_channels = p.value("stem_channels", cfg.pixel_disc.stem_channels);
        cfg.pixel_disc.head_channels = p.value("head_channels", cfg.pixel_disc.head_channels);
        cfg.pixel_disc.leak = p.value("leak", cfg.pixel_disc.leak);
        cfg.pixel_disc.seed = p.value("seed", cfg.pixel_disc.seed);
    }
    cfg.validate();
    return cfg;
}

double lr_at(int epoch, const TrainConfig& cfg) {
    if (epoch < 0 || (cfg.total_epochs > 0 && epoch >= cfg.total_epochs))
        throw ContractError(str_cat("lr_at: epoch ", epoch, " outside [0, ", cfg.total_epochs, ")"));
    return cfg.lr * std::pow(0.5, static_cast<double>(epoch / cfg.lr_halving_period_epochs));
}

// ---- trainer ----

Trainer::Trainer(const TrainConfig& cfg, Dataset dataset, fs::path out_dir)
    : cfg_(cfg), data_(std::move(dataset)), out_dir_(std::move(out_dir)), rng_(mix_seed(cfg.seed, 0x7A)) {
    cfg_.validate();
    if (data_.clips.empty()) throw ContractError("trainer: empty dataset");
    const int n = data_.clips[0].lr.num_frames();
    const int k = cfg_.model.context_radius;
    if (n < 2 * k + 1) throw ContractError("trainer: clips shorter than the model window");

    if (cfg_.flow_source == "estimated") {
        // train against the same flow quality inference will see
        const int s_factor = cfg_.model.upscale_factor;
        for (auto& clip : data_.clips) {
            clip.lr_fwd.clear();
            clip.lr_bwd.clear();
            clip.hr_fwd.clear();
            clip.hr_bwd.clear();
            const int hh = clip.hr.height(), hw = clip.hr.width();
            for (int t = 0; t + 1 < clip.lr.num_frames(); ++t) {
                FlowField fwd = estimate_flow(clip.lr.frames[static_cast<size_t>(t) + 1],
                                              clip.lr.frames[static_cast<size_t>(t)], 3);
                FlowField bwd = estimate_flow(clip.lr.frames[static_cast<size_t>(t)],
                                              clip.lr.frames[static_cast<size_t>(t) + 1], 3);
                clip.hr_fwd.push_back(resize_flow(fwd, hh, hw));
                clip.hr_bwd.push_back(resize_flow(bwd, hh, hw));
                clip.lr_fwd.push_back(std::move(fwd));
                clip.lr_bwd.push_back(std::move(bwd));
            }
        }
        (void)s_factor;
    } else if (cfg_.flow_source != "gt") {
        throw ConfigError(str_cat("unknown flow_source: ", cfg_.flow_source));
    }

    gen_ = std::make_unique<Generator>(cfg_.model);
    if (cfg_.use_pixel_disc) pixel_disc_ = std::make_unique<PixelDiscriminator>(cfg_.pixel_disc);
    if (cfg_.use_latent_disc) {
        latent_ae_ = std::make_shared<LatentAutoencoder>(cfg_.latent);
        latent_dn_ = std::make_shared<LatentDenoiser>(cfg_.latent);
        std::vector<Frame> pretrain_frames;
        for (const auto& clip : data_.clips)
            for (const auto& f : clip.hr.frames) pretrain_frames.push_back(f);
        pretrain_latent_encoder(*latent_ae_, pretrain_frames, cfg_.pretrain_ae_steps, cfg_.pretrain_lr);
        pretrain_latent_denoiser(*latent_dn_, *latent_ae_, pretrain_frames, cfg_.pretrain_dn_steps,
                                 cfg_.pretrain_lr);
        latent_disc_ = std::make_unique<LatentDiscriminator>(latent_ae_, latent_dn_, cfg_.latent);
    }

    opt_gen_ = std::make_unique<nn::Adam>(gen_->params().trainable());
    std::vector<Tensor> disc_params;
    if (pixel_disc_)
        for (auto& t : pixel_disc_->trainable()) disc_params.push_back(t);
    if (latent_disc_)
        for (auto& t : latent_disc_->adapters().trainable()) disc_params.push_back(t);
    opt_disc_ = std::make_unique<nn::Adam>(std::move(disc_params));
}

int Trainer::anchor_index(const TrainingClip& clip) const {
    // last valid frame: the anchor context then holds the maximum number of
    // self-generated predictions
    return clip.lr.num_frames() - cfg_.model.context_radius - 1;
}

namespace {

// Training loads a (2k+3)-frame window (the model window plus two extra
// frames for the recurrent sweep), sampled from the clip per step.
TrainingClip slice_window(const TrainingClip& clip, int offset, int length) {
    TrainingClip out;
    out.dir = clip.dir;
    out.hr.fps = clip.hr.fps;
    out.lr.fps = clip.lr.fps;
    out.hr.id = clip.hr.id;
    out.lr.id = clip.lr.id;
    for (int i = 0; i < length; ++i) {
        out.hr.frames.push_back(clip.hr.frames[static_cast<size_t>(offset + i)]);
        out.lr.frames.push_back(clip.lr.frames[static_cast<size_t>(offset + i)]);
    }
    for (int i = 0; i + 1 < length; ++i) {
        out.hr_fwd.push_back(clip.hr_fwd[static_cast<size_t>(offset + i)]);
        out.hr_bwd.push_back(clip.hr_bwd[static_cast<size_t>(offset + i)]);
        out.lr_fwd.push_back(clip.lr_fwd[static_cast<size_t>(offset + i)]);
        out.lr_bwd.push_back(clip.lr_bwd[static_cast<size_t>(offset + i)]);
    }
    return out;
}

}  // namespace

LossReport Trainer::generator_phase(const std::vector<TrainingClip>& windows, double lr,
                                    std::vector<Frame>& fakes) {
    const int k = cfg_.model.context_radius;
    const int s = cfg_.model.upscale_factor;
    const double inv_batch = 1.0 / static_cast<double>(windows.size());

    std::vector<Tensor> batch_terms;
    LossReport report;
    double acc_rec = 0, acc_temp = 0, acc_tv = 0, acc_lat = 0, acc_pix = 0;

    for (const TrainingClip& clip : windows) {
        const int anchor = anchor_index(clip);
        ChainedFlowProvider provider(clip.lr_fwd, clip.lr_bwd);
        RolloutResult roll = recurrent_rollout(generator_window_model(*gen_), clip.lr, provider, k,
                                               anchor, s, cfg_.recurrent, cfg_.rollout_passes);
        fakes.push_back(roll.sr_context.back());
        const Frame& gt = clip.hr.frames[static_cast<size_t>(anchor)];

        std::vector<Tensor> terms;
        std::vector<double> weights;

        const Tensor l_rec = reconstruction_loss(roll.sr_anchor, gt, cfg_.loss.eps);
        terms.push_back(l_rec);
        weights.push_back(cfg_.loss.lambda_rec * inv_batch);
        acc_rec += l_rec.item() * inv_batch;

        if (cfg_.use_temporal_loss && cfg_.loss.lambda_temp > 0) {
            // SR-scale context window ending at the anchor
            const int avail = static_cast<int>(roll.sr_context.size()) - 1;
            const int D = std::min(cfg_.loss.window_D, avail);
            if (D >= 1) {
                LossConfig lc = cfg_.loss;
                lc.window_D = D;
                std::vector<Tensor> sr_frames;
                std::vector<FlowField> fwd, bwd;
                for (int d = D; d >= 1; --d)
                    sr_frames.push_back(nn::from_frame(
                        roll.sr_context[roll.sr_context.size() - 1 - static_cast<size_t>(d)]));
                sr_frames.push_back(roll.sr_anchor);
                for (int j = anchor - D; j < anchor; ++j) {
                    fwd.push_back(clip.hr_fwd[static_cast<size_t>(j)]);
                    bwd.push_back(clip.hr_bwd[static_cast<size_t>(j)]);
                }
                const Tensor l_temp = multi_frame_temporal_loss(sr_frames, fwd, bwd, lc);
                terms.push_back(l_temp);
                weights.push_back(cfg_.loss.lambda_temp * inv_batch);
                acc_temp += l_temp.item() * inv_batch;
            }
        }

        if (cfg_.loss.lambda_tv > 0) {
            const Tensor l_tv = region_aware_tv(roll.sr_anchor, gt, cfg_.loss.tau);
            terms.push_back(l_tv);
            weights.push_back(cfg_.loss.lambda_tv * inv_batch);
            acc_tv += l_tv.item() * inv_batch;
        }

        if (latent_disc_ && cfg_.loss.lambda_adv_latent > 0) {
            const Tensor z_gen = latent_disc_->encode(roll.sr_anchor);
            Tensor z_real;
            {
                nn::NoGradGuard ng;
                z_real = latent_disc_->encode(nn::from_frame(gt));
            }
            const double sigma = rng_.log_uniform(cfg_.latent.sigma_lo, cfg_.latent.sigma_hi);
            std::vector<double> nv(z_gen.numel());
            for (double& v : nv) v = rng_.normal();
            const Tensor noise = Tensor::constant(z_gen.shape(), std::move(nv));
            const Tensor l_lat = latent_adv_loss(*latent_disc_, z_gen, z_real, sigma, noise);
            terms.push_back(l_lat);
            weights.push_back(cfg_.loss.lambda_adv_latent * inv_batch);
            acc_lat += l_lat.item() * inv_batch;
        }

        if (pixel_disc_ && cfg_.loss.lambda_adv_pixel > 0) {
            const Tensor l_pix = pixel_gen_loss(*pixel_disc_, roll.sr_anchor);
            terms.push_back(l_pix);
            weights.push_back(cfg_.loss.lambda_adv_pixel * inv_batch);
            acc_pix += l_pix.item() * inv_batch;
        }

        batch_terms.push_back(nn::weighted_sum(terms, weights));
    }

    const Tensor total = nn::add_scalars(batch_terms);
    report.set("rec", acc_rec);
    report.set("temporal", acc_temp);
    report.set("tv", acc_tv);
    report.set("adv_latent", acc_lat);
    report.set("adv_pixel", acc_pix);
    // the reported total is exactly the lambda-weighted sum of the reported
    // terms (the graph total agrees up to summation order)
    report.total = cfg_.loss.lambda_rec * acc_rec + cfg_.loss.lambda_temp * acc_temp +
                   cfg_.loss.lambda_tv * acc_tv + cfg_.loss.lambda_adv_latent * acc_lat +
                   cfg_.loss.lambda_adv_pixel * acc_pix;
    std::string offender;
    if (!report.all_finite(&offender))
        throw TrainError(str_cat("non-finite generator loss term '", offender, "' at step ", step_));

    opt_gen_->zero_grad();
    total.backward();
    opt_gen_->step(lr);
    return report;
}

void Trainer::discriminator_phase(const std::vector<TrainingClip>& windows,
                                  const std::vector<Frame>& fakes, double lr, LossReport& report) {
    if (!pixel_disc_ && !latent_disc_) {
        report.set("disc_pixel", 0.0);
        report.set("disc_latent", 0.0);
        return;
    }
    const double inv_batch = 1.0 / static_cast<double>(windows.size());

    std::vector<Tensor> terms;
    std::vector<double> weights;
    double acc_pix = 0, acc_lat = 0;
    for (size_t wi = 0; wi < windows.size(); ++wi) {
        const TrainingClip& clip = windows[wi];
        const int anchor = anchor_index(clip);
        const Frame& fake = fakes[wi];  // detached phase-A anchor output
        const Frame& gt = clip.hr.frames[static_cast<size_t>(anchor)];

        if (pixel_disc_) {
            const Tensor l_d =
                pixel_disc_loss(*pixel_disc_, nn::from_frame(gt), nn::from_frame(fake));
            terms.push_back(l_d);
            weights.push_back(inv_batch);
            acc_pix += l_d.item() * inv_batch;
        }
        if (latent_disc_) {
            const Tensor z_real = latent_disc_->encode(nn::from_frame(gt));
            const double sigma = rng_.log_uniform(cfg_.latent.sigma_lo, cfg_.latent.sigma_hi);
            std::vector<double> nv(z_real.numel());
            for (double& v : nv) v = rng_.normal();
            const Tensor noise = Tensor::constant(z_real.shape(), std::move(nv));
            const Tensor l_sm = latent_score_matching_loss(*latent_disc_, z_real, sigma, noise);
            terms.push_back(l_sm);
            weights.push_back(inv_batch);
            acc_lat += l_sm.item() * inv_batch;
        }
    }
    report.set("disc_pixel", acc_pix);
    report.set("disc_latent", acc_lat);
    if (!std::isfinite(acc_pix) || !std::isfinite(acc_lat))
        throw TrainError(str_cat("non-finite discriminator loss at step ", step_));

    const Tensor total = nn::weighted_sum(terms, weights);
    opt_disc_->zero_grad();
    total.backward();
    opt_disc_->step(lr);
}

LossReport Trainer::train_step(const std::vector<int>& clip_indices) {
    if (clip_indices.empty()) throw ContractError("train_step: empty batch");
    const double lr = lr_at(std::min(epoch_, cfg_.total_epochs - 1), cfg_);

    // per-clip temporal window: the model window plus two extra frames
    const int want = 2 * cfg_.model.context_radius + 3;
    std::vector<TrainingClip> windows;
    windows.reserve(clip_indices.size());
    for (const int ci : clip_indices) {
        const TrainingClip& clip = data_.clips[static_cast<size_t>(ci)];
        const int n = clip.lr.num_frames();
        if (n <= want) {
            windows.push_back(clip);
        } else {
            const int offset = static_cast<int>(rng_.uniform_int(0, n - want));
            windows.push_back(slice_window(clip, offset, want));
        }
    }

    std::vector<Frame> fakes;
    LossReport report = generator_phase(windows, lr, fakes);
    discriminator_phase(windows, fakes, lr, report);
    ++step_;
    return report;
}

void Trainer::train() {
    std::error_code ec;
    fs::create_directories(out_dir_, ec);
    if (ec) throw IoError(str_cat("cannot create ", out_dir_.string()));

    {
        std::ofstream cfg_out(out_dir_ / "config.json");
        cfg_out << cfg_.to_json_string() << "\n";
    }
    const fs::path metrics_path = out_dir_ / "metrics.jsonl";
    std::ofstream metrics(metrics_path, std::ios::app);
    if (!metrics) throw IoError(str_cat("cannot open ", metrics_path.string()));
    if (step_ == 0) {
        json header = {{"type", "header"}, {"seed", cfg_.seed}, {"clips", data_.clips.size()}};
        metrics << header.dump() << "\n";
    }

    if (cfg_.total_epochs == 0 || (cfg_.max_steps >= 0 && step_ >= cfg_.max_steps) ||
        epoch_ >= cfg_.total_epochs) {
        // nothing to run; still leave a checkpoint behind
        finished_ = true;
        save_checkpoint(out_dir_ / "ckpt_final");
        return;
    }

    const int n_clips = static_cast<int>(data_.clips.size());
    const int batch = std::min(cfg_.batch_size, n_clips);
    bool done = false;
    for (; epoch_ < cfg_.total_epochs && !done;) {
        // deterministic shuffle per epoch
        std::vector<int> order(static_cast<size_t>(n_clips));
        for (int i = 0; i < n_clips; ++i) order[static_cast<size_t>(i)] = i;
        Rng shuffle_rng = Rng(mix_seed(cfg_.seed, 0x0DD + static_cast<std::uint64_t>(epoch_)));
        for (int i = n_clips - 1; i > 0; --i)
            std::swap(order[static_cast<size_t>(i)],
                      order[static_cast<size_t>(shuffle_rng.uniform_int(0, i))]);

        int b = batch_offset_;
        for (; b + batch <= n_clips; b += batch) {
            std::vector<int> indices(order.begin() + b, order.begin() + b + batch);
            const LossReport report = train_step(indices);
            json line = {{"step", step_}, {"epoch", epoch_}, {"lr", lr_at(epoch_, cfg_)}};
            for (const auto& [name, v] : report.terms) line[name] = v;
            line["total"] = report.total;
            metrics << line.dump() << "\n";
            if (cfg_.max_steps >= 0 && step_ >= cfg_.max_steps) {
                b += batch;
                done = true;
                break;
            }
        }
        if (b + batch > n_clips) {
            // epoch completed
            batch_offset_ = 0;
            ++epoch_;
            if (!done && cfg_.checkpoint_period_epochs > 0 &&
                epoch_ % cfg_.checkpoint_period_epochs == 0) {
                char name[32];
                std::snprintf(name, sizeof name, "ckpt_epoch_%04d", epoch_);
                save_checkpoint(out_dir_ / name);
            }
        } else {
            batch_offset_ = b;  // stopped mid-epoch; resume picks up here
        }
    }
    finished_ = true;
    save_checkpoint(out_dir_ / "ckpt_final");
}

void Trainer::save_checkpoint(const fs::path& dir) const {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError(str_cat("cannot create ", dir.string()));
    gen_->save(dir / "generator");
    if (pixel_disc_) pixel_disc_->save(dir / "pixel_disc");
    if (latent_ae_) latent_ae_->save(dir / "latent_ae");
    if (latent_dn_) latent_dn_->save(dir / "latent_dn");
    if (latent_disc_) latent_disc_->save(dir / "latent_disc");
    opt_gen_->save(dir / "opt_gen.bin");
    opt_disc_->save(dir / "opt_disc.bin");
    json state = {{"epoch", epoch_},
                  {"step", step_},
                  {"batch_offset", batch_offset_},
                  {"finished", finished_},
                  {"rng", rng_.serialize()},
                  {"train_config", json::parse(cfg_.to_json_string())}};
    std::ofstream out(dir / "state.json");
    if (!out) throw IoError(str_cat("cannot write state.json in ", dir.string()));
    out << state.dump(2) << "\n";
}

void Trainer::load_checkpoint(const fs::path& dir) {
    std::ifstream in(dir / "state.json");
    if (!in) throw IoError(str_cat("missing state.json in ", dir.string()));
    json state;
    try {
        in >> state;
    } catch (const json::exception& e) {
        throw IoError(str_cat("corrupt state.json: ", e.what()));
    }
    gen_->params().load(dir / "generator" / "weights.bin");
    if (pixel_disc_) pixel_disc_->params().load(dir / "pixel_disc" / "weights.bin");
    if (latent_ae_) latent_ae_->params().load(dir / "latent_ae" / "weights.bin");
    if (latent_dn_) latent_dn_->params().load(dir / "latent_dn" / "weights.bin");
    if (latent_disc_) latent_disc_->adapters().load(dir / "latent_disc" / "adapters.bin");
    opt_gen_->load(dir / "opt_gen.bin");
    opt_disc_->load(dir / "opt_disc.bin");
    epoch_ = state.at("epoch").get<int>();
    step_ = state.at("step").get<long>();
    batch_offset_ = state.value("batch_offset", 0);
    finished_ = state.value("finished", false);
    rng_ = Rng::deserialize(state.at("rng").get<std::string>());
}

}  // namespace tinyvsr
