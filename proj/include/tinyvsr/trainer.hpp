// Copyright (c) 2026 tinyvsr contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tinyvsr/adversarial.hpp"
#include "tinyvsr/backbone.hpp"
#include "tinyvsr/losses.hpp"
#include "tinyvsr/synth.hpp"

namespace tinyvsr {

// Recurrent training buffer: LR-resolution slots progressively overwritten by
// area-downsampled model outputs.
struct FrameBuffer {
    enum class Origin { kLR, kSRDownsampled };
    std::vector<Frame> slots;
    std::vector<Origin> origin_tags;

    static FrameBuffer from_clip(const VideoClip& lr);
    // Overwrites slot t with the SR frame downsampled by `factor`; the slot
    // resolution invariant is enforced here.
    void write_sr(int t, const Frame& sr, int factor);
};

// Supplies the window-alignment flow from the center grid into a neighbor
// frame (LR scale). Implementations chain adjacent-pair flows.
class FlowProvider {
public:
    virtual ~FlowProvider() = default;
    virtual FlowField window_flow(int center, int neighbor) const = 0;
};

// Chains dataset ground-truth adjacent flows.
class ChainedFlowProvider : public FlowProvider {
public:
    ChainedFlowProvider(std::vector<FlowField> fwd, std::vector<FlowField> bwd);
    FlowField window_flow(int center, int neighbor) const override;

private:
    std::vector<FlowField> fwd_, bwd_;  // fwd[t]: grid t -> t+1; bwd[t]: grid t+1 -> t
};

// Lucas-Kanade flows between the raw LR frames (inference path).
std::unique_ptr<ChainedFlowProvider> make_estimated_flow_provider(const VideoClip& lr, int levels = 3);

// One window-to-frame model evaluation; the real generator and the test
// stubs share this signature.
using WindowModel = std::function<nn::Tensor(const std::vector<Frame>& window,
                                             const std::vector<FlowField>& flows)>;
WindowModel generator_window_model(const Generator& gen);

struct RolloutResult {
    nn::Tensor sr_anchor;           // graph-carrying when grads are enabled
    std::vector<Frame> sr_context;  // SR frames for t = k..anchor (anchor last)
    FrameBuffer buffer;
};

// Sweeps t = k..anchor building each window from the current buffer, runs the
// model, and (when recurrent) writes the downsampled output back into slot t.
// Only the final anchor evaluation records gradients. passes > 1 repeats the
// sweep over the already-updated buffer (second-order outputs).
RolloutResult recurrent_rollout(const WindowModel& model, const VideoClip& lr_clip,
                                const FlowProvider& flows, int k, int anchor, int sr_factor,
                                bool recurrent = true, int passes = 1);

// Full-clip sliding-window inference (every frame, edge-replicated windows).
// Alignment flows default to Lucas-Kanade estimates from the LR frames; pass
// a provider to align with known flows instead.
VideoClip infer_clip(const Generator& gen, const VideoClip& lr, bool recurrent = true,
                     const FlowProvider* flows = nullptr);

// ---- dataset ----

struct TrainingClip {
    VideoClip hr, lr;
    std::vector<FlowField> lr_fwd, lr_bwd;  // adjacent-pair flows at LR scale
    std::vector<FlowField> hr_fwd, hr_bwd;  // and at HR (= SR) scale
    std::string dir;
};

struct Dataset {
    std::vector<TrainingClip> clips;
    static Dataset load(const std::filesystem::path& root);
};

// ---- configuration ----

struct TrainConfig {
    double lr = 2e-5;
    int lr_halving_period_epochs = 50;
    int total_epochs = 200;
    int batch_size = 2;
    int max_steps = -1;  // desk-scale cap; -1 runs the full schedule
    int checkpoint_period_epochs = 50;
    std::uint64_t seed = 7;
    bool recurrent = true;
    bool use_temporal_loss = true;
    bool use_latent_disc = true;
    bool use_pixel_disc = true;
    int pretrain_ae_steps = 400;
    int pretrain_dn_steps = 300;
    double pretrain_lr = 2e-3;
    int rollout_passes = 1;  // 2 enables the second cyclic sweep
    // "gt" aligns with the dataset's exact flows; "estimated" runs the
    // Lucas-Kanade estimator on the LR frames (the inference-time source)
    std::string flow_source = "gt";

    ModelConfig model;
    LossConfig loss;
    LatentConfig latent;
    PixelDiscConfig pixel_disc;

    void validate() const;
    std::string to_json_string() const;
    static TrainConfig from_json_string(const std::string& s);
};

// lr * 0.5^floor(epoch / period)
double lr_at(int epoch, const TrainConfig& cfg);

// ---- trainer ----

class Trainer {
public:
    Trainer(const TrainConfig& cfg, Dataset dataset, std::filesystem::path out_dir);

    // Phase A (generator) then phase B (discriminators), 1:1. Throws
    // TrainError naming the offending term on non-finite losses.
    LossReport train_step(const std::vector<int>& clip_indices);

    // Full loop: metrics.jsonl + periodic checkpoints + final checkpoint.
    void train();

    void save_checkpoint(const std::filesystem::path& dir) const;
    void load_checkpoint(const std::filesystem::path& dir);

    Generator& generator() { return *gen_; }
    PixelDiscriminator* pixel_disc() { return pixel_disc_.get(); }
    LatentDiscriminator* latent_disc() { return latent_disc_.get(); }
    const TrainConfig& config() const { return cfg_; }
    long step() const { return step_; }
    int epoch() const { return epoch_; }
    bool finished() const { return finished_; }
    int anchor_index(const TrainingClip& clip) const;

private:
    LossReport generator_phase(const std::vector<TrainingClip>& windows, double lr,
                               std::vector<Frame>& fakes);
    void discriminator_phase(const std::vector<TrainingClip>& windows,
                             const std::vector<Frame>& fakes, double lr, LossReport& report);

    TrainConfig cfg_;
    Dataset data_;
    std::filesystem::path out_dir_;
    std::unique_ptr<Generator> gen_;
    std::shared_ptr<LatentAutoencoder> latent_ae_;
    std::shared_ptr<LatentDenoiser> latent_dn_;
    std::unique_ptr<LatentDiscriminator> latent_disc_;
    std::unique_ptr<PixelDiscriminator> pixel_disc_;
    std::unique_ptr<nn::Adam> opt_gen_, opt_disc_;
    Rng rng_;
    long step_ = 0;
    int epoch_ = 0;
    int batch_offset_ = 0;
    bool finished_ = false;
};

}  // namespace tinyvsr
