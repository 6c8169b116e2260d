// Copyright (c) 2026 tinyvsr contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "tinyvsr/image.hpp"
#include "tinyvsr/layers.hpp"
#include "tinyvsr/tensor.hpp"

namespace tinyvsr {

// ---- latent space ----

struct LatentConfig {
    int latent_channels = 4;
    int downsample = 4;  // encoder spatial reduction
    int base_channels = 24;
    int denoiser_channels = 48;
    double sigma_lo = 0.02, sigma_hi = 1.0;  // log-uniform noise schedule
    int lora_rank = 4;
    double lora_scale = 1.0;
    bool adapt_encoder = true;  // freeze-adapters ablation switch
    std::uint64_t seed = 23;
};

// Small convolutional autoencoder standing in for a pretrained latent prior:
// 4 encoder convs with 4x downsampling to `latent_channels` and a mirrored
// decoder. Pretrains on HR frames before any adversarial use.
class LatentAutoencoder {
public:
    explicit LatentAutoencoder(const LatentConfig& cfg);

    nn::Tensor encode(const nn::Tensor& frame) const;  // [3,H,W] -> [z,H/4,W/4]
    nn::Tensor decode(const nn::Tensor& z) const;

    nn::ParamStore& params() { return *store_; }
    const nn::ParamStore& params() const { return *store_; }
    const LatentConfig& config() const { return cfg_; }
    void freeze();

    struct Meta {
        bool trained = false;
        int steps = 0;
        double holdout_psnr = 0.0;
        std::uint64_t seed = 0;
    };
    Meta meta;

    void save(const std::filesystem::path& dir) const;
    static std::unique_ptr<LatentAutoencoder> load(const std::filesystem::path& dir);

    struct Impl;
    std::shared_ptr<Impl> impl_;

private:
    LatentConfig cfg_;
    std::shared_ptr<nn::ParamStore> store_;
};

// Residual x0-prediction denoiser over latents; sigma enters as an extra
// feature map holding log(sigma).
class LatentDenoiser {
public:
    explicit LatentDenoiser(const LatentConfig& cfg);

    nn::Tensor forward(const nn::Tensor& z_noisy, double sigma) const;

    nn::ParamStore& params() { return *store_; }
    const nn::ParamStore& params() const { return *store_; }
    void freeze();

    struct Meta {
        bool trained = false;
        int steps = 0;
        double final_loss = 0.0;
    };
    Meta meta;

    void save(const std::filesystem::path& dir) const;
    static std::unique_ptr<LatentDenoiser> load(const std::filesystem::path& dir,
                                                const LatentConfig& cfg);

    struct Impl;
    std::shared_ptr<Impl> impl_;

private:
    LatentConfig cfg_;
    std::shared_ptr<nn::ParamStore> store_;
};

// Trains the autoencoder on frame crops; returns held-out PSNR written into
// meta. steps == 0 leaves the net untrained (meta flags it).
void pretrain_latent_encoder(LatentAutoencoder& ae, const std::vector<Frame>& dataset, int steps,
                             double lr = 2e-3);
void pretrain_latent_denoiser(LatentDenoiser& dn, const LatentAutoencoder& ae,
                              const std::vector<Frame>& dataset, int steps, double lr = 2e-3);

// Frozen pretrained encoder+denoiser with LoRA adapters on every convolution.
// Zero-initialized adapters reproduce the frozen outputs bit-exactly.
class LatentDiscriminator {
public:
    LatentDiscriminator(std::shared_ptr<LatentAutoencoder> ae, std::shared_ptr<LatentDenoiser> dn,
                        const LatentConfig& cfg);

    nn::Tensor encode(const nn::Tensor& frame) const;
    nn::Tensor denoise(const nn::Tensor& z_noisy, double sigma) const;

    // s(z, sigma) = (D(z + sigma * noise, sigma) - z) / sigma^2
    nn::Tensor score(const nn::Tensor& z, double sigma, const nn::Tensor& noise) const;

    nn::ParamStore& adapters() { return *adapter_store_; }
    const LatentConfig& config() const { return cfg_; }
    const LatentAutoencoder& frozen_encoder() const { return *ae_; }
    const LatentDenoiser& frozen_denoiser() const { return *dn_; }

    void save(const std::filesystem::path& dir) const;

    struct Impl;
    std::shared_ptr<Impl> impl_;

private:
    LatentConfig cfg_;
    std::shared_ptr<LatentAutoencoder> ae_;
    std::shared_ptr<LatentDenoiser> dn_;
    std::shared_ptr<nn::ParamStore> adapter_store_;
};

// mean |s(z_gen) - s(z_real)|^2 with (sigma, noise) drawn once and shared by
// both score evaluations; gradient reaches z_gen only (z_real is detached
// inside).
nn::Tensor latent_adv_loss(const LatentDiscriminator& disc, const nn::Tensor& z_gen,
                           const nn::Tensor& z_real, double sigma, const nn::Tensor& noise);

// Denoising score-matching objective on a real latent (adapter training).
nn::Tensor latent_score_matching_loss(const LatentDiscriminator& disc, const nn::Tensor& z_real,
                                      double sigma, const nn::Tensor& noise);

// ---- pixel space ----

struct PixelDiscConfig {
    int stem_channels = 32;     // frozen random feature stem
    int head_channels = 64;     // trainable patch head
    double leak = 0.2;
    std::uint64_t seed = 31;
};

// Fixed random conv stem (never trained) feeding a small trainable patch
// classifier; scores are a per-patch map.
class PixelDiscriminator {
public:
    explicit PixelDiscriminator(const PixelDiscConfig& cfg);

    nn::Tensor score_map(const nn::Tensor& frame) const;

    nn::ParamStore& params() { return *store_; }
    const nn::ParamStore& params() const { return *store_; }
    std::vector<nn::Tensor> trainable() const { return store_->trainable(); }

    void save(const std::filesystem::path& dir) const;
    static std::unique_ptr<PixelDiscriminator> load(const std::filesystem::path& dir);

    struct Impl;
    std::shared_ptr<Impl> impl_;

private:
    PixelDiscConfig cfg_;
    std::shared_ptr<nn::ParamStore> store_;
};

// E[max(0, 1 - D(real))] + E[max(0, 1 + D(fake))]; fake enters detached.
nn::Tensor pixel_disc_loss(const PixelDiscriminator& disc, const nn::Tensor& real,
                           const nn::Tensor& fake_detached);

// -E[D(fake)]; gradient flows into fake.
nn::Tensor pixel_gen_loss(const PixelDiscriminator& disc, const nn::Tensor& fake);

}  // namespace tinyvsr
