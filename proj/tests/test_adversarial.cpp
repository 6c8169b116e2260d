// Copyright (c) 2026 tinyvsr contributors
// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "doctest.h"
#include "test_util.hpp"
#include "tinyvsr/adversarial.hpp"
#include "tinyvsr/synth.hpp"

using namespace tinyvsr;
using namespace tinyvsr::testutil;
using nn::Tensor;

namespace {

std::vector<Frame> small_dataset(int n, std::uint64_t seed) {
    std::vector<Frame> frames;
    for (int i = 0; i < n; ++i) {
        const SceneSpec spec =
            random_scene_spec(ScenePattern::kTexturedSprites, 32, 32, 1, seed + static_cast<std::uint64_t>(i));
        frames.push_back(generate_synthetic_clip(spec).clip.frames[0]);
    }
    return frames;
}

}  // namespace

TEST_CASE("latent encoder shape contract and untrained metadata") {
    LatentConfig cfg;
    LatentAutoencoder ae(cfg);
    nn::NoGradGuard ng;
    Rng rng(71);
    const Tensor z = ae.encode(nn::from_frame(random_frame(32, 32, 3, rng)));
    CHECK(z.shape() == nn::Shape{cfg.latent_channels, 8, 8});
    const Tensor rec = ae.decode(z);
    CHECK(rec.shape() == nn::Shape{3, 32, 32});

    pretrain_latent_encoder(ae, small_dataset(2, 5), 0);
    CHECK_FALSE(ae.meta.trained);
    CHECK(ae.meta.steps == 0);
}

TEST_CASE("autoencoder pretraining reduces the fixed-batch loss") {
    LatentConfig cfg;
    cfg.base_channels = 12;
    LatentAutoencoder ae(cfg);
    const auto dataset = small_dataset(3, 9);
    const Tensor x = nn::from_frame(dataset[0]);
    auto batch_loss = [&] {
        nn::NoGradGuard ng;
        return nn::mean(nn::square(nn::sub(ae.decode(ae.encode(x)), x))).item();
    };
    const double before = batch_loss();
    pretrain_latent_encoder(ae, dataset, 60, 2e-3);
    const double after = batch_loss();
    CHECK(after <= before);
    CHECK(ae.meta.trained);
    CHECK(ae.meta.holdout_psnr > 0.0);
}

TEST_CASE("pretraining on an empty dataset is a contract error") {
    LatentAutoencoder ae((LatentConfig()));
    std::vector<Frame> empty;
    CHECK_THROWS_AS(pretrain_latent_encoder(ae, empty, 10), ContractError);
}

TEST_CASE("latent score with an identity-like denoiser stub") {
    // score = (D(z + sigma e) - z) / sigma^2; with D = identity on its input
    // this collapses to e / sigma. The denoiser is residual (D = input + net),
    // so zeroing the final conv makes it exactly the identity map.
    LatentConfig cfg;
    auto ae = std::make_shared<LatentAutoencoder>(cfg);
    auto dn = std::make_shared<LatentDenoiser>(cfg);
    for (auto& [name, t] : dn->params().items())
        if (name == "dn.c4.w" || name == "dn.c4.b")
            std::fill(const_cast<Tensor&>(t).data().begin(), const_cast<Tensor&>(t).data().end(), 0.0);
    LatentDiscriminator disc(ae, dn, cfg);

    Rng rng(72);
    const double sigma = 0.7;
    Tensor z = Tensor::constant({cfg.latent_channels, 4, 4}, [&] {
        std::vector<double> v(static_cast<size_t>(cfg.latent_channels) * 16);
        for (double& x : v) x = rng.uniform(-1.0, 1.0);
        return v;
    }());
    Tensor noise = Tensor::constant(z.shape(), [&] {
        std::vector<double> v(z.numel());
        for (double& x : v) x = rng.normal();
        return v;
    }());
    const Tensor s = disc.score(z, sigma, noise);
    for (size_t i = 0; i < s.numel(); ++i)
        CHECK(s.data()[i] == doctest::Approx(noise.data()[i] / sigma).epsilon(1e-12));

    CHECK_THROWS_AS(disc.score(z, 0.0, noise), ConfigError);
}

TEST_CASE("zero-initialized adapters reproduce frozen outputs bit-exactly") {
    LatentConfig cfg;
    auto ae = std::make_shared<LatentAutoencoder>(cfg);
    auto dn = std::make_shared<LatentDenoiser>(cfg);
    pretrain_latent_encoder(*ae, small_dataset(2, 13), 5);
    LatentDiscriminator disc(ae, dn, cfg);

    Rng rng(73);
    nn::NoGradGuard ng;
    const Tensor frame = nn::from_frame(random_frame(32, 32, 3, rng));
    const Tensor z_frozen = ae->encode(frame);
    const Tensor z_adapted = disc.encode(frame);
    REQUIRE(z_frozen.numel() == z_adapted.numel());
    for (size_t i = 0; i < z_frozen.numel(); ++i) CHECK(z_frozen.data()[i] == z_adapted.data()[i]);

    const double sigma = 0.3;
    const Tensor zn = z_frozen;
    const Tensor d_frozen = dn->forward(zn, sigma);
    const Tensor d_adapted = disc.denoise(zn, sigma);
    for (size_t i = 0; i < d_frozen.numel(); ++i) CHECK(d_frozen.data()[i] == d_adapted.data()[i]);
}

TEST_CASE("latent adversarial loss: zero at equality, positive otherwise, gradients check") {
    LatentConfig cfg;
    auto ae = std::make_shared<LatentAutoencoder>(cfg);
    auto dn = std::make_shared<LatentDenoiser>(cfg);
    LatentDiscriminator disc(ae, dn, cfg);
    Rng rng(74);

    Tensor z = random_leaf({cfg.latent_channels, 4, 4}, rng);
    Tensor noise = Tensor::constant(z.shape(), [&] {
        std::vector<double> v(z.numel());
        for (double& x : v) x = rng.normal();
        return v;
    }());

    SUBCASE("z_gen = z_real with shared noise -> exactly 0") {
        const Tensor loss = latent_adv_loss(disc, z, z, 0.5, noise);
        CHECK(loss.item() == 0.0);
    }
    SUBCASE("distinct latents -> positive") {
        Tensor z2 = random_leaf(z.shape(), rng);
        CHECK(latent_adv_loss(disc, z, z2, 0.5, noise).item() > 0.0);
    }
    SUBCASE("gradient flows to z_gen only and matches finite differences") {
        Tensor z_real = random_leaf(z.shape(), rng);
        auto loss = [&] { return latent_adv_loss(disc, z, z_real, 0.5, noise); };
        CHECK(max_fd_rel_err(loss, z, 15, rng) < 1e-4);
        z_real.zero_grad();
        loss().backward();
        double acc = 0.0;
        for (double g : z_real.grad()) acc += std::abs(g);
        CHECK(acc == 0.0);
    }
}

TEST_CASE("hinge losses on constant-score stubs") {
    // score maps are constant when the head bias dominates: zero all weights,
    // set the final bias
    PixelDiscConfig cfg;
    PixelDiscriminator disc(cfg);
    auto set_constant_score = [&](double c) {
        for (auto& [name, t] : disc.params().items()) {
            auto& jt = const_cast<Tensor&>(t);
            if (name == "head.c2.b")
                std::fill(jt.data().begin(), jt.data().end(), c);
            else if (name.rfind("head", 0) == 0)
                std::fill(jt.data().begin(), jt.data().end(), 0.0);
        }
    };
    Rng rng(75);
    const Tensor real = nn::from_frame(random_frame(16, 16, 3, rng));
    const Tensor fake = nn::from_frame(random_frame(16, 16, 3, rng));

    SUBCASE("D = 0 everywhere -> disc loss 2") {
        set_constant_score(0.0);
        CHECK(pixel_disc_loss(disc, real, fake).item() == doctest::Approx(2.0).epsilon(1e-12));
    }
    SUBCASE("D = c stub -> gen loss -c") {
        set_constant_score(0.37);
        CHECK(pixel_gen_loss(disc, fake).item() == doctest::Approx(-0.37).epsilon(1e-12));
    }
    SUBCASE("perfect separation -> 0; inverted -> 4") {
        // evaluate the two hinge terms against ideal-score stubs directly
        set_constant_score(1.0);
        const double real_term = nn::mean(nn::relu(nn::affine(disc.score_map(real), -1.0, 1.0))).item();
        CHECK(real_term == 0.0);
        set_constant_score(-1.0);
        const double fake_term = nn::mean(nn::relu(nn::affine(disc.score_map(fake), 1.0, 1.0))).item();
        CHECK(fake_term == 0.0);

        set_constant_score(-1.0);
        const double r_bad = nn::mean(nn::relu(nn::affine(disc.score_map(real), -1.0, 1.0))).item();
        set_constant_score(1.0);
        const double f_bad = nn::mean(nn::relu(nn::affine(disc.score_map(fake), 1.0, 1.0))).item();
        CHECK(r_bad + f_bad == doctest::Approx(4.0).epsilon(1e-12));
    }
}

TEST_CASE("pixel generator loss gradient and oracle") {
    PixelDiscConfig cfg;
    PixelDiscriminator disc(cfg);
    Rng rng(76);
    Tensor fake = random_leaf({3, 16, 16}, rng, 0.2, 0.8);

    // brute-force -mean over the score map
    const Tensor scores = disc.score_map(fake);
    double acc = 0.0;
    for (double v : scores.data()) acc += v;
    const double expected = -acc / static_cast<double>(scores.numel());
    CHECK(pixel_gen_loss(disc, fake).item() == doctest::Approx(expected).epsilon(1e-10));

    CHECK(max_fd_rel_err([&] { return pixel_gen_loss(disc, fake); }, fake, 15, rng) < 1e-4);
}

TEST_CASE("pixel disc loss sends no gradient into the fake input") {
    PixelDiscConfig cfg;
    PixelDiscriminator disc(cfg);
    Rng rng(77);
    Tensor real = random_leaf({3, 16, 16}, rng, 0.0, 1.0);
    Tensor fake = random_leaf({3, 16, 16}, rng, 0.0, 1.0);
    const Tensor loss = pixel_disc_loss(disc, real, fake);
    fake.zero_grad();
    loss.backward();
    double acc = 0.0;
    for (double g : fake.grad()) acc += std::abs(g);
    CHECK(acc == 0.0);

    // head parameters do receive gradients
    double head_grad = 0.0;
    for (auto& [name, t] : disc.params().items())
        if (t.requires_grad() && t.grad().size() == t.numel())
            for (double g : t.grad()) head_grad += std::abs(g);
    CHECK(head_grad > 0.0);
}

TEST_CASE("frozen stem of the pixel discriminator never trains") {
    PixelDiscriminator disc((PixelDiscConfig()));
    for (auto& [name, t] : disc.params().items()) {
        if (name.rfind("stem", 0) == 0) CHECK_FALSE(t.requires_grad());
        if (name.rfind("head", 0) == 0) CHECK(t.requires_grad());
    }
}

TEST_CASE("lora adapter parameter accounting and rank validation") {
    nn::ParamStore ps;
    Rng rng(78);
    nn::Conv2d frozen(ps, "conv", 8, 16, 3, 1, rng, /*trainable=*/false);

    nn::ParamStore adapters;
    nn::LoraConv2d lora(adapters, "conv", frozen, 4, 1.0, rng);
    // r * (m + n) new trainables for an m x n effective weight
    CHECK(lora.adapter_param_count() == 4 * (16 + 8 * 9));
    CHECK(adapters.trainable().size() == 2);

    nn::ParamStore ps2;
    CHECK_THROWS_AS(nn::LoraConv2d(ps2, "too_big", frozen, 16, 1.0, rng), ConfigError);
}

TEST_CASE("one adapter step changes outputs while frozen weights stay put") {
    LatentConfig cfg;
    auto ae = std::make_shared<LatentAutoencoder>(cfg);
    auto dn = std::make_shared<LatentDenoiser>(cfg);
    LatentDiscriminator disc(ae, dn, cfg);
    Rng rng(79);

    const std::vector<double> frozen_before = dn->params().find("dn.c2.w").data();

    Tensor z = Tensor::constant({cfg.latent_channels, 4, 4}, [&] {
        std::vector<double> v(static_cast<size_t>(cfg.latent_channels) * 16);
        for (double& x : v) x = rng.uniform(-0.5, 0.5);
        return v;
    }());
    Tensor noise = Tensor::constant(z.shape(), [&] {
        std::vector<double> v(z.numel());
        for (double& x : v) x = rng.normal();
        return v;
    }());

    Frame probe_frame = random_frame(32, 32, 3, rng);
    auto probe = [&] {
        nn::NoGradGuard ng;
        return disc.denoise(disc.encode(nn::from_frame(probe_frame)), 0.5).data();
    };
    const std::vector<double> out_before = probe();

    nn::Adam opt(disc.adapters().trainable());
    const Tensor loss = latent_score_matching_loss(disc, z, 0.5, noise);
    opt.zero_grad();
    loss.backward();
    opt.step(1e-2);

    const std::vector<double> out_after = probe();
    double delta = 0.0;
    for (size_t i = 0; i < out_before.size(); ++i) delta += std::abs(out_after[i] - out_before[i]);
    CHECK(delta > 0.0);

    const std::vector<double>& frozen_after = dn->params().find("dn.c2.w").data();
    for (size_t i = 0; i < frozen_before.size(); ++i) CHECK(frozen_before[i] == frozen_after[i]);
}

TEST_CASE("denoiser pretraining runs and records metadata") {
    LatentConfig cfg;
    cfg.base_channels = 12;
    cfg.denoiser_channels = 16;
    LatentAutoencoder ae(cfg);
    LatentDenoiser dn(cfg);
    const auto dataset = small_dataset(2, 31);
    pretrain_latent_denoiser(dn, ae, dataset, 8);
    CHECK(dn.meta.trained);
    CHECK(dn.meta.steps == 8);
    CHECK(std::isfinite(dn.meta.final_loss));
}
