// Copyright (c) 2026 tinyvsr contributors
// SPDX-License-Identifier: Apache-2.0
#include "tinyvsr/adversarial.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

namespace tinyvsr {

using nn::Tensor;
using json = nlohmann::json;

namespace {

json latent_config_json(const LatentConfig& c) {
    return json{{"latent_channels", c.latent_channels}, {"downsample", c.downsample},
                {"base_channels", c.base_channels},     {"denoiser_channels", c.denoiser_channels},
                {"sigma_lo", c.sigma_lo},               {"sigma_hi", c.sigma_hi},
                {"lora_rank", c.lora_rank},             {"lora_scale", c.lora_scale},
                {"adapt_encoder", c.adapt_encoder},     {"seed", c.seed}};
}

LatentConfig latent_config_from_json(const json& j) {
    LatentConfig c;
    c.latent_channels = j.value("latent_channels", c.latent_channels);
    c.downsample = j.value("downsample", c.downsample);
    c.base_channels = j.value("base_channels", c.base_channels);
    c.denoiser_channels = j.value("denoiser_channels", c.denoiser_channels);
    c.sigma_lo = j.value("sigma_lo", c.sigma_lo);
    c.sigma_hi = j.value("sigma_hi", c.sigma_hi);
    c.lora_rank = j.value("lora_rank", c.lora_rank);
    c.lora_scale = j.value("lora_scale", c.lora_scale);
    c.adapt_encoder = j.value("adapt_encoder", c.adapt_encoder);
    c.seed = j.value("seed", c.seed);
    return c;
}

Frame random_crop(const Frame& f, int size, Rng& rng) {
    if (f.height <= size || f.width <= size) return f;
    const int y0 = static_cast<int>(rng.uniform_int(0, f.height - size));
    const int x0 = static_cast<int>(rng.uniform_int(0, f.width - size));
    Frame out(size, size, f.channels);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            for (int c = 0; c < f.channels; ++c) out.at(y, x, c) = f.at(y0 + y, x0 + x, c);
    return out;
}

Tensor gaussian_noise_like(const Tensor& t, Rng& rng) {
    std::vector<double> v(t.numel());
    for (double& x : v) x = rng.normal();
    return Tensor::constant(t.shape(), std::move(v));
}

}  // namespace

// ---- LatentAutoencoder ----

struct LatentAutoencoder::Impl {
    nn::Conv2d e1, e2, e3, e4;
    nn::Conv2d d1, d2, d3, d4;
};

LatentAutoencoder::LatentAutoencoder(const LatentConfig& cfg) : cfg_(cfg) {
    if (cfg.downsample != 4) throw ConfigError("latent encoder architecture pins downsample = 4");
    store_ = std::make_shared<nn::ParamStore>();
    impl_ = std::make_shared<Impl>();
    Rng rng(mix_seed(cfg.seed, 0xAE));
    const int b = cfg.base_channels, z = cfg.latent_channels;
    impl_->e1 = nn::Conv2d(*store_, "enc.c1", 3, b, 3, 1, rng);
    impl_->e2 = nn::Conv2d(*store_, "enc.c2", b, 2 * b, 3, 2, rng);
    impl_->e3 = nn::Conv2d(*store_, "enc.c3", 2 * b, 2 * b, 3, 2, rng);
    impl_->e4 = nn::Conv2d(*store_, "enc.c4", 2 * b, z, 3, 1, rng);
    impl_->d1 = nn::Conv2d(*store_, "dec.c1", z, 2 * b, 3, 1, rng);
    impl_->d2 = nn::Conv2d(*store_, "dec.c2", 2 * b, b, 3, 1, rng);
    impl_->d3 = nn::Conv2d(*store_, "dec.c3", b, b, 3, 1, rng);
    impl_->d4 = nn::Conv2d(*store_, "dec.c4", b, 3, 3, 1, rng);
    // mid-range output at init keeps the [0,1] clamp from zeroing gradients
    nn::fill(impl_->d4.b, 0.5);
    meta.seed = cfg.seed;
}

Tensor LatentAutoencoder::encode(const Tensor& frame) const {
    Tensor h = nn::silu(impl_->e1.forward(frame));
    h = nn::silu(impl_->e2.forward(h));
    h = nn::silu(impl_->e3.forward(h));
    return impl_->e4.forward(h);
}

Tensor LatentAutoencoder::decode(const Tensor& z) const {
    Tensor h = nn::silu(impl_->d1.forward(z));
    h = nn::silu(impl_->d2.forward(nn::upsample_nearest2x(h)));
    h = nn::silu(impl_->d3.forward(nn::upsample_nearest2x(h)));
    return nn::clamp01(impl_->d4.forward(h));
}

void LatentAutoencoder::freeze() {
    for (auto& [name, t] : store_->items()) const_cast<Tensor&>(t).set_trainable(false);
}

void LatentAutoencoder::save(const std::filesystem::path& dir) const {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError(str_cat("cannot create ", dir.string()));
    store_->save(dir / "weights.bin");
    json j = latent_config_json(cfg_);
    j["meta"] = {{"trained", meta.trained},
                 {"steps", meta.steps},
                 {"holdout_psnr", meta.holdout_psnr},
                 {"seed", meta.seed}};
    std::ofstream out(dir / "metadata.json");
    out << j.dump(2) << "\n";
}

std::unique_ptr<LatentAutoencoder> LatentAutoencoder::load(const std::filesystem::path& dir) {
    std::ifstream in(dir / "metadata.json");
    if (!in) throw IoError(str_cat("missing metadata.json in ", dir.string()));
    json j;
    in >> j;
    auto ae = std::make_unique<LatentAutoencoder>(latent_config_from_json(j));
    ae->store_->load(dir / "weights.bin");
    if (j.contains("meta")) {
        ae->meta.trained = j["meta"].value("trained", false);
        ae->meta.steps = j["meta"].value("steps", 0);
        ae->meta.holdout_psnr = j["meta"].value("holdout_psnr", 0.0);
        ae->meta.seed = j["meta"].value("seed", std::uint64_t{0});
    }
    return ae;
}

// ---- LatentDenoiser ----

struct LatentDenoiser::Impl {
    nn::Conv2d n1, n2, n3, n4;
};

LatentDenoiser::LatentDenoiser(const LatentConfig& cfg) : cfg_(cfg) {
    store_ = std::make_shared<nn::ParamStore>();
    impl_ = std::make_shared<Impl>();
    Rng rng(mix_seed(cfg.seed, 0xD0));
    const int z = cfg.latent_channels, c = cfg.denoiser_channels;
    impl_->n1 = nn::Conv2d(*store_, "dn.c1", z + 1, c, 3, 1, rng);
    impl_->n2 = nn::Conv2d(*store_, "dn.c2", c, c, 3, 1, rng);
    impl_->n3 = nn::Conv2d(*store_, "dn.c3", c, c, 3, 1, rng);
    impl_->n4 = nn::Conv2d(*store_, "dn.c4", c, z, 3, 1, rng);
}

Tensor LatentDenoiser::forward(const Tensor& z_noisy, double sigma) const {
    if (sigma <= 0.0) throw ConfigError("denoiser: sigma must be positive");
    const Tensor sigma_map = Tensor::full({1, z_noisy.dim(1), z_noisy.dim(2)}, std::log(sigma));
    Tensor h = nn::concat_channels({z_noisy, sigma_map});
    h = nn::silu(impl_->n1.forward(h));
    h = nn::silu(impl_->n2.forward(h));
    h = nn::silu(impl_->n3.forward(h));
    // x0-prediction as a residual off the noisy input
    return nn::add(z_noisy, impl_->n4.forward(h));
}

void LatentDenoiser::freeze() {
    for (auto& [name, t] : store_->items()) const_cast<Tensor&>(t).set_trainable(false);
}

void LatentDenoiser::save(const std::filesystem::path& dir) const {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError(str_cat("cannot create ", dir.string()));
    store_->save(dir / "weights.bin");
    json j = latent_config_json(cfg_);
    j["meta"] = {{"trained", meta.trained}, {"steps", meta.steps}, {"final_loss", meta.final_loss}};
    std::ofstream out(dir / "metadata.json");
    out << j.dump(2) << "\n";
}

std::unique_ptr<LatentDenoiser> LatentDenoiser::load(const std::filesystem::path& dir,
                                                     const LatentConfig& cfg) {
    auto dn = std::make_unique<LatentDenoiser>(cfg);
    dn->store_->load(dir / "weights.bin");
    std::ifstream in(dir / "metadata.json");
    if (in) {
        json j;
        in >> j;
        if (j.contains("meta")) {
            dn->meta.trained = j["meta"].value("trained", false);
            dn->meta.steps = j["meta"].value("steps", 0);
            dn->meta.final_loss = j["meta"].value("final_loss", 0.0);
        }
    }
    return dn;
}

// ---- pretraining ----

void pretrain_latent_encoder(LatentAutoencoder& ae, const std::vector<Frame>& dataset, int steps,
                             double lr) {
    if (dataset.empty()) throw ContractError("pretrain_latent_encoder: empty dataset");
    Rng rng(mix_seed(ae.config().seed, 0xF17));
    const size_t n_holdout = std::max<size_t>(1, dataset.size() / 5);
    const size_t n_train = std::max<size_t>(1, dataset.size() - n_holdout);

    nn::Adam opt(ae.params().trainable());
    for (int step = 0; step < steps; ++step) {
        const Frame crop = random_crop(dataset[static_cast<size_t>(rng.uniform_int(0, n_train - 1))],
                                       64, rng);
        const Tensor x = nn::from_frame(crop);
        const Tensor loss = nn::mean(nn::square(nn::sub(ae.decode(ae.encode(x)), x)));
        if (!std::isfinite(loss.item()))
            throw TrainError(str_cat("latent encoder pretraining diverged at step ", step));
        opt.zero_grad();
        loss.backward();
        // halve twice over the run; the tail needs the finer steps
        const double decayed = step < steps / 2 ? lr : (step < 3 * steps / 4 ? 0.5 * lr : 0.25 * lr);
        opt.step(decayed);
    }

    double psnr_acc = 0.0;
    {
        nn::NoGradGuard ng;
        for (size_t i = dataset.size() - n_holdout; i < dataset.size(); ++i) {
            const Tensor x = nn::from_frame(dataset[i]);
            const Frame rec = nn::to_frame(ae.decode(ae.encode(x)));
            const double m = mse(dataset[i], rec);
            psnr_acc += m <= 0.0 ? 99.0 : 10.0 * std::log10(1.0 / m);
        }
    }
    ae.meta.trained = steps > 0;
    ae.meta.steps = steps;
    ae.meta.holdout_psnr = psnr_acc / static_cast<double>(n_holdout);
}

void pretrain_latent_denoiser(LatentDenoiser& dn, const LatentAutoencoder& ae,
                              const std::vector<Frame>& dataset, int steps, double lr) {
    if (dataset.empty()) throw ContractError("pretrain_latent_denoiser: empty dataset");
    const LatentConfig& cfg = ae.config();
    Rng rng(mix_seed(cfg.seed, 0xF18));
    nn::Adam opt(dn.params().trainable());
    double last = 0.0;
    for (int step = 0; step < steps; ++step) {
        Tensor z;
        {
            nn::NoGradGuard ng;
            const Frame crop =
                random_crop(dataset[static_cast<size_t>(rng.uniform_int(0, dataset.size() - 1))], 64, rng);
            z = ae.encode(nn::from_frame(crop)).detach();
        }
        const double sigma = rng.log_uniform(cfg.sigma_lo, cfg.sigma_hi);
        const Tensor noise = gaussian_noise_like(z, rng);
        const Tensor z_noisy = nn::add(z, nn::affine(noise, sigma, 0.0));
        const Tensor loss = nn::mean(nn::square(nn::sub(dn.forward(z_noisy, sigma), z)));
        last = loss.item();
        if (!std::isfinite(last)) throw TrainError(str_cat("denoiser pretraining diverged at step ", step));
        opt.zero_grad();
        loss.backward();
        opt.step(lr);
    }
    dn.meta.trained = steps > 0;
    dn.meta.steps = steps;
    dn.meta.final_loss = last;
}

// ---- LatentDiscriminator ----

struct LatentDiscriminator::Impl {
    std::vector<nn::LoraConv2d> enc;  // adapters over encoder convs (optional)
    std::vector<nn::LoraConv2d> dn;   // adapters over denoiser convs
};

LatentDiscriminator::LatentDiscriminator(std::shared_ptr<LatentAutoencoder> ae,
                                         std::shared_ptr<LatentDenoiser> dn, const LatentConfig& cfg)
    : cfg_(cfg), ae_(std::move(ae)), dn_(std::move(dn)) {
    adapter_store_ = std::make_shared<nn::ParamStore>();
    impl_ = std::make_shared<Impl>();
    ae_->freeze();
    dn_->freeze();
    Rng rng(mix_seed(cfg.seed, 0x10AA));
    // narrow layers cannot host the full requested rank; clamp per layer
    const auto attach = [&](std::vector<nn::LoraConv2d>& dst, const std::string& name,
                            const nn::Conv2d& conv) {
        const int fan_out = conv.w.dim(0);
        const int fan_in = conv.w.dim(1) * conv.w.dim(2) * conv.w.dim(3);
        const int rank = std::min(cfg_.lora_rank, std::min(fan_in, fan_out) - 1);
        dst.emplace_back(*adapter_store_, name, conv, rank, cfg_.lora_scale, rng);
    };
    if (cfg.adapt_encoder) {
        const auto& e = *ae_->impl_;
        int i = 0;
        for (const nn::Conv2d* conv : {&e.e1, &e.e2, &e.e3, &e.e4})
            attach(impl_->enc, str_cat("enc.c", ++i), *conv);
    }
    const auto& d = *dn_->impl_;
    int i = 0;
    for (const nn::Conv2d* conv : {&d.n1, &d.n2, &d.n3, &d.n4}) attach(impl_->dn, str_cat("dn.c", ++i), *conv);
}

Tensor LatentDiscriminator::encode(const Tensor& frame) const {
    if (!cfg_.adapt_encoder) return ae_->encode(frame);
    const auto& e = impl_->enc;
    Tensor h = nn::silu(e[0].forward(frame));
    h = nn::silu(e[1].forward(h));
    h = nn::silu(e[2].forward(h));
    return e[3].forward(h);
}

Tensor LatentDiscriminator::denoise(const Tensor& z_noisy, double sigma) const {
    if (sigma <= 0.0) throw ConfigError("latent_score: sigma must be positive");
    const Tensor sigma_map = Tensor::full({1, z_noisy.dim(1), z_noisy.dim(2)}, std::log(sigma));
    const auto& d = impl_->dn;
    Tensor h = nn::concat_channels({z_noisy, sigma_map});
    h = nn::silu(d[0].forward(h));
    h = nn::silu(d[1].forward(h));
    h = nn::silu(d[2].forward(h));
    return nn::add(z_noisy, d[3].forward(h));
}

Tensor LatentDiscriminator::score(const Tensor& z, double sigma, const Tensor& noise) const {
    if (sigma <= 0.0) throw ConfigError("latent_score: sigma must be positive");
    if (noise.shape() != z.shape()) throw DimensionError("latent_score: noise shape mismatch");
    const Tensor z_noisy = nn::add(z, nn::affine(noise, sigma, 0.0));
    return nn::affine(nn::sub(denoise(z_noisy, sigma), z), 1.0 / (sigma * sigma), 0.0);
}

void LatentDiscriminator::save(const std::filesystem::path& dir) const {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError(str_cat("cannot create ", dir.string()));
    adapter_store_->save(dir / "adapters.bin");
}

Tensor latent_adv_loss(const LatentDiscriminator& disc, const Tensor& z_gen, const Tensor& z_real,
                       double sigma, const Tensor& noise) {
    if (z_gen.shape() != z_real.shape()) throw DimensionError("latent_adv_loss: latent shape mismatch");
    const Tensor s_gen = disc.score(z_gen, sigma, noise);
    const Tensor s_real = disc.score(z_real.detach(), sigma, noise);
    return nn::mean(nn::square(nn::sub(s_gen, s_real)));
}

Tensor latent_score_matching_loss(const LatentDiscriminator& disc, const Tensor& z_real, double sigma,
                                  const Tensor& noise) {
    const Tensor z = z_real.detach();
    const Tensor z_noisy = nn::add(z, nn::affine(noise, sigma, 0.0));
    return nn::mean(nn::square(nn::sub(disc.denoise(z_noisy, sigma), z)));
}

// ---- PixelDiscriminator ----

struct PixelDiscriminator::Impl {
    nn::Conv2d s1, s2, s3;  // frozen random stem
    nn::Conv2d h1, h2;      // trainable patch head
};

PixelDiscriminator::PixelDiscriminator(const PixelDiscConfig& cfg) : cfg_(cfg) {
    store_ = std::make_shared<nn::ParamStore>();
    impl_ = std::make_shared<Impl>();
    Rng rng(mix_seed(cfg.seed, 0xD15C));
    const int s = cfg.stem_channels;
    impl_->s1 = nn::Conv2d(*store_, "stem.c1", 3, s, 3, 2, rng, /*trainable=*/false);
    impl_->s2 = nn::Conv2d(*store_, "stem.c2", s, 2 * s, 3, 2, rng, /*trainable=*/false);
    impl_->s3 = nn::Conv2d(*store_, "stem.c3", 2 * s, 3 * s, 3, 2, rng, /*trainable=*/false);
    impl_->h1 = nn::Conv2d(*store_, "head.c1", 3 * s, cfg.head_channels, 3, 1, rng);
    impl_->h2 = nn::Conv2d(*store_, "head.c2", cfg.head_channels, 1, 3, 1, rng);
}

Tensor PixelDiscriminator::score_map(const Tensor& frame) const {
    const double a = cfg_.leak;
    Tensor h = nn::leaky_relu(impl_->s1.forward(frame), a);
    h = nn::leaky_relu(impl_->s2.forward(h), a);
    h = nn::leaky_relu(impl_->s3.forward(h), a);
    h = nn::leaky_relu(impl_->h1.forward(h), a);
    return impl_->h2.forward(h);
}

void PixelDiscriminator::save(const std::filesystem::path& dir) const {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError(str_cat("cannot create ", dir.string()));
    store_->save(dir / "weights.bin");
    json j = {{"stem_channels", cfg_.stem_channels},
              {"head_channels", cfg_.head_channels},
              {"leak", cfg_.leak},
              {"seed", cfg_.seed}};
    std::ofstream out(dir / "config.json");
    out << j.dump(2) << "\n";
}

std::unique_ptr<PixelDiscriminator> PixelDiscriminator::load(const std::filesystem::path& dir) {
    std::ifstream in(dir / "config.json");
    if (!in) throw IoError(str_cat("missing config.json in ", dir.string()));
    json j;
    in >> j;
    PixelDiscConfig cfg;
    cfg.stem_channels = j.value("stem_channels", cfg.stem_channels);
    cfg.head_channels = j.value("head_channels", cfg.head_channels);
    cfg.leak = j.value("leak", cfg.leak);
    cfg.seed = j.value("seed", cfg.seed);
    auto disc = std::make_unique<PixelDiscriminator>(cfg);
    disc->store_->load(dir / "weights.bin");
    return disc;
}

Tensor pixel_disc_loss(const PixelDiscriminator& disc, const Tensor& real,
                       const Tensor& fake_detached) {
    const Tensor real_term = nn::mean(nn::relu(nn::affine(disc.score_map(real), -1.0, 1.0)));
    const Tensor fake_term = nn::mean(nn::relu(nn::affine(disc.score_map(fake_detached.detach()), 1.0, 1.0)));
    return nn::add(real_term, fake_term);
}

Tensor pixel_gen_loss(const PixelDiscriminator& disc, const Tensor& fake) {
    return nn::affine(nn::mean(disc.score_map(fake)), -1.0, 0.0);
}

}  // namespace tinyvsr
