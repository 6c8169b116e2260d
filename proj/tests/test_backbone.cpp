// Copyright (c) 2026 tinyvsr contributors
// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "test_util.hpp"
#include "tinyvsr/backbone.hpp"

using namespace tinyvsr;
using nn::Tensor;

namespace {

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.context_radius = 1;
    cfg.upscale_factor = 2;
    cfg.unshuffle_factor = 2;
    cfg.base_channels = 8;
    cfg.channel_multipliers = {1, 2};
    cfg.seed = 11;
    return cfg;
}

std::vector<Frame> make_window(int n, int h, int w, Rng& rng) {
    std::vector<Frame> window;
    for (int i = 0; i < n; ++i) window.push_back(random_frame(h, w, 3, rng));
    return window;
}

}  // namespace

TEST_CASE("build_input contracts and channel counts") {
    Rng rng(21);
    ModelConfig cfg = tiny_config();

    SUBCASE("wrong window length") {
        auto window = make_window(2, 8, 8, rng);
        CHECK_THROWS_AS(build_input(window, {FlowField(8, 8), FlowField(8, 8)}, cfg), ContractError);
    }
    SUBCASE("wrong flow count") {
        auto window = make_window(3, 8, 8, rng);
        CHECK_THROWS_AS(build_input(window, {FlowField(8, 8)}, cfg), ContractError);
    }
    SUBCASE("k = 0 degenerates to the unshuffled center frame") {
        ModelConfig k0 = cfg;
        k0.context_radius = 0;
        const Frame f = random_frame(8, 8, 3, rng);
        const Tensor stack = build_input({f}, {}, k0);
        const Tensor direct = nn::pixel_unshuffle(nn::from_frame(f), k0.unshuffle_factor);
        REQUIRE(stack.shape() == direct.shape());
        for (size_t i = 0; i < stack.numel(); ++i) CHECK(stack.data()[i] == direct.data()[i]);
    }
    SUBCASE("static window with zero flows stacks identical copies") {
        const Frame f = random_frame(8, 8, 3, rng);
        std::vector<Frame> window{f, f, f};
        std::vector<FlowField> flows{FlowField(8, 8), FlowField(8, 8)};
        const Tensor stack = build_input(window, flows, cfg);
        // channel count = (2k+1) * C * u^2
        CHECK(stack.dim(0) == 3 * 3 * 4);
        const size_t per_frame = stack.numel() / 3;
        for (size_t i = 0; i < per_frame; ++i) {
            CHECK(stack.data()[i] == stack.data()[per_frame + i]);
            CHECK(stack.data()[i] == stack.data()[2 * per_frame + i]);
        }
    }
    SUBCASE("paper window: k = 2 gives 5 * 3 * u^2 channels") {
        ModelConfig k2;
        k2.context_radius = 2;
        const int u = k2.unshuffle_factor;
        auto window = make_window(5, 8, 8, rng);
        std::vector<FlowField> flows(4, FlowField(8, 8));
        CHECK(build_input(window, flows, k2).dim(0) == 5 * 3 * u * u);
    }
}

TEST_CASE("generator forward: shape, range, determinism") {
    Rng rng(22);
    ModelConfig cfg = tiny_config();
    Generator gen(cfg);
    auto window = make_window(3, 8, 8, rng);
    std::vector<FlowField> flows(2, FlowField(8, 8));

    nn::NoGradGuard ng;
    const Frame out = gen.super_resolve(window, flows);
    CHECK(out.height == 16);
    CHECK(out.width == 16);
    CHECK(out.channels == 3);
    for (double v : out.pixels) {
        CHECK(std::isfinite(v));
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }

    const Frame out2 = gen.super_resolve(window, flows);
    CHECK(max_abs_diff(out, out2) == 0.0);
}

TEST_CASE("generator is fully convolutional: doubling input doubles output") {
    Rng rng(23);
    ModelConfig cfg = tiny_config();
    Generator gen(cfg);
    nn::NoGradGuard ng;
    auto w1 = make_window(3, 8, 8, rng);
    auto w2 = make_window(3, 16, 16, rng);
    const Frame o1 = gen.super_resolve(w1, {FlowField(8, 8), FlowField(8, 8)});
    const Frame o2 = gen.super_resolve(w2, {FlowField(16, 16), FlowField(16, 16)});
    CHECK(o1.height == 16);
    CHECK(o2.height == 32);
    CHECK(o2.width == 32);
}

TEST_CASE("input channel mismatch is a configuration error") {
    ModelConfig cfg = tiny_config();
    Generator gen(cfg);
    const Tensor bad = Tensor::zeros({7, 4, 4});
    const Tensor lr = Tensor::zeros({3, 8, 8});
    CHECK_THROWS_AS(gen.forward(bad, lr), ConfigError);
}

TEST_CASE("parameter audit: pruned preset holds no attention or temb weights") {
    Generator pruned(ModelConfig::pruned_preset());
    for (const auto& [name, t] : pruned.params().items()) {
        CHECK(name.find("attn") == std::string::npos);
        CHECK(name.find("temb") == std::string::npos);
        CHECK(name.find("cross") == std::string::npos);
    }
    Generator ref(ModelConfig::reference_preset());
    size_t attn = 0, temb = 0;
    for (const auto& [name, t] : ref.params().items()) {
        if (name.find("attn") != std::string::npos) attn += t.numel();
        if (name.find("temb") != std::string::npos) temb += t.numel();
    }
    CHECK(attn > 0);
    CHECK(temb > 0);
}

TEST_CASE("parameter reduction property") {
    const ModelConfig pruned = ModelConfig::pruned_preset();
    const ModelConfig reference = ModelConfig::reference_preset();
    CHECK(reduction_ratio(pruned, pruned) == 0.0);
    CHECK(param_count(reference) > param_count(pruned));
    CHECK(reduction_ratio(pruned, reference) > 0.60);
}

TEST_CASE("input stem replicates the center-frame weights rescaled by 1/(2k+1)") {
    ModelConfig cfg = tiny_config();  // k = 1 -> 3 frames
    Generator gen(cfg);
    const Tensor stem = gen.params().find("stem.w");
    const int frame_ch = cfg.in_channels * cfg.unshuffle_factor * cfg.unshuffle_factor;
    const int stack = cfg.stack_channels();
    const int out_ch = cfg.base_channels;
    for (int oc = 0; oc < out_ch; ++oc)
        for (int c = 0; c < frame_ch; ++c)
            for (int t = 0; t < 9; ++t) {
                const double g0 = stem.data()[(static_cast<size_t>(oc) * stack + c) * 9 + t];
                for (int f = 1; f < 3; ++f) {
                    const double gf =
                        stem.data()[(static_cast<size_t>(oc) * stack + f * frame_ch + c) * 9 + t];
                    CHECK(gf == g0);
                }
            }
}

TEST_CASE("reference generator with attention still runs forward and backward") {
    ModelConfig cfg = tiny_config();
    cfg.use_cross_attention = true;
    cfg.use_timestep_embedding = true;
    cfg.bottleneck_blocks = 2;
    Generator gen(cfg);
    Rng rng(31);
    auto window = make_window(3, 8, 8, rng);
    std::vector<FlowField> flows(2, FlowField(8, 8));
    const Tensor stack = build_input(window, flows, cfg);
    const Tensor center = nn::from_frame(window[1]);
    const Tensor out = gen.forward(stack, center);
    const Tensor loss = nn::mean(nn::square(out));
    CHECK(std::isfinite(loss.item()));
    loss.backward();  // must not throw
}

TEST_CASE("generator weight gradients match central differences on a probe output") {
    // 1-pixel probes at interior (unclamped) output positions, a few random
    // weight elements per probe across every parameter tensor
    ModelConfig cfg = tiny_config();
    cfg.seed = 5;
    Generator gen(cfg);
    Rng rng(41);
    auto window = make_window(3, 8, 8, rng);
    std::vector<FlowField> flows(2, FlowField(8, 8));
    const Tensor stack = build_input(window, flows, cfg).detach();
    const Tensor center = nn::from_frame(window[1]);

    auto forward = [&] { return gen.forward(stack, center); };

    Rng probe_rng(43);
    int probes_done = 0;
    const auto& params = gen.params().items();
    for (int attempt = 0; attempt < 60 && probes_done < 20; ++attempt) {
        const Tensor out = forward();
        const size_t pix = static_cast<size_t>(
            probe_rng.uniform_int(0, static_cast<std::int64_t>(out.numel()) - 1));
        if (out.data()[pix] <= 0.02 || out.data()[pix] >= 0.98) continue;  // skip clamp kinks
        Tensor probe = nn::pick(out, pix);
        for (const auto& [name, t] : params) const_cast<Tensor&>(t).zero_grad();
        probe.backward();

        for (int rep = 0; rep < 3; ++rep) {
            const size_t pi =
                static_cast<size_t>(probe_rng.uniform_int(0, static_cast<std::int64_t>(params.size()) - 1));
            Tensor w = params[pi].second;
            const size_t wi =
                static_cast<size_t>(probe_rng.uniform_int(0, static_cast<std::int64_t>(w.numel()) - 1));
            const double analytic = w.grad().size() == w.numel() ? w.grad()[wi] : 0.0;
            const double orig = w.data()[wi];
            const double h = 1e-4;
            w.data()[wi] = orig + h;
            const double up = forward().data()[pix];
            w.data()[wi] = orig - h;
            const double down = forward().data()[pix];
            w.data()[wi] = orig;
            const double fd = (up - down) / (2.0 * h);
            CAPTURE(params[pi].first);
            CHECK(nn::grad_rel_err(analytic, fd) < 1e-4);
        }
        ++probes_done;
    }
    CHECK(probes_done >= 20);
}

TEST_CASE("translation covariance on periodic content with circular padding") {
    // The trunk commutes with shifts that are multiples of
    // u * 2^(levels-1); the bicubic residual skip replicates borders, so the
    // comparison excludes a local margin.
    ModelConfig cfg;
    cfg.context_radius = 0;
    cfg.upscale_factor = 2;
    cfg.unshuffle_factor = 2;
    cfg.base_channels = 16;
    cfg.channel_multipliers = {1, 2, 4};
    cfg.circular_padding = true;
    cfg.seed = 3;
    Generator gen(cfg);

    const int H = 32, W = 32, s = cfg.upscale_factor;
    const int shift_lr = cfg.unshuffle_factor * 4;  // u * 2^(levels-1)
    const int shift_out = s * shift_lr;

    Frame f(H, W, 3);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < 3; ++c)
                f.at(y, x, c) = 0.5 + 0.2 * std::sin(6.2831853 * (2.0 * x / W + 1.0 * y / H) + c) +
                                0.1 * std::sin(6.2831853 * (3.0 * y / H) + 2 * c);
    Frame fs(H, W, 3);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < 3; ++c) fs.at(y, x, c) = f.at(y, ((x - shift_lr) % W + W) % W, c);

    nn::NoGradGuard ng;
    const Frame out = nn::to_frame(
        gen.forward(nn::pixel_unshuffle(nn::from_frame(f), cfg.unshuffle_factor), nn::from_frame(f)));
    const Frame outs = nn::to_frame(
        gen.forward(nn::pixel_unshuffle(nn::from_frame(fs), cfg.unshuffle_factor), nn::from_frame(fs)));

    const int margin = 12;
    double worst = 0.0;
    for (int y = margin; y < H * s - margin; ++y)
        for (int x = margin + shift_out; x < W * s - margin; ++x)
            for (int c = 0; c < 3; ++c)
                worst = std::max(worst, std::abs(outs.at(y, x, c) - out.at(y, x - shift_out, c)));
    CHECK(worst < 1e-9);
}

TEST_CASE("checkpoint save/load round trip is bit-exact") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "tinyvsr_ckpt_test";
    fs::remove_all(dir);

    ModelConfig cfg = tiny_config();
    Generator gen(cfg);
    gen.save(dir);
    auto loaded = Generator::load(dir);
    CHECK(loaded->config().base_channels == cfg.base_channels);
    CHECK(loaded->param_count() == gen.param_count());

    Rng rng(51);
    auto window = make_window(3, 8, 8, rng);
    std::vector<FlowField> flows(2, FlowField(8, 8));
    nn::NoGradGuard ng;
    const Frame a = gen.super_resolve(window, flows);
    const Frame b = loaded->super_resolve(window, flows);
    CHECK(max_abs_diff(a, b) == 0.0);
}

TEST_CASE("model config json round trip") {
    ModelConfig cfg = ModelConfig::reference_preset();
    cfg.base_channels = 48;
    cfg.channel_multipliers = {1, 2, 2, 4};
    const ModelConfig back = ModelConfig::from_json_string(cfg.to_json_string());
    CHECK(back.base_channels == 48);
    CHECK(back.channel_multipliers == std::vector<int>{1, 2, 2, 4});
    CHECK(back.use_cross_attention);
    CHECK(back.bottleneck_blocks == 4);
}
