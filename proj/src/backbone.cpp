// Copyright (c) 2026 tinyvsr contributors
// SPDX-License-Identifier: Apache-2.0
#include "tinyvsr/backbone.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

namespace tinyvsr {

using nn::PadMode;
using nn::Shape;
using nn::Tensor;
using json = nlohmann::json;

void ModelConfig::validate() const {
    if (context_radius < 0) throw ConfigError("context_radius must be >= 0");
    if (upscale_factor < 1) throw ConfigError("upscale_factor must be >= 1");
    if (unshuffle_factor < 1) throw ConfigError("unshuffle_factor must be >= 1");
    if (in_channels != 1 && in_channels != 3) throw ConfigError("in_channels must be 1 or 3");
    if (base_channels < 4) throw ConfigError("base_channels must be >= 4");
    if (channel_multipliers.empty()) throw ConfigError("channel_multipliers must be nonempty");
    if (num_res_blocks_per_level < 1) throw ConfigError("num_res_blocks_per_level must be >= 1");
    if (bottleneck_blocks < 1) throw ConfigError("bottleneck_blocks must be >= 1");
}

ModelConfig ModelConfig::pruned_preset() { return ModelConfig{}; }

ModelConfig ModelConfig::reference_preset() {
    ModelConfig cfg;
    cfg.use_cross_attention = true;
    cfg.use_timestep_embedding = true;
    cfg.bottleneck_blocks = 4;
    return cfg;
}

std::string ModelConfig::to_json_string() const {
    json j = {{"context_radius", context_radius},
              {"upscale_factor", upscale_factor},
              {"unshuffle_factor", unshuffle_factor},
              {"in_channels", in_channels},
              {"base_channels", base_channels},
              {"channel_multipliers", channel_multipliers},
              {"num_res_blocks_per_level", num_res_blocks_per_level},
              {"bottleneck_blocks", bottleneck_blocks},
              {"use_cross_attention", use_cross_attention},
              {"use_timestep_embedding", use_timestep_embedding},
              {"circular_padding", circular_padding},
              {"seed", seed}};
    return j.dump(2);
}

ModelConfig ModelConfig::from_json_string(const std::string& s) {
    json j;
    try {
        j = json::parse(s);
    } catch (const json::exception& e) {
        throw ConfigError(str_cat("bad model config json: ", e.what()));
    }
    ModelConfig cfg;
    cfg.context_radius = j.value("context_radius", cfg.context_radius);
    cfg.upscale_factor = j.value("upscale_factor", cfg.upscale_factor);
    cfg.unshuffle_factor = j.value("unshuffle_factor", cfg.unshuffle_factor);
    cfg.in_channels = j.value("in_channels", cfg.in_channels);
    cfg.base_channels = j.value("base_channels", cfg.base_channels);
    if (j.contains("channel_multipliers"))
        cfg.channel_multipliers = j["channel_multipliers"].get<std::vector<int>>();
    cfg.num_res_blocks_per_level = j.value("num_res_blocks_per_level", cfg.num_res_blocks_per_level);
    cfg.bottleneck_blocks = j.value("bottleneck_blocks", cfg.bottleneck_blocks);
    cfg.use_cross_attention = j.value("use_cross_attention", cfg.use_cross_attention);
    cfg.use_timestep_embedding = j.value("use_timestep_embedding", cfg.use_timestep_embedding);
    cfg.circular_padding = j.value("circular_padding", cfg.circular_padding);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.validate();
    return cfg;
}

Tensor build_input(const std::vector<Frame>& window, const std::vector<FlowField>& flows,
                   const ModelConfig& cfg) {
    const int k = cfg.context_radius;
    if (static_cast<int>(window.size()) != 2 * k + 1)
        throw ContractError(str_cat("build_input: window holds ", window.size(), " frames, need ",
                                    2 * k + 1));
    if (static_cast<int>(flows.size()) != 2 * k)
        throw ContractError(str_cat("build_input: ", flows.size(), " flows, need ", 2 * k));
    const Frame& center = window[static_cast<size_t>(k)];
    if (center.height % cfg.unshuffle_factor != 0 || center.width % cfg.unshuffle_factor != 0)
        throw DimensionError("build_input: LR dims must divide by unshuffle_factor");

    std::vector<Tensor> channels;
    channels.reserve(window.size());
    int flow_idx = 0;
    for (int i = 0; i < 2 * k + 1; ++i) {
        if (i == k) {
            channels.push_back(nn::from_frame(center));
        } else {
            if (!window[i].same_shape(center)) throw DimensionError("build_input: window shape mismatch");
            channels.push_back(nn::from_frame(backward_warp(window[i], flows[flow_idx])));
            ++flow_idx;
        }
    }
    return nn::pixel_unshuffle(nn::concat_channels(channels), cfg.unshuffle_factor);
}

// ---- trunk blocks ----

namespace {

struct ResBlock {
    nn::GroupNormLayer n1, n2;
    nn::Conv2d c1, c2;
    nn::Conv2d skip;  // 1x1 when channels change
    nn::Linear temb_proj;
    bool has_skip = false;
    bool has_temb = false;

    ResBlock() = default;
    ResBlock(nn::ParamStore& ps, const std::string& name, int in_ch, int out_ch, int temb_dim,
             Rng& rng, nn::PadMode pm) {
        n1 = nn::GroupNormLayer(ps, name + ".n1", in_ch, rng);
        c1 = nn::Conv2d(ps, name + ".c1", in_ch, out_ch, 3, 1, rng, true, pm);
        n2 = nn::GroupNormLayer(ps, name + ".n2", out_ch, rng);
        c2 = nn::Conv2d(ps, name + ".c2", out_ch, out_ch, 3, 1, rng, true, pm);
        // near-identity residual branches keep activation scale flat through
        // depth; otherwise the group norms' 1/sigma shrinks trunk gradients
        // as Adam inflates weight norms
        for (double& v : c2.w.data()) v *= 0.05;
        if (in_ch != out_ch) {
            skip = nn::Conv2d(ps, name + ".skip", in_ch, out_ch, 1, 1, rng, true, pm);
            has_skip = true;
        }
        if (temb_dim > 0) {
            temb_proj = nn::Linear(ps, name + ".temb_proj", temb_dim, out_ch, rng);
            has_temb = true;
        }
    }

    Tensor forward(const Tensor& x, const Tensor& temb) const {
        Tensor h = c1.forward(nn::silu(n1.forward(x)));
        if (has_temb) {
            Tensor proj = temb_proj.forward(temb);             // [1, out_ch]
            h = nn::add_bias(h, nn::reshape(proj, {h.dim(0)}));
        }
        h = c2.forward(nn::silu(n2.forward(h)));
        const Tensor res = has_skip ? skip.forward(x) : x;
        return nn::add(h, res);
    }
};

// Self-attention + cross-attention against a learned context bank + GEGLU-ish
// feed-forward, mirroring the transformer block the pruned preset removes.
struct AttentionBlock {
    nn::GroupNormLayer norm;
    nn::Linear q, k, v, out;
    nn::Linear cq, ck, cv, cout;
    Tensor context;  // [n_ctx, ctx_dim], learned
    nn::Linear ff1, ff2;
    int width = 0;

    AttentionBlock() = default;
    AttentionBlock(nn::ParamStore& ps, const std::string& name, int ch, int ctx_dim, int n_ctx,
                   Rng& rng) {
        width = ch;
        norm = nn::GroupNormLayer(ps, name + ".norm", ch, rng);
        q = nn::Linear(ps, name + ".self.q", ch, ch, rng);
        k = nn::Linear(ps, name + ".self.k", ch, ch, rng);
        v = nn::Linear(ps, name + ".self.v", ch, ch, rng);
        out = nn::Linear(ps, name + ".self.out", ch, ch, rng);
        cq = nn::Linear(ps, name + ".cross.q", ch, ch, rng);
        ck = nn::Linear(ps, name + ".cross.k", ctx_dim, ch, rng);
        cv = nn::Linear(ps, name + ".cross.v", ctx_dim, ch, rng);
        cout = nn::Linear(ps, name + ".cross.out", ch, ch, rng);
        context = ps.add(name + ".cross.context", {n_ctx, ctx_dim}, true);
        nn::init_uniform(context, -0.5, 0.5, rng);
        ff1 = nn::Linear(ps, name + ".ff.fc1", ch, 4 * ch, rng);
        ff2 = nn::Linear(ps, name + ".ff.fc2", 4 * ch, ch, rng);
    }

    static Tensor attend(const Tensor& qm, const Tensor& km, const Tensor& vm, int dim) {
        Tensor scores = nn::matmul(qm, nn::transpose2d(km));
        scores = nn::affine(scores, 1.0 / std::sqrt(static_cast<double>(dim)), 0.0);
        return nn::matmul(nn::softmax_rows(scores), vm);
    }

    Tensor forward(const Tensor& x) const {
        const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
        Tensor h = norm.forward(x);
        // [C, H, W] -> tokens [HW, C]
        Tensor tokens = nn::transpose2d(nn::reshape(h, {C, H * W}));
        Tensor self_out = out.forward(attend(q.forward(tokens), k.forward(tokens), v.forward(tokens), C));
        tokens = nn::add(tokens, self_out);
        Tensor cross_out =
            cout.forward(attend(cq.forward(tokens), ck.forward(context), cv.forward(context), C));
        tokens = nn::add(tokens, cross_out);
        Tensor ff = ff2.forward(nn::silu(ff1.forward(tokens)));
        tokens = nn::add(tokens, ff);
        Tensor back = nn::reshape(nn::transpose2d(tokens), {C, H, W});
        return nn::add(x, back);
    }
};

}  // namespace

struct Generator::Impl {
    nn::Conv2d stem;
    std::vector<std::vector<ResBlock>> enc_blocks;       // per level
    std::vector<std::vector<AttentionBlock>> enc_attn;   // per level (may be empty)
    std::vector<nn::Conv2d> down;                        // between levels
    std::vector<ResBlock> bottleneck;
    std::vector<AttentionBlock> bottleneck_attn;
    std::vector<std::vector<ResBlock>> dec_blocks;
    std::vector<std::vector<AttentionBlock>> dec_attn;
    std::vector<nn::Conv2d> up;  // conv after nearest-2x, level l -> l-1
    nn::GroupNormLayer head_norm;
    nn::Conv2d head;
    nn::Linear temb_fc1, temb_fc2;
    bool has_temb = false;
    int temb_dim = 0;
    int levels = 0;
};

namespace {

// level uses attention when its multiplier is at least 2 (the trunk's
// lower-resolution stages, matching where the reference keeps transformers)
bool attn_at_level(const ModelConfig& cfg, int level) {
    return cfg.use_cross_attention && cfg.channel_multipliers[static_cast<size_t>(level)] >= 2;
}

}  // namespace

Generator::Generator(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    store_ = std::make_shared<nn::ParamStore>();
    impl_ = std::make_shared<Impl>();
    Rng rng(mix_seed(cfg.seed, 0xBACB0E));
    nn::ParamStore& ps = *store_;
    const nn::PadMode pm = cfg.circular_padding ? nn::PadMode::kCircular : nn::PadMode::kReplicate;

    const int L = static_cast<int>(cfg.channel_multipliers.size());
    impl_->levels = L;
    auto width = [&](int l) { return cfg.base_channels * cfg.channel_multipliers[static_cast<size_t>(l)]; };
    const int ctx_dim = 4 * cfg.base_channels;
    const int n_ctx = 8;

    if (cfg.use_timestep_embedding) {
        impl_->has_temb = true;
        impl_->temb_dim = 4 * cfg.base_channels;
        impl_->temb_fc1 = nn::Linear(ps, "temb.fc1", cfg.base_channels, impl_->temb_dim, rng);
        impl_->temb_fc2 = nn::Linear(ps, "temb.fc2", impl_->temb_dim, impl_->temb_dim, rng);
    }
    const int temb_dim = impl_->has_temb ? impl_->temb_dim : 0;

    // input stem; weights replicate a single-frame stem rescaled by 1/(2k+1)
    impl_->stem = nn::Conv2d(ps, "stem", cfg.stack_channels(), width(0), 3, 1, rng, true, pm);
    {
        const int frame_ch = cfg.in_channels * cfg.unshuffle_factor * cfg.unshuffle_factor;
        const int n_frames = cfg.window_size();
        Tensor single = Tensor::leaf({width(0), frame_ch, 3, 3}, false);
        nn::init_he_normal(single, frame_ch * 9, rng);
        auto& wdata = impl_->stem.w.data();
        const double inv = 1.0 / n_frames;
        for (int oc = 0; oc < width(0); ++oc)
            for (int f = 0; f < n_frames; ++f)
                for (int c = 0; c < frame_ch; ++c)
                    for (int t = 0; t < 9; ++t)
                        wdata[((static_cast<size_t>(oc) * cfg.stack_channels() + f * frame_ch + c) * 9) + t] =
                            single.data()[(static_cast<size_t>(oc) * frame_ch + c) * 9 + t] * inv;
    }

    int prev = width(0);
    impl_->enc_blocks.resize(L);
    impl_->enc_attn.resize(L);
    for (int l = 0; l < L; ++l) {
        for (int i = 0; i < cfg.num_res_blocks_per_level; ++i) {
            impl_->enc_blocks[l].emplace_back(ps, str_cat("enc", l, ".res", i), i == 0 ? prev : width(l),
                                              width(l), temb_dim, rng, pm);
            if (attn_at_level(cfg_, l))
                impl_->enc_attn[l].emplace_back(ps, str_cat("enc", l, ".attn", i), width(l), ctx_dim,
                                                n_ctx, rng);
        }
        prev = width(l);
        if (l + 1 < L)
            impl_->down.emplace_back(ps, str_cat("down", l), width(l), width(l + 1), 3, 2, rng, true, pm);
        if (l + 1 < L) prev = width(l + 1);
    }

    const int wb = width(L - 1);
    for (int i = 0; i < cfg.bottleneck_blocks; ++i) {
        impl_->bottleneck.emplace_back(ps, str_cat("bottleneck.res", i), wb, wb, temb_dim, rng, pm);
        if (cfg.use_cross_attention)
            impl_->bottleneck_attn.emplace_back(ps, str_cat("bottleneck.attn", i), wb, ctx_dim, n_ctx,
                                                rng);
    }

    impl_->dec_blocks.resize(L);
    impl_->dec_attn.resize(L);
    for (int l = L - 1; l >= 0; --l) {
        for (int i = 0; i < cfg.num_res_blocks_per_level; ++i) {
            const int in_ch = i == 0 ? 2 * width(l) : width(l);  // skip concat feeds the first block
            impl_->dec_blocks[l].emplace_back(ps, str_cat("dec", l, ".res", i), in_ch, width(l), temb_dim,
                                              rng, pm);
            if (attn_at_level(cfg_, l))
                impl_->dec_attn[l].emplace_back(ps, str_cat("dec", l, ".attn", i), width(l), ctx_dim,
                                                n_ctx, rng);
        }
        if (l > 0) impl_->up.emplace_back(ps, str_cat("up", l), width(l), width(l - 1), 3, 1, rng, true, pm);
    }

    impl_->head_norm = nn::GroupNormLayer(ps, "head.norm", width(0), rng);
    const int shuffle = cfg.upscale_factor * cfg.unshuffle_factor;
    impl_->head = nn::Conv2d(ps, "head.out", width(0), cfg.in_channels * shuffle * shuffle, 3, 1, rng, true, pm);
    // near-zero head keeps the initial output close to the bicubic skip
    for (double& v : impl_->head.w.data()) v *= 0.1;
}

nn::Tensor Generator::forward(const Tensor& input_stack, const Tensor& center_lr) const {
    if (input_stack.shape().size() != 3 || input_stack.dim(0) != cfg_.stack_channels())
        throw ConfigError(str_cat("generator: input stack has ", input_stack.dim(0),
                                  " channels, config expects ", cfg_.stack_channels()));
    const Impl& m = *impl_;

    Tensor temb;
    if (m.has_temb) {
        // one-step generation: the (vestigial) conditioning is t = 0
        std::vector<double> emb(static_cast<size_t>(cfg_.base_channels), 0.0);
        for (int i = 0; i < cfg_.base_channels / 2; ++i) {
            emb[static_cast<size_t>(i)] = 0.0;                             // sin(0)
            emb[static_cast<size_t>(i + cfg_.base_channels / 2)] = 1.0;    // cos(0)
        }
        temb = nn::silu(m.temb_fc1.forward(Tensor::constant({1, cfg_.base_channels}, std::move(emb))));
        temb = m.temb_fc2.forward(temb);
    }

    Tensor h = m.stem.forward(input_stack);
    std::vector<Tensor> skips;
    for (int l = 0; l < m.levels; ++l) {
        for (size_t i = 0; i < m.enc_blocks[l].size(); ++i) {
            h = m.enc_blocks[l][i].forward(h, temb);
            if (!m.enc_attn[l].empty()) h = m.enc_attn[l][i].forward(h);
        }
        skips.push_back(h);
        if (l + 1 < m.levels) h = m.down[static_cast<size_t>(l)].forward(h);
    }

    for (size_t i = 0; i < m.bottleneck.size(); ++i) {
        h = m.bottleneck[i].forward(h, temb);
        if (!m.bottleneck_attn.empty()) h = m.bottleneck_attn[i].forward(h);
    }

    size_t up_idx = 0;
    for (int l = m.levels - 1; l >= 0; --l) {
        h = nn::concat_channels({h, skips[static_cast<size_t>(l)]});
        for (size_t i = 0; i < m.dec_blocks[l].size(); ++i) {
            h = m.dec_blocks[l][i].forward(h, temb);
            if (!m.dec_attn[l].empty()) h = m.dec_attn[l][i].forward(h);
        }
        if (l > 0) h = m.up[up_idx++].forward(nn::upsample_nearest2x(h));
    }

    h = m.head.forward(nn::silu(m.head_norm.forward(h)));
    h = nn::pixel_shuffle(h, cfg_.upscale_factor * cfg_.unshuffle_factor);
    Tensor skip = nn::bicubic_upsample(center_lr, cfg_.upscale_factor);
    return nn::clamp01(nn::add(h, skip));
}

Frame Generator::super_resolve(const std::vector<Frame>& window,
                               const std::vector<FlowField>& flows) const {
    const Tensor stack = build_input(window, flows, cfg_);
    const Tensor center = nn::from_frame(window[static_cast<size_t>(cfg_.context_radius)]);
    return nn::to_frame(forward(stack, center));
}

void Generator::save(const std::filesystem::path& dir) const {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError(str_cat("cannot create ", dir.string(), ": ", ec.message()));
    store_->save(dir / "weights.bin");
    std::ofstream out(dir / "config.json");
    if (!out) throw IoError(str_cat("cannot write config.json in ", dir.string()));
    out << cfg_.to_json_string() << "\n";
}

std::unique_ptr<Generator> Generator::load(const std::filesystem::path& dir) {
    std::ifstream in(dir / "config.json");
    if (!in) throw IoError(str_cat("missing config.json in ", dir.string()));
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    auto gen = std::make_unique<Generator>(ModelConfig::from_json_string(text));
    gen->store_->load(dir / "weights.bin");
    return gen;
}

size_t param_count(const ModelConfig& cfg) { return Generator(cfg).param_count(); }

double reduction_ratio(const ModelConfig& pruned, const ModelConfig& reference) {
    const auto np = param_count(pruned);
    const auto nr = param_count(reference);
    if (nr == 0) throw ConfigError("reference model has no parameters");
    return 1.0 - static_cast<double>(np) / static_cast<double>(nr);
}

}  // namespace tinyvsr
