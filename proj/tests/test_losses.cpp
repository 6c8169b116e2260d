// Copyright (c) 2026 tinyvsr contributors
// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "doctest.h"
#include "test_util.hpp"
#include "tinyvsr/losses.hpp"
#include "tinyvsr/synth.hpp"

using namespace tinyvsr;
using namespace tinyvsr::testutil;
using nn::Tensor;

TEST_CASE("charbonnier analytic values") {
    const double eps = 1e-3;
    SUBCASE("zero input gives eps") {
        Tensor x = Tensor::zeros({3, 4, 4});
        CHECK(charbonnier(x, eps).item() == doctest::Approx(eps).epsilon(1e-14));
    }
    SUBCASE("scalar x = 3") {
        Tensor x = Tensor::constant({1}, {3.0});
        CHECK(charbonnier(x, eps).item() == doctest::Approx(std::sqrt(9.0 + 1e-6)).epsilon(1e-12));
    }
    SUBCASE("gradient at 0 is 0, at eps is 1/sqrt(2)") {
        Tensor x0 = Tensor::leaf({1}, true);
        Tensor l0 = charbonnier(x0, eps);
        l0.backward();
        CHECK(x0.grad()[0] == 0.0);

        Tensor xe = Tensor::leaf({1}, true);
        xe.data()[0] = eps;
        Tensor le = charbonnier(xe, eps);
        le.backward();
        CHECK(xe.grad()[0] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
    }
    SUBCASE("eps <= 0 rejected") {
        Tensor x = Tensor::zeros({2});
        CHECK_THROWS_AS(charbonnier(x, 0.0), ConfigError);
    }
    SUBCASE("gradient matches finite differences") {
        // probe away from |x| ~ eps where the curvature breaks h = 1e-4 FD
        Rng rng(61);
        Tensor x = random_leaf_signed({2, 5, 5}, rng, 0.02, 0.5);
        CHECK(max_fd_rel_err([&] { return charbonnier(x, eps); }, x, 20, rng) < 1e-4);
    }
}

TEST_CASE("temporal loss analytic and gradient properties") {
    Rng rng(62);
    const double eps = 1e-3;
    const int h = 8, w = 8;

    SUBCASE("identical frames, zero flow, unit weights -> eps") {
        Tensor sr = nn::from_frame(random_frame(h, w, 3, rng));
        const FlowField zero(h, w);
        const Frame ones(h, w, 1, 1.0);
        CHECK(temporal_loss(sr, sr, zero, ones, eps).item() == doctest::Approx(eps).epsilon(1e-12));
    }
    SUBCASE("zero weights annihilate any frames") {
        Tensor a = nn::from_frame(random_frame(h, w, 3, rng));
        Tensor b = nn::from_frame(random_frame(h, w, 3, rng));
        const Frame zeros(h, w, 1, 0.0);
        CHECK(temporal_loss(a, b, FlowField(h, w), zeros, eps).item() == 0.0);
    }
    SUBCASE("gradients w.r.t. both frames match finite differences") {
        // disjoint ranges keep |a - warp(b)| away from the eps region
        Tensor a = random_leaf({3, h, w}, rng, 0.1, 0.3);
        Tensor b = random_leaf({3, h, w}, rng, 0.55, 0.75);
        FlowField flow(h, w);
        for (double& v : flow.vectors) v = rng.uniform(-1.0, 1.0);
        Frame weights(h, w, 1);
        for (double& v : weights.pixels) v = rng.uniform(0.2, 1.0);
        auto loss = [&] { return temporal_loss(a, b, flow, weights, eps); };
        CHECK(max_fd_rel_err(loss, a, 15, rng) < 1e-4);
        CHECK(max_fd_rel_err(loss, b, 15, rng) < 1e-4);
    }
    SUBCASE("symmetry under swap + exact inverse flow on rigid translation") {
        // g holds f's content shifted by (+2, +1); swapping the frames and
        // inverting the flow must give the same loss. Replicate-border
        // samples are masked out by the weight map.
        const int n = 12;
        Frame base = random_frame(n + 8, n + 8, 1, rng);
        Frame f(n, n, 1), g(n, n, 1);
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) {
                f.at(y, x, 0) = base.at(y + 4, x + 4, 0);
                g.at(y, x, 0) = base.at(y + 4 + 1, x + 4 + 2, 0);
            }
        Frame interior(n, n, 1, 0.0);
        for (int y = 3; y < n - 3; ++y)
            for (int x = 4; x < n - 4; ++x) interior.at(y, x, 0) = 1.0;
        // content of g at p sits at p + (2, 1) in f and vice versa
        const FlowField f_to_g(n, n, -2.0, -1.0);
        const FlowField g_to_f(n, n, 2.0, 1.0);
        const double l1 =
            temporal_loss(nn::from_frame(f), nn::from_frame(g), f_to_g, interior, eps).item();
        const double l2 =
            temporal_loss(nn::from_frame(g), nn::from_frame(f), g_to_f, interior, eps).item();
        CHECK(std::abs(l1 - l2) < 1e-3);
        CHECK(l1 > 0.0);
    }
}

TEST_CASE("multi-frame temporal loss weighting") {
    Rng rng(63);
    const int h = 8, w = 8;
    LossConfig cfg;
    cfg.eps = 1e-3;

    // frames differing by constants with zero flows: term_d depends only on
    // the pairwise difference, so the decayed sum is hand-computable
    auto const_frame = [&](double v) { return nn::from_frame(Frame(h, w, 3, v)); };
    const std::vector<FlowField> zero_pairs(3, FlowField(h, w));

    SUBCASE("D = 1 equals the plain temporal loss") {
        cfg.window_D = 1;
        std::vector<Tensor> frames{const_frame(0.4), const_frame(0.5)};
        const double multi =
            multi_frame_temporal_loss(frames, {zero_pairs[0]}, {zero_pairs[0]}, cfg).item();
        const VisibilityMask vis(h, w, 1);
        const Frame wmap = motion_weight(FlowField(h, w), cfg.sigma_m, vis);
        const double single =
            temporal_loss(frames[0], frames[1], FlowField(h, w), wmap, cfg.eps).item();
        CHECK(multi == single);
    }
    SUBCASE("D = 3, gamma = 0.5: L1 + 0.5 L2 + 0.25 L3") {
        cfg.window_D = 3;
        cfg.gamma = 0.5;
        // anchor 0.8; earlier frames 0.5, 0.6, 0.7 (ascending time)
        std::vector<Tensor> frames{const_frame(0.5), const_frame(0.6), const_frame(0.7),
                                   const_frame(0.8)};
        std::vector<FlowField> fwd(3, FlowField(h, w)), bwd(3, FlowField(h, w));
        const double multi = multi_frame_temporal_loss(frames, fwd, bwd, cfg).item();
        auto phi = [&](double d) { return std::sqrt(d * d + cfg.eps * cfg.eps); };
        const double expected = phi(0.1) + 0.5 * phi(0.2) + 0.25 * phi(0.3);
        CHECK(multi == doctest::Approx(expected).epsilon(1e-12));
    }
    SUBCASE("D = 2 with equal per-term losses gives (1 + gamma) L") {
        cfg.window_D = 2;
        // both earlier frames sit at 0.5, so the d = 1 and d = 2 terms agree
        std::vector<Tensor> frames{const_frame(0.5), const_frame(0.5), const_frame(0.6)};
        std::vector<FlowField> fwd(2, FlowField(h, w)), bwd(2, FlowField(h, w));
        const double multi = multi_frame_temporal_loss(frames, fwd, bwd, cfg).item();
        auto phi = [&](double d) { return std::sqrt(d * d + cfg.eps * cfg.eps); };
        CHECK(multi == doctest::Approx((1.0 + cfg.gamma) * phi(0.1)).epsilon(1e-10));
    }
    SUBCASE("too few frames is a contract error") {
        cfg.window_D = 2;
        std::vector<Tensor> frames{const_frame(0.4), const_frame(0.5)};
        CHECK_THROWS_AS(
            multi_frame_temporal_loss(frames, {zero_pairs[0]}, {zero_pairs[0]}, cfg), ContractError);
    }
    SUBCASE("small gamma is dominated by the d = 1 term") {
        cfg.window_D = 3;
        cfg.gamma = 0.01;
        std::vector<Tensor> frames{const_frame(0.5), const_frame(0.6), const_frame(0.7),
                                   const_frame(0.8)};
        std::vector<FlowField> fwd(3, FlowField(h, w)), bwd(3, FlowField(h, w));
        const double multi = multi_frame_temporal_loss(frames, fwd, bwd, cfg).item();
        auto phi = [&](double d) { return std::sqrt(d * d + cfg.eps * cfg.eps); };
        // |L_multi - L_1| <= gamma * (sum of the d >= 2 terms)
        CHECK(std::abs(multi - phi(0.1)) <= cfg.gamma * (phi(0.2) + phi(0.3)));
    }
    SUBCASE("gradient w.r.t. the anchor matches finite differences") {
        cfg.window_D = 2;
        Tensor anchor = random_leaf({3, h, w}, rng, 0.0, 0.2);  // clear of 0.45/0.55
        std::vector<Tensor> frames{const_frame(0.45), const_frame(0.55), anchor};
        std::vector<FlowField> fwd(2, FlowField(h, w)), bwd(2, FlowField(h, w));
        for (auto* fl : {&fwd, &bwd})
            for (auto& f : *fl)
                for (double& v : f.vectors) v = rng.uniform(-0.5, 0.5);
        auto loss = [&] { return multi_frame_temporal_loss(frames, fwd, bwd, cfg); };
        CHECK(max_fd_rel_err(loss, anchor, 15, rng) < 1e-4);
    }
}

TEST_CASE("region-aware TV analytic values") {
    Rng rng(64);
    const double tau = 0.05;

    SUBCASE("constant sr -> 0 for any gt") {
        Tensor sr = nn::from_frame(Frame(6, 6, 3, 0.7));
        const Frame gt = random_frame(6, 6, 3, rng);
        CHECK(region_aware_tv(sr, gt, tau).item() == 0.0);
    }
    SUBCASE("constant gt -> plain mean TV of sr") {
        const Frame constant_gt(6, 6, 3, 0.3);
        const Frame srf = random_frame(6, 6, 3, rng);
        const Tensor sr = nn::from_frame(srf);
        const double loss = region_aware_tv(sr, constant_gt, tau).item();
        CHECK(loss == doctest::Approx(mean_tv(srf)).epsilon(1e-12));
    }
    SUBCASE("4x4 step edge of height tau downweights edge columns by exp(-1)") {
        // gt has a vertical step of height tau between columns 1 and 2; sr has
        // unit-height steps everywhere so its TV contribution is explicit
        const int n = 4;
        Frame gt(n, n, 1, 0.2);
        for (int y = 0; y < n; ++y)
            for (int x = 2; x < n; ++x) gt.at(y, x, 0) += tau;
        Frame srf(n, n, 1, 0.0);
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) srf.at(y, x, 0) = 0.1 * x;
        const double loss = region_aware_tv(nn::from_frame(srf), gt, tau).item();
        // per-pixel forward diffs of sr: 0.1 for x in {0,1,2}, 0 at x = 3;
        // weight map: exp(-1) at column 1 (the gt step), 1 elsewhere
        double expected = 0.0;
        for (int y = 0; y < n; ++y)
            for (int x = 0; x + 1 < n; ++x) expected += 0.1 * (x == 1 ? std::exp(-1.0) : 1.0);
        expected /= n * n;
        CHECK(loss == doctest::Approx(expected).epsilon(1e-12));
    }
    SUBCASE("zero iff constant (weights strictly positive)") {
        Frame gt = random_frame(5, 5, 1, rng);
        Frame srf(5, 5, 1, 0.5);
        srf.at(2, 3, 0) = 0.6;  // any non-constant sr must score > 0
        CHECK(region_aware_tv(nn::from_frame(srf), gt, 0.05).item() > 0.0);
    }
    SUBCASE("gradient matches finite differences") {
        // |.| kinks: reject draws with a near-zero forward difference
        Tensor sr = random_leaf({3, 6, 6}, rng, 0.1, 0.9);
        auto has_tiny_diff = [&] {
            const Frame f = nn::to_frame(sr);
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < 6; ++y)
                    for (int x = 0; x < 6; ++x) {
                        if (x + 1 < 6 && std::abs(f.at(y, x + 1, c) - f.at(y, x, c)) < 5e-4) return true;
                        if (y + 1 < 6 && std::abs(f.at(y + 1, x, c) - f.at(y, x, c)) < 5e-4) return true;
                    }
            return false;
        };
        while (has_tiny_diff()) sr = random_leaf({3, 6, 6}, rng, 0.1, 0.9);
        const Frame gt = random_frame(6, 6, 3, rng);
        CHECK(max_fd_rel_err([&] { return region_aware_tv(sr, gt, tau); }, sr, 20, rng) < 1e-4);
    }
}

TEST_CASE("reconstruction loss") {
    Rng rng(65);
    const double eps = 1e-3;
    const Frame gt = random_frame(6, 6, 3, rng);

    SUBCASE("sr = gt -> eps") {
        CHECK(reconstruction_loss(nn::from_frame(gt), gt, eps).item() ==
              doctest::Approx(eps).epsilon(1e-12));
    }
    SUBCASE("constant offset 0.1") {
        Frame sr = gt;
        for (double& v : sr.pixels) v += 0.1;
        CHECK(reconstruction_loss(nn::from_frame(sr), gt, eps).item() ==
              doctest::Approx(std::sqrt(0.01 + 1e-6)).epsilon(1e-12));
    }
    SUBCASE("matches the scalar brute-force loop") {
        const Frame sr = random_frame(6, 6, 3, rng);
        double expected = 0.0;
        for (size_t i = 0; i < sr.pixels.size(); ++i) {
            const double d = sr.pixels[i] - gt.pixels[i];
            expected += std::sqrt(d * d + eps * eps);
        }
        expected /= static_cast<double>(sr.pixels.size());
        CHECK(reconstruction_loss(nn::from_frame(sr), gt, eps).item() ==
              doctest::Approx(expected).epsilon(1e-10));
    }
    SUBCASE("gradient matches finite differences") {
        Frame far_gt = gt;
        for (double& v : far_gt.pixels) v = 0.6 + 0.4 * v;  // keep |sr - gt| >= ~0.2
        Tensor sr = random_leaf({3, 6, 6}, rng, 0.0, 0.3);
        CHECK(max_fd_rel_err([&] { return reconstruction_loss(sr, far_gt, eps); }, sr, 20, rng) < 1e-4);
    }
    SUBCASE("shape mismatch rejected") {
        Tensor sr = Tensor::zeros({3, 5, 6});
        CHECK_THROWS_AS(reconstruction_loss(sr, gt, eps), DimensionError);
    }
}

TEST_CASE("temporal loss on a rendered sprite clip with exact flow stays near eps") {
    const SceneSpec spec = random_scene_spec(ScenePattern::kTexturedSprites, 48, 48, 3, 77);
    const SyntheticClip clip = generate_synthetic_clip(spec);
    LossConfig cfg;
    // pair (0, 1) with ground-truth flow and ground-truth visibility: the
    // weighted residual is alignment-only, so the loss sits within 2 eps
    const Frame wmap = motion_weight(clip.flows_fwd[0], cfg.sigma_m, clip.vis_fwd[0]);
    const double loss = temporal_loss(nn::from_frame(clip.clip.frames[0]),
                                      nn::from_frame(clip.clip.frames[1]), clip.flows_fwd[0], wmap,
                                      cfg.eps)
                            .item();
    CHECK(loss <= 3.0 * cfg.eps);
    CHECK(loss > 0.0);
}

TEST_CASE("loss config validation and json round trip") {
    LossConfig cfg;
    cfg.gamma = 0.65;
    cfg.lambda_tv = 0.11;
    const LossConfig back = LossConfig::from_json_string(cfg.to_json_string());
    CHECK(back.gamma == 0.65);
    CHECK(back.lambda_tv == 0.11);

    LossConfig bad;
    bad.gamma = 1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = LossConfig{};
    bad.eps = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}
