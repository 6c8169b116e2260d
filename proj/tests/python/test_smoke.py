# Copyright (c) 2026 tinyvsr contributors
# SPDX-License-Identifier: Apache-2.0
"""End-to-end smoke tests for the python bindings."""
import math

import numpy as np
import pytest

core = pytest.importorskip("_core")


def test_generate_and_degrade():
    clip = core.generate_clip(pattern="textured-sprites", height=64, width=64, num_frames=4, seed=7)
    frames = clip["frames"]
    assert len(frames) == 4
    assert frames[0].shape == (64, 64, 3)
    assert 0.0 <= frames[0].min() and frames[0].max() <= 1.0
    assert len(clip["flows_bwd"]) == 3
    assert clip["flows_bwd"][0].shape == (64, 64, 2)

    lr = core.degrade_clip(frames, blur_sigma=0.8, factor=4, noise_sigma=0.02, jpeg_quality=80, seed=3)
    assert lr[0].shape == (16, 16, 3)

    lr2 = core.degrade_clip(frames, blur_sigma=0.8, factor=4, noise_sigma=0.02, jpeg_quality=80, seed=3)
    assert all(np.array_equal(a, b) for a, b in zip(lr, lr2))


def test_warp_consistency_against_ground_truth():
    clip = core.generate_clip(height=48, width=48, num_frames=3, seed=11)
    frames, flows, vis = clip["frames"], clip["flows_bwd"], clip["vis_bwd"]
    warped = core.backward_warp(frames[0], flows[0])
    err = np.abs(warped - frames[1]).max(axis=2) * vis[0]
    assert err.max() <= 2.0 / 255.0


def test_pixel_shuffle_round_trip():
    rng = np.random.default_rng(5)
    x = rng.random((16, 16, 3))
    for u in (1, 2, 4):
        packed = core.pixel_unshuffle(x, u)
        assert packed.shape == (16 // u, 16 // u, 3 * u * u)
        assert np.array_equal(core.pixel_shuffle(packed, u), x)


def test_flow_estimation_recovers_translation():
    clip = core.generate_clip(pattern="sinusoid-texture", height=48, width=48, num_frames=2, seed=13)
    frames, gt = clip["frames"], clip["flows_bwd"][0]
    est = core.estimate_flow(frames[0], frames[1], levels=3)
    interior = (slice(6, -6), slice(6, -6))
    err = np.hypot(est[..., 0] - gt[..., 0], est[..., 1] - gt[..., 1])[interior]
    assert np.median(err) <= 0.5


def test_losses_and_metrics():
    rng = np.random.default_rng(9)
    a = rng.random((12, 12, 3))
    assert core.charbonnier(np.zeros(4), eps=1e-3) == pytest.approx(1e-3)
    assert core.reconstruction_loss(a, a, eps=1e-3) == pytest.approx(1e-3)
    assert core.region_aware_tv(np.full((8, 8, 3), 0.5), a[:8, :8], tau=0.05) == 0.0
    assert math.isinf(core.psnr(a, a))
    assert core.ssim(a, a) == pytest.approx(1.0)
    b = np.clip(a + 0.1, None, 2.0)
    assert core.psnr(a, b) == pytest.approx(20.0, abs=1e-9)

    frames = [np.full((8, 8, 3), 0.2), np.full((8, 8, 3), 0.5)]
    assert core.e_tc(frames) == pytest.approx(0.3)
    zero_flow = np.zeros((8, 8, 2))
    assert core.e_warp(frames, [zero_flow]) == pytest.approx(0.3)

    profile = core.temporal_profile(frames, 3)
    assert profile.shape == (2, 8, 3)


def test_occlusion_and_motion_weight():
    consistent_fwd = np.full((8, 8, 2), -1.0)
    consistent_bwd = np.full((8, 8, 2), 1.0)
    vis = core.occlusion_mask(consistent_fwd, consistent_bwd)
    assert vis.min() == 1.0
    w = core.motion_weight(np.zeros((8, 8, 2)), 8.0, vis)
    assert np.all(w == 1.0)


def test_model_presets_and_schedule():
    assert core.reduction_ratio(core.pruned_preset(), core.reference_preset()) > 0.60
    assert core.lr_schedule(0) == 2e-5
    assert core.lr_schedule(50) == 1e-5
    assert core.lr_schedule(150) == 2.5e-6


def test_clip_io_round_trip(tmp_path):
    rng = np.random.default_rng(21)
    frames = [rng.random((8, 10, 3)) for _ in range(3)]
    core.save_clip(frames, str(tmp_path / "clip"), 24.0)
    loaded = core.load_clip(str(tmp_path / "clip"))
    assert len(loaded) == 3
    assert max(np.abs(a - b).max() for a, b in zip(frames, loaded)) <= 1.0 / 65535.0

    flow = rng.random((6, 6, 2)).astype(np.float32).astype(np.float64)
    core.save_flo(flow, str(tmp_path / "a.flo"))
    assert np.array_equal(core.load_flo(str(tmp_path / "a.flo")), flow)

    with pytest.raises(IOError):
        core.load_clip(str(tmp_path / "missing"))
