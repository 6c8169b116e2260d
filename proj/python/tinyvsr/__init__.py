"""Synthetic-video super-resolution toolbench: C++ core with numpy bindings."""

from tinyvsr._core import (  # noqa: F401
    ConfigError,
    Generator,
    IoError,
    __version__,
    backward_warp,
    charbonnier,
    degrade_clip,
    e_tc,
    e_warp,
    estimate_flow,
    generate_clip,
    load_clip,
    load_flo,
    lr_schedule,
    motion_weight,
    occlusion_mask,
    param_count,
    pixel_shuffle,
    pixel_unshuffle,
    pruned_preset,
    psnr,
    reconstruction_loss,
    reduction_ratio,
    reference_preset,
    region_aware_tv,
    save_clip,
    save_flo,
    ssim,
    temporal_loss,
    temporal_profile,
)
