"""Fuse multirate biosignals into 2D images and classify them with a small CNN."""

from ._fuse2d import (
    DataError,
    DivergenceError,
    FormatError,
    IoError,
    arrangements,
    custom_color,
    evaluate,
    fuse_window,
    gradcheck,
    images,
    metrics,
    render_window,
    roc_auc,
    softmax,
    synth,
    train,
    window_starts,
)

__all__ = [
    "DataError",
    "DivergenceError",
    "FormatError",
    "IoError",
    "arrangements",
    "custom_color",
    "evaluate",
    "fuse_window",
    "gradcheck",
    "images",
    "metrics",
    "render_window",
    "roc_auc",
    "softmax",
    "synth",
    "train",
    "window_starts",
]
