"""Grayscale erosion/dilation of depth maps and the three-channel aggregate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = ["StructuringElement", "AggregatedDepth", "erode", "dilate", "aggregate", "extremum_source"]


@dataclass(frozen=True)
class StructuringElement:
    """Square ``(2k+1) x (2k+1)`` window with additive offsets (flat by default)."""

    half_width: int = 1
    offsets: np.ndarray | None = None

    def __post_init__(self):
        if self.half_width < 0:
            raise ValueError("half_width must be non-negative")
        if self.offsets is not None:
            b = np.array(self.offsets, dtype=np.float64)
            if b.shape != (self.size, self.size):
                raise ValueError(f"offsets must be {self.size}x{self.size}, got {b.shape}")
            if not np.all(np.isfinite(b)):
                raise ValueError("structuring element offsets must be finite")
            b.setflags(write=False)
            object.__setattr__(self, "offsets", b)

    @property
    def size(self) -> int:
        return 2 * self.half_width + 1

    @property
    def values(self) -> np.ndarray:
        if self.offsets is None:
            return np.zeros((self.size, self.size))
        return self.offsets

    @property
    def is_flat(self) -> bool:
        return self.offsets is None or not np.any(self.offsets)


def _windows(depth: np.ndarray, k: int) -> np.ndarray:
    d = np.asarray(depth, dtype=np.float64)
    if d.ndim != 2:
        raise ValueError(f"depth map must be 2-D, got shape {d.shape}")
    padded = np.pad(d, k, mode="edge")
    return sliding_window_view(padded, (2 * k + 1, 2 * k + 1))


def erode(depth, se: StructuringElement | None = None) -> np.ndarray:
    """``min_(s,t) D(x+s, y+t) - B(s, t)`` with edge-replicated borders."""
    se = se or StructuringElement()
    win = _windows(depth, se.half_width)
    if se.is_flat:
        return win.min(axis=(-2, -1))
    return (win - se.values).min(axis=(-2, -1))


def dilate(depth, se: StructuringElement | None = None) -> np.ndarray:
    """``max_(s,t) D(x+s, y+t) + B(s, t)`` with edge-replicated borders."""
    se = se or StructuringElement()
    win = _windows(depth, se.half_width)
    if se.is_flat:
        return win.max(axis=(-2, -1))
    return (win + se.values).max(axis=(-2, -1))


def extremum_source(depth, values, se: StructuringElement | None = None, mode: str = "min") -> np.ndarray:
    """Gather ``values`` from the window pixel that wins the erosion (``"min"``) or dilation (``"max"``).

    ``values`` is ``(H, W, ...)``; ties go to the first pixel in row-major window order.
    """
    se = se or StructuringElement()
    k = se.half_width
    win = _windows(depth, k)
    h, w = win.shape[:2]
    if mode == "min":
        pick = np.argmin((win - se.values).reshape(h, w, -1), axis=-1)
    elif mode == "max":
        pick = np.argmax((win + se.values).reshape(h, w, -1), axis=-1)
    else:
        raise ValueError(f"mode must be 'min' or 'max', got {mode!r}")
    v = np.asarray(values)
    size = 2 * k + 1
    rows = np.arange(h)[:, None] + pick // size - k
    cols = np.arange(w)[None, :] + pick % size - k
    return v[np.clip(rows, 0, h - 1), np.clip(cols, 0, w - 1)]


@dataclass
class AggregatedDepth:
    """``channels[..., 0]`` eroded, ``[..., 1]`` original, ``[..., 2]`` dilated depth."""

    channels: np.ndarray
    mask: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.channels.shape[:2]


def aggregate(depth, se: StructuringElement | None = None, mask=None,
              sentinel: float | None = None, dilate_mask: bool = True) -> AggregatedDepth:
    """Stack (eroded, original, dilated) depth.

    Pixels outside ``mask`` are set to ``sentinel`` before filtering when one is
    given. With ``dilate_mask`` the returned mask grows by the window so pixels
    that picked up a foreground depth through erosion are kept.
    """
    se = se or StructuringElement()
    d = np.array(depth, dtype=np.float64)
    m = np.ones(d.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if m.shape != d.shape:
        raise ValueError("mask and depth must share a shape")
    if sentinel is not None:
        d[~m] = sentinel
    channels = np.stack([erode(d, se), d, dilate(d, se)], axis=-1)
    if dilate_mask and se.half_width > 0:
        m = _windows(m.astype(np.float64), se.half_width).max(axis=(-2, -1)) > 0
    return AggregatedDepth(channels, m)
