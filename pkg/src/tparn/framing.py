"""Framing, chunking and their overlap-add inverses.

A waveform ``[..., P, N]`` is cut into frames ``[..., P, T, L]`` and the frame
axis is then cut into chunks ``[..., P, C, R, L]``. Both cuts use a rectangular
window with right zero-padding, and both overlap-add inverses divide by the
per-sample coverage count, so ``overlap_add_frames(frame_signal(w))`` returns
``w`` exactly up to float rounding.

Every function accepts numpy arrays and torch tensors; torch inputs keep their
autograd graph, which is how the network differentiates through framing.
"""

from dataclasses import dataclass
from typing import Any

import numpy as np
import torch

SAMPLE_RATE = 16000


@dataclass
class FrameTensor:
    """Frames ``[..., P, T, L]`` plus the bookkeeping needed to invert them."""

    data: Any
    frame_size: int
    frame_shift: int
    pad_len: int

    @property
    def num_frames(self) -> int:
        return self.data.shape[-2]


@dataclass
class ChunkTensor:
    """Chunks ``[..., P, C, R, F]``; ``frame_pad`` zero frames were appended before chunking."""

    data: Any
    chunk_size: int
    chunk_shift: int
    frame_pad: int

    @property
    def num_chunks(self) -> int:
        return self.data.shape[-3]


def padded_length(n: int, size: int, shift: int) -> int:
    """Smallest length ``>= max(n, size)`` with ``(length - size) % shift == 0``."""
    if n <= size:
        return size
    return size + -(-(n - size) // shift) * shift


def _check_window(size, shift):
    if size <= 0 or shift <= 0 or shift > size:
        raise ValueError(f"need 0 < shift <= size, got size={size}, shift={shift}")


def _is_torch(x) -> bool:
    return isinstance(x, torch.Tensor)


def _pad_last(x, pad):
    if pad == 0:
        return x
    if _is_torch(x):
        return torch.nn.functional.pad(x, (0, pad))
    widths = [(0, 0)] * (x.ndim - 1) + [(0, pad)]
    return np.pad(x, widths)


def _window_last(x, size, shift):
    """Slide a window over the last axis: ``[..., n] -> [..., count, size]``."""
    if _is_torch(x):
        return x.unfold(-1, size, shift)
    return np.lib.stride_tricks.sliding_window_view(x, size, axis=-1)[..., ::shift, :]


def _coverage(count, size, shift):
    cov = np.zeros((count - 1) * shift + size)
    for t in range(count):
        cov[t * shift:t * shift + size] += 1.0
    return cov


def _overlap_add_last(x, shift):
    """Inverse of ``_window_last``: ``[..., count, size] -> [..., length]``, coverage-normalized."""
    count, size = x.shape[-2], x.shape[-1]
    length = (count - 1) * shift + size
    span = (count - 1) * shift + 1
    lead = tuple(x.shape[:-2])
    if _is_torch(x):
        out = x.new_zeros(lead + (length,))
        for j in range(size):
            out[..., j:j + span:shift] += x[..., :, j]
        cov = torch.as_tensor(_coverage(count, size, shift), dtype=x.dtype, device=x.device)
    else:
        out = np.zeros(lead + (length,), dtype=np.result_type(x.dtype, np.float32))
        for j in range(size):
            out[..., j:j + span:shift] += x[..., :, j]
        cov = _coverage(count, size, shift).astype(out.dtype)
    return out / cov


def _moveaxis(x, src, dst):
    if _is_torch(x):
        return x.movedim(src, dst)
    return np.moveaxis(x, src, dst)


def frame_signal(w, frame_size: int = 16, frame_shift: int = 8) -> FrameTensor:
    """Cut ``w[..., N]`` into frames ``[..., T, frame_size]``.

    Frame ``t`` holds samples ``[t*shift, t*shift + size)``. The signal is
    right-padded with the fewest zeros that cover every sample.
    """
    _check_window(frame_size, frame_shift)
    n = w.shape[-1]
    if n == 0 or (w.ndim > 1 and 0 in tuple(w.shape[:-1])):
        raise ValueError("empty input")
    pad = padded_length(n, frame_size, frame_shift) - n
    frames = _window_last(_pad_last(w, pad), frame_size, frame_shift)
    return FrameTensor(frames, frame_size, frame_shift, pad)


def overlap_add_frames(f: FrameTensor, original_n: int):
    """Rebuild the waveform ``[..., N]`` from ``f`` and drop the padding."""
    t, size = f.data.shape[-2], f.data.shape[-1]
    if size != f.frame_size:
        raise ValueError(f"frame width {size} does not match frame_size {f.frame_size}")
    padded = (t - 1) * f.frame_shift + f.frame_size
    if original_n + f.pad_len != padded or original_n < 1:
        raise ValueError(
            f"original_n={original_n} inconsistent with {t} frames "
            f"(size {f.frame_size}, shift {f.frame_shift}, pad {f.pad_len})")
    return _overlap_add_last(f.data, f.frame_shift)[..., :original_n]


def chunk_frames(f, chunk_size: int = 126, chunk_shift: int = 63) -> ChunkTensor:
    """Group frames ``[..., T, F]`` into chunks ``[..., C, R, F]`` along the frame axis.

    ``f`` may be a :class:`FrameTensor` or a bare array whose second-to-last
    axis is time. Padding follows the same rule as :func:`frame_signal`.
    """
    _check_window(chunk_size, chunk_shift)
    data = f.data if isinstance(f, FrameTensor) else f
    t = data.shape[-2]
    if t == 0:
        raise ValueError("empty input")
    pad = padded_length(t, chunk_size, chunk_shift) - t
    # time axis last, window it, then put (C, R) in front of the feature axis
    x = _pad_last(_moveaxis(data, -2, -1), pad)
    chunks = _window_last(x, chunk_size, chunk_shift)  # [..., F, C, R]
    chunks = _moveaxis(chunks, -3, -1)
    return ChunkTensor(chunks, chunk_size, chunk_shift, pad)


def overlap_add_chunks(c: ChunkTensor, original_t: int):
    """Rebuild frames ``[..., T, F]`` from chunks, dividing by chunk coverage."""
    n_chunks, size = c.data.shape[-3], c.data.shape[-2]
    if size != c.chunk_size:
        raise ValueError(f"chunk length {size} does not match chunk_size {c.chunk_size}")
    padded = (n_chunks - 1) * c.chunk_shift + c.chunk_size
    if original_t + c.frame_pad != padded or original_t < 1:
        raise ValueError(
            f"original_t={original_t} inconsistent with {n_chunks} chunks "
            f"(size {c.chunk_size}, shift {c.chunk_shift}, pad {c.frame_pad})")
    x = _moveaxis(c.data, -1, -3)  # [..., F, C, R]
    frames = _overlap_add_last(x, c.chunk_shift)[..., :original_t]
    return _moveaxis(frames, -1, -2)


def num_frames(n: int, frame_size: int = 16, frame_shift: int = 8) -> int:
    return (padded_length(n, frame_size, frame_shift) - frame_size) // frame_shift + 1
