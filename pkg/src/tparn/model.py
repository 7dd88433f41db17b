"""The triple-path network: encoder, densely connected TPARN blocks, decoder.

Shapes follow ``[B, P, C, R, D]``: batch, microphones, chunks, frames per
chunk, features. Each block runs three ARNs over different axes of that
tensor (within a chunk, across chunks, across microphones).
"""

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .arn import ARN
from .framing import ChunkTensor, FrameTensor, chunk_frames, frame_signal, overlap_add_chunks, \
    overlap_add_frames

SPATIAL_VARIANTS = ("Attention", "RNN", "ARN")
SPATIAL_LOCATIONS = ("Pre", "Mid", "Post")
OUTPUT_MODES = ("MIMO", "MISO", "SISO")
PATHS = ("intra", "inter", "spatial")

STAGE_ORDER = {
    "Pre": ("spatial", "intra", "inter"),
    "Mid": ("intra", "spatial", "inter"),
    "Post": ("intra", "inter", "spatial"),
}
DEFAULT_SPATIAL_BLOCKS = (1, 2, 4)
LEVEL_FLOOR = 1e-8


@dataclass
class TparnConfig:
    """Architecture hyperparameters.

    ``spatial_blocks=None`` selects blocks 1, 2 and 4, restricted to the
    blocks that exist. SISO mode means a single-microphone model, so it
    requires ``channels == 1``. With ``level_normalize`` the forward pass
    divides each input by its RMS (over channels and samples) and multiplies
    the output back, which makes the model insensitive to recording level.
    """

    channels: int = 4
    frame_size: int = 16
    frame_shift: int = 8
    chunk_size: int = 126
    chunk_shift: int = 63
    dim: int = 128
    num_blocks: int = 4
    spatial_variant: str = "ARN"
    spatial_location: str = "Post"
    spatial_blocks: tuple = None
    output_mode: str = "MIMO"
    reference_channel: int = 0
    dropout: float = 0.05
    level_normalize: bool = True

    def __post_init__(self):
        if self.spatial_blocks is None:
            self.spatial_blocks = tuple(k for k in DEFAULT_SPATIAL_BLOCKS if k <= self.num_blocks)
        self.spatial_blocks = tuple(sorted(set(int(k) for k in self.spatial_blocks)))
        self.validate()

    def validate(self):
        sizes = dict(channels=self.channels, frame_size=self.frame_size,
                     frame_shift=self.frame_shift, chunk_size=self.chunk_size,
                     chunk_shift=self.chunk_shift, dim=self.dim, num_blocks=self.num_blocks)
        for name, value in sizes.items():
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value}")
        if self.frame_shift > self.frame_size:
            raise ValueError("frame_shift must not exceed frame_size")
        if self.chunk_shift > self.chunk_size:
            raise ValueError("chunk_shift must not exceed chunk_size")
        if self.spatial_variant not in SPATIAL_VARIANTS:
            raise ValueError(f"spatial_variant must be one of {SPATIAL_VARIANTS}")
        if self.spatial_location not in SPATIAL_LOCATIONS:
            raise ValueError(f"spatial_location must be one of {SPATIAL_LOCATIONS}")
        if not set(self.spatial_blocks) <= set(range(1, self.num_blocks + 1)):
            raise ValueError(f"spatial_blocks {self.spatial_blocks} not within 1..{self.num_blocks}")
        if self.output_mode not in OUTPUT_MODES:
            raise ValueError(f"output_mode must be one of {OUTPUT_MODES}")
        if self.output_mode == "SISO" and self.channels != 1:
            raise ValueError("SISO mode needs a single-channel model (channels=1)")
        if not 0 <= self.reference_channel < self.channels:
            raise ValueError(f"reference_channel must be in [0, {self.channels})")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")

    def to_dict(self):
        d = asdict(self)
        d["spatial_blocks"] = list(self.spatial_blocks)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def _last4(x):
    lead = list(range(x.dim() - 4))
    n = x.dim()
    return lead, n


def reshape_for_path(x, path):
    """Rearrange ``[..., P, C, R, D]`` into the sequence batch one ARN consumes.

    intra -> ``[P*C, R, D]``, inter -> ``[P*R, C, D]``, spatial -> ``[R*C, P, D]``
    (leading batch axes fold into the first axis). Returns the sequence batch
    and the shape needed by :func:`restore_from_path`.
    """
    lead, n = _last4(x)
    p, c, r, d = x.shape[-4:]
    if path == "intra":
        seq = x.reshape(-1, r, d)
    elif path == "inter":
        seq = x.permute(*lead, n - 4, n - 2, n - 3, n - 1).reshape(-1, c, d)
    elif path == "spatial":
        seq = x.permute(*lead, n - 2, n - 3, n - 4, n - 1).reshape(-1, p, d)
    else:
        raise ValueError(f"unknown path {path!r}")
    return seq, tuple(x.shape)


def restore_from_path(seq, path, shape):
    """Inverse of :func:`reshape_for_path`."""
    *lead_shape, p, c, r, d = shape
    lead = list(range(len(lead_shape)))
    n = len(shape)
    if path == "intra":
        return seq.reshape(shape)
    if path == "inter":
        return seq.reshape(*lead_shape, p, r, c, d).permute(*lead, n - 4, n - 2, n - 3, n - 1)
    if path == "spatial":
        return seq.reshape(*lead_shape, r, c, p, d).permute(*lead, n - 2, n - 3, n - 4, n - 1)
    raise ValueError(f"unknown path {path!r}")


class TparnBlock(nn.Module):
    """One TPARN block consuming ``k * dim`` features and producing ``dim``."""

    def __init__(self, k, cfg: TparnConfig):
        super().__init__()
        self.k = k
        self.dim = cfg.dim
        self.proj = nn.Linear(k * cfg.dim, cfg.dim) if k > 1 else None
        self.intra = ARN(cfg.dim, cfg.dropout)
        self.inter = ARN(cfg.dim, cfg.dropout)
        if k in cfg.spatial_blocks:
            self.spatial = ARN(cfg.dim, cfg.dropout,
                               use_rnn=cfg.spatial_variant != "Attention",
                               use_attention=cfg.spatial_variant != "RNN")
        else:
            self.spatial = None
        self.order = tuple(s for s in STAGE_ORDER[cfg.spatial_location]
                           if s != "spatial" or self.spatial is not None)

    def forward(self, x):
        if x.shape[-1] != self.k * self.dim:
            raise ValueError(f"block {self.k} expects width {self.k * self.dim}, got {x.shape[-1]}")
        if self.proj is not None:
            x = self.proj(x)
        for path in self.order:
            seq, shape = reshape_for_path(x, path)
            x = restore_from_path(getattr(self, path)(seq), path, shape)
        return x


class TPARN(nn.Module):
    """Multichannel time-domain enhancer mapping ``[B, P, N]`` (or ``[P, N]``) waveforms.

    MIMO returns every channel enhanced; MISO averages the final block output
    over microphones before decoding and returns one channel.
    """

    def __init__(self, cfg: TparnConfig = None):
        super().__init__()
        self.cfg = cfg or TparnConfig()
        self.encoder = nn.Linear(self.cfg.frame_size, self.cfg.dim)
        self.block_names = []
        for k in range(1, self.cfg.num_blocks + 1):
            self.add_module(f"block{k}", TparnBlock(k, self.cfg))
            self.block_names.append(f"block{k}")
        self.decoder = nn.Linear(self.cfg.dim, self.cfg.frame_size)

    @property
    def blocks(self):
        return [getattr(self, name) for name in self.block_names]

    def encode(self, w):
        """Frame, chunk and encode ``w[B, P, N]``; returns features and the framing metadata."""
        cfg = self.cfg
        frames = frame_signal(w, cfg.frame_size, cfg.frame_shift)
        chunks = chunk_frames(frames, cfg.chunk_size, cfg.chunk_shift)
        return self.encoder(chunks.data), (frames, chunks)

    def final_features(self, w):
        feats, meta = self.encode(w)
        dense = [feats]
        for block in self.blocks:
            dense.append(block(torch.cat(dense, dim=-1)))
        return dense[-1], meta

    def decode(self, final, meta, n):
        frames, chunks = meta
        out = self.decoder(final)
        frame_data = overlap_add_chunks(
            ChunkTensor(out, chunks.chunk_size, chunks.chunk_shift, chunks.frame_pad),
            frames.num_frames)
        return overlap_add_frames(
            FrameTensor(frame_data, frames.frame_size, frames.frame_shift, frames.pad_len), n)

    def forward(self, w, output_mode=None):
        mode = output_mode or self.cfg.output_mode
        squeeze = w.dim() == 2
        if squeeze:
            w = w.unsqueeze(0)
        if w.dim() != 3 or w.shape[1] != self.cfg.channels:
            raise ValueError(f"expected {self.cfg.channels} channels, got input shape {tuple(w.shape)}")
        if self.cfg.level_normalize:
            level = w.pow(2).mean(dim=(1, 2), keepdim=True).sqrt().clamp_min(LEVEL_FLOOR)
            w = w / level
        final, meta = self.final_features(w)
        if mode == "MISO":
            final = final.mean(dim=1, keepdim=True)
        out = self.decode(final, meta, w.shape[-1])
        if self.cfg.level_normalize:
            out = out * level
        return out.squeeze(0) if squeeze else out


def mimo_to_miso(final, model: TPARN, meta, n):
    """Average the final block output over microphones, then decode one channel."""
    return model.decode(final.mean(dim=-4, keepdim=True), meta, n)


def count_params(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters() if p.requires_grad)


def param_report(model: TPARN) -> dict:
    """Trainable scalar counts per top-level part, plus the total."""
    report = {"encoder": count_params(model.encoder)}
    for name in model.block_names:
        block = getattr(model, name)
        report[name] = {part: count_params(m) for part, m in block.named_children()}
        report[name]["total"] = count_params(block)
    report["decoder"] = count_params(model.decoder)
    report["total"] = count_params(model)
    return report


def save_checkpoint(path, model: TPARN, extra=None):
    """Write config JSON and named parameter arrays into one ``.npz`` archive.

    Array names are the state-dict keys, e.g. ``block2.spatial.attention.qp``.
    """
    arrays = {k: v.detach().cpu().numpy() for k, v in model.state_dict().items()}
    meta = {"config": model.cfg.to_dict(), "extra": extra or {}}
    arrays["__meta__"] = np.array(json.dumps(meta, sort_keys=True))
    path = Path(path)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    return path


def load_checkpoint(path, dtype=None):
    """Rebuild a model from :func:`save_checkpoint` output; returns ``(model, extra)``."""
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["__meta__"]))
        state = {k: torch.from_numpy(z[k].copy()) for k in z.files if k != "__meta__"}
    model = TPARN(TparnConfig.from_dict(meta["config"]))
    if dtype is None:
        dtype = next(iter(state.values())).dtype
    model.to(dtype)
    model.load_state_dict(state)
    return model, meta["extra"]
