"""Attentive recurrent network (ARN): RNN block, gated attention block, feedforward block.

All blocks map a sequence batch ``[B, U, D]`` to ``[B, U, D]``.
"""

import math

import torch
import torch.nn.functional as F
from torch import nn

LN_EPS = 1e-5


class RNNBlock(nn.Module):
    """BLSTM over the first normalized copy, densely merged with a projection of the second."""

    def __init__(self, dim):
        super().__init__()
        self.ln1 = nn.LayerNorm(dim, eps=LN_EPS)
        self.ln2 = nn.LayerNorm(dim, eps=LN_EPS)
        self.lstm = nn.LSTM(dim, dim, batch_first=True, bidirectional=True)
        self.proj = nn.Linear(dim, dim)
        self.merge = nn.Linear(3 * dim, dim)

    def forward(self, x):
        h, _ = self.lstm(self.ln1(x))
        g = self.proj(self.ln2(x))
        return self.merge(torch.cat([h, g], dim=-1))


def gate_qkv(q, k, v, att, eval_mode=False):
    """Refine query, key and value with the learned gates of ``att``.

    In eval mode the value gate is read from ``att.cached_vgate`` instead of
    being recomputed from the parameters.
    """
    kr = k * torch.sigmoid(att.kp)
    qr = att.lin_q(q) * torch.sigmoid(att.qp)
    if eval_mode:
        if att.cached_vgate is None:
            raise RuntimeError("gate cache not materialized")
        vgate = att.cached_vgate
    else:
        vgate = att.value_gate()
    return qr, kr, v * vgate


def attention(qr, kr, vr):
    """Scaled dot-product attention, softmax over the key axis."""
    scores = qr @ kr.transpose(-1, -2) / math.sqrt(qr.shape[-1])
    return torch.softmax(scores, dim=-1) @ vr


class AttentionBlock(nn.Module):
    """Single-head gated self-attention with a residual connection to the block input.

    ``cached_vgate`` holds the value gate for evaluation; it is refreshed by
    ``eval()`` and dropped by ``train()``.
    """

    def __init__(self, dim):
        super().__init__()
        self.ln1 = nn.LayerNorm(dim, eps=LN_EPS)
        self.ln2 = nn.LayerNorm(dim, eps=LN_EPS)
        self.qp = nn.Parameter(torch.zeros(1, dim))
        self.kp = nn.Parameter(torch.zeros(1, dim))
        self.vp = nn.Parameter(torch.zeros(1, dim))
        self.lin_q = nn.Linear(dim, dim)
        self.lin_v1 = nn.Linear(dim, dim)
        self.lin_v2 = nn.Linear(dim, dim)
        self.cached_vgate = None

    def value_gate(self):
        return torch.sigmoid(self.lin_v1(self.vp)) * torch.tanh(self.lin_v2(self.vp))

    @torch.no_grad()
    def refresh_gate_cache(self):
        self.cached_vgate = self.value_gate().detach().clone()

    def train(self, mode=True):
        super().train(mode)
        if mode:
            self.cached_vgate = None
        else:
            self.refresh_gate_cache()
        return self

    def _apply(self, fn, *args, **kwargs):
        # keep the cache on the same dtype/device as the parameters
        super()._apply(fn, *args, **kwargs)
        if self.cached_vgate is not None:
            self.cached_vgate = fn(self.cached_vgate)
        return self

    def forward(self, x):
        q = self.ln1(x)
        kv = self.ln2(x)
        qr, kr, vr = gate_qkv(q, kv, kv, self, eval_mode=not self.training)
        return x + attention(qr, kr, vr)


class FeedforwardBlock(nn.Module):
    def __init__(self, dim, dropout=0.05):
        super().__init__()
        self.ln1 = nn.LayerNorm(dim, eps=LN_EPS)
        self.ln2 = nn.LayerNorm(dim, eps=LN_EPS)
        self.ff_in = nn.Linear(dim, 4 * dim)
        self.dropout = nn.Dropout(dropout)
        self.ff_out = nn.Linear(4 * dim, dim)

    def forward(self, x):
        y = self.ff_out(self.dropout(F.gelu(self.ff_in(self.ln1(x)))))
        return self.ln2(x) + y


class ARN(nn.Module):
    """RNN block -> attention block -> feedforward block.

    ``use_rnn=False`` or ``use_attention=False`` drops that block, which is
    how the attention-only and RNN-only spatial variants are built.
    """

    def __init__(self, dim, dropout=0.05, use_rnn=True, use_attention=True):
        super().__init__()
        if not 0.0 <= dropout < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {dropout}")
        self.rnn = RNNBlock(dim) if use_rnn else None
        self.attention = AttentionBlock(dim) if use_attention else None
        self.feedforward = FeedforwardBlock(dim, dropout)

    def forward(self, x):
        if self.rnn is not None:
            x = self.rnn(x)
        if self.attention is not None:
            x = self.attention(x)
        return self.feedforward(x)
