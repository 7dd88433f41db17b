"""Training losses (time-domain MSE, phase-constrained magnitude loss) and SI-SDR."""

from dataclasses import dataclass

import numpy as np
import torch

from .framing import frame_signal

LOSS_FFT_SIZE = 512
LOSS_HOP = 256
SI_SDR_CAP = 100.0


@dataclass
class Spectrogram:
    real: torch.Tensor
    imag: torch.Tensor
    fft_size: int
    hop: int
    window: str = "hann"

    @property
    def num_bins(self):
        return self.real.shape[-1]


@dataclass
class LossReport:
    total: torch.Tensor
    speech_term: torch.Tensor
    interference_term: torch.Tensor

    def as_floats(self):
        return {k: float(getattr(self, k)) for k in ("total", "speech_term", "interference_term")}


def _tensor(x):
    if isinstance(x, torch.Tensor):
        return x
    return torch.as_tensor(np.asarray(x, dtype=np.float64))


def _check_same_shape(a, b):
    if tuple(a.shape) != tuple(b.shape):
        raise ValueError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")


def hann_window(n, dtype=torch.float64):
    """Periodic Hann window, the usual choice for STFT analysis."""
    return torch.hann_window(n, periodic=True, dtype=dtype)


def stft(w, fft_size=LOSS_FFT_SIZE, hop=LOSS_HOP, window="hann") -> Spectrogram:
    """One-sided STFT of ``w[..., N]`` -> ``[..., frames, fft_size // 2 + 1]``.

    Frames are cut without centering and the tail is zero-padded to a whole
    frame, so signals shorter than one window still give one frame.
    """
    if fft_size < 1 or fft_size & (fft_size - 1):
        raise ValueError(f"fft_size must be a power of two, got {fft_size}")
    if not 0 < hop <= fft_size:
        raise ValueError(f"hop must be in (0, fft_size], got {hop}")
    if window != "hann":
        raise ValueError(f"unsupported window {window!r}")
    w = _tensor(w)
    frames = frame_signal(w, fft_size, hop).data * hann_window(fft_size, w.dtype).to(w.device)
    spec = torch.fft.rfft(frames, dim=-1)
    return Spectrogram(spec.real, spec.imag, fft_size, hop, window)


def estimate_interference(x, d_hat):
    """Everything in the mixture the speech estimate does not explain."""
    _check_same_shape(x, d_hat)
    return x - d_hat


def _l1_magnitude(spec):
    return spec.real.abs() + spec.imag.abs()


def sm_loss(d, d_hat, fft_size=LOSS_FFT_SIZE, hop=LOSS_HOP):
    """Mean absolute difference of ``|Re| + |Im|`` spectra over channels, frames and bins."""
    d, d_hat = _tensor(d), _tensor(d_hat)
    _check_same_shape(d, d_hat)
    ref = _l1_magnitude(stft(d, fft_size, hop))
    est = _l1_magnitude(stft(d_hat, fft_size, hop))
    return (ref - est).abs().mean()


def pcm_loss(x, d, d_hat, fft_size=LOSS_FFT_SIZE, hop=LOSS_HOP) -> LossReport:
    """Phase-constrained magnitude loss: half speech term, half implied-interference term."""
    x, d, d_hat = _tensor(x), _tensor(d), _tensor(d_hat)
    _check_same_shape(x, d)
    _check_same_shape(x, d_hat)
    speech = sm_loss(d, d_hat, fft_size, hop)
    interference = sm_loss(estimate_interference(x, d), estimate_interference(x, d_hat), fft_size, hop)
    return LossReport(0.5 * speech + 0.5 * interference, speech, interference)


def mse_loss(d, d_hat):
    d, d_hat = _tensor(d), _tensor(d_hat)
    _check_same_shape(d, d_hat)
    return ((d - d_hat) ** 2).mean()


def si_sdr(estimate, reference, cap=SI_SDR_CAP) -> float:
    """Scale-invariant SDR in dB of a single-channel estimate, clipped to ``[-cap, cap]``."""
    est = np.asarray(estimate, dtype=np.float64).reshape(-1)
    ref = np.asarray(reference, dtype=np.float64).reshape(-1)
    if est.shape != ref.shape:
        raise ValueError(f"length mismatch: {est.shape} vs {ref.shape}")
    ref_energy = np.dot(ref, ref)
    if ref_energy == 0:
        raise ValueError("undefined reference")
    alpha = np.dot(est, ref) / ref_energy
    target = alpha * ref
    residual = est - target
    t, r = np.dot(target, target), np.dot(residual, residual)
    if r == 0:
        return cap
    if t == 0:
        return -cap
    return float(np.clip(10 * np.log10(t / r), -cap, cap))
