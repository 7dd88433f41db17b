"""WAV reading and writing for ``[channels, samples]`` float arrays."""

from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .framing import SAMPLE_RATE


def read_wav(path, expect_rate=SAMPLE_RATE):
    """Load a WAV as float64 ``[P, N]``; integer PCM is scaled to [-1, 1)."""
    rate, data = wavfile.read(path)
    if expect_rate is not None and rate != expect_rate:
        raise ValueError(f"{path}: sample rate {rate} Hz, expected {expect_rate} Hz")
    if np.issubdtype(data.dtype, np.integer):
        data = data / float(np.iinfo(data.dtype).max + 1)
    data = np.asarray(data, dtype=np.float64)
    return data[None, :] if data.ndim == 1 else data.T


def write_wav(path, samples, rate=SAMPLE_RATE):
    """Write ``[P, N]`` (or ``[N]``) samples as 32-bit float WAV."""
    samples = np.asarray(samples, dtype=np.float32)
    if samples.ndim == 2:
        samples = samples.T if samples.shape[0] > 1 else samples[0]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    wavfile.write(path, rate, samples)
    return path
