"""Synthetic speech-like sources and noises for demos and tests.

No speech corpus ships with the package, so these stand in for it: voiced
syllables with a wandering pitch and formant-like resonances separated by
pauses, and a few families of stationary and non-stationary noise.
"""

from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .audio import write_wav
from .framing import SAMPLE_RATE


def _resonator(freq, bandwidth, fs):
    r = np.exp(-np.pi * bandwidth / fs)
    theta = 2 * np.pi * freq / fs
    return [1.0 - r], [1.0, -2 * r * np.cos(theta), r * r]


def speech_like(seconds, rng, fs=SAMPLE_RATE):
    """Mono voiced-syllable signal with unit RMS over its active part."""
    rng = np.random.default_rng(rng)
    n = int(seconds * fs)
    out = np.zeros(n)
    t = 0
    while t < n:
        t += int(rng.uniform(0.03, 0.15) * fs)  # pause
        length = int(rng.uniform(0.12, 0.35) * fs)
        stop = min(n, t + length)
        if stop - t < 16:
            break
        m = stop - t
        f0 = rng.uniform(90, 240) * (1 + 0.08 * np.sin(2 * np.pi * rng.uniform(2, 6) * np.arange(m) / fs))
        phase = 2 * np.pi * np.cumsum(f0) / fs
        harmonics = sum(np.sin(k * phase) / k for k in range(1, 25) if k * f0.max() < fs / 2)
        voiced = harmonics + 0.05 * rng.standard_normal(m)
        syl = np.zeros(m)
        for f, bw in zip(rng.uniform([300, 900, 2200], [900, 2200, 3200]), (80, 120, 180)):
            b, a = _resonator(f, bw, fs)
            syl += lfilter(b, a, voiced)
        out[t:stop] = syl * np.hanning(m)
        t = stop
    rms = np.sqrt(np.mean(out[out != 0] ** 2)) if np.any(out) else 1.0
    return out / rms


def noise_like(seconds, rng, fs=SAMPLE_RATE, kind=None):
    """Mono noise with unit RMS: ``colored``, ``hum``, ``babble`` or ``bursts``."""
    rng = np.random.default_rng(rng)
    n = int(seconds * fs)
    kind = kind or rng.choice(["colored", "hum", "babble", "bursts"])
    if kind == "colored":
        pole = rng.uniform(-0.3, 0.97)
        x = lfilter([1.0], [1.0, -pole], rng.standard_normal(n))
    elif kind == "hum":
        base = rng.uniform(50, 400)
        tt = np.arange(n) / fs
        x = sum(np.sin(2 * np.pi * k * base * tt + rng.uniform(0, 2 * np.pi)) / k for k in range(1, 6))
        x = x + 0.3 * rng.standard_normal(n)
    elif kind == "babble":
        x = sum(speech_like(seconds, rng, fs) for _ in range(4))
    elif kind == "bursts":
        env = np.repeat(rng.uniform(0.05, 1.0, n // 800 + 1), 800)[:n]
        x = env * lfilter([1.0], [1.0, -0.7], rng.standard_normal(n))
    else:
        raise ValueError(f"unknown noise kind {kind!r}")
    return x / np.sqrt(np.mean(x ** 2))


def write_corpus(root, num_speech, num_noise, seconds, seed=0, fs=SAMPLE_RATE):
    """Write ``speech/*.wav`` and ``noise/*.wav`` mono files under ``root``.

    ``seconds`` is a length or a ``(low, high)`` range for speech files;
    noise files are twice the upper length so they can be cropped.
    """
    root = Path(root)
    lo, hi = (seconds, seconds) if np.isscalar(seconds) else seconds
    rng = np.random.default_rng(seed)
    for i in range(num_speech):
        sig = 0.1 * speech_like(rng.uniform(lo, hi), rng, fs)
        write_wav(root / "speech" / f"utt{i:04d}.wav", sig, fs)
    for i in range(num_noise):
        write_wav(root / "noise" / f"noise{i:04d}.wav", 0.1 * noise_like(2 * hi, rng, fs), fs)
    return root / "speech", root / "noise"
