"""Brute-force references for the STFT loss and the image-source RIR."""

import numpy as np


def brute_spectrum(x, fft_size, hop):
    """Direct DFT of Hann-windowed frames, built without the library path."""
    n = len(x)
    count = 1 if n <= fft_size else 1 + -(-(n - fft_size) // hop)
    padded = np.zeros((count - 1) * hop + fft_size)
    padded[:n] = x
    win = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(fft_size) / fft_size)
    k = np.arange(fft_size // 2 + 1)[:, None]
    m = np.arange(fft_size)[None, :]
    basis = np.exp(-2j * np.pi * k * m / fft_size)
    return np.stack([basis @ (padded[t * hop:t * hop + fft_size] * win) for t in range(count)])


def brute_sm_loss(d, d_hat, fft_size, hop):
    total, count = 0.0, 0
    for p in range(d.shape[0]):
        a, b = brute_spectrum(d[p], fft_size, hop), brute_spectrum(d_hat[p], fft_size, hop)
        diff = (np.abs(a.real) + np.abs(a.imag)) - (np.abs(b.real) + np.abs(b.imag))
        total += np.abs(diff).sum()
        count += diff.size
    return total / count


def mirror_images(room_dims, src, max_order):
    """Brute-force images: repeatedly mirror across the six walls, keep the fewest reflections."""
    dims = np.asarray(room_dims, float)
    best = {}
    frontier = [(np.asarray(src, float), 0)]
    key = lambda p: tuple(np.round(p, 9))
    best[key(frontier[0][0])] = (frontier[0][0], 0)
    for depth in range(1, max_order + 1):
        nxt = []
        for pos, _ in frontier:
            for axis in range(3):
                for wall in (0.0, dims[axis]):
                    q = pos.copy()
                    q[axis] = 2 * wall - q[axis]
                    k = key(q)
                    if k not in best:
                        best[k] = (q, depth)
                        nxt.append((q, depth))
        frontier = nxt
    return best.values()


def brute_rir(room_dims, src, mic, max_order, beta, fs, length, c=343.0):
    h = np.zeros(length)
    for pos, order in mirror_images(room_dims, src, max_order):
        d = np.sqrt(sum((pos[i] - mic[i]) ** 2 for i in range(3)))
        h[int(round(fs * d / c))] += beta ** order / (4 * np.pi * d)
    return h
