"""Synthetic multichannel scenes: shoebox rooms, circular arrays, image-source RIRs, mixing.

One scene is a room with a 4-microphone circular array, one speech source
and several noise sources. Speech and noise are convolved with image-source
room impulse responses and mixed so the array-wide direct-path SNR hits the
sampled value. The direct-path speech image at every microphone is kept as
the training target.
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.signal import fftconvolve

from .audio import read_wav, write_wav
from .framing import SAMPLE_RATE

log = logging.getLogger(__name__)

SPEED_OF_SOUND = 343.0
DEFAULT_SPLITS = {"train": 0.9, "validation": 0.05, "test": 0.05}


@dataclass
class SceneConstraints:
    room_xy: tuple = (5.0, 10.0)
    room_z: tuple = (3.0, 4.0)
    wall_margin: float = 0.5
    source_distance: tuple = (0.75, 2.0)
    num_noises: tuple = (5, 10)
    snr: tuple = (-10.0, 10.0)
    t60: tuple = (0.2, 1.2)
    num_mics: int = 4
    array_radius: float = 0.1
    max_rejections: int = 10_000


@dataclass
class RoomScene:
    room_dims: tuple
    array_center: tuple
    mic_positions: list
    speech_pos: tuple
    noise_positions: list
    t60: float
    snr: float
    rng_seed: object = None

    def to_dict(self):
        return json.loads(json.dumps(asdict(self)))

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class MixtureExample:
    """Aligned ``[P, N]`` signals with ``X = D + U``; ``reverb`` is the reflected-speech part of ``U``."""

    X: np.ndarray
    D: np.ndarray
    U: np.ndarray
    manifest: dict = field(default_factory=dict)
    reverb: np.ndarray = None


class RirResult(NamedTuple):
    taps: np.ndarray
    dropped: int


def _inside(point, dims, margin):
    p = np.asarray(point)
    return bool(np.all(p >= margin) and np.all(p <= np.asarray(dims) - margin))


def sample_scene(rng, constraints: SceneConstraints = None) -> RoomScene:
    """Draw one room, array and source layout satisfying ``constraints``.

    ``rng`` is a seed or a ``numpy.random.Generator``; an integer seed is
    recorded in the scene.
    """
    c = constraints or SceneConstraints()
    seed = rng if isinstance(rng, (int, np.integer)) else None
    rng = np.random.default_rng(rng)
    dims = np.array([rng.uniform(*c.room_xy), rng.uniform(*c.room_xy), rng.uniform(*c.room_z)])
    lo = np.full(3, c.wall_margin)
    hi = dims - c.wall_margin
    rejections = 0

    def budget():
        nonlocal rejections
        rejections += 1
        if rejections > c.max_rejections:
            raise ValueError("constraints unsatisfiable")

    while True:
        center = rng.uniform(lo, hi)
        offset = rng.uniform(0, 2 * np.pi)
        angles = offset + 2 * np.pi * np.arange(c.num_mics) / c.num_mics
        mics = center + c.array_radius * np.stack([np.cos(angles), np.sin(angles), np.zeros_like(angles)], 1)
        if all(_inside(m, dims, c.wall_margin) for m in mics):
            break
        budget()

    def draw_source():
        while True:
            pos = rng.uniform(lo, hi)
            dist = np.linalg.norm(pos - center)
            if c.source_distance[0] <= dist <= c.source_distance[1]:
                return pos
            budget()

    speech = draw_source()
    n_noise = int(rng.integers(c.num_noises[0], c.num_noises[1] + 1))
    noises = [draw_source() for _ in range(n_noise)]
    t60 = float(rng.uniform(*c.t60))
    snr = float(rng.uniform(*c.snr))
    return RoomScene(
        room_dims=tuple(dims.tolist()),
        array_center=tuple(center.tolist()),
        mic_positions=[tuple(m.tolist()) for m in mics],
        speech_pos=tuple(speech.tolist()),
        noise_positions=[tuple(n.tolist()) for n in noises],
        t60=t60,
        snr=snr,
        rng_seed=None if seed is None else int(seed),
    )


def image_sources(room_dims, src, max_order):
    """Image positions ``[M, 3]`` and reflection counts ``[M]`` up to ``max_order``.

    Along one axis, image index ``i`` sits at ``i*L + s`` for even ``i`` and
    ``i*L + (L - s)`` for odd ``i``, and has undergone ``|i|`` reflections.
    """
    if max_order < 0:
        raise ValueError("max_order must be >= 0")
    dims = np.asarray(room_dims, dtype=float)
    src = np.asarray(src, dtype=float)
    r = np.arange(-max_order, max_order + 1)
    idx = np.stack(np.meshgrid(r, r, r, indexing="ij"), -1).reshape(-1, 3)
    order = np.abs(idx).sum(1)
    keep = order <= max_order
    idx, order = idx[keep], order[keep]
    odd = idx % 2 == 1
    pos = idx * dims + np.where(odd, dims - src, src)
    return pos, order


def image_source_rir(room_dims, src, mic, max_order=6, beta=0.0, fs=SAMPLE_RATE, rir_len=None,
                     c=SPEED_OF_SOUND) -> RirResult:
    """Shoebox RIR from ``src`` to ``mic`` with a wall-uniform reflection coefficient.

    Each image contributes ``beta**reflections / (4*pi*dist)`` at sample
    ``round(fs*dist/c)``. With ``rir_len=None`` the response is just long
    enough for the last image; otherwise images past the end are dropped and
    counted.
    """
    if not 0.0 <= beta < 1.0:
        raise ValueError("beta must be in [0, 1)")
    pos, order = image_sources(room_dims, src, max_order)
    dist = np.linalg.norm(pos - np.asarray(mic, dtype=float), axis=1)
    delay = np.rint(fs * dist / c).astype(int)
    amp = beta ** order / (4 * np.pi * dist)
    if rir_len is None:
        rir_len = int(delay.max()) + 1
    ok = delay < rir_len
    taps = np.zeros(rir_len)
    np.add.at(taps, delay[ok], amp[ok])
    dropped = int((~ok).sum())
    if dropped:
        log.debug("dropped %d images beyond %d samples", dropped, rir_len)
    return RirResult(taps, dropped)


def _volume_and_surface(dims):
    lx, ly, lz = dims
    return lx * ly * lz, 2 * (lx * ly + lx * lz + ly * lz)


def t60_to_beta(t60, room_dims):
    """Wall reflection coefficient giving ``t60`` under Sabine's formula."""
    if t60 <= 0:
        raise ValueError("t60 must be positive")
    vol, surf = _volume_and_surface(room_dims)
    absorption = 0.161 * vol / (surf * t60)
    if absorption >= 1.0:
        raise ValueError("unachievable T60")
    return float(np.sqrt(1.0 - absorption))


def beta_to_t60(beta, room_dims):
    vol, surf = _volume_and_surface(room_dims)
    return 0.161 * vol / (surf * (1.0 - beta ** 2))


def _fit_length(sig, n, rng=None):
    """Crop (at a random offset when ``rng`` is given) or loop ``sig`` to ``n`` samples."""
    sig = np.asarray(sig, dtype=np.float64).reshape(-1)
    if len(sig) >= n:
        start = 0 if rng is None else int(rng.integers(0, len(sig) - n + 1))
        return sig[start:start + n]
    return np.resize(sig, n)


def _propagate(sig, rirs, n):
    return fftconvolve(sig[None, :], rirs, axes=-1)[:, :n]


def propagate_and_mix(scene: RoomScene, speech, noises, max_order=6, fs=SAMPLE_RATE,
                      beta=None) -> MixtureExample:
    """Render ``scene``: ``X = D + r + g*Z`` with the array-wide direct-path SNR equal to ``scene.snr``.

    ``D`` is the direct-path speech image, ``r`` the reflected speech and
    ``Z`` the reverberant noise sum. Noises are looped or cropped to the
    speech length. ``beta`` overrides the reflection coefficient derived
    from ``scene.t60``.
    """
    speech = np.asarray(speech, dtype=np.float64).reshape(-1)
    if len(noises) != len(scene.noise_positions):
        raise ValueError(f"scene has {len(scene.noise_positions)} noise sources, got {len(noises)} signals")
    n = len(speech)
    if beta is None:
        beta = t60_to_beta(scene.t60, scene.room_dims)

    def rirs(src, order):
        res = [image_source_rir(scene.room_dims, src, m, order, beta, fs) for m in scene.mic_positions]
        out = np.zeros((len(res), max(len(r.taps) for r in res)))
        for i, r in enumerate(res):
            out[i, :len(r.taps)] = r.taps
        return out

    direct_rir = rirs(scene.speech_pos, 0)
    full_rir = rirs(scene.speech_pos, max_order)
    tail_rir = full_rir.copy()
    tail_rir[:, :direct_rir.shape[1]] -= direct_rir
    d = _propagate(speech, direct_rir, n)
    r = _propagate(speech, tail_rir, n)
    z = np.zeros_like(d)
    for sig, pos in zip(noises, scene.noise_positions):
        z += _propagate(_fit_length(sig, n), rirs(pos, max_order), n)

    e_d, e_z = np.sum(d ** 2), np.sum(z ** 2)
    if e_z == 0:
        raise ValueError("cannot set SNR")
    gain = np.sqrt(e_d / (e_z * 10 ** (scene.snr / 10)))
    u = r + gain * z
    x = d + u
    realized = 10 * np.log10(e_d / np.sum((gain * z) ** 2))
    manifest = {
        "scene": scene.to_dict(),
        "snr": scene.snr,
        "realized_snr": float(realized),
        "noise_gain": float(gain),
        "beta": beta,
        "max_order": max_order,
    }
    return MixtureExample(x, d, u, manifest, reverb=r)


def _split_files(files, fractions, rng):
    files = list(files)
    rng.shuffle(files)
    names = list(fractions)
    weights = np.array([fractions[k] for k in names], dtype=float)
    edges = np.rint(np.cumsum(weights) / weights.sum() * len(files)).astype(int)
    out, start = {}, 0
    for name, stop in zip(names, edges):
        out[name] = files[start:stop]
        start = stop
    return out


def _list_wavs(folder):
    files = sorted(p for p in Path(folder).rglob("*.wav"))
    if not files:
        raise ValueError(f"no WAV files found in {folder}")
    return files


def generate_dataset(split_spec, speech_dir, noise_dir, out_dir, rng_seed=0,
                     constraints: SceneConstraints = None, max_order=6,
                     utterance_seconds=(3.0, 10.0), fs=SAMPLE_RATE):
    """Spatialize every speech file into a multichannel mixture.

    ``split_spec`` maps split name to the fraction of speech files it gets
    (e.g. ``DEFAULT_SPLITS``); noise files are divided between splits in the
    same proportions, so splits never share a noise file. Writes
    ``{split}/{id}_X.wav`` and ``{split}/{id}_D.wav`` under ``out_dir`` plus
    ``manifest.jsonl``, and returns the manifest entries.
    """
    speech_dir, noise_dir, out_dir = Path(speech_dir), Path(noise_dir), Path(out_dir)
    speech_files, noise_files = _list_wavs(speech_dir), _list_wavs(noise_dir)
    split_spec = dict(split_spec or DEFAULT_SPLITS)
    assign_rng = np.random.default_rng([rng_seed, 0xD47A])
    speech_split = _split_files(speech_files, split_spec, assign_rng)
    noise_split = _split_files(noise_files, split_spec, assign_rng)

    entries = []
    for s_idx, split in enumerate(split_spec):
        if speech_split[split] and not noise_split[split]:
            raise ValueError(f"split {split!r} received no noise files; add noises or change split_spec")
        for i, speech_path in enumerate(speech_split[split]):
            seed = [int(rng_seed), s_idx, i]
            rng = np.random.default_rng(seed)
            scene = sample_scene(rng, constraints)
            speech = read_wav(speech_path, fs)[0]
            if utterance_seconds is not None:
                want = int(rng.uniform(*utterance_seconds) * fs)
                if len(speech) > want:
                    speech = _fit_length(speech, want, rng)
            noise_paths = [noise_split[split][k] for k in
                           rng.integers(0, len(noise_split[split]), len(scene.noise_positions))]
            noises = [_fit_length(read_wav(p, fs)[0], len(speech), rng) for p in noise_paths]
            ex = propagate_and_mix(scene, speech, noises, max_order, fs)

            uid = f"{split}_{i:05d}"
            x_rel, d_rel = f"{split}/{uid}_X.wav", f"{split}/{uid}_D.wav"
            write_wav(out_dir / x_rel, ex.X, fs)
            write_wav(out_dir / d_rel, ex.D, fs)
            stored_u = ex.X.astype(np.float32).astype(np.float64) - ex.D.astype(np.float32).astype(np.float64)
            entry = {
                "id": uid,
                "split": split,
                "seed": seed,
                "speech": speech_path.relative_to(speech_dir).as_posix(),
                "noises": [p.relative_to(noise_dir).as_posix() for p in noise_paths],
                "X": x_rel,
                "D": d_rel,
                "num_channels": int(ex.X.shape[0]),
                "num_samples": int(ex.X.shape[1]),
                "u_energy": float(np.sum(stored_u ** 2)),
                **ex.manifest,
            }
            entries.append(entry)
    write_manifest(out_dir / "manifest.jsonl", entries)
    return entries


def write_manifest(path, entries):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for e in entries:
            fh.write(json.dumps(e, sort_keys=True) + "\n")
    return path


def read_manifest(path):
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def load_example(entry, root):
    """Load ``(X, D)`` for one manifest entry; paths are relative to ``root``."""
    root = Path(root)
    return read_wav(root / entry["X"]), read_wav(root / entry["D"])
