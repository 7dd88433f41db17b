"""Enhancing WAV files with a checkpoint and scoring them against manifest targets."""

import json
import logging
from pathlib import Path

import numpy as np
import torch

from .audio import read_wav, write_wav
from .losses import LOSS_FFT_SIZE, LOSS_HOP, pcm_loss, si_sdr
from .model import TPARN, load_checkpoint
from .spatializer import load_example

log = logging.getLogger(__name__)

UNAVAILABLE_NOTICE = "STOI and PESQ are not implemented; their columns are null."


def output_name(path):
    stem = Path(path).stem
    return (stem[:-2] if stem.endswith("_X") else stem) + ".wav"


@torch.no_grad()
def enhance_array(model: TPARN, x, mode=None, reference_channel=0):
    """Enhance one ``[P, N]`` mixture; a single-channel model is fed ``reference_channel``."""
    model.eval()
    dtype = next(model.parameters()).dtype
    x = np.asarray(x, dtype=np.float64)
    if model.cfg.channels == 1 and x.shape[0] > 1:
        x = x[reference_channel:reference_channel + 1]
    if x.shape[0] != model.cfg.channels:
        raise ValueError(f"model expects {model.cfg.channels} channels, file has {x.shape[0]}")
    out = model(torch.as_tensor(x, dtype=dtype), output_mode=mode)
    return out.double().numpy()


def enhance(checkpoint, in_wavs, out_dir, mode="MIMO", reference_channel=0):
    """Write an enhanced copy of each input WAV into ``out_dir``.

    MIMO keeps all channels, MISO writes one. ``name_X.wav`` inputs become
    ``name.wav``. Returns the output paths.
    """
    if mode not in ("MIMO", "MISO"):
        raise ValueError(f"mode must be MIMO or MISO, got {mode!r}")
    model = checkpoint if isinstance(checkpoint, TPARN) else load_checkpoint(checkpoint)[0]
    if model.cfg.channels == 1:
        mode = None
    out_dir = Path(out_dir)
    paths = []
    for wav in in_wavs:
        y = enhance_array(model, read_wav(wav), mode, reference_channel)
        paths.append(write_wav(out_dir / output_name(wav), y))
    return paths


def evaluate(entries, root, enhanced_dir, reference_channel=0, report_path=None,
             fft_size=LOSS_FFT_SIZE, hop=LOSS_HOP):
    """SI-SDR of unprocessed and enhanced reference channels for every manifest entry.

    Enhanced files are looked up as ``enhanced_dir/{id}.wav``; single-channel
    files are taken as the reference-channel estimate. Missing files are
    listed in the report rather than raising. With ``report_path`` set,
    writes one JSON line per utterance.
    """
    root, enhanced_dir = Path(root), Path(enhanced_dir)
    rows, missing = [], []
    for e in entries:
        path = enhanced_dir / f"{e['id']}.wav"
        if not path.exists():
            missing.append(e["id"])
            continue
        x, d = load_example(e, root)
        est = read_wav(path)
        est_ref = est[0] if est.shape[0] == 1 else est[reference_channel]
        x_ref, d_ref = x[reference_channel], d[reference_channel]
        rows.append({
            "id": e["id"],
            "si_sdr_in": si_sdr(x_ref, d_ref),
            "si_sdr_out": si_sdr(est_ref, d_ref),
            "pcm_loss": float(pcm_loss(x_ref[None], d_ref[None], est_ref[None], fft_size, hop).total),
            "stoi": None,
            "pesq": None,
        })
    if missing:
        log.warning("missing enhanced files for %d utterances: %s", len(missing), missing)
    report = summarize(rows)
    report.update(missing=missing, notice=UNAVAILABLE_NOTICE)
    if report_path:
        report_path = Path(report_path)
        report_path.parent.mkdir(parents=True, exist_ok=True)
        with open(report_path, "w") as fh:
            for row in rows:
                fh.write(json.dumps(row) + "\n")
    return report


def summarize(rows):
    if not rows:
        return {"utterances": [], "mean_si_sdr_in": None, "mean_si_sdr_out": None, "mean_improvement": None}
    si_in = np.array([r["si_sdr_in"] for r in rows])
    si_out = np.array([r["si_sdr_out"] for r in rows])
    return {
        "utterances": rows,
        "mean_si_sdr_in": float(si_in.mean()),
        "mean_si_sdr_out": float(si_out.mean()),
        "mean_improvement": float((si_out - si_in).mean()),
        "mean_pcm_loss": float(np.mean([r["pcm_loss"] for r in rows])),
    }
