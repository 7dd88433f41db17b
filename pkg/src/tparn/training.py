"""Training loop: random crops, PCM or MSE loss, Adam, LR halving on validation plateaus."""

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from .framing import SAMPLE_RATE
from .losses import LOSS_FFT_SIZE, LOSS_HOP, mse_loss, pcm_loss
from .model import TPARN, TparnConfig, save_checkpoint
from .spatializer import load_example, read_manifest

log = logging.getLogger(__name__)

LOSSES = ("PCM", "MSE")
DTYPES = {"float32": torch.float32, "float64": torch.float64}


@dataclass
class RunConfig:
    model: TparnConfig = field(default_factory=TparnConfig)
    loss: str = "PCM"
    lr: float = 4e-4
    batch_size: int = 8
    epochs: int = 100
    crop_seconds: float = 4.0
    lr_halving_patience: int = 5
    seed: int = 0
    grad_clip: float = 5.0
    loss_fft_size: int = LOSS_FFT_SIZE
    loss_hop: int = LOSS_HOP
    dtype: str = "float32"
    reference_channel: int = None
    manifest: str = None
    data_root: str = None
    out_dir: str = "runs/tparn"
    train_split: str = "train"
    val_split: str = "validation"

    def __post_init__(self):
        if isinstance(self.model, dict):
            self.model = TparnConfig.from_dict(self.model)
        self.validate()

    def validate(self):
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}, got {self.loss!r}")
        if self.dtype not in DTYPES:
            raise ValueError(f"dtype must be one of {tuple(DTYPES)}")
        for name in ("lr", "crop_seconds", "grad_clip"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("batch_size", "epochs", "lr_halving_patience", "loss_fft_size", "loss_hop"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer")

    @property
    def ref_channel(self):
        return self.model.reference_channel if self.reference_channel is None else self.reference_channel

    def to_dict(self):
        d = asdict(self)
        d["model"] = self.model.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


class HalvingSchedule:
    """Halve the learning rate after ``patience`` epochs without a new best validation loss."""

    def __init__(self, lr, patience):
        self.lr = lr
        self.patience = patience
        self.best = math.inf
        self.bad_epochs = 0

    def step(self, val_loss):
        """Record one epoch; returns True when this epoch improved on the best."""
        if val_loss < self.best:
            self.best = val_loss
            self.bad_epochs = 0
            return True
        self.bad_epochs += 1
        if self.bad_epochs >= self.patience:
            self.lr /= 2
            self.bad_epochs = 0
        return False


def select_io(model_cfg: TparnConfig, x, d, ref):
    """Network input, reference mixture and target for the model's output mode."""
    if model_cfg.output_mode == "MIMO":
        return x, x, d
    sl = slice(ref, ref + 1)
    if model_cfg.output_mode == "MISO":
        return x, x[..., sl, :], d[..., sl, :]
    return x[..., sl, :], x[..., sl, :], d[..., sl, :]


def random_crop(x, d, n, rng):
    """Crop ``[P, N]`` pairs to ``n`` samples at a random offset; zero-pad shorter ones."""
    total = x.shape[-1]
    if total >= n:
        start = int(rng.integers(0, total - n + 1))
        return x[:, start:start + n], d[:, start:start + n]
    pad = ((0, 0), (0, n - total))
    return np.pad(x, pad), np.pad(d, pad)


class TrainingDiverged(FloatingPointError):
    pass


class Trainer:
    """Owns the model, optimizer and schedule for one run.

    ``train_step`` takes batched ``[B, P, N]`` mixtures and direct-path
    targets; crops and batching live in :meth:`fit`.
    """

    def __init__(self, run: RunConfig, model: TPARN = None):
        self.run = run
        torch.manual_seed(run.seed)
        self.dtype = DTYPES[run.dtype]
        self.model = (model or TPARN(run.model)).to(self.dtype)
        self.optimizer = torch.optim.Adam(self.model.parameters(), lr=run.lr)
        self.schedule = HalvingSchedule(run.lr, run.lr_halving_patience)
        self.step_count = 0

    def _tensor(self, a):
        return torch.as_tensor(np.asarray(a), dtype=self.dtype)

    def compute_loss(self, x, d):
        inp, mix, target = select_io(self.model.cfg, x, d, self.run.ref_channel)
        est = self.model(inp)
        if self.run.loss == "PCM":
            return pcm_loss(mix, target, est, self.run.loss_fft_size, self.run.loss_hop).total
        return mse_loss(target, est)

    def train_step(self, x, d, batch_info=None):
        self.model.train()
        for group in self.optimizer.param_groups:
            group["lr"] = self.schedule.lr
        loss = self.compute_loss(self._tensor(x), self._tensor(d))
        if not torch.isfinite(loss):
            self._dump_divergence(batch_info)
            raise TrainingDiverged(f"non-finite loss at step {self.step_count}: {batch_info}")
        self.optimizer.zero_grad()
        loss.backward()
        torch.nn.utils.clip_grad_norm_(self.model.parameters(), self.run.grad_clip)
        self.optimizer.step()
        self.step_count += 1
        return loss.item()

    def _dump_divergence(self, batch_info):
        out = Path(self.run.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "divergence.json", "w") as fh:
            json.dump({"step": self.step_count, "batch": batch_info, "run": self.run.to_dict()}, fh, indent=2)

    @torch.no_grad()
    def validation_loss(self, examples):
        """Mean loss over full-length ``(X, D)`` pairs, one at a time, in eval mode."""
        self.model.eval()
        losses = [self.compute_loss(self._tensor(x)[None], self._tensor(d)[None]).item() for x, d in examples]
        self.model.train()
        return float(np.mean(losses))

    def fit(self, train_examples, val_examples=None, out_dir=None, epochs=None, ids=None, on_epoch=None):
        """Train for ``epochs`` epochs; returns the per-epoch log records.

        Each epoch visits every training pair once in a seeded random order,
        cropping each to ``crop_seconds``. With ``out_dir`` set, writes
        ``train_log.jsonl``, ``last.npz`` and ``best.npz`` (best validation
        loss, or best training loss without validation data). ``on_epoch`` is
        called with each log record.
        """
        run = self.run
        epochs = epochs or run.epochs
        out = Path(out_dir) if out_dir else None
        if out:
            out.mkdir(parents=True, exist_ok=True)
            (out / "train_log.jsonl").write_text("")
        ids = ids or [str(i) for i in range(len(train_examples))]
        crop = int(round(run.crop_seconds * SAMPLE_RATE))
        history = []
        for epoch in range(1, epochs + 1):
            order = np.random.default_rng([run.seed, epoch]).permutation(len(train_examples))
            losses = []
            for b, start in enumerate(range(0, len(order), run.batch_size)):
                idx = order[start:start + run.batch_size]
                batch_seed = [run.seed, epoch, b]
                rng = np.random.default_rng(batch_seed)
                pairs = [random_crop(*train_examples[i], crop, rng) for i in idx]
                x = np.stack([p[0] for p in pairs])
                d = np.stack([p[1] for p in pairs])
                info = {"epoch": epoch, "batch": b, "batch_seed": batch_seed, "ids": [ids[i] for i in idx]}
                losses.append(self.train_step(x, d, info))
            train_loss = float(np.mean(losses))
            val_loss = self.validation_loss(val_examples) if val_examples else train_loss
            lr = self.schedule.lr
            improved = self.schedule.step(val_loss)
            record = {"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss, "lr": lr}
            history.append(record)
            log.info("epoch %d train %.5f val %.5f lr %.2e", epoch, train_loss, val_loss, lr)
            if out:
                with open(out / "train_log.jsonl", "a") as fh:
                    fh.write(json.dumps(record) + "\n")
                extra = {"epoch": epoch, "val_loss": val_loss, "run": run.to_dict()}
                save_checkpoint(out / "last.npz", self.model, extra)
                if improved:
                    save_checkpoint(out / "best.npz", self.model, extra)
            if on_epoch:
                on_epoch(record)
        return history


def load_split(entries, root, split):
    """``(ids, [(X, D), ...])`` for manifest entries of one split."""
    chosen = [e for e in entries if e["split"] == split]
    return [e["id"] for e in chosen], [load_example(e, root) for e in chosen]


def train(run: RunConfig, manifest=None):
    """Train from a manifest file (or pre-loaded entries) per ``run``.

    Returns ``{"history", "best", "last"}`` with checkpoint paths.
    """
    manifest = run.manifest if manifest is None else manifest
    if manifest is None:
        raise ValueError("no manifest given")
    if isinstance(manifest, (str, Path)):
        root = Path(run.data_root) if run.data_root else Path(manifest).parent
        entries = read_manifest(manifest)
    else:
        root, entries = Path(run.data_root or "."), list(manifest)
    ids, train_set = load_split(entries, root, run.train_split)
    if not train_set:
        raise ValueError(f"manifest has no {run.train_split!r} entries")
    _, val_set = load_split(entries, root, run.val_split)
    out = Path(run.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "run_config.json").write_text(json.dumps(run.to_dict(), indent=2, sort_keys=True))
    trainer = Trainer(run)
    history = trainer.fit(train_set, val_set, out, ids=ids)
    return {"history": history, "best": out / "best.npz", "last": out / "last.npz", "trainer": trainer}
