import json

import numpy as np
import pytest
import torch

from conftest import SMALL_MODEL
from tparn.model import TparnConfig, load_checkpoint
from tparn.training import (
    HalvingSchedule,
    RunConfig,
    Trainer,
    TrainingDiverged,
    random_crop,
    select_io,
    train,
)


def small_run(tmp_path, **kw):
    model = TparnConfig(**{**SMALL_MODEL, **kw.pop("model", {})})
    opts = dict(model=model, lr=1e-3, batch_size=2, epochs=2, crop_seconds=0.1, seed=3,
                loss_fft_size=64, loss_hop=32, out_dir=str(tmp_path / "run"))
    return RunConfig(**{**opts, **kw})


def test_run_config_defaults():
    run = RunConfig()
    assert (run.loss, run.lr, run.batch_size, run.epochs) == ("PCM", 4e-4, 8, 100)
    assert (run.crop_seconds, run.lr_halving_patience, run.grad_clip) == (4.0, 5, 5.0)


@pytest.mark.parametrize("bad", [dict(loss="L1"), dict(lr=0), dict(batch_size=0), dict(epochs=1.5),
                                 dict(crop_seconds=-1), dict(dtype="float16")])
def test_run_config_rejects(bad):
    with pytest.raises(ValueError):
        RunConfig(**bad)


def test_run_config_dict_round_trip():
    run = RunConfig(model=TparnConfig(dim=32, num_blocks=4, output_mode="MISO"), loss="MSE", seed=9)
    again = RunConfig.from_dict(json.loads(json.dumps(run.to_dict())))
    assert again == run


def test_lr_halves_exactly_after_patience():
    sched = HalvingSchedule(1.0, patience=3)
    lrs = []
    for loss in [5, 4, 4.5, 4.2, 4.1, 4.3, 3.0, 3.5, 3.5, 3.5, 3.5, 3.5, 3.5]:
        sched.step(loss)
        lrs.append(sched.lr)
    # halvings after the 3rd non-improving epoch of each plateau, counter then resets
    assert lrs == [1, 1, 1, 1, 0.5, 0.5, 0.5, 0.5, 0.5, 0.25, 0.25, 0.25, 0.125]


def test_schedule_reports_improvement():
    sched = HalvingSchedule(1.0, 2)
    assert sched.step(3.0) and not sched.step(3.0) and sched.step(2.9)


def test_select_io_modes():
    x, d = torch.randn(2, 4, 50), torch.randn(2, 4, 50)
    cfg = TparnConfig(**SMALL_MODEL)
    inp, mix, tgt = select_io(cfg, x, d, 2)
    assert inp is x and mix is x and tgt is d
    inp, mix, tgt = select_io(TparnConfig(**{**SMALL_MODEL, "output_mode": "MISO"}), x, d, 2)
    assert inp.shape == (2, 4, 50) and torch.equal(tgt[:, 0], d[:, 2]) and torch.equal(mix[:, 0], x[:, 2])
    inp, mix, tgt = select_io(TparnConfig(**{**SMALL_MODEL, "channels": 1, "output_mode": "SISO"}), x, d, 1)
    assert inp.shape == (2, 1, 50) and torch.equal(inp[:, 0], x[:, 1]) and torch.equal(tgt[:, 0], d[:, 1])


def test_random_crop_aligned_and_padded():
    rng = np.random.default_rng(0)
    x = np.arange(40.0).reshape(2, 20)
    cx, cd = random_crop(x, x + 100, 7, rng)
    assert cx.shape == (2, 7) and np.array_equal(cd, cx + 100)
    assert cx[0, 0] + 20 == cx[1, 0]
    px, _ = random_crop(x, x, 25, rng)
    assert px.shape == (2, 25) and np.all(px[:, 20:] == 0) and np.array_equal(px[:, :20], x)


def toy_pairs(n, samples=1600, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        d = rng.standard_normal((4, samples)) * 0.1
        out.append((d + 0.05 * rng.standard_normal((4, samples)), d))
    return out


def test_first_epoch_deterministic(tmp_path):
    histories = []
    for _ in range(2):
        trainer = Trainer(small_run(tmp_path, dtype="float64", epochs=1))
        histories.append(trainer.fit(toy_pairs(4), toy_pairs(1, seed=1)))
    assert histories[0] == histories[1]


def test_train_step_reduces_loss(tmp_path):
    trainer = Trainer(small_run(tmp_path, lr=3e-3))
    x, d = toy_pairs(1)[0]
    losses = [trainer.train_step(x[None], d[None]) for _ in range(30)]
    assert losses[-1] < losses[0]


def test_lr_applied_to_optimizer(tmp_path):
    trainer = Trainer(small_run(tmp_path))
    trainer.schedule.lr = 1.25e-4
    x, d = toy_pairs(1)[0]
    trainer.train_step(x[None], d[None])
    assert trainer.optimizer.param_groups[0]["lr"] == 1.25e-4


def test_nan_aborts_with_dump(tmp_path):
    run = small_run(tmp_path)
    trainer = Trainer(run)
    x, d = toy_pairs(1)[0]
    x[0, 5] = np.nan
    with pytest.raises(TrainingDiverged):
        trainer.train_step(x[None], d[None], {"batch_seed": [3, 1, 0]})
    dump = json.loads((tmp_path / "run" / "divergence.json").read_text())
    assert dump["batch"]["batch_seed"] == [3, 1, 0]


def test_train_from_manifest_writes_outputs(small_dataset, tmp_path):
    manifest, _ = small_dataset
    run = small_run(tmp_path, manifest=str(manifest), epochs=3)
    result = train(run)
    lines = [json.loads(s) for s in (tmp_path / "run" / "train_log.jsonl").read_text().splitlines()]
    assert [r["epoch"] for r in lines] == [1, 2, 3]
    assert set(lines[0]) == {"epoch", "train_loss", "val_loss", "lr"}
    best_epoch = min(lines, key=lambda r: r["val_loss"])["epoch"]
    model, extra = load_checkpoint(result["best"])
    assert extra["epoch"] == best_epoch
    assert load_checkpoint(result["last"])[1]["epoch"] == 3
    assert model.cfg == run.model


def test_train_float64_reproducible(small_dataset, tmp_path):
    manifest, _ = small_dataset
    logs, states = [], []
    for name in ("a", "b"):
        run = small_run(tmp_path, manifest=str(manifest), dtype="float64", out_dir=str(tmp_path / name))
        train(run)
        logs.append((tmp_path / name / "train_log.jsonl").read_text())
        states.append(np.load(tmp_path / name / "last.npz"))
    assert logs[0] == logs[1]
    keys = [k for k in states[0].files if k != "__meta__"]
    assert keys
    for key in keys:
        assert np.array_equal(states[0][key], states[1][key]), key


def test_train_requires_entries(tmp_path):
    with pytest.raises(ValueError, match="no 'train' entries"):
        train(small_run(tmp_path), manifest=[])
