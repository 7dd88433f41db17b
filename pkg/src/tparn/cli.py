"""Command line entry point: ``tparn {spatialize,train,enhance,evaluate}``.

Every subcommand accepts ``--config file.json``; flags given on the command
line win over config keys. Relative data paths are resolved against
``$TPARN_DATA_ROOT`` when it is set.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .model import SPATIAL_LOCATIONS, SPATIAL_VARIANTS, OUTPUT_MODES
from .spatializer import DEFAULT_SPLITS, SceneConstraints, generate_dataset, read_manifest

DATA_ROOT_ENV = "TPARN_DATA_ROOT"
EXIT_INVALID = 2

# train flags that belong to the nested model config
MODEL_FLAGS = ("channels", "dim", "num_blocks", "spatial_variant", "spatial_location",
               "spatial_blocks", "output_mode", "frame_size", "frame_shift", "chunk_size",
               "chunk_shift", "dropout")


class UsageError(ValueError):
    pass


def data_path(p):
    if p is None:
        return None
    p = Path(p)
    root = os.environ.get(DATA_ROOT_ENV)
    if root and not p.is_absolute():
        return Path(root) / p
    return p


def parse_splits(text):
    splits = {}
    for item in text.split(","):
        name, _, frac = item.partition("=")
        try:
            splits[name.strip()] = float(frac)
        except ValueError:
            raise UsageError(f"bad split {item!r}; expected name=fraction") from None
    return splits


def merged(args, config, keys):
    """Config values overridden by any flag the user actually set."""
    out = dict(config)
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            out[key] = value
    return out


def cmd_spatialize(args, config):
    opts = merged(args, config, ("speech_dir", "noise_dir", "out_dir", "seed", "max_order", "splits",
                                 "utterance_seconds", "num_mics"))
    for key in ("speech_dir", "noise_dir", "out_dir"):
        if not opts.get(key):
            raise UsageError(f"--{key.replace('_', '-')} is required")
    splits = opts.get("splits", DEFAULT_SPLITS)
    if isinstance(splits, str):
        splits = parse_splits(splits)
    constraints = SceneConstraints(num_mics=opts.get("num_mics", 4))
    entries = generate_dataset(splits, data_path(opts["speech_dir"]), data_path(opts["noise_dir"]),
                               data_path(opts["out_dir"]), rng_seed=opts.get("seed", 0),
                               constraints=constraints, max_order=opts.get("max_order", 6),
                               utterance_seconds=tuple(opts.get("utterance_seconds", (3.0, 10.0))))
    print(f"wrote {len(entries)} mixtures to {data_path(opts['out_dir'])}")


def cmd_train(args, config):
    from .training import RunConfig, train

    run_keys = ("loss", "lr", "batch_size", "epochs", "crop_seconds", "lr_halving_patience", "seed",
                "grad_clip", "dtype", "reference_channel", "manifest", "data_root", "out_dir")
    opts = merged(args, {k: v for k, v in config.items() if k != "model"}, run_keys)
    opts["model"] = merged(args, config.get("model", {}), MODEL_FLAGS)
    if not opts.get("manifest"):
        raise UsageError("--manifest is required")
    opts["manifest"] = str(data_path(opts["manifest"]))
    if opts.get("data_root"):
        opts["data_root"] = str(data_path(opts["data_root"]))
    run = RunConfig.from_dict(opts)
    result = train(run)
    last = result["history"][-1]
    print(f"trained {len(result['history'])} epochs; final val_loss {last['val_loss']:.5f}; best at {result['best']}")


def manifest_inputs(manifest, split, root):
    entries = read_manifest(manifest)
    if split:
        entries = [e for e in entries if e["split"] == split]
    return entries, [root / e["X"] for e in entries]


def cmd_enhance(args, config):
    from .evaluation import enhance

    opts = merged(args, config, ("checkpoint", "out_dir", "mode", "manifest", "split", "reference_channel"))
    wavs = [data_path(w) for w in (args.wavs or config.get("wavs", []))]
    if opts.get("manifest"):
        manifest = data_path(opts["manifest"])
        wavs += manifest_inputs(manifest, opts.get("split"), manifest.parent)[1]
    if not opts.get("checkpoint") or not opts.get("out_dir"):
        raise UsageError("--checkpoint and --out-dir are required")
    if not wavs:
        raise UsageError("no input WAVs (give paths or --manifest)")
    paths = enhance(opts["checkpoint"], wavs, opts["out_dir"], opts.get("mode", "MIMO"),
                    opts.get("reference_channel", 0))
    print(f"enhanced {len(paths)} files into {opts['out_dir']}")


def cmd_evaluate(args, config):
    from .evaluation import evaluate

    opts = merged(args, config, ("manifest", "enhanced_dir", "reference_channel", "split", "report", "data_root"))
    if not opts.get("manifest") or not opts.get("enhanced_dir"):
        raise UsageError("--manifest and --enhanced-dir are required")
    manifest = data_path(opts["manifest"])
    root = data_path(opts["data_root"]) if opts.get("data_root") else manifest.parent
    entries, _ = manifest_inputs(manifest, opts.get("split"), root)
    report = evaluate(entries, root, opts["enhanced_dir"], opts.get("reference_channel", 0), opts.get("report"))
    summary = {k: v for k, v in report.items() if k != "utterances"}
    print(json.dumps(summary, indent=2))


def build_parser():
    parser = argparse.ArgumentParser(prog="tparn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON file of defaults for this command")
        p.set_defaults(func=func)
        return p

    p = add("spatialize", cmd_spatialize, "simulate multichannel mixtures from mono speech and noise")
    p.add_argument("--speech-dir")
    p.add_argument("--noise-dir")
    p.add_argument("--out-dir")
    p.add_argument("--seed", type=int)
    p.add_argument("--max-order", type=int)
    p.add_argument("--num-mics", type=int)
    p.add_argument("--splits", help="e.g. train=0.9,validation=0.05,test=0.05")
    p.add_argument("--utterance-seconds", type=float, nargs=2, metavar=("MIN", "MAX"))

    p = add("train", cmd_train, "train a model on a spatialized manifest")
    p.add_argument("--manifest")
    p.add_argument("--data-root")
    p.add_argument("--out-dir")
    p.add_argument("--loss", choices=("PCM", "MSE"))
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--crop-seconds", type=float)
    p.add_argument("--lr-halving-patience", type=int)
    p.add_argument("--grad-clip", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--dtype", choices=("float32", "float64"))
    p.add_argument("--reference-channel", type=int)
    p.add_argument("--channels", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--num-blocks", type=int)
    p.add_argument("--spatial-variant", choices=SPATIAL_VARIANTS)
    p.add_argument("--spatial-location", choices=SPATIAL_LOCATIONS)
    p.add_argument("--spatial-blocks", type=int, nargs="+")
    p.add_argument("--output-mode", choices=OUTPUT_MODES)
    p.add_argument("--frame-size", type=int)
    p.add_argument("--frame-shift", type=int)
    p.add_argument("--chunk-size", type=int)
    p.add_argument("--chunk-shift", type=int)
    p.add_argument("--dropout", type=float)

    p = add("enhance", cmd_enhance, "enhance WAV files with a trained checkpoint")
    p.add_argument("wavs", nargs="*")
    p.add_argument("--checkpoint")
    p.add_argument("--out-dir")
    p.add_argument("--mode", choices=("MIMO", "MISO"))
    p.add_argument("--manifest", help="enhance every mixture listed here")
    p.add_argument("--split")
    p.add_argument("--reference-channel", type=int)

    p = add("evaluate", cmd_evaluate, "score enhanced files against manifest targets")
    p.add_argument("--manifest")
    p.add_argument("--data-root")
    p.add_argument("--enhanced-dir")
    p.add_argument("--reference-channel", type=int)
    p.add_argument("--split")
    p.add_argument("--report", help="write per-utterance JSON lines here")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config = {}
        if args.config:
            with open(args.config) as fh:
                config = json.load(fh)
        args.func(args, config)
    except (ValueError, FileNotFoundError, KeyError, json.JSONDecodeError) as err:
        print(f"tparn {args.command}: error: {err}", file=sys.stderr)
        return EXIT_INVALID
    return 0


if __name__ == "__main__":
    sys.exit(main())
