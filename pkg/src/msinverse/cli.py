"""Command-line entry point.

    msinverse gen-data --n 2000 --seed 42 --out data.msds
    msinverse train --data data.msds --variant restricted --epochs 3000 --out model/
    msinverse design --model model/ --target "15,-15,0.5" --out-mask cell.pbm \\
        --out-spectrum cell.csv --report cell.json
    msinverse eval --model model/ --data data.msds --report metrics.json
    msinverse simulate --codes "2 2 2 2 2 2 2 2 2 2 2 2 2 2 2 2" --out s.csv

Exit status: 0 on success, 1 on usage errors, 2 on data or model errors.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from dataclasses import asdict
from pathlib import Path

from . import dataset as ds
from . import designer, nn, plotting
from .codec import parse_codes, write_mask
from .features import parse_target
from .surrogate import simulate

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return value


def _positive_float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return value


def _rate(text):
    value = float(text)
    if not 0.0 <= value < 1.0:
        raise argparse.ArgumentTypeError(f"expected a rate in [0, 1), got {text!r}")
    return value


def _fraction(text):
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"expected a fraction in (0, 1), got {text!r}")
    return value


def _target(text):
    try:
        return parse_target(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _codes(text):
    try:
        return parse_codes(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="msinverse", description="Inverse design of ring-tile metasurface cells.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("gen-data", help="generate a labeled dataset through the surrogate")
    p.add_argument("--n", type=_positive_int, default=2000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--canonical", action=argparse.BooleanOptionalAction, default=True,
                   help="sort each label's tile codes")
    p.add_argument("--store-spectra", action="store_true")

    p = sub.add_parser("train", help="train an inverse network and write a model bundle")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--variant", choices=[v.value for v in designer.Variant], required=True)
    p.add_argument("--epochs", type=_positive_int, default=3000)
    p.add_argument("--batch", type=_positive_int, default=30)
    p.add_argument("--lr", type=_positive_float, default=0.001)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--dropout", type=_rate, default=0.1)
    p.add_argument("--train-fraction", type=_fraction, default=0.7)
    p.add_argument("--out", type=Path, required=True, help="model bundle directory")

    p = sub.add_parser("design", help="produce a unit cell for a design target")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--target", type=_target, required=True,
                   help='notches "freq,depth,bw;..." in GHz, dB, GHz')
    p.add_argument("--out-mask", type=Path, required=True, help=".pbm (P1) or .csv")
    p.add_argument("--out-spectrum", type=Path, required=True,
                   help="spectrum CSV; a figure is written next to it")
    p.add_argument("--report", type=Path, required=True)

    p = sub.add_parser("eval", help="score a model bundle on a dataset")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--report", type=Path, required=True)
    p.add_argument("--split", choices=["all", "test"], default="all",
                   help="'test' re-derives the held-out part recorded in the bundle")

    p = sub.add_parser("simulate", help="surrogate spectrum of one unit cell")
    p.add_argument("--codes", type=_codes, required=True, help="16 tile codes, 0-7")
    p.add_argument("--out", type=Path, required=True,
                   help="spectrum CSV; a figure is written next to it")
    return parser


def _figure_path(csv_path: Path) -> Path:
    return csv_path.with_suffix(".svg")


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _file_digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _history_csv(history) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "loss", "accuracy", "val_loss", "val_accuracy"])
    for h in history:
        row = [h.epoch, h.loss, h.accuracy, h.val_loss, h.val_accuracy]
        w.writerow([f"{v:.17g}" if isinstance(v, float) else ("" if v is None else v) for v in row])
    return buf.getvalue()


def cmd_gen_data(args) -> int:
    d = ds.generate(args.n, args.seed, canonical=args.canonical, store_spectra=args.store_spectra)
    ds.save(d, args.out)
    print(f"wrote {len(d)} samples to {args.out} "
          f"(seed {args.seed}, canonical {'on' if args.canonical else 'off'}, "
          f"config {d.surrogate_config_digest[:12]})")
    return EXIT_OK


def cmd_train(args) -> int:
    d = ds.load(args.data)
    train_set, test_set = ds.split(d, args.train_fraction, args.seed)
    config = nn.TrainConfig(args.batch, args.lr, args.epochs, args.seed, args.dropout)
    if config.batch_size > len(train_set):
        raise ValueError(f"batch size {config.batch_size} exceeds {len(train_set)} training samples")
    print(f"training {args.variant} on {len(train_set)} samples, testing on {len(test_set)}")

    def progress(stats):
        if stats.epoch == 1 or stats.epoch % 100 == 0 or stats.epoch == args.epochs:
            print(f"  epoch {stats.epoch:5d}  loss {stats.loss:.5f}  acc {stats.accuracy:.4f}  "
                  f"test loss {stats.val_loss:.5f}  test acc {stats.val_accuracy:.4f}", flush=True)

    model, history = designer.train_inverse(args.variant, train_set, test_set, config, progress)
    metrics = designer.evaluate(model, args.variant, test_set)
    manifest = {
        "dataset_digest": _file_digest(args.data),
        "surrogate_config_digest": d.surrogate_config_digest,
        "train_config": asdict(config),
        "split": {"train_fraction": args.train_fraction, "seed": args.seed,
                  "n_train": len(train_set), "n_test": len(test_set)},
        "final_epoch": asdict(history[-1]),
        "test_metrics": metrics.to_dict(),
    }
    designer.save_bundle(args.out, model, args.variant, manifest)
    (args.out / "history.csv").write_text(_history_csv(history), encoding="utf-8")
    plotting.plot_history(history, args.out / "history.svg", title=args.variant)
    print(f"test bit accuracy {metrics.bit_accuracy:.4f}, tile accuracy {metrics.tile_accuracy:.4f}")
    print(f"wrote model bundle to {args.out}")
    return EXIT_OK


def cmd_design(args) -> int:
    model, variant, _ = designer.load_bundle(args.model)
    report = designer.design(model, variant, args.target)
    write_mask(report.mask, args.out_mask)
    report.spectrum.write_csv(args.out_spectrum)
    plotting.plot_spectrum(report.spectrum, _figure_path(args.out_spectrum),
                           target=report.target, achieved=report.achieved)
    body = report.to_dict()
    body["variant"] = variant.value
    _dump_json(body, args.report)
    print(report.summary())
    return EXIT_OK


def cmd_eval(args) -> int:
    model, variant, manifest = designer.load_bundle(args.model)
    d = ds.load(args.data)
    if args.split == "test":
        split = manifest.get("split")
        if not split:
            raise ValueError("model bundle records no train/test split")
        _, d = ds.split(d, split["train_fraction"], split["seed"])
    metrics = designer.evaluate(model, variant, d)
    _dump_json({"variant": variant.value, "split": args.split, **metrics.to_dict()}, args.report)
    for key, value in metrics.to_dict().items():
        print(f"{key:24s} {value}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    spectrum = simulate(args.codes)
    spectrum.write_csv(args.out)
    plotting.plot_spectrum(spectrum, _figure_path(args.out))
    i = int(spectrum.values.argmin())
    print(f"minimum {spectrum.values[i]:.4f} dB at {spectrum.frequencies[i]:.2f} GHz")
    return EXIT_OK


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "design": cmd_design,
    "eval": cmd_eval,
    "simulate": cmd_simulate,
}


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (OSError, ValueError, KeyError, nn.TrainingDivergedError) as exc:
        print(f"msinverse {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
