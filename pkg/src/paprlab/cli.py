"""Command-line interface.

    paprlab [--config FILE] [--seed N] [--output-dir DIR] [--set key=value]... COMMAND

Commands: train, eval-ber, eval-ccdf, eval-psd, eval-table, eval-obo-acpr,
selftest.  CLI flags override config-file fields; --seed overrides every
random stream coherently.  The default output directory can also come from
the PAPRLAB_OUTPUT_DIR environment variable.
"""

from __future__ import annotations

import argparse
import os
import sys

import yaml

from . import harness
from .config import (
    config_from_dict,
    config_to_dict,
    default_config,
    load_config,
)
from .errors import ConfigError, TrainingDivergedError

OUTPUT_DIR_ENV = "PAPRLAB_OUTPUT_DIR"


def _apply_override(data: dict, assignment: str):
    key, sep, raw = assignment.partition("=")
    if not sep:
        raise ConfigError(f"--set expects key=value, got {assignment!r}")
    value = yaml.safe_load(raw)
    node = data
    parts = key.strip().split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"--set {key}: {part} is not a section")
    node[parts[-1]] = value


def _resolve_config(args) -> "ExperimentConfig":
    """Precedence: flags > --set > config file > $PAPRLAB_OUTPUT_DIR > defaults."""
    file_sets_output = False
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh) or {}
        file_sets_output = isinstance(raw, dict) and "output_dir" in raw
        data = config_to_dict(load_config(args.config))
    else:
        data = config_to_dict(default_config())
    for assignment in args.set or []:
        if assignment.partition("=")[0].strip() == "output_dir":
            file_sets_output = True
        _apply_override(data, assignment)
    if args.seed is not None:
        data["seed"] = args.seed
    if args.output_dir is not None:
        data["output_dir"] = args.output_dir
    elif not file_sets_output and os.environ.get(OUTPUT_DIR_ENV):
        data["output_dir"] = os.environ[OUTPUT_DIR_ENV]
    return config_from_dict(data)


def _parse_checkpoints(pairs) -> dict[str, str]:
    checkpoints = {}
    for pair in pairs or []:
        method, sep, path = pair.partition("=")
        if not sep:
            raise ConfigError(f"--checkpoint expects method=path, got {pair!r}")
        checkpoints[method] = path
    return checkpoints


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="paprlab",
        description="Low-PAPR OFDM waveform design lab: train the autoencoder "
                    "and evaluate it against clipping-and-filtering and "
                    "selective-mapping baselines.")
    parser.add_argument("--config", help="YAML experiment configuration")
    parser.add_argument("--seed", type=int, help="override the master seed")
    parser.add_argument("--output-dir", help=f"output directory (or ${OUTPUT_DIR_ENV})")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config field, e.g. --set train.epochs=10")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model and write its checkpoint")
    p_train.add_argument("--arch", choices=("cae", "fc_ae"), default="cae")
    p_train.add_argument("--schedule", choices=("gradual", "fixed"),
                         help="override the loss schedule")
    p_train.add_argument("--tag", help="checkpoint/log name (default: the arch)")

    for name, help_text in (
        ("eval-ber", "BER vs peak-SNR curves"),
        ("eval-ccdf", "CCDF of PAPR curves"),
        ("eval-psd", "averaged transmit PSD"),
        ("eval-table", "ACPR/OBO operating-point table"),
        ("eval-obo-acpr", "OBO vs ACPR trade-off sweep"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--checkpoint", action="append", metavar="METHOD=PATH",
                       help="checkpoint for a neural method (repeatable)")

    sub.add_parser("selftest", help="run the fast numerical property battery")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "selftest":
            failures = 0
            for name, ok, detail in harness.run_selftest():
                status = "PASS" if ok else "FAIL"
                suffix = f"  ({detail})" if detail else ""
                print(f"{status}  {name}{suffix}")
                failures += 0 if ok else 1
            print(f"{'OK' if failures == 0 else 'FAILED'}: "
                  f"{failures} failure(s)")
            return 0 if failures == 0 else 1

        config = _resolve_config(args)
        if args.command == "train":
            if args.schedule:
                data = config_to_dict(config)
                data["train"]["schedule"] = args.schedule
                config = config_from_dict(data)
            def progress(record):
                print(f"epoch {record.epoch:4d} stage {record.stage} "
                      f"loss {record.loss:.6f} papr {record.mean_papr_db:.2f} dB "
                      f"acpr {record.acpr_db:.2f} dB", flush=True)
            ckpt, log = harness.run_train(config, arch=args.arch, tag=args.tag,
                                          log_progress=progress)
            print(f"checkpoint: {ckpt}")
            print(f"log: {log}")
            return 0

        checkpoints = _parse_checkpoints(args.checkpoint)
        if args.command == "eval-ber":
            path = harness.eval_ber(config, checkpoints)
        elif args.command == "eval-ccdf":
            path = harness.eval_ccdf(config, checkpoints)
        elif args.command == "eval-psd":
            path = harness.eval_psd(config, checkpoints)
        elif args.command == "eval-table":
            table, path = harness.eval_table(config, checkpoints)
            for method in sorted(table):
                print(f"{method:12s} ACPR {table[method]['acpr_db']:8.2f} dB   "
                      f"OBO {table[method]['obo_db']:6.2f} dB")
        else:
            path = harness.eval_obo_vs_acpr(config, checkpoints)
        print(f"wrote {path}")
        return 0
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except TrainingDivergedError as err:
        print(f"training diverged at epoch {err.epoch}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
