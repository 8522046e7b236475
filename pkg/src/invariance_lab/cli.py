"""``lab`` command-line harness.

Exit codes: 0 success, 1 experiment failure, 2 invalid configuration.
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from . import __version__
from .config import DATASET_PRESETS, EXPERIMENTS, SIGNAL_PRESETS, ConfigError, load_config_file, parse_config
from .experiments import ExperimentError, run_experiment
from .meter import StabilityReport
from .serialization import dumps_json


def emit_curve(report: StabilityReport, path: str | Path) -> Path:
    """Write ``k_metric,group_norm,error,ratio`` rows sorted by
    ``(k_metric, group_norm)``."""
    if not report.samples:
        raise ValueError("cannot emit an empty stability report")
    path = Path(path)
    path.write_text(report.to_csv())
    return path


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(2)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config")
    common.add_argument("--seed", type=int, help="master seed (u64)")
    common.add_argument("--out", default=None, help="output directory (default: ./lab-out)")
    common.add_argument("--format", choices=("csv", "json"), default=None, help="results file format")
    common.add_argument("--n", type=int, help="signal / axis size")
    common.add_argument("--signal", choices=SIGNAL_PRESETS, help="signal preset")

    p = _Parser(prog="lab", description="Group-invariance numerical laboratory", parents=[common])
    p.add_argument("--version", action="version", version=f"lab {__version__}")
    sub = p.add_subparsers(dest="experiment", required=True, parser_class=_Parser)

    s = sub.add_parser("stone", parents=[common], help="Stone-theorem invariant and diagonalization")
    s.add_argument("--group", choices=("translation", "frequency_transposition"))
    s.add_argument("--direction", type=float)
    s.add_argument("--signals", type=int)

    s = sub.add_parser("stability", parents=[common], help="deformation stability curve")
    s.add_argument("--amplitudes", type=_floats)
    s.add_argument("--pool-j", dest="pool_j", type=int)

    s = sub.add_parser("commutation", parents=[common], help="convolution / channel-shift commutation")
    s.add_argument("--channels", type=_ints)
    s.add_argument("--taps", type=int)

    s = sub.add_parser("pooling", parents=[common], help="pooling attenuation across scales")
    s.add_argument("--channels", type=_ints)
    s.add_argument("--shift", type=int)
    s.add_argument("--scales", type=_ints)

    s = sub.add_parser("discover", parents=[common], help="covariance group discovery")
    s.add_argument("--preset", choices=DATASET_PRESETS)
    s.add_argument("--dataset", help="dataset file (CSV or binary)")
    s.add_argument("--samples", type=int)
    s.add_argument("--tol", type=float)
    s.add_argument("--center", action="store_true", default=None)
    s.add_argument("--random-bases", dest="random_bases", type=int)

    s = sub.add_parser("frame", parents=[common], help="frame bounds of filter banks")
    s.add_argument("--bank", action="append", dest="banks")
    s.add_argument("--trials", type=int)
    return p


_PASSTHROUGH = ("seed", "n", "signals", "amplitudes", "pool_j", "channels", "taps", "shift", "scales",
                "tol", "center", "random_bases", "banks", "trials")


def config_from_args(args: argparse.Namespace) -> dict:
    data = load_config_file(args.config) if args.config else {}
    if "experiment" in data and data["experiment"] != args.experiment:
        raise ConfigError(f"config is for experiment {data['experiment']!r}, not {args.experiment!r}")
    data["experiment"] = args.experiment
    for key in _PASSTHROUGH:
        v = getattr(args, key, None)
        if v is not None:
            data[key] = v
    if args.signal is not None:
        data["signal"] = {"preset": args.signal}
    if getattr(args, "group", None) is not None or getattr(args, "direction", None) is not None:
        group = dict(data.get("group") or {})
        if args.group is not None:
            group["kind"] = args.group
        if args.direction is not None:
            group["direction"] = args.direction
        data["group"] = group
    if args.experiment == "discover":
        ds = dict(data.get("dataset") or {})
        if args.preset is not None:
            ds.pop("path", None)
            ds["preset"] = args.preset
        if args.dataset is not None:
            ds.pop("preset", None)
            ds["path"] = args.dataset
        if args.samples is not None:
            ds["samples"] = args.samples
        if ds:
            data["dataset"] = ds
    return data


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(config_from_args(args))
    except ConfigError as e:
        print(f"lab: {e}", file=sys.stderr)
        return 2
    fmt = args.format or ("csv" if cfg.experiment == "stability" else "json")
    out = Path(args.out or "lab-out")
    started = time.time()
    try:
        result = run_experiment(cfg)
    except ExperimentError as e:
        print(f"lab {cfg.experiment}: {e}", file=sys.stderr)
        return 1
    elapsed = time.time() - started
    out.mkdir(parents=True, exist_ok=True)
    target = out / f"{cfg.experiment}.{fmt}"
    if fmt == "csv" and result.curve is not None:
        emit_curve(result.curve, target)
    else:
        target.write_text(result.csv if fmt == "csv" else result.json())
    manifest = {
        "tool": "lab",
        "version": __version__,
        "config": cfg.model_dump(mode="json"),
        "results": target.name,
        "wall_clock_seconds": elapsed,
        "started_unix": started,
    }
    (out / "manifest.json").write_text(dumps_json(manifest))
    checks = result.report.get("checks", {})
    for name, ok in checks.items():
        print(f"{cfg.experiment}.{name}: {'pass' if ok else 'FAIL'}")
    print(f"wrote {target}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
