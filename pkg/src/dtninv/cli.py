"""Command-line entry point.

Subcommands:
  run     execute a preset or config file: generate data, train, report
  verify  run module property suites and exit nonzero on any failure
  plot    render report figures for a completed run directory

Configs are flat ``key = value`` text with dotted keys; any key can be
overridden on the command line as ``--key=value``. Exit codes: 0 success,
1 usage error, 2 verification failure, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .dtn import save_dataset
from .fem import SolverError
from .metrics import full_report, rasterize, save_raster_pgm
from .presets import preset_config, preset_names
from .trainer import (PARTIAL40, TrainConfig, TrainingError, build_coefficient,
                      build_dataset, build_mesh, train, write_fields, write_history)

USAGE_ERROR, VERIFY_ERROR, NUMERIC_ERROR = 1, 2, 3


class UsageError(ValueError):
    pass


def _parse_bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise UsageError(f"expected a boolean, got {s!r}")


def _parse_opt_float(s: str):
    return None if s.strip().lower() == "none" else float(s)


def _parse_range(s: str):
    if s.strip().lower() == "none":
        return None
    lo, hi = s.split(":")
    return (float(lo), float(hi))


def _parse_pair(s: str):
    a, b = s.split(":")
    return (float(a), float(b))


def _parse_exclusions(s: str):
    s = s.strip().lower()
    if s in ("none", ""):
        return ()
    if s == "paper40":
        return PARTIAL40
    out = []
    for part in s.split(","):
        side, lo, hi = part.split(":")
        out.append((side, float(lo), float(hi)))
    return tuple(out)


def _parse_hidden(s: str):
    return tuple(int(v) for v in s.split(","))


def _fmt(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, int):
        return str(value)
    return str(value)


def _fmt_range(value) -> str:
    return "none" if value is None else f"{value[0]!r}:{value[1]!r}"


def _fmt_pair(value) -> str:
    return f"{value[0]!r}:{value[1]!r}"


def _fmt_exclusions(value) -> str:
    if not value:
        return "none"
    return ",".join(f"{side}:{lo!r}:{hi!r}" for side, lo, hi in value)


def _fmt_hidden(value) -> str:
    return ",".join(str(v) for v in value)


# dotted config key -> (TrainConfig attribute, parser, formatter)
KEYMAP = {
    "mesh.kind": ("mesh_kind", str, _fmt),
    "mesh.n": ("mesh_n", int, _fmt),
    "mesh.center": ("disk_center", _parse_pair, _fmt_pair),
    "mesh.radius": ("disk_radius", float, _fmt),
    "mesh.target_h": ("disk_target_h", float, _fmt),
    "coeff.kind": ("coeff", str, _fmt),
    "coeff.value": ("coeff_value", float, _fmt),
    "obs.mode": ("obs_mode", str, _fmt),
    "obs.exclusions": ("exclusions", _parse_exclusions, _fmt_exclusions),
    "data.n": ("n_samples", int, _fmt),
    "data.zero_source": ("zero_source", _parse_bool, _fmt),
    "data.refine": ("refine_data", _parse_bool, _fmt),
    "train.epochs": ("epochs", int, _fmt),
    "train.lr_preset": ("lr_preset", str, _fmt),
    "train.lr": ("lr", _parse_opt_float, _fmt),
    "reg.lambda": ("reg_lambda", float, _fmt),
    "net.range": ("range_bounds", _parse_range, _fmt_range),
    "net.range_mode": ("range_mode", str, _fmt),
    "net.omega0": ("omega0", float, _fmt),
    "net.floor": ("floor", float, _fmt),
    "net.hidden": ("hidden", _parse_hidden, _fmt_hidden),
    "seed.data": ("seed_data", int, _fmt),
    "seed.init": ("seed_init", int, _fmt),
    "seed.shuffle": ("seed_shuffle", int, _fmt),
}


def config_to_dict(config: TrainConfig) -> dict:
    return {key: fmt(getattr(config, attr)) for key, (attr, _, fmt) in KEYMAP.items()}


def apply_overrides(config: TrainConfig, overrides: dict) -> TrainConfig:
    updates = {}
    for key, raw in overrides.items():
        if key not in KEYMAP:
            raise UsageError(f"unknown config key {key!r}")
        attr, parse, _ = KEYMAP[key]
        try:
            updates[attr] = parse(raw)
        except UsageError:
            raise
        except Exception as exc:
            raise UsageError(f"bad value for {key}: {raw!r} ({exc})") from exc
    return replace(config, **updates)


def config_from_manifest(manifest: dict) -> TrainConfig:
    return apply_overrides(TrainConfig(), manifest["config"])


def read_config_file(path: Path) -> tuple[TrainConfig, str]:
    """Parse a flat key = value file; a ``preset`` line seeds the defaults."""
    pairs = {}
    for line in path.read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"bad config line {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        pairs[key] = value
    preset = pairs.pop("preset", None)
    base = preset_config(preset) if preset else TrainConfig()
    return apply_overrides(base, pairs), preset or "custom"


def _collect_overrides(extras: list[str]) -> dict:
    overrides = {}
    for token in extras:
        if not (token.startswith("--") and "=" in token):
            raise UsageError(f"unrecognized argument {token!r} (overrides look like --key=value)")
        key, value = token[2:].split("=", 1)
        overrides[key] = value
    return overrides


def do_run(config: TrainConfig, preset_name: str, out_dir: Path,
           save_dataset_flag: bool = False, grid: int = 256) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    result = train(config, checkpoint_dir=out_dir / "checkpoints")
    report = full_report(result.mesh, result.k_exact, result.k_recon, grid=grid)

    manifest = {
        "preset": preset_name,
        "version": __version__,
        "config": config_to_dict(config),
        "files": ["history.csv", "fields.csv", "fields.vtk", "metrics.json",
                  "raster_exact.pgm", "raster_recon.pgm"],
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    write_history(result, out_dir / "history.csv")
    write_fields(result, out_dir / "fields.csv", out_dir / "fields.vtk")
    save_raster_pgm(rasterize(result.mesh, result.k_exact, grid), out_dir / "raster_exact.pgm")
    save_raster_pgm(rasterize(result.mesh, result.k_recon, grid), out_dir / "raster_recon.pgm")
    (out_dir / "metrics.json").write_text(report.to_json(
        extra={"grad_energy": result.grad_energy, "final_mean_loss": result.final_loss}))
    if save_dataset_flag:
        dataset = build_dataset(config, result.mesh, build_coefficient(config))
        save_dataset(dataset, out_dir / "dataset")
    return out_dir


def cmd_run(args, extras) -> int:
    overrides = _collect_overrides(extras)
    if args.from_manifest:
        manifest = json.loads((Path(args.from_manifest) / "manifest.json").read_text())
        config = config_from_manifest(manifest)
        name = manifest.get("preset", "replay")
    elif args.config:
        config, name = read_config_file(Path(args.config))
    elif args.preset:
        config = preset_config(args.preset)
        name = args.preset
    else:
        raise UsageError("run needs a preset, --config or --from-manifest")
    config = apply_overrides(config, overrides)
    out_dir = Path(args.out) if args.out else Path("runs") / name
    path = do_run(config, name, out_dir, save_dataset_flag=args.save_dataset, grid=args.grid)
    metrics = json.loads((path / "metrics.json").read_text())
    print(f"run {name} complete: out={path} rel_l2={metrics['rel_l2']:.6f} "
          f"psnr={metrics['psnr']:.2f}")
    return 0


def cmd_verify(args, extras) -> int:
    if extras:
        raise UsageError(f"unrecognized arguments: {extras}")
    from .verify import SUITES, run_suite

    names = args.suites or list(SUITES)
    failed = 0
    for name in names:
        try:
            checks = run_suite(name)
        except KeyError as exc:
            raise UsageError(str(exc)) from exc
        for check, ok, detail in checks:
            print(f"{check}: {'PASS' if ok else 'FAIL'} {detail}")
            failed += 0 if ok else 1
        print(json.dumps({"suite": name,
                          "passed": sum(1 for _, ok, _ in checks if ok),
                          "failed": sum(1 for _, ok, _ in checks if not ok)},
                         sort_keys=True))
    return VERIFY_ERROR if failed else 0


def cmd_plot(args, extras) -> int:
    if extras:
        raise UsageError(f"unrecognized arguments: {extras}")
    from .plots import render_run

    written = render_run(Path(args.run_dir))
    for path in written:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dtninv",
        description="Coefficient reconstruction from boundary Cauchy data")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command")

    run_p = sub.add_parser("run", help="run an experiment preset or config")
    run_p.add_argument("preset", nargs="?", help=f"one of: {', '.join(preset_names())}")
    run_p.add_argument("--config", help="flat key = value config file")
    run_p.add_argument("--from-manifest", help="replay the config of a previous run directory")
    run_p.add_argument("--out", help="output directory (default runs/<name>)")
    run_p.add_argument("--save-dataset", action="store_true",
                       help="persist the generated Cauchy dataset under the run directory")
    run_p.add_argument("--grid", type=int, default=256, help="raster size for image metrics")

    verify_p = sub.add_parser("verify", help="run module property suites")
    verify_p.add_argument("suites", nargs="*",
                          help="fem adjoint dtn neural metrics (default: all)")

    plot_p = sub.add_parser("plot", help="render figures for a run directory")
    plot_p.add_argument("run_dir")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args, extras = parser.parse_known_args(argv)
    handlers = {"run": cmd_run, "verify": cmd_verify, "plot": cmd_plot}
    if args.command not in handlers:
        parser.print_help()
        return USAGE_ERROR
    try:
        return handlers[args.command](args, extras)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except KeyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (TrainingError, SolverError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return NUMERIC_ERROR


if __name__ == "__main__":
    sys.exit(main())
