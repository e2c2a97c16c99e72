"""Command-line entry point: simulate, reconstruct, evaluate, plot.

Exit codes: 0 success, 2 usage/config error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .dataset import (
    DatasetConfig,
    DatasetManifest,
    export_png,
    features_to_records,
    generate_dataset,
    read_events,
    read_map,
    write_map,
)
from .metrics import mse, peak_offset, ssim, summarize_runs
from .reconstruction import ReconstructionConfig, SkyMap, combine_maps, reconstruct
from .reconstruction import arm_filter as apply_arm_filter


class CliError(Exception):
    """Configuration / usage error (exit code 2)."""


def _positive_float(text):
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ccbox",
        description="Compton-camera GRB simulation, reconstruction, and evaluation")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate a simulated dataset")
    p_sim.add_argument("--out", required=True, help="output dataset directory")
    p_sim.add_argument("--config", help="JSON config file (DatasetConfig fields)")
    p_sim.add_argument("--duration", type=_positive_float, action="append",
                       help="burst duration in seconds (repeatable)")
    p_sim.add_argument("--runs", type=int, help="runs per duration")
    p_sim.add_argument("--seed", type=int, help="master seed")
    p_sim.add_argument("--flux", type=_positive_float, help="GRB flux (ph/cm^2/s)")
    p_sim.add_argument("--no-background", action="store_true",
                       help="disable CXB and albedo backgrounds")
    p_sim.add_argument("--jobs", type=int, default=1, help="parallel workers")

    p_rec = sub.add_parser("reconstruct", help="(re)build per-run sky maps")
    p_rec.add_argument("--dataset", required=True)
    p_rec.add_argument("--mode", choices=("compton", "pinhole", "both"), default="both")
    p_rec.add_argument("--cone-sigma", type=_positive_float,
                       help="cone ring width in degrees (default from manifest)")
    p_rec.add_argument("--arm-window", type=_positive_float,
                       help="ARM cut window in degrees")
    p_rec.add_argument("--source-from-truth", action="store_true",
                       help="take the ARM source direction from truth.json")
    p_rec.add_argument("--jobs", type=int, default=1)

    p_eval = sub.add_parser("evaluate", help="score predictions against targets")
    p_eval.add_argument("--dataset", required=True)
    p_eval.add_argument("--split", choices=("train", "val", "test", "all"), default="all")
    p_eval.add_argument("--map", dest="map_kind", default="combined",
                        choices=("combined", "compton", "pinhole"),
                        help="which stored map to evaluate (ignored with --pred-dir)")
    p_eval.add_argument("--pred-dir",
                        help="directory of external predictions named <run id>.img")
    p_eval.add_argument("--json", dest="json_out", help="also write the report as JSON")

    p_plot = sub.add_parser("plot", help="export sky maps as PNG")
    p_plot.add_argument("maps", nargs="+", help=".img files to export")
    p_plot.add_argument("--out-dir", default=".", help="PNG output directory")
    p_plot.add_argument("--colormap", default="gray")

    return parser


# -- simulate ------------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg_dict = {}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise CliError(f"config file not found: {path}")
        with open(path) as fh:
            cfg_dict = json.load(fh)
    if args.duration:
        cfg_dict["durations_s"] = tuple(args.duration)
    if args.runs is not None:
        if args.runs <= 0:
            raise CliError("--runs must be positive")
        cfg_dict["runs_per_duration"] = args.runs
    if args.seed is not None:
        cfg_dict["master_seed"] = args.seed
    if args.flux is not None:
        cfg_dict["flux"] = args.flux
    if args.no_background:
        cfg_dict["background"] = False
    try:
        config = DatasetConfig.from_dict(cfg_dict)
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid configuration: {exc}") from exc
    manifest = generate_dataset(config, args.out, jobs=max(1, args.jobs))
    print(f"wrote {len(manifest.runs)} runs to {args.out}")
    return 0


# -- reconstruct ---------------------------------------------------------------


def _reconstruct_one(task):
    run_dir, mode, cone_sigma, arm_window_deg, use_truth, bounds_dict, geom_dict = task
    from .events import FeatureBounds
    from .geometry import DetectorGeometry

    run_dir = Path(run_dir)
    bounds = FeatureBounds.from_dict(bounds_dict)
    geometry = DetectorGeometry.from_dict(geom_dict)
    records = features_to_records(read_events(run_dir / "events.bin"), bounds)
    if arm_window_deg is not None:
        with open(run_dir / "truth.json") as fh:
            truth = json.load(fh)
        records = apply_arm_filter(records, np.asarray(truth["direction"]),
                                   np.radians(arm_window_deg))
    cfg = ReconstructionConfig(cone_sigma_deg=cone_sigma)
    compton, pinhole = reconstruct(records, geometry, mode, cfg)
    if mode in ("compton", "both"):
        write_map(compton, run_dir / "compton.img")
    if mode in ("pinhole", "both"):
        write_map(pinhole, run_dir / "pinhole.img")


def cmd_reconstruct(args) -> int:
    if args.arm_window is not None and not args.source_from_truth:
        raise CliError("--arm-window requires --source-from-truth")
    manifest = _load_manifest(args.dataset)
    cone_sigma = args.cone_sigma or manifest.config.cone_sigma_deg
    root = Path(args.dataset)
    tasks = [(str(root / r["path"]), args.mode, cone_sigma, args.arm_window,
              args.source_from_truth, manifest.bounds.to_dict(),
              manifest.config.geometry.to_dict())
             for r in manifest.runs]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            list(pool.map(_reconstruct_one, tasks, chunksize=1))
    else:
        for t in tasks:
            _reconstruct_one(t)
    print(f"reconstructed {len(tasks)} runs ({args.mode})")
    return 0


# -- evaluate ------------------------------------------------------------------


def _load_manifest(dataset_dir) -> DatasetManifest:
    path = Path(dataset_dir) / "manifest.json"
    if not path.is_file():
        raise CliError(f"no dataset manifest at {path}")
    return DatasetManifest.load(path)


def evaluate_dataset(dataset_dir, split="all", map_kind="combined", pred_dir=None):
    """Compute per-run MSE/SSIM/peak-offset and aggregate statistics."""
    manifest = _load_manifest(dataset_dir)
    root = Path(dataset_dir)
    per_run = {"mse": [], "ssim": [], "peak_offset": []}
    run_ids = []
    for run in manifest.runs:
        if split != "all" and run["split"] != split:
            continue
        run_dir = root / run["path"]
        target = read_map(run_dir / "target.img")
        if pred_dir is not None:
            pred_path = Path(pred_dir) / f"{run['id']}.img"
            if not pred_path.is_file():
                raise CliError(f"missing prediction {pred_path}")
            pred = read_map(pred_path)
        elif map_kind == "combined":
            pred = combine_maps(read_map(run_dir / "compton.img"),
                                read_map(run_dir / "pinhole.img"))
        else:
            pred = read_map(run_dir / f"{map_kind}.img")
        with open(run_dir / "truth.json") as fh:
            truth = json.load(fh)
        per_run["mse"].append(mse(pred, target))
        per_run["ssim"].append(ssim(pred, target))
        if pred.total > 0:
            per_run["peak_offset"].append(peak_offset(pred, truth["direction"]))
        else:
            per_run["peak_offset"].append(90.0)   # empty map: no localization
        run_ids.append(run["id"])
    if not run_ids:
        raise CliError(f"no runs in split {split!r}")
    report = summarize_runs(per_run)
    return report, run_ids


def cmd_evaluate(args) -> int:
    report, run_ids = evaluate_dataset(args.dataset, args.split, args.map_kind,
                                       args.pred_dir)
    print(report.to_table())
    if args.json_out:
        payload = report.to_dict()
        payload["runs"] = run_ids
        with open(args.json_out, "w", newline="\n") as fh:
            json.dump(payload, fh, sort_keys=True, indent=2)
            fh.write("\n")
    return 0


# -- plot ----------------------------------------------------------------------


def cmd_plot(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for map_path in args.maps:
        map_path = Path(map_path)
        if not map_path.is_file():
            raise CliError(f"map not found: {map_path}")
        sky = read_map(map_path)
        out = out_dir / (map_path.stem + ".png")
        export_png(sky, out, args.colormap)
        print(f"wrote {out}")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "reconstruct": cmd_reconstruct,
    "evaluate": cmd_evaluate,
    "plot": cmd_plot,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
