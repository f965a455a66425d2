"""Command-line orchestrator.

Subcommands: generate, profile, plan, eval, inspect, convert, config.
Exit codes: 0 success, 1 runtime failure, 2 usage or configuration
error. All figure output goes to files (Agg backend, no display).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .config import default_config, load_config
from .cost import (
    aggregate_costs,
    check_monotonicity,
    fit_cost_model,
    read_cost_csv,
    write_cost_csv,
    write_cost_table_csv,
)
from .errors import ConfigError, NspregenError
from .evaluator import DEFAULT_CHANNELS, nmae, pair_by_id
from .geometry import Axis, Tier
from .planner import (
    DEFAULT_ALPHA_GRID,
    DEFAULT_AUGMENT_GRID,
    HARD_SEED_COUNT,
    MixFraction,
    alpha_sweep_manifest,
    budget_augmentation_plan,
    compute_savings_ratio,
    load_manifest,
    materialize_manifest,
    profile_axis,
    save_manifest,
)
from .trajio import CHANNELS, export_raw, read_trajectory

__all__ = ["main"]


class UsageError(Exception):
    """Maps to exit code 2."""


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nspregen",
        description="Difficulty-graded Navier-Stokes dataset pre-generation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="materialize a dataset manifest")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--manifest", required=True, type=Path)
    p.add_argument("--out", type=Path, default=None,
                   help="output directory (default: <out_root>/<manifest name>)")
    p.add_argument("--skip-held-out", action="store_true",
                   help="materialize only the training entries")

    p = sub.add_parser("profile", help="time simulations per difficulty tier")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--axis", required=True,
                   choices=[a.value for a in Axis])
    p.add_argument("--per-cell-n", type=int, default=30)
    p.add_argument("--out", type=Path, default=None)

    p = sub.add_parser("plan", help="emit mixture manifests and savings tables")
    p.add_argument("--cost-csv", required=True, type=Path)
    p.add_argument("--mode", required=True, choices=["alpha", "budget"])
    p.add_argument("--axis", default=Axis.PHYSICS.value,
                   choices=[a.value for a in Axis])
    p.add_argument("--total-n", type=int, default=800)
    p.add_argument("--alphas", type=str, default=None,
                   help="comma-separated fractions (default grid otherwise)")
    p.add_argument("--lower-tier", default=Tier.EASY.value,
                   choices=[t.value for t in Tier])
    p.add_argument("--budget-seconds", type=float, default=None)
    p.add_argument("--augment-tier", default=Tier.EASY.value,
                   choices=[t.value for t in Tier])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=Path("plans"))

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("--pred", required=True, type=Path)
    p.add_argument("--truth", required=True, type=Path)
    p.add_argument("--channels", type=str, default=",".join(DEFAULT_CHANNELS))
    p.add_argument("--out", type=Path, default=None,
                   help="report JSON path (default: stdout only)")
    p.add_argument("--figure", type=Path, default=None,
                   help="optional per-channel error bar chart")

    p = sub.add_parser("inspect", help="export one frame/channel as CSV or SVG")
    p.add_argument("trajectory", type=Path)
    p.add_argument("--frame", type=int, default=-1,
                   help="frame index (default: last)")
    p.add_argument("--channel", default="u",
                   choices=list(CHANNELS) + ["vorticity"])
    p.add_argument("--csv", type=Path, default=None)
    p.add_argument("--svg", type=Path, default=None)
    p.add_argument("--png", type=Path, default=None)

    p = sub.add_parser("convert", help="export NST1 payload as raw float32")
    p.add_argument("trajectory", type=Path)
    p.add_argument("--raw", required=True, type=Path,
                   help="output prefix for .f32/.json pair")

    p = sub.add_parser("config", help="configuration helpers")
    p.add_argument("--dump-defaults", action="store_true")
    p.add_argument("--out", type=Path, default=None)
    return parser


def cmd_generate(args) -> int:
    cfg = load_config(args.config)
    manifest = load_manifest(args.manifest)
    out_dir = args.out or Path(cfg.out_root) / manifest.name
    t0 = time.perf_counter()
    result, records, summary = materialize_manifest(
        manifest, out_dir, cfg.generation_settings(),
        with_held_out=not args.skip_held_out,
    )
    wall = time.perf_counter() - t0
    print(f"manifest {manifest.name}: {summary['total_declared']} declared, "
          f"{summary['generated']} generated, {summary['skipped']} skipped, "
          f"{len(summary['failed'])} failed in {wall:.1f}s")
    if summary["skipped"] and not summary["generated"]:
        print("all files already present; nothing re-simulated")
    for fail in summary["failed"]:
        print(f"  FAILED {fail['path']}: {fail['error']}", file=sys.stderr)
    print(f"files referenced: {len(result.files)} "
          f"(manifest written to {out_dir / (manifest.name + '.manifest.json')})")
    return 1 if summary["failed"] else 0


def cmd_profile(args) -> int:
    from .figures import cost_figure

    cfg = load_config(args.config)
    axis = Axis(args.axis)
    out_dir = args.out or Path(cfg.out_root) / f"profile_{axis.value}"
    out_dir.mkdir(parents=True, exist_ok=True)
    records = profile_axis(axis, args.per_cell_n, cfg.generation_settings(),
                           base_seed=cfg.seed)
    write_cost_csv(records, out_dir / "cost.csv")
    table = aggregate_costs(records)
    write_cost_table_csv(table, out_dir / "cost_table.csv")
    report = check_monotonicity(table, axis)
    (out_dir / "monotonicity.json").write_text(json.dumps(report, indent=2) + "\n")
    cost_figure(table, out_dir / "cost_by_tier.png",
                title=f"Generation cost, {axis.value} axis")
    print(f"profiled {len(records)} runs on the {axis.value} axis")
    for tier in (Tier.EASY, Tier.MEDIUM, Tier.HARD):
        cell = table.get(axis, tier)
        print(f"  {tier.value:>6}: {cell.mean_seconds:8.2f} s "
              f"(std {cell.std:.2f}, n {cell.n})")
    print(f"  monotone easy<medium<hard: {report['monotone']}")
    print(f"wrote cost.csv, cost_table.csv, monotonicity.json, cost_by_tier.png "
          f"under {out_dir}")
    return 0


def cmd_plan(args) -> int:
    from .figures import savings_figure

    if not args.cost_csv.exists():
        raise UsageError(f"cost CSV not found: {args.cost_csv}")
    records = read_cost_csv(args.cost_csv)
    table = aggregate_costs(records)
    axis = Axis(args.axis)
    model = fit_cost_model(table, axis)
    out_dir = args.out
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.mode == "alpha":
        if args.alphas:
            alphas = [MixFraction(float(a)) for a in args.alphas.split(",")]
        else:
            alphas = [MixFraction(a) for a in DEFAULT_ALPHA_GRID]
        manifests = alpha_sweep_manifest(
            args.total_n, alphas, Tier(args.lower_tier), Tier.HARD,
            axis, args.seed,
        )
        reference = next((m for m in manifests
                          if m.train_counts().get("hard", 0) == args.total_n), None)
        if reference is None:
            all_hard = alpha_sweep_manifest(
                args.total_n, [MixFraction(1.0)], Tier(args.lower_tier),
                Tier.HARD, axis, args.seed)[0]
            reference = all_hard
        rows = []
        for mix, manifest in zip(alphas, manifests):
            save_manifest(manifest, out_dir / f"{manifest.name}.json")
            ratio = compute_savings_ratio(reference, manifest, model)
            rows.append((mix.alpha, manifest.train_counts(), ratio))
        with open(out_dir / "savings.csv", "w") as f:
            f.write("alpha,n_hard,n_lower,savings_ratio\n")
            for alpha, counts, ratio in rows:
                f.write(f"{alpha},{counts.get('hard', 0)},"
                        f"{sum(v for k, v in counts.items() if k != 'hard')},"
                        f"{repr(ratio)}\n")
        savings_figure([r[0] for r in rows], [r[2] for r in rows],
                       out_dir / "savings.png")
        print(f"wrote {len(manifests)} manifests, savings.csv, savings.png "
              f"under {out_dir}")
        for alpha, counts, ratio in rows:
            print(f"  alpha={alpha:4.2f}  counts={counts}  savings={ratio:.3f}x")
        return 0

    if args.budget_seconds is None:
        raise UsageError("--budget-seconds is required in budget mode")
    plan = budget_augmentation_plan(
        model, args.budget_seconds, Tier(args.augment_tier),
        DEFAULT_AUGMENT_GRID, HARD_SEED_COUNT,
    )
    (out_dir / "budget_plan.json").write_text(
        json.dumps(plan.to_json(), indent=2) + "\n")
    print(f"hard seed cost {plan.hard_seed_cost:.1f}s of {plan.budget_seconds:.1f}s "
          f"budget; {len(plan.feasible_counts)} feasible augmentation counts "
          f"(max {max(plan.feasible_counts) if plan.feasible_counts else 0})")
    print(f"wrote budget_plan.json under {out_dir}")
    return 0


def _read_dir(path: Path):
    files = sorted(path.glob("*.nst"))
    if not files:
        raise UsageError(f"no .nst files in {path}")
    return [read_trajectory(f) for f in files]


def cmd_eval(args) -> int:
    channels = tuple(c.strip() for c in args.channels.split(",") if c.strip())
    pred = _read_dir(args.pred)
    truth = _read_dir(args.truth)
    pred, truth = pair_by_id(pred, truth)
    report = nmae(pred, truth, channels)
    text = json.dumps(report.to_json(), indent=2)
    if args.out:
        args.out.write_text(text + "\n")
    print(text)
    if args.figure:
        from .figures import channel_error_figure

        channel_error_figure(report.per_channel, report.nmae, args.figure)
    return 0


def vorticity(frame: np.ndarray, dx: float, dy: float) -> np.ndarray:
    """dv/dx - du/dy from cell-centered fields (central differences,
    one-sided at the boundary)."""
    u = frame[:, :, CHANNELS.index("u")].astype(np.float64)
    v = frame[:, :, CHANNELS.index("v")].astype(np.float64)
    return np.gradient(v, dx, axis=1) - np.gradient(u, dy, axis=0)


def cmd_inspect(args) -> int:
    from .figures import field_figure

    traj = read_trajectory(args.trajectory)
    t, h, w, _ = traj.frames.shape
    frame_idx = args.frame if args.frame >= 0 else t + args.frame
    if not 0 <= frame_idx < t:
        raise UsageError(f"frame {args.frame} outside [0, {t})")
    if not (args.csv or args.svg or args.png):
        raise UsageError("choose at least one of --csv, --svg, --png")
    extent = (2.0, 2.0)
    dx, dy = extent[0] / w, extent[1] / h
    frame = traj.frames[frame_idx]
    if args.channel == "vorticity":
        values = vorticity(frame, dx, dy)
    else:
        values = frame[:, :, CHANNELS.index(args.channel)].astype(np.float64)
    if args.csv:
        with open(args.csv, "w") as f:
            f.write("x,y,value\n")
            for j in range(h):
                y = (j + 0.5) * dy
                for i in range(w):
                    f.write(f"{(i + 0.5) * dx},{y},{repr(values[j, i])}\n")
    title = (f"{traj.meta.sim_id} frame {frame_idx} {args.channel}")
    for path in (args.svg, args.png):
        if path:
            field_figure(values, path, title=title, extent=extent)
    written = [str(p) for p in (args.csv, args.svg, args.png) if p]
    print(f"inspect {args.trajectory.name}: frame {frame_idx}, "
          f"channel {args.channel} -> {', '.join(written)}")
    return 0


def cmd_convert(args) -> int:
    traj = read_trajectory(args.trajectory)
    raw_path, json_path = export_raw(traj, args.raw)
    print(f"wrote {raw_path} and {json_path}")
    return 0


def cmd_config(args) -> int:
    if not args.dump_defaults:
        raise UsageError("nothing to do; try --dump-defaults")
    text = json.dumps(default_config().to_json(), indent=2)
    if args.out:
        args.out.write_text(text + "\n")
        print(f"wrote defaults to {args.out}")
    else:
        print(text)
    return 0


_COMMANDS = {
    "generate": cmd_generate,
    "profile": cmd_profile,
    "plan": cmd_plan,
    "eval": cmd_eval,
    "inspect": cmd_inspect,
    "convert": cmd_convert,
    "config": cmd_config,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return _COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NspregenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
