"""Dataset manifests: difficulty mixtures, budget plans, materialization.

A manifest declares what a training set is made of (counts per
difficulty tier with their Reynolds bands and obstacle ranges, plus a
held-out block drawn from the hard tier) without containing any data.
Materializing a manifest runs the solver for every declared case and
fills in file references; seeds split hierarchically from the manifest
base seed, so re-running produces byte-identical field payloads.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from pathlib import Path

from .cost import CostModel, CostRecord, write_cost_csv
from .errors import ConfigError, InfeasibleSeed, NspregenError, OutOfRange
from .geometry import Axis, Tier, sample_obstacles
from .physics import (
    RE_BANDS,
    BoundarySetup,
    FlowKind,
    FluidParams,
    ReBand,
    lid_speed_from_re,
    sample_reynolds,
    umax_from_re_fpo,
)
from .rng import derive_seed, stream
from .solver import SolverParams, build_case, run_simulation
from .trajio import read_trajectory, write_trajectory

__all__ = [
    "MANIFEST_VERSION",
    "DEFAULT_ALPHA_GRID",
    "DEFAULT_AUGMENT_GRID",
    "HELD_OUT_COUNT",
    "HARD_SEED_COUNT",
    "MixFraction",
    "ManifestEntry",
    "DatasetManifest",
    "BudgetPlan",
    "GenerationSettings",
    "tier_entry_settings",
    "alpha_sweep_manifest",
    "budget_augmentation_plan",
    "compute_savings_ratio",
    "manifest_cost",
    "materialize_manifest",
    "profile_axis",
    "load_manifest",
    "save_manifest",
]

MANIFEST_VERSION = 1
#: default fraction grid for difficulty-mixing sweeps; brackets the
#: pivotal 10% and 25% points
DEFAULT_ALPHA_GRID = (0.0, 0.05, 0.10, 0.25, 0.50, 0.75, 1.0)
#: default augmentation grid: powers of two, capped at 3200
DEFAULT_AUGMENT_GRID = tuple(2**k for k in range(12)) + (3200,)
#: held-out trajectories per manifest family
HELD_OUT_COUNT = 100
#: fixed number of hard examples seeding a budget-augmentation plan
HARD_SEED_COUNT = 200

OBSTACLE_RANGES: dict[Tier, tuple[int, int]] = {
    Tier.EASY: (0, 0),
    Tier.MEDIUM: (1, 1),
    Tier.HARD: (2, 10),
}
DEFAULT_OBSTACLE_SIZE = (0.15, 0.30)


@dataclass(frozen=True)
class MixFraction:
    """Fraction of training examples drawn from the hard tier."""

    alpha: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise OutOfRange(f"alpha {self.alpha} outside [0, 1]")


@dataclass(frozen=True)
class ManifestEntry:
    tier: str
    count: int
    re_band: ReBand
    obstacle_min: int
    obstacle_max: int
    obstacle_size: tuple[float, float]
    base_seed: int

    def to_json(self) -> dict:
        return {
            "tier": self.tier,
            "count": self.count,
            "re_band": self.re_band.to_json(),
            "obstacles": {
                "min": self.obstacle_min,
                "max": self.obstacle_max,
                "size": list(self.obstacle_size),
            },
            "base_seed": self.base_seed,
        }

    @classmethod
    def from_json(cls, d: dict) -> "ManifestEntry":
        obs = d["obstacles"]
        return cls(
            tier=d["tier"],
            count=int(d["count"]),
            re_band=ReBand.from_json(d["re_band"]),
            obstacle_min=int(obs["min"]),
            obstacle_max=int(obs["max"]),
            obstacle_size=tuple(obs["size"]),
            base_seed=int(d["base_seed"]),
        )


@dataclass
class DatasetManifest:
    name: str
    axis: str
    entries: list[ManifestEntry]
    held_out_count: int
    held_out_seed: int
    files: list[str] = field(default_factory=list)
    version: int = MANIFEST_VERSION

    def __post_init__(self):
        try:
            Axis(self.axis)
        except ValueError as exc:
            raise ConfigError(f"unknown axis '{self.axis}'") from exc
        if any(e.count < 0 for e in self.entries):
            raise OutOfRange("entry counts must be >= 0")
        if self.total_train() <= 0:
            raise OutOfRange("total train count must be positive")

    def total_train(self) -> int:
        return sum(e.count for e in self.entries)

    def train_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for e in self.entries:
            counts[e.tier] = counts.get(e.tier, 0) + e.count
        return counts

    def to_json(self) -> dict:
        return {
            "version": self.version,
            "name": self.name,
            "axis": self.axis,
            "entries": [e.to_json() for e in self.entries],
            "held_out": {"count": self.held_out_count, "seed": self.held_out_seed},
            "files": list(self.files),
        }

    @classmethod
    def from_json(cls, d: dict) -> "DatasetManifest":
        for key in ("version", "name", "axis", "entries", "held_out"):
            if key not in d:
                raise ConfigError(f"manifest missing field '{key}'")
        if d["version"] != MANIFEST_VERSION:
            raise ConfigError(f"manifest version {d['version']} unsupported")
        try:
            entries = [ManifestEntry.from_json(e) for e in d["entries"]]
            held = d["held_out"]
            return cls(
                name=str(d["name"]),
                axis=str(d["axis"]),
                entries=entries,
                held_out_count=int(held["count"]),
                held_out_seed=int(held["seed"]),
                files=[str(f) for f in d.get("files", [])],
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed manifest field: {exc}") from exc


def save_manifest(manifest: DatasetManifest, path: Path | str) -> None:
    Path(path).write_text(json.dumps(manifest.to_json(), indent=2) + "\n")


def load_manifest(path: Path | str) -> DatasetManifest:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read manifest: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"manifest is not valid JSON: {exc}") from exc
    return DatasetManifest.from_json(data)


def tier_entry_settings(axis: Axis, tier: Tier) -> tuple[ReBand, tuple[int, int]]:
    """Reynolds band and obstacle-count range for a tier on an axis.

    The geometry axis varies obstacles at the default (easy-band)
    physics; the physics axis varies Re with no obstacles; the combined
    axis varies both together.
    """
    if axis is Axis.GEOMETRY:
        return RE_BANDS[Tier.EASY], OBSTACLE_RANGES[tier]
    if axis is Axis.PHYSICS:
        return RE_BANDS[tier], OBSTACLE_RANGES[Tier.EASY]
    return RE_BANDS[tier], OBSTACLE_RANGES[tier]


def _make_entry(axis: Axis, tier: Tier, count: int, base_seed: int) -> ManifestEntry:
    band, obst = tier_entry_settings(axis, tier)
    return ManifestEntry(
        tier=tier.value,
        count=count,
        re_band=band,
        obstacle_min=obst[0],
        obstacle_max=obst[1],
        obstacle_size=DEFAULT_OBSTACLE_SIZE,
        base_seed=base_seed,
    )


def alpha_sweep_manifest(
    total_n: int,
    alphas: list[MixFraction],
    lower_tier: Tier,
    hard_tier: Tier,
    axis: Axis,
    base_seed: int,
    held_out_count: int = HELD_OUT_COUNT,
) -> list[DatasetManifest]:
    """One manifest per mix fraction, at a fixed total training count.

    The hard count is round-half-up(alpha * total_n) so any positive
    alpha contributes at least one hard example on the default grids;
    the held-out block shares one seed across the sweep and its seed
    path is disjoint from every training entry.
    """
    if total_n < 1:
        raise OutOfRange("total_n must be >= 1")
    held_seed = derive_seed(base_seed, "held_out")
    manifests = []
    for k, mix in enumerate(alphas):
        hard = int(mix.alpha * total_n + 0.5)
        lower = total_n - hard
        entries = []
        if lower > 0:
            entries.append(_make_entry(
                axis, lower_tier, lower, derive_seed(base_seed, "alpha", k, 0)))
        if hard > 0:
            entries.append(_make_entry(
                axis, hard_tier, hard, derive_seed(base_seed, "alpha", k, 1)))
        manifests.append(DatasetManifest(
            name=f"alpha_{mix.alpha:.2f}_{axis.value}",
            axis=axis.value,
            entries=entries,
            held_out_count=held_out_count,
            held_out_seed=held_seed,
        ))
    return manifests


@dataclass
class BudgetPlan:
    n_hard_seed: int
    augmentation_tier: str
    augmentation_counts: tuple[int, ...]
    budget_seconds: float
    hard_seed_cost: float
    cost_per_example: float
    feasible_counts: tuple[int, ...]

    def to_json(self) -> dict:
        return {
            "n_hard_seed": self.n_hard_seed,
            "augmentation_tier": self.augmentation_tier,
            "augmentation_counts": list(self.augmentation_counts),
            "budget_seconds": self.budget_seconds,
            "hard_seed_cost": self.hard_seed_cost,
            "cost_per_example": self.cost_per_example,
            "feasible_counts": list(self.feasible_counts),
        }


def budget_augmentation_plan(
    cost_model: CostModel,
    budget_seconds: float,
    tier: Tier,
    grid: tuple[int, ...] = DEFAULT_AUGMENT_GRID,
    n_hard_seed: int = HARD_SEED_COUNT,
) -> BudgetPlan:
    """Augmentation counts that fit the budget next to the hard seed set.

    A count c is feasible iff n_hard_seed * c(hard) + c * c(tier) fits
    within the budget. Raises InfeasibleSeed when the budget cannot
    even cover the hard seed examples.
    """
    if not grid:
        raise OutOfRange("augmentation grid is empty")
    seed_cost = n_hard_seed * cost_model.cost(Tier.HARD)
    if budget_seconds < seed_cost:
        raise InfeasibleSeed(
            f"budget {budget_seconds:.1f}s below hard-seed cost {seed_cost:.1f}s"
        )
    per = cost_model.cost(tier)
    feasible = tuple(c for c in grid if seed_cost + c * per <= budget_seconds)
    return BudgetPlan(
        n_hard_seed=n_hard_seed,
        augmentation_tier=tier.value,
        augmentation_counts=tuple(grid),
        budget_seconds=budget_seconds,
        hard_seed_cost=seed_cost,
        cost_per_example=per,
        feasible_counts=feasible,
    )


def manifest_cost(manifest: DatasetManifest, cost_model: CostModel) -> float:
    return sum(e.count * cost_model.cost(e.tier) for e in manifest.entries)


def compute_savings_ratio(
    reference: DatasetManifest,
    mixed: DatasetManifest,
    cost_model: CostModel,
) -> float:
    """Generation cost of `reference` divided by that of `mixed`."""
    return manifest_cost(reference, cost_model) / manifest_cost(mixed, cost_model)


# ---------------------------------------------------------------------------
# materialization


@dataclass(frozen=True)
class GenerationSettings:
    fluid: FluidParams = FluidParams()
    solver: SolverParams = SolverParams()
    kind: FlowKind = FlowKind.FPO
    margin_min: float = 0.1
    gap_min: float = 0.05
    max_attempts: int = 10_000
    workers: int = 1


def _draw_case(entry: ManifestEntry, sim_seed: int, settings: GenerationSettings):
    """Deterministically expand one (entry, seed) into a CaseSetup."""
    g = stream(sim_seed, "count")
    count = int(g.integers(entry.obstacle_min, entry.obstacle_max + 1))
    domain = (settings.fluid.length, settings.fluid.height)
    obs = sample_obstacles(
        count, domain, entry.obstacle_size,
        settings.margin_min, settings.gap_min,
        seed=sim_seed, max_attempts=settings.max_attempts,
    )
    re = sample_reynolds(entry.re_band, derive_seed(sim_seed, "re"))
    if settings.kind is FlowKind.FPO:
        speed = umax_from_re_fpo(re, settings.fluid)
    else:
        speed = lid_speed_from_re(re, settings.fluid)
    boundary = BoundarySetup(settings.kind, speed, re)
    return build_case(obs, boundary, settings.fluid, settings.solver)


def _materialize_one(entry_json: dict, sim_seed: int, out_path: str,
                     settings: GenerationSettings):
    """Worker task: simulate one case and write its NST1 file."""
    entry = ManifestEntry.from_json(entry_json)
    case = _draw_case(entry, sim_seed, settings)
    traj, record = run_simulation(case)
    write_trajectory(traj, out_path)
    case_info = {
        "kind": settings.kind.value,
        "re": case.boundary.re,
        "obstacles": case.obstacles.to_json(),
    }
    return record, case_info


def _sim_jobs(manifest: DatasetManifest, out_dir: Path):
    """Yield (entry, sim_seed, path, axis_tier) for every declared case."""
    for e_idx, entry in enumerate(manifest.entries):
        for k in range(entry.count):
            sim_seed = derive_seed(entry.base_seed, "sim", k)
            name = f"{manifest.name}_{entry.tier}_{k:05d}_{sim_seed:016x}.nst"
            yield entry, sim_seed, out_dir / name, entry.tier
    if manifest.held_out_count > 0:
        hard_entry = next(
            (e for e in manifest.entries if e.tier == Tier.HARD.value), None)
        if hard_entry is None:
            band, obst = tier_entry_settings(Axis(manifest.axis), Tier.HARD)
            hard_entry = ManifestEntry(
                tier=Tier.HARD.value, count=0, re_band=band,
                obstacle_min=obst[0], obstacle_max=obst[1],
                obstacle_size=DEFAULT_OBSTACLE_SIZE,
                base_seed=manifest.held_out_seed,
            )
        held = replace(hard_entry, base_seed=manifest.held_out_seed)
        for k in range(manifest.held_out_count):
            sim_seed = derive_seed(manifest.held_out_seed, "sim", k)
            name = f"{manifest.name}_heldout_{k:05d}_{sim_seed:016x}.nst"
            yield held, sim_seed, out_dir / "held_out" / name, "held_out"


def _profile_one(axis_value: str, tier_value: str, k: int, base_seed: int,
                 settings: GenerationSettings) -> CostRecord:
    axis, tier = Axis(axis_value), Tier(tier_value)
    band, obst = tier_entry_settings(axis, tier)
    # pair the Re draw across tiers when only geometry varies, so the
    # within-band Re spread does not drown the geometry cost signal
    if axis is Axis.GEOMETRY:
        re_seed = derive_seed(base_seed, "profile_re", k)
    else:
        re_seed = derive_seed(base_seed, "profile_re", tier.value, k)
    entry = ManifestEntry(
        tier=tier.value, count=0, re_band=band,
        obstacle_min=obst[0], obstacle_max=obst[1],
        obstacle_size=DEFAULT_OBSTACLE_SIZE, base_seed=base_seed,
    )
    sim_seed = derive_seed(base_seed, "profile", tier.value, k)
    g = stream(sim_seed, "count")
    count = int(g.integers(entry.obstacle_min, entry.obstacle_max + 1))
    domain = (settings.fluid.length, settings.fluid.height)
    obs = sample_obstacles(
        count, domain, entry.obstacle_size,
        settings.margin_min, settings.gap_min,
        seed=sim_seed, max_attempts=settings.max_attempts,
    )
    re = sample_reynolds(entry.re_band, re_seed)
    if settings.kind is FlowKind.FPO:
        speed = umax_from_re_fpo(re, settings.fluid)
    else:
        speed = lid_speed_from_re(re, settings.fluid)
    case = build_case(obs, BoundarySetup(settings.kind, speed, re),
                      settings.fluid, settings.solver)
    _, record = run_simulation(case)
    return record.labeled(axis, tier)


def profile_axis(
    axis: Axis,
    per_cell_n: int,
    settings: GenerationSettings,
    base_seed: int = 0,
) -> list[CostRecord]:
    """Time per_cell_n simulations in each tier of one difficulty axis."""
    if per_cell_n < 1:
        raise OutOfRange("per_cell_n must be >= 1")
    tiers = (Tier.EASY, Tier.MEDIUM, Tier.HARD)
    jobs = [(tier, k) for tier in tiers for k in range(per_cell_n)]
    records: list[CostRecord] = []
    if settings.workers <= 1:
        for tier, k in jobs:
            records.append(_profile_one(axis.value, tier.value, k, base_seed, settings))
    else:
        with ProcessPoolExecutor(max_workers=settings.workers) as pool:
            futures = [
                pool.submit(_profile_one, axis.value, tier.value, k, base_seed, settings)
                for tier, k in jobs
            ]
            records = [f.result() for f in futures]
    return records


def _existing_valid(path: Path) -> bool:
    if not path.exists():
        return False
    try:
        read_trajectory(path)
        return True
    except NspregenError:
        return False


def materialize_manifest(
    manifest: DatasetManifest,
    out_dir: Path | str,
    settings: GenerationSettings | None = None,
    with_held_out: bool = True,
) -> tuple[DatasetManifest, list[CostRecord], dict]:
    """Simulate and write every case a manifest declares.

    Existing files that read back cleanly are skipped, so interrupted
    runs resume to the identical final file set. Failures are collected
    per file and do not stop the batch. Returns the manifest with file
    references filled in, the cost records of newly generated files,
    and a summary dict (generated / skipped / failed).
    """
    settings = settings or GenerationSettings()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "held_out").mkdir(exist_ok=True)

    jobs = []
    for entry, sim_seed, path, label in _sim_jobs(manifest, out_dir):
        if label == "held_out" and not with_held_out:
            continue
        jobs.append((entry, sim_seed, path, label))

    skipped, todo = [], []
    for job in jobs:
        (skipped if _existing_valid(job[2]) else todo).append(job)
    records: list[CostRecord] = []
    failures: list[dict] = []
    done_paths = [j[2] for j in skipped]

    axis = Axis(manifest.axis)
    cases_path = out_dir / f"{manifest.name}.cases.json"
    case_infos: dict[str, dict] = {}
    if cases_path.exists():
        try:
            case_infos = json.loads(cases_path.read_text())
        except json.JSONDecodeError:
            case_infos = {}
    if settings.workers <= 1:
        for entry, sim_seed, path, label in todo:
            try:
                rec, info = _materialize_one(entry.to_json(), sim_seed,
                                             str(path), settings)
            except NspregenError as exc:
                failures.append({"path": str(path), "error": str(exc)})
                continue
            if label != "held_out":
                rec = rec.labeled(axis, Tier(label))
            records.append(rec)
            done_paths.append(path)
            case_infos[str(path.relative_to(out_dir))] = info
    else:
        with ProcessPoolExecutor(max_workers=settings.workers) as pool:
            futures = {
                pool.submit(_materialize_one, entry.to_json(), sim_seed,
                            str(path), settings): (path, label)
                for entry, sim_seed, path, label in todo
            }
            for fut in as_completed(futures):
                path, label = futures[fut]
                try:
                    rec, info = fut.result()
                except NspregenError as exc:
                    failures.append({"path": str(path), "error": str(exc)})
                    continue
                if label != "held_out":
                    rec = rec.labeled(axis, Tier(label))
                records.append(rec)
                done_paths.append(path)
                case_infos[str(path.relative_to(out_dir))] = info

    done_files = sorted(str(p.relative_to(out_dir)) for p in done_paths)
    result = replace(manifest, files=done_files)
    save_manifest(result, out_dir / f"{manifest.name}.manifest.json")
    cases_path.write_text(json.dumps(case_infos, indent=2, sort_keys=True) + "\n")
    if records:
        write_cost_csv(records, out_dir / f"{manifest.name}.cost.csv", append=True)
    summary = {
        "generated": len(records),
        "skipped": len(skipped),
        "failed": failures,
        "total_declared": len(jobs),
    }
    return result, records, summary
