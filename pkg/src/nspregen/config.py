"""Run configuration: a versioned JSON document validated up front.

Every subcommand reads the same file; defaults are printable with
`nspregen config --dump-defaults`, so a config plus a seed fully
documents a run.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .physics import RE_BANDS, BASELINE_BAND, FlowKind, FluidParams, ReBand
from .planner import DEFAULT_OBSTACLE_SIZE, GenerationSettings
from .solver import SolverParams

__all__ = ["CONFIG_VERSION", "RunConfig", "default_config", "load_config"]

CONFIG_VERSION = 1

ENV_WORKERS = "NSPREGEN_WORKERS"


@dataclass
class RunConfig:
    seed: int = 0
    kind: FlowKind = FlowKind.FPO
    fluid: FluidParams = field(default_factory=FluidParams)
    solver: SolverParams = field(default_factory=SolverParams)
    obstacle_size: tuple[float, float] = DEFAULT_OBSTACLE_SIZE
    margin_min: float = 0.1
    gap_min: float = 0.05
    max_attempts: int = 10_000
    re_bands: dict[str, ReBand] = field(default_factory=lambda: {
        **{t.value: b for t, b in RE_BANDS.items()},
        "baseline": BASELINE_BAND,
    })
    workers: int | None = None  # None: available parallelism minus one
    out_root: str = "runs"

    def effective_workers(self) -> int:
        env = os.environ.get(ENV_WORKERS)
        if env is not None:
            try:
                return max(1, int(env))
            except ValueError as exc:
                raise ConfigError(f"{ENV_WORKERS} must be an integer") from exc
        if self.workers is not None:
            return max(1, self.workers)
        return max(1, (os.cpu_count() or 2) - 1)

    def generation_settings(self) -> GenerationSettings:
        return GenerationSettings(
            fluid=self.fluid,
            solver=self.solver,
            kind=self.kind,
            margin_min=self.margin_min,
            gap_min=self.gap_min,
            max_attempts=self.max_attempts,
            workers=self.effective_workers(),
        )

    def to_json(self) -> dict:
        return {
            "version": CONFIG_VERSION,
            "seed": self.seed,
            "kind": self.kind.value,
            "fluid": {
                "nu": self.fluid.nu,
                "length": self.fluid.length,
                "height": self.fluid.height,
            },
            "solver": {
                "grid": list(self.solver.grid_dims),
                "cfl": self.solver.cfl,
                "p_tol": self.solver.p_tol,
                "p_rel_tol": self.solver.p_rel_tol,
                "u_tol": self.solver.u_tol,
                "max_cg_iters": self.solver.max_cg_iters,
            },
            "obstacles": {
                "size": list(self.obstacle_size),
                "margin_min": self.margin_min,
                "gap_min": self.gap_min,
                "max_attempts": self.max_attempts,
            },
            "re_bands": {k: b.to_json() for k, b in self.re_bands.items()},
            "workers": self.workers,
            "out_root": self.out_root,
        }


def default_config() -> RunConfig:
    return RunConfig()


def _require(data: dict, key: str, types, where: str):
    if key not in data:
        raise ConfigError(f"config missing field '{where}{key}'")
    value = data[key]
    if not isinstance(value, types):
        raise ConfigError(
            f"config field '{where}{key}' has type {type(value).__name__}"
        )
    return value


def load_config(path: Path | str) -> RunConfig:
    """Parse and validate a config file; errors name the offending field."""
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be an object")
    version = _require(data, "version", int, "")
    if version != CONFIG_VERSION:
        raise ConfigError(f"config version {version}, expected {CONFIG_VERSION}")

    cfg = default_config()
    out = {}
    out["seed"] = int(_require(data, "seed", int, "")) if "seed" in data else cfg.seed
    kind_str = data.get("kind", cfg.kind.value)
    try:
        out["kind"] = FlowKind(kind_str)
    except ValueError as exc:
        raise ConfigError(f"config field 'kind' has unknown value {kind_str!r}") from exc

    fluid = data.get("fluid", {})
    if not isinstance(fluid, dict):
        raise ConfigError("config field 'fluid' must be an object")
    try:
        out["fluid"] = FluidParams(
            nu=float(fluid.get("nu", cfg.fluid.nu)),
            length=float(fluid.get("length", cfg.fluid.length)),
            height=float(fluid.get("height", cfg.fluid.height)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config field 'fluid': {exc}") from exc

    sol = data.get("solver", {})
    if not isinstance(sol, dict):
        raise ConfigError("config field 'solver' must be an object")
    grid = sol.get("grid", list(cfg.solver.grid_dims))
    if (not isinstance(grid, list) or len(grid) != 2
            or not all(isinstance(g, int) and g >= 8 for g in grid)):
        raise ConfigError("config field 'solver.grid' must be [H, W] with H, W >= 8")
    try:
        out["solver"] = SolverParams(
            grid_dims=(grid[0], grid[1]),
            cfl=float(sol.get("cfl", cfg.solver.cfl)),
            p_tol=float(sol.get("p_tol", cfg.solver.p_tol)),
            p_rel_tol=float(sol.get("p_rel_tol", cfg.solver.p_rel_tol)),
            u_tol=float(sol.get("u_tol", cfg.solver.u_tol)),
            max_cg_iters=int(sol.get("max_cg_iters", cfg.solver.max_cg_iters)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config field 'solver': {exc}") from exc

    obst = data.get("obstacles", {})
    if not isinstance(obst, dict):
        raise ConfigError("config field 'obstacles' must be an object")
    size = obst.get("size", list(cfg.obstacle_size))
    if not isinstance(size, list) or len(size) != 2:
        raise ConfigError("config field 'obstacles.size' must be [lo, hi]")
    out["obstacle_size"] = (float(size[0]), float(size[1]))
    out["margin_min"] = float(obst.get("margin_min", cfg.margin_min))
    out["gap_min"] = float(obst.get("gap_min", cfg.gap_min))
    out["max_attempts"] = int(obst.get("max_attempts", cfg.max_attempts))

    bands = data.get("re_bands", {})
    if not isinstance(bands, dict):
        raise ConfigError("config field 're_bands' must be an object")
    out_bands = dict(cfg.re_bands)
    for name, spec in bands.items():
        try:
            out_bands[name] = ReBand.from_json(spec)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"config field 're_bands.{name}': {exc}") from exc
    out["re_bands"] = out_bands

    workers = data.get("workers", cfg.workers)
    if workers is not None and not isinstance(workers, int):
        raise ConfigError("config field 'workers' must be an integer or null")
    out["workers"] = workers
    out["out_root"] = str(data.get("out_root", cfg.out_root))
    return RunConfig(**out)
