"""Incompressible Navier-Stokes on a staggered (MAC) grid.

Grid layout for an (H, W)-cell domain of size (Lx, Ly):

    p[j, i]  cell centers,          shape (H, W),   x=(i+0.5)dx, y=(j+0.5)dy
    u[j, i]  x-normal face values,  shape (H, W+1), x=i*dx,      y=(j+0.5)dy
    v[j, i]  y-normal face values,  shape (H+1, W), x=(i+0.5)dx, y=j*dy

j = 0 is the bottom row. On the MAC grid the discrete divergence and
gradient are adjoint, so the pressure projection drives the divergence
of every accepted step below a fixed scaled bound (1e-6 by default).

Time integration is an incremental pressure projection: explicit
second-order upwind-biased convection, implicit backward-Euler
diffusion (CG, matrix-free), then a pressure-increment Poisson solve
(PCG + DIC) and a velocity correction. Boundary conditions:

    FPO: parabolic inlet on the west face, fixed-value (gauge zero)
         pressure outlet on the east face, no-slip top/bottom walls.
    LDC: no-slip on three walls, u = u_lid on the top boundary.

Obstacle cells are removed by direct forcing: every velocity face
touching a solid cell is held at zero and the pressure stencil closes
with a Neumann condition at solid interfaces.
"""

from __future__ import annotations

import socket
import time
from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from ..cost import CostRecord
from ..errors import DisconnectedDomain, OutOfRange, PressureDiverged
from ..geometry import BinaryMask, ObstacleSet, SdfField, compute_sdf, rasterize_mask
from ..physics import (
    BoundarySetup,
    FlowKind,
    FluidParams,
    Schedule,
    inlet_profile,
    schedule_end_time,
)
from ..trajio import CHANNELS, Trajectory, TrajectoryMeta, center_faces
from .poisson import PoissonSolver

__all__ = [
    "SolverParams",
    "FlowState",
    "CaseSetup",
    "DIV_TOL",
    "build_case",
    "initial_state",
    "suggest_dt",
    "step",
    "divergence",
    "run_simulation",
    "kinetic_energy",
    "project_velocity",
]

#: scaled-divergence bound enforced after every accepted step
DIV_TOL = 1e-6
#: fraction of DIV_TOL targeted by the in-step pressure solve
_DIV_SAFETY = 0.5


@dataclass(frozen=True)
class SolverParams:
    grid_dims: tuple[int, int] = (128, 128)  # (H, W) cells
    cfl: float = 0.5
    p_tol: float = 1e-6  # pressure residual, relative to ||rhs||
    p_rel_tol: float = 0.05  # pressure residual reduction per solve
    u_tol: float = 1e-5  # momentum residual tolerance
    max_cg_iters: int = 5000
    div_tol: float = DIV_TOL  # scaled-divergence bound after each step

    def __post_init__(self):
        if not 0 < self.cfl <= 1:
            raise OutOfRange("cfl must be in (0, 1]")
        if min(self.p_tol, self.p_rel_tol, self.u_tol, self.div_tol) <= 0:
            raise OutOfRange("tolerances must be positive")


@dataclass(frozen=True)
class FlowState:
    u: np.ndarray  # (H, W+1)
    v: np.ndarray  # (H+1, W)
    p: np.ndarray  # (H, W), kinematic pressure
    t: float


@dataclass
class CaseSetup:
    kind: FlowKind
    mask: BinaryMask
    sdf: SdfField
    boundary: BoundarySetup
    schedule: Schedule
    fluid: FluidParams
    solver: SolverParams
    seed: int
    obstacles: ObstacleSet
    # derived, assembled by build_case
    u_free: np.ndarray  # (H, W+1) faces carrying momentum unknowns
    v_free: np.ndarray  # (H+1, W)
    u_inlet: np.ndarray  # (H,) inlet profile at u-face centers (FPO; zeros LDC)
    u_lid: float  # lid speed (LDC; 0 for FPO)
    u_ref: float  # velocity scale for CFL and divergence scaling
    poisson: PoissonSolver

    @property
    def dims(self) -> tuple[int, int]:
        return self.mask.grid.shape

    @property
    def dx(self) -> float:
        return self.mask.cell_size[0]

    @property
    def dy(self) -> float:
        return self.mask.cell_size[1]


def build_case(
    obs: ObstacleSet,
    boundary: BoundarySetup,
    fluid: FluidParams,
    solver: SolverParams,
) -> CaseSetup:
    """Assemble the grid, masks, schedule, and pressure solver for one run."""
    h, w = solver.grid_dims
    mask = rasterize_mask(obs, (h, w))
    _check_connected(mask, boundary.kind)
    sdf = compute_sdf(mask)
    schedule = schedule_end_time(boundary.re, fluid)
    fl = mask.grid

    # faces touching a solid cell are blocked (direct forcing)
    u_blocked = np.zeros((h, w + 1), dtype=bool)
    u_blocked[:, 1:w] = ~fl[:, :-1] | ~fl[:, 1:]
    u_blocked[:, 0] = ~fl[:, 0]
    u_blocked[:, w] = ~fl[:, -1]
    v_blocked = np.zeros((h + 1, w), dtype=bool)
    v_blocked[1:h, :] = ~fl[:-1, :] | ~fl[1:, :]
    v_blocked[0, :] = ~fl[0, :]
    v_blocked[h, :] = ~fl[-1, :]

    u_free = ~u_blocked
    v_free = ~v_blocked
    u_free[:, 0] = False  # inlet (FPO) or west wall (LDC)
    v_free[0, :] = False
    v_free[-1, :] = False
    if boundary.kind is FlowKind.LDC:
        u_free[:, -1] = False  # east wall; lid acts through ghost rows

    dy = mask.cell_size[1]
    if boundary.kind is FlowKind.FPO:
        y_centers = (np.arange(h) + 0.5) * dy
        u_inlet = inlet_profile(boundary.speed, fluid.height, y_centers)
        u_inlet = np.where(fl[:, 0], u_inlet, 0.0)
        u_lid = 0.0
    else:
        u_inlet = np.zeros(h)
        u_lid = boundary.speed

    poisson = PoissonSolver(mask, outlet_east=boundary.kind is FlowKind.FPO)
    # zero-forcing control cases fall back to a viscous velocity scale
    u_ref = boundary.speed if boundary.speed > 0 else fluid.nu / fluid.length
    return CaseSetup(
        kind=boundary.kind,
        mask=mask,
        sdf=sdf,
        boundary=boundary,
        schedule=schedule,
        fluid=fluid,
        solver=solver,
        seed=obs.seed,
        obstacles=obs,
        u_free=u_free,
        v_free=v_free,
        u_inlet=u_inlet,
        u_lid=u_lid,
        u_ref=u_ref,
        poisson=poisson,
    )


def _check_connected(mask: BinaryMask, kind: FlowKind) -> None:
    fl = mask.grid
    labels, num = ndimage.label(fl)
    if num != 1:
        raise DisconnectedDomain(f"fluid region splits into {num} components")
    if kind is FlowKind.FPO and not (fl[:, 0].any() and fl[:, -1].any()):
        raise DisconnectedDomain("fluid region does not reach inlet and outlet")


def _apply_bc(u: np.ndarray, v: np.ndarray, case: CaseSetup) -> None:
    """Impose Dirichlet values on all non-free faces, in place."""
    u[~case.u_free] = 0.0
    v[~case.v_free] = 0.0
    if case.kind is FlowKind.FPO:
        u[:, 0] = case.u_inlet


def initial_state(case: CaseSetup) -> FlowState:
    """Interior at rest; boundary values imposed."""
    h, w = case.dims
    u = np.zeros((h, w + 1))
    v = np.zeros((h + 1, w))
    _apply_bc(u, v, case)
    return FlowState(u, v, np.zeros((h, w)), 0.0)


def suggest_dt(state: FlowState, case: CaseSetup) -> float:
    """Advective CFL bound combining both directions, floored by u_ref."""
    mu = max(float(np.abs(state.u).max()), case.u_ref)
    mv = float(np.abs(state.v).max())
    return case.solver.cfl / (mu / case.dx + mv / case.dy)


# ---------------------------------------------------------------------------
# spatial operators


def _pad_u(u: np.ndarray, case: CaseSetup, homogeneous: bool) -> np.ndarray:
    """u with ghost rows/columns encoding the tangential wall conditions.

    Bottom wall mirrors to -u; the top ghost is 2*u_lid - u for the lid
    (LDC) and -u for a wall (FPO). The column beyond the outlet copies
    the outlet face (zero gradient); the column before the inlet is
    never read by free-face stencils and only pads the array.
    """
    h, wp = u.shape
    up = np.empty((h + 2, wp + 2))
    up[1:-1, 1:-1] = u
    up[0, 1:-1] = -u[0, :]
    lid = 0.0 if homogeneous else 2.0 * case.u_lid
    up[-1, 1:-1] = lid - u[-1, :]
    up[1:-1, 0] = u[:, 0]
    if case.kind is FlowKind.FPO:
        up[1:-1, -1] = u[:, -1]
    else:
        up[1:-1, -1] = -u[:, -1]
    up[0, 0] = up[0, 1]
    up[0, -1] = up[0, -2]
    up[-1, 0] = up[-1, 1]
    up[-1, -1] = up[-1, -2]
    return up


def _pad_v(v: np.ndarray, case: CaseSetup) -> np.ndarray:
    """v with ghost columns: -v past the solid walls and the inlet
    (where v = 0 on the boundary), copy past the outlet (zero gradient).
    Top/bottom rows are stored faces, padded by replication (unused)."""
    hp, w = v.shape
    vp = np.empty((hp + 2, w + 2))
    vp[1:-1, 1:-1] = v
    vp[1:-1, 0] = -v[:, 0]
    if case.kind is FlowKind.FPO:
        vp[1:-1, -1] = v[:, -1]
    else:
        vp[1:-1, -1] = -v[:, -1]
    vp[0, :] = vp[1, :]
    vp[-1, :] = vp[-2, :]
    return vp


def _helmholtz_u(u: np.ndarray, coef: float, case: CaseSetup,
                 homogeneous: bool) -> np.ndarray:
    """(I - coef * lap) u on u-faces with ghost closures."""
    up = _pad_u(u, case, homogeneous)
    dx2, dy2 = case.dx**2, case.dy**2
    lap = ((up[1:-1, 2:] - 2.0 * u + up[1:-1, :-2]) / dx2
           + (up[2:, 1:-1] - 2.0 * u + up[:-2, 1:-1]) / dy2)
    return u - coef * lap


def _helmholtz_v(v: np.ndarray, coef: float, case: CaseSetup) -> np.ndarray:
    vp = _pad_v(v, case)
    dx2, dy2 = case.dx**2, case.dy**2
    lap = ((vp[1:-1, 2:] - 2.0 * v + vp[1:-1, :-2]) / dx2
           + (vp[2:, 1:-1] - 2.0 * v + vp[:-2, 1:-1]) / dy2)
    return v - coef * lap


def _upwind_derivative(f: np.ndarray, adv: np.ndarray, axis: int, spacing: float,
                       minus_ghost: np.ndarray, plus_ghost: np.ndarray) -> np.ndarray:
    """Second-order upwind-biased derivative of f along `axis`.

    `minus_ghost`/`plus_ghost` are single ghost lines beyond each end;
    the scheme drops to first order where the second upstream point
    would leave the array.
    """
    f1m = np.concatenate([np.expand_dims(minus_ghost, axis),
                          _slice_drop(f, axis, -1)], axis)
    f1p = np.concatenate([_slice_drop(f, axis, +1),
                          np.expand_dims(plus_ghost, axis)], axis)
    f2m = np.concatenate([_take_line(f1m, axis, 0), _slice_drop(f1m, axis, -1)], axis)
    f2p = np.concatenate([_slice_drop(f1p, axis, +1), _take_line(f1p, axis, -1)], axis)

    n = f.shape[axis]
    idx = np.arange(n)
    shape = [1, 1]
    shape[axis] = n
    idx = idx.reshape(shape)

    sou_m = (3.0 * f - 4.0 * f1m + f2m) / (2.0 * spacing)
    fou_m = (f - f1m) / spacing
    d_m = np.where(idx >= 2, sou_m, fou_m)
    sou_p = (-3.0 * f + 4.0 * f1p - f2p) / (2.0 * spacing)
    fou_p = (f1p - f) / spacing
    d_p = np.where(idx <= n - 3, sou_p, fou_p)
    return np.where(adv >= 0.0, d_m, d_p)


def _slice_drop(f: np.ndarray, axis: int, direction: int) -> np.ndarray:
    # drop the last (direction=-1) or first (direction=+1) line along axis
    sl = [slice(None), slice(None)]
    sl[axis] = slice(None, -1) if direction < 0 else slice(1, None)
    return f[tuple(sl)]


def _take_line(f: np.ndarray, axis: int, index: int) -> np.ndarray:
    sl = [slice(None), slice(None)]
    sl[axis] = slice(index, index + 1) if index >= 0 else slice(index, None)
    return f[tuple(sl)]


def _convect_u(u: np.ndarray, v: np.ndarray, case: CaseSetup) -> np.ndarray:
    """u du/dx + vbar du/dy at u-faces, second-order upwind-biased."""
    h, wp = u.shape
    vp = _pad_v(v, case)
    vbar = 0.25 * (vp[1:-2, :-1] + vp[1:-2, 1:] + vp[2:-1, :-1] + vp[2:-1, 1:])
    # x ghosts: inlet side never read at free faces, outlet side zero-gradient
    west = u[:, 0]
    east = u[:, -1] if case.kind is FlowKind.FPO else -u[:, -1]
    dudx = _upwind_derivative(u, u, 1, case.dx, west, east)
    south = -u[0, :]
    north = 2.0 * case.u_lid - u[-1, :]
    dudy = _upwind_derivative(u, vbar, 0, case.dy, south, north)
    return u * dudx + vbar * dudy


def _convect_v(u: np.ndarray, v: np.ndarray, case: CaseSetup) -> np.ndarray:
    """ubar dv/dx + v dv/dy at v-faces, second-order upwind-biased."""
    up = _pad_u(u, case, homogeneous=False)
    ubar = 0.25 * (up[:-1, 1:-2] + up[:-1, 2:-1] + up[1:, 1:-2] + up[1:, 2:-1])
    west = -v[:, 0]
    east = v[:, -1] if case.kind is FlowKind.FPO else -v[:, -1]
    dvdx = _upwind_derivative(v, ubar, 1, case.dx, west, east)
    south = v[0, :]
    north = v[-1, :]
    dvdy = _upwind_derivative(v, v, 0, case.dy, south, north)
    return ubar * dvdx + v * dvdy


def _grad_p(p: np.ndarray, case: CaseSetup) -> tuple[np.ndarray, np.ndarray]:
    """Pressure gradient on free faces; zero elsewhere.

    The outlet column uses the fixed-value ghost (-p), keeping the face
    pressure at the gauge zero.
    """
    h, w = p.shape
    gu = np.zeros((h, w + 1))
    gu[:, 1:w] = (p[:, 1:] - p[:, :-1]) / case.dx
    if case.kind is FlowKind.FPO:
        gu[:, w] = -2.0 * p[:, -1] / case.dx
    gu[~case.u_free] = 0.0
    gv = np.zeros((h + 1, w))
    gv[1:h, :] = (p[1:, :] - p[:-1, :]) / case.dy
    gv[~case.v_free] = 0.0
    return gu, gv


def divergence(state: FlowState, mask: BinaryMask) -> np.ndarray:
    """Staggered divergence per cell; zero on solid cells."""
    dx, dy = mask.cell_size
    div = ((state.u[:, 1:] - state.u[:, :-1]) / dx
           + (state.v[1:, :] - state.v[:-1, :]) / dy)
    div[~mask.grid] = 0.0
    return div


def kinetic_energy(state: FlowState, case: CaseSetup) -> float:
    """0.5 * integral of |u|^2, face-sampled."""
    cell = case.dx * case.dy
    return 0.5 * cell * (float(np.sum(state.u**2)) + float(np.sum(state.v**2)))


# ---------------------------------------------------------------------------
# linear solves and time stepping


def _cg_helmholtz(apply_hom, r0: np.ndarray, free: np.ndarray, tol_l2: float,
                  max_iters: int) -> tuple[np.ndarray, int]:
    """Plain CG for the SPD Helmholtz operator restricted to free faces."""
    x = np.zeros_like(r0)
    r = np.where(free, r0, 0.0)
    rs = float(np.sum(r * r))
    if np.sqrt(rs) <= tol_l2:
        return x, 0
    p = r.copy()
    it = 0
    while it < max_iters:
        ap = apply_hom(p)
        ap[~free] = 0.0
        pap = float(np.sum(p * ap))
        if pap <= 0.0:
            break
        alpha = rs / pap
        x += alpha * p
        r -= alpha * ap
        rs_new = float(np.sum(r * r))
        it += 1
        if np.sqrt(rs_new) <= tol_l2:
            return x, it
        p = r + (rs_new / rs) * p
        rs = rs_new
    return x, it


def _momentum_tol(case: CaseSetup, b: np.ndarray, free: np.ndarray) -> float:
    scale = case.u_ref * np.sqrt(max(int(free.sum()), 1))
    return case.solver.u_tol * max(float(np.linalg.norm(b[free])), scale)


def _step_impl(state: FlowState, case: CaseSetup, dt: float,
               phi0: np.ndarray | None = None):
    """One projection step; returns (new state, stats, phi).

    stats is (pressure PCG iterations, momentum CG iterations). phi0
    warm-starts the pressure-increment solve (run_simulation threads the
    previous increment through; the converged state is tolerance-bounded
    either way).
    """
    sp = case.solver
    coef = case.fluid.nu * dt

    conv_u = _convect_u(state.u, state.v, case)
    conv_v = _convect_v(state.u, state.v, case)
    gpu, gpv = _grad_p(state.p, case)

    b_u = state.u - dt * (conv_u + gpu)
    b_v = state.v - dt * (conv_v + gpv)

    # implicit diffusion: solve (I - nu dt lap) u* = b on free faces,
    # Dirichlet values held by correcting from the current state
    r_u = b_u - _helmholtz_u(state.u, coef, case, homogeneous=False)
    du, it_u = _cg_helmholtz(
        lambda q: _helmholtz_u(q, coef, case, homogeneous=True),
        r_u, case.u_free, _momentum_tol(case, b_u, case.u_free), sp.max_cg_iters,
    )
    u_star = state.u + du
    r_v = b_v - _helmholtz_v(state.v, coef, case)
    dv, it_v = _cg_helmholtz(
        lambda q: _helmholtz_v(q, coef, case),
        r_v, case.v_free, _momentum_tol(case, b_v, case.v_free), sp.max_cg_iters,
    )
    v_star = state.v + dv
    _apply_bc(u_star, v_star, case)

    # pressure increment: lap(phi) = div(u*) / dt
    rhs = divergence(FlowState(u_star, v_star, state.p, state.t), case.mask) / dt
    fl = case.mask.grid
    if case.kind is FlowKind.LDC:
        rhs[fl] -= rhs[fl].mean()
    h_min = min(case.dx, case.dy)
    tol_inf = _DIV_SAFETY * sp.div_tol * case.u_ref / (dt * h_min)
    phi, it_p = case.poisson.solve(
        rhs,
        tol_rel=sp.p_rel_tol,
        tol_inf=tol_inf,
        max_iters=sp.max_cg_iters,
        x0=phi0,
    )

    g_phi_u, g_phi_v = _grad_p(phi, case)
    u_new = u_star - dt * g_phi_u
    v_new = v_star - dt * g_phi_v
    _apply_bc(u_new, v_new, case)
    p_new = state.p + phi
    if case.kind is FlowKind.LDC:
        p_new = p_new.copy()
        p_new[fl] -= p_new[fl].mean()
        p_new[~fl] = 0.0

    new_state = FlowState(u_new, v_new, p_new, state.t + dt)
    return new_state, (it_p, it_u + it_v), phi


def step(state: FlowState, case: CaseSetup, dt: float) -> FlowState:
    """Advance one time step of size dt (caller owns the CFL bound)."""
    new_state, _, _ = _step_impl(state, case, dt)
    return new_state


def project_velocity(state: FlowState, case: CaseSetup) -> FlowState:
    """Project (u, v) onto the discretely divergence-free space.

    Boundary values are imposed first; used to build admissible states
    for property tests.
    """
    u = state.u.copy()
    v = state.v.copy()
    _apply_bc(u, v, case)
    rhs = divergence(FlowState(u, v, state.p, state.t), case.mask)
    fl = case.mask.grid
    if case.kind is FlowKind.LDC:
        rhs[fl] -= rhs[fl].mean()
    h_min = min(case.dx, case.dy)
    tol_inf = _DIV_SAFETY * case.solver.div_tol * case.u_ref / h_min
    phi, _ = case.poisson.solve(
        rhs, tol_l2=np.inf, tol_inf=tol_inf,
        max_iters=case.solver.max_cg_iters,
    )
    gu, gv = _grad_p(phi, case)
    u -= gu
    v -= gv
    _apply_bc(u, v, case)
    return FlowState(u, v, state.p.copy(), state.t)


def _frame_from_state(state: FlowState, case: CaseSetup) -> np.ndarray:
    """Assemble one (H, W, 6) cell-centered frame; p gauge zero-mean."""
    h, w = case.dims
    fl = case.mask.grid
    u_cc, v_cc = center_faces(state.u, state.v)
    p = state.p.copy()
    p[fl] -= p[fl].mean()
    p[~fl] = 0.0
    frame = np.empty((h, w, len(CHANNELS)), dtype=np.float32)
    frame[:, :, 0] = u_cc
    frame[:, :, 1] = v_cc
    frame[:, :, 2] = p
    frame[:, :, 3] = case.boundary.re / 10000.0
    frame[:, :, 4] = fl.astype(np.float32)
    frame[:, :, 5] = case.sdf.grid
    return frame


def run_simulation(case: CaseSetup, sim_id: str | None = None) -> tuple[Trajectory, CostRecord]:
    """Run the schedule, sampling frames at the write times.

    Steps are CFL-limited and shortened to land exactly on each write
    time, so the 20 frames are the states at k * write_interval. The
    returned cost record carries wall time (stepping only), step count,
    and total linear-solver iterations; fields are deterministic for a
    fixed case, timings are not.
    """
    sched = case.schedule
    h, w = case.dims
    state = initial_state(case)
    frames = np.empty((sched.n_frames, h, w, len(CHANNELS)), dtype=np.float32)
    div_history = []
    steps = 0
    iters_total = 0
    h_min = min(case.dx, case.dy)
    phi = None
    dt_prev = None

    t_start = time.perf_counter()
    try:
        for k in range(1, sched.n_frames + 1):
            t_write = k * sched.write_interval
            while state.t < t_write - 1e-9 * sched.write_interval:
                dt = suggest_dt(state, case)
                remaining = t_write - state.t
                snapped = dt >= remaining * (1.0 - 1e-12)
                if snapped:
                    dt = remaining
                # warm-start guess: the increment scales roughly with dt
                phi0 = None if phi is None else phi * (dt / dt_prev)
                state, (it_p, it_uv), phi = _step_impl(state, case, dt, phi0=phi0)
                dt_prev = dt
                if snapped:
                    state = replace(state, t=t_write)
                steps += 1
                iters_total += it_p + it_uv
            frames[k - 1] = _frame_from_state(state, case)
            div = divergence(state, case.mask)
            div_history.append(float(np.abs(div).max()) * h_min / case.u_ref)
    except PressureDiverged as exc:
        # abort, but hand the caller what the run cost so far
        exc.partial_record = CostRecord(
            sim_id=sim_id or f"{case.kind.value}-{case.seed:016x}",
            axis="", tier="",
            obstacle_count=len(case.obstacles),
            re=case.boundary.re,
            wall_seconds=max(time.perf_counter() - t_start, 1e-9),
            steps=steps,
            cg_iters_total=iters_total,
            host=socket.gethostname(),
        )
        raise
    wall = time.perf_counter() - t_start

    meta = TrajectoryMeta(
        kind=case.kind.value,
        re=case.boundary.re,
        seed=case.seed,
        t_end=sched.t_end,
        write_interval=sched.write_interval,
        n_frames=sched.n_frames,
        gamma=sched.gamma,
        extras={
            "wall_seconds": wall,
            "steps": steps,
            "cg_iters_total": iters_total,
            "max_scaled_divergence": div_history,
            "grid": (h, w),
            "obstacle_count": len(case.obstacles),
        },
    )
    traj = Trajectory(frames, meta)
    record = CostRecord(
        sim_id=sim_id or meta.sim_id,
        axis="",
        tier="",
        obstacle_count=len(case.obstacles),
        re=case.boundary.re,
        wall_seconds=wall,
        steps=steps,
        cg_iters_total=iters_total,
        host=socket.gethostname(),
    )
    return traj, record
