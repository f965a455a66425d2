"""Pressure Poisson solver: PCG with a DIC preconditioner.

The discrete operator is the 5-point Laplacian over fluid cells with a
Neumann closure at every solid interface and outer wall; channel cases
additionally close the last column with a fixed-value (gauge zero)
pressure face at the outlet, which makes the matrix nonsingular. The
cavity matrix is singular with the constant null space, handled by
deflation (rhs and residuals are kept zero-mean).

The preconditioner is incomplete Cholesky by diagonal modification on
the 5-point stencil (DIC): off-diagonals of A are kept, the diagonal is
recomputed so the factorization has the same sparsity as A. If a
non-positive pivot shows up (possible near isolated fluid cells) the
solver falls back to Jacobi.
"""

from __future__ import annotations

import numpy as np
from numba import njit
from scipy import sparse

from ..errors import IncompatibleRhs, PressureDiverged
from ..geometry import BinaryMask

__all__ = ["PoissonSolver", "solve_pressure_poisson"]


_FASTMATH = {"reassoc", "contract", "nsz", "arcp"}


@njit(cache=True)
def _dic_diagonal(indptr, indices, data, n):
    """Modified diagonal of the DIC factorization; ok=False on bad pivot."""
    d = np.zeros(n)
    for i in range(n):
        for k in range(indptr[i], indptr[i + 1]):
            if indices[k] == i:
                d[i] = data[k]
    for i in range(n):
        for k in range(indptr[i], indptr[i + 1]):
            j = indices[k]
            if j < i:
                d[i] -= data[k] * data[k] / d[j]
        if d[i] <= 0.0:
            return d, False
    return d, True


@njit(cache=True, fastmath=_FASTMATH)
def _apply_dic(indptr, indices, data, d, r, z):
    """z = M^{-1} r with M = (D~ + L) D~^{-1} (D~ + L^T)."""
    n = r.shape[0]
    for i in range(n):
        s = r[i]
        for k in range(indptr[i], indptr[i + 1]):
            j = indices[k]
            if j < i:
                s -= data[k] * z[j]
        z[i] = s / d[i]
    for i in range(n):
        z[i] *= d[i]
    for i in range(n - 1, -1, -1):
        s = z[i]
        for k in range(indptr[i], indptr[i + 1]):
            j = indices[k]
            if j > i:
                s -= data[k] * z[j]
        z[i] = s / d[i]


@njit(cache=True, fastmath=_FASTMATH)
def _matvec(indptr, indices, data, x, out):
    for i in range(out.shape[0]):
        s = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            s += data[k] * x[indices[k]]
        out[i] = s


@njit(cache=True, fastmath=_FASTMATH)
def _pcg(indptr, indices, data, b, x, precond_diag, use_dic, jacobi_diag,
         tol_l2, tol_rel, tol_inf, max_iters, deflate):
    """Preconditioned CG on SPD A; x holds the solution on return.

    Converged when ||r||_2 <= max(tol_l2, tol_rel * ||r0||_2) and
    ||r||_inf <= tol_inf.
    Returns (iterations, converged flag, final ||r||_2, final ||r||_inf).
    """
    n = b.shape[0]
    r = np.empty(n)
    z = np.empty(n)
    p = np.empty(n)
    ap = np.empty(n)

    _matvec(indptr, indices, data, x, ap)
    for i in range(n):
        r[i] = b[i] - ap[i]
    if deflate:
        m = r.mean()
        for i in range(n):
            r[i] -= m

    r2 = 0.0
    rinf = 0.0
    for i in range(n):
        r2 += r[i] * r[i]
        a = abs(r[i])
        if a > rinf:
            rinf = a
    r2 = np.sqrt(r2)
    tol_eff = max(tol_l2, tol_rel * r2)
    if r2 <= tol_eff and rinf <= tol_inf:
        return 0, True, r2, rinf

    if use_dic:
        _apply_dic(indptr, indices, data, precond_diag, r, z)
    else:
        for i in range(n):
            z[i] = r[i] / jacobi_diag[i]
    for i in range(n):
        p[i] = z[i]
    rz = 0.0
    for i in range(n):
        rz += r[i] * z[i]

    it = 0
    while it < max_iters:
        _matvec(indptr, indices, data, p, ap)
        pap = 0.0
        for i in range(n):
            pap += p[i] * ap[i]
        if pap <= 0.0:
            break  # search direction in the null space: nothing left to do
        alpha = rz / pap
        for i in range(n):
            x[i] += alpha * p[i]
            r[i] -= alpha * ap[i]
        if deflate:
            m = r.mean()
            for i in range(n):
                r[i] -= m
        it += 1
        r2 = 0.0
        rinf = 0.0
        for i in range(n):
            r2 += r[i] * r[i]
            a = abs(r[i])
            if a > rinf:
                rinf = a
        r2 = np.sqrt(r2)
        if r2 <= tol_eff and rinf <= tol_inf:
            return it, True, r2, rinf
        if use_dic:
            _apply_dic(indptr, indices, data, precond_diag, r, z)
        else:
            for i in range(n):
                z[i] = r[i] / jacobi_diag[i]
        rz_new = 0.0
        for i in range(n):
            rz_new += r[i] * z[i]
        beta = rz_new / rz
        for i in range(n):
            p[i] = z[i] + beta * p[i]
        rz = rz_new
    return it, (r2 <= tol_eff and rinf <= tol_inf), r2, rinf


class PoissonSolver:
    """Assembled negative Laplacian over fluid cells plus its DIC factor.

    With ``outlet_east=True`` the east face of every last-column fluid
    cell carries a fixed-value (zero) pressure, matching a channel
    outlet; otherwise the operator is all-Neumann and singular, and
    solves are deflated against the constant mode.
    """

    def __init__(self, mask: BinaryMask, outlet_east: bool = False):
        fluid = mask.grid
        h, w = fluid.shape
        dx, dy = mask.cell_size
        self.mask = mask
        self.outlet_east = outlet_east
        self.shape = (h, w)

        index = np.full((h, w), -1, dtype=np.int64)
        index[fluid] = np.arange(fluid.sum())
        self.index = index
        self.n = int(fluid.sum())
        self._fluid = fluid

        ax, ay = 1.0 / dx**2, 1.0 / dy**2
        rows: list[int] = []
        cols: list[int] = []
        vals: list[float] = []
        jj, ii = np.nonzero(fluid)
        for j, i in zip(jj.tolist(), ii.tolist()):
            c = index[j, i]
            diag = 0.0
            for dj, di, a in ((0, -1, ax), (0, 1, ax), (-1, 0, ay), (1, 0, ay)):
                nj, ni = j + dj, i + di
                if 0 <= nj < h and 0 <= ni < w:
                    if fluid[nj, ni]:
                        rows.append(c)
                        cols.append(int(index[nj, ni]))
                        vals.append(-a)  # negated Laplacian, SPD
                        diag += a
                    # solid neighbor: Neumann closure, no contribution
                elif outlet_east and di == 1 and ni == w:
                    diag += 2.0 * a  # fixed-value outlet face: ghost = -p
                # outer wall otherwise: Neumann closure
            rows.append(c)
            cols.append(c)
            vals.append(diag)
        a_mat = sparse.csr_matrix(
            (np.array(vals), (np.array(rows), np.array(cols))),
            shape=(self.n, self.n),
        )
        a_mat.sort_indices()
        self._a = a_mat
        self.singular = not outlet_east

        if self.singular:
            # tiny diagonal shift inside the preconditioner only, so the
            # incomplete factorization of the semidefinite matrix stays SPD;
            # the off-diagonals (all _apply_dic reads besides the pivots)
            # are unchanged
            shift = 1e-8 * float(np.mean(a_mat.diagonal()))
            a_pre = (a_mat + sparse.identity(self.n, format="csr") * shift).tocsr()
            a_pre.sort_indices()
        else:
            a_pre = a_mat
        d, ok = _dic_diagonal(a_pre.indptr, a_pre.indices, a_pre.data, self.n)
        self.use_dic = bool(ok)
        self._dic_diag = d if ok else np.ones(self.n)
        self._jacobi = np.maximum(a_mat.diagonal(), 1e-300)

    def solve(
        self,
        rhs: np.ndarray,
        *,
        tol_l2: float = 0.0,
        tol_rel: float = 0.0,
        tol_inf: float = np.inf,
        max_iters: int = 5000,
        x0: np.ndarray | None = None,
    ) -> tuple[np.ndarray, int]:
        """Solve lap(p) = rhs (fields shaped like the mask; solid cells 0).

        tol_l2 is an absolute L2 residual target, tol_rel a reduction
        factor on the solve's own initial residual, tol_inf an absolute
        max-norm target. Raises PressureDiverged when the iteration cap
        is reached first.
        """
        b = -rhs[self._fluid].astype(np.float64)  # negated operator
        if self.singular:
            b = b - b.mean()
        if x0 is None:
            x = np.zeros(self.n)
        else:
            x = x0[self._fluid].astype(np.float64, copy=True)
        a = self._a
        iters, ok, r2, rinf = _pcg(
            a.indptr, a.indices, a.data,
            b, x, self._dic_diag, self.use_dic, self._jacobi,
            tol_l2, tol_rel, min(tol_inf, 1e300), max_iters, self.singular,
        )
        if not ok:
            raise PressureDiverged(
                f"pressure PCG stopped at {iters} iterations "
                f"(|r|_2={r2:.3e}, |r|_inf={rinf:.3e})"
            )
        if self.singular:
            x -= x.mean()
        out = np.zeros(self.shape)
        out[self._fluid] = x
        return out, iters

    def residual(self, p: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        """rhs - lap(p) over fluid cells, returned as a field."""
        lap_p = -(self._a @ p[self._fluid])
        out = np.zeros(self.shape)
        out[self._fluid] = rhs[self._fluid] - lap_p
        return out


def solve_pressure_poisson(rhs: np.ndarray, mask: BinaryMask, params) -> np.ndarray:
    """All-Neumann Poisson solve with the zero-mean gauge.

    ``rhs`` must satisfy the compatibility condition (zero mean over
    fluid cells to 1e-10 relative); the returned pressure has zero mean
    over fluid cells and residual norm <= p_tol * ||rhs||.
    """
    fluid = mask.grid
    vals = rhs[fluid]
    l1 = float(np.abs(vals).sum())
    if l1 > 0 and abs(float(vals.sum())) > 1e-10 * l1:
        raise IncompatibleRhs(
            f"rhs mean {vals.mean():.3e} violates compatibility"
        )
    solver = PoissonSolver(mask, outlet_east=False)
    b2 = float(np.linalg.norm(vals))
    p, _ = solver.solve(
        rhs,
        tol_l2=params.p_tol * b2 if b2 > 0 else 0.0,
        max_iters=params.max_cg_iters,
    )
    return p
