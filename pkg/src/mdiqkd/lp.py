"""Small linear programs over a box with a few extra linear constraints.

Problem form::

    minimize    c @ x + c0
    subject to  lb <= x <= ub
                A_eq @ x == b_eq
                lo <= A_rng @ x <= hi

The default backend enumerates every basic solution of the constraint set,
which is exact and deterministic for the handful of variables used by the
decoy estimate. ``b_eq``, ``lo``, ``hi`` and ``c0`` may carry a leading batch
axis so a whole scan grid is solved in one call. A HiGHS backend from SciPy
solves the same problem one instance at a time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations, product
from typing import List, Optional, Sequence, Tuple

import numpy as np


class LPInfeasible(RuntimeError):
    """No point satisfies all constraints; ``violated`` names the culprits."""

    def __init__(self, message: str, violated: Sequence[str] = ()):
        super().__init__(message)
        self.violated = list(violated)


@dataclass(frozen=True)
class LinearProgram:
    c: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    A_rng: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    c0: np.ndarray = field(default_factory=lambda: np.zeros(()))
    names: Tuple[str, ...] = ()
    eq_names: Tuple[str, ...] = ()
    rng_names: Tuple[str, ...] = ()

    @property
    def n(self) -> int:
        return len(self.c)

    @property
    def batch_shape(self) -> Tuple[int, ...]:
        shapes = [np.shape(self.b_eq)[:-1], np.shape(self.lo)[:-1], np.shape(self.hi)[:-1], np.shape(self.c0)]
        return np.broadcast_shapes(*shapes)

    def var_names(self) -> Tuple[str, ...]:
        return self.names or tuple(f"x{i}" for i in range(self.n))

    def instance(self, idx: Tuple[int, ...]) -> "LinearProgram":
        """Unbatched copy of one batch element."""
        shape = self.batch_shape
        b_eq = np.broadcast_to(self.b_eq, shape + (self.A_eq.shape[0],))[idx]
        lo = np.broadcast_to(self.lo, shape + (self.A_rng.shape[0],))[idx]
        hi = np.broadcast_to(self.hi, shape + (self.A_rng.shape[0],))[idx]
        c0 = np.broadcast_to(self.c0, shape)[idx]
        return LinearProgram(
            self.c, self.lb, self.ub, self.A_eq, np.asarray(b_eq), self.A_rng,
            np.asarray(lo), np.asarray(hi), np.asarray(c0),
            self.names, self.eq_names, self.rng_names,
        )


@dataclass(frozen=True)
class LPSolution:
    value: np.ndarray
    x: np.ndarray
    active: Tuple[str, ...] = ()


@dataclass(frozen=True)
class _CandidateGroup:
    free: Tuple[int, ...]
    rng_rows: Tuple[int, ...]
    rng_sides: Tuple[int, ...]  # 0 -> lo, 1 -> hi
    inv: np.ndarray  # inverse of the active-constraint block on the free columns
    fixed_at_upper: np.ndarray  # (K, n) bool, entries on free columns unused
    fixed_cols: Tuple[int, ...]


def _candidate_groups(A_eq: np.ndarray, A_rng: np.ndarray, n: int) -> List[_CandidateGroup]:
    k_eq = A_eq.shape[0]
    k_rng = A_rng.shape[0]
    groups = []
    for n_act in range(0, k_rng + 1):
        r = k_eq + n_act
        if r > n:
            break
        for rows in combinations(range(k_rng), n_act):
            A_act = np.vstack([A_eq, A_rng[list(rows)]]) if r else np.zeros((0, n))
            for free in combinations(range(n), r):
                block = A_act[:, list(free)]
                if r and abs(np.linalg.det(block)) < 1e-12 * max(1.0, np.abs(block).max() ** r):
                    continue
                inv = np.linalg.inv(block) if r else np.zeros((0, 0))
                fixed = tuple(i for i in range(n) if i not in free)
                corners = np.array(list(product((False, True), repeat=len(fixed))), dtype=bool)
                corners = corners.reshape(-1, len(fixed))
                for sides in product((0, 1), repeat=n_act):
                    groups.append(_CandidateGroup(free, rows, sides, inv, corners, fixed))
    return groups


class VertexEnumerationSolver:
    """Exact LP minimum by checking every basic solution."""

    def __init__(self, rel_tol: float = 1e-9):
        self.rel_tol = rel_tol
        self._cache = {}

    def _groups(self, lp: LinearProgram) -> List[_CandidateGroup]:
        key = (lp.A_eq.tobytes(), lp.A_eq.shape, lp.A_rng.tobytes(), lp.A_rng.shape, lp.n)
        if key not in self._cache:
            self._cache[key] = _candidate_groups(lp.A_eq, lp.A_rng, lp.n)
        return self._cache[key]

    def vertices(self, lp: LinearProgram) -> np.ndarray:
        """All basic solutions, shape ``batch + (K, n)``, feasible or not."""
        shape = lp.batch_shape
        b_eq = np.broadcast_to(lp.b_eq, shape + (lp.A_eq.shape[0],))
        lo = np.broadcast_to(lp.lo, shape + (lp.A_rng.shape[0],))
        hi = np.broadcast_to(lp.hi, shape + (lp.A_rng.shape[0],))
        blocks = []
        for g in self._groups(lp):
            K = g.fixed_at_upper.shape[0]
            x = np.empty(shape + (K, lp.n))
            fixed = list(g.fixed_cols)
            x_fixed = np.where(g.fixed_at_upper, lp.ub[fixed], lp.lb[fixed])  # (K, nf)
            x[..., fixed] = x_fixed
            if g.free:
                A_act = np.vstack([lp.A_eq, lp.A_rng[list(g.rng_rows)]])
                side_vals = [np.where(s, hi[..., row], lo[..., row]) for row, s in zip(g.rng_rows, g.rng_sides)]
                rhs = np.concatenate([b_eq] + [v[..., None] for v in side_vals], axis=-1)  # batch + (r,)
                shift = x_fixed @ A_act[:, fixed].T  # (K, r)
                x_free = (rhs[..., None, :] - shift) @ g.inv.T
                x[..., list(g.free)] = x_free
            blocks.append(x)
        return np.concatenate(blocks, axis=-2)

    def solve(self, lp: LinearProgram) -> LPSolution:
        X = self.vertices(lp)
        scale = max(float(np.max(np.abs(lp.ub))), float(np.max(np.abs(lp.lb))), 1e-300)
        tol = self.rel_tol * scale
        feasible = np.all(X >= lp.lb - tol, axis=-1) & np.all(X <= lp.ub + tol, axis=-1)
        if lp.A_rng.shape[0]:
            gx = X @ lp.A_rng.T
            lo = np.asarray(lp.lo)[..., None, :]
            hi = np.asarray(lp.hi)[..., None, :]
            feasible &= np.all((gx >= lo - tol) & (gx <= hi + tol), axis=-1)
        if not np.all(np.any(feasible, axis=-1)):
            bad = np.argwhere(~np.any(feasible, axis=-1).reshape(lp.batch_shape or (1,)))
            idx = tuple(bad[0]) if lp.batch_shape else ()
            raise LPInfeasible(
                f"linear program infeasible (batch index {idx})", infeasibility_report(lp.instance(idx))
            )
        vals = np.where(feasible, X @ lp.c, np.inf)
        best = np.min(vals, axis=-1)
        # lexicographically smallest vertex among the minimizers
        vtol = self.rel_tol * np.maximum(np.abs(best), 1e-300)
        tie = vals <= (best + vtol)[..., None]
        for j in range(lp.n):
            xj = np.where(tie, X[..., j], np.inf)
            tie &= xj <= (np.min(xj, axis=-1) + tol)[..., None]
        pick = np.argmax(tie, axis=-1)
        x_best = np.take_along_axis(X, pick[..., None, None], axis=-2)[..., 0, :]
        value = best + np.asarray(lp.c0)
        active = () if lp.batch_shape else active_constraints(lp, x_best, tol)
        return LPSolution(value=value, x=x_best, active=active)


class HighsSolver:
    """SciPy's HiGHS simplex on one unbatched instance at a time."""

    def solve(self, lp: LinearProgram) -> LPSolution:
        from scipy.optimize import linprog

        if lp.batch_shape:
            raise ValueError("HighsSolver handles unbatched programs only")
        A_ub = np.vstack([lp.A_rng, -lp.A_rng]) if lp.A_rng.shape[0] else None
        b_ub = np.concatenate([lp.hi, -lp.lo]) if lp.A_rng.shape[0] else None
        # rescale to O(1) so HiGHS tolerances are meaningful for tiny rates
        scale = max(float(np.max(np.abs(lp.ub))), 1e-300)
        res = linprog(
            lp.c,
            A_ub=A_ub,
            b_ub=None if b_ub is None else b_ub / scale,
            A_eq=lp.A_eq if lp.A_eq.shape[0] else None,
            b_eq=lp.b_eq / scale if lp.A_eq.shape[0] else None,
            bounds=list(zip(lp.lb / scale, lp.ub / scale)),
            method="highs",
            options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
        )
        if res.status == 2:
            raise LPInfeasible(res.message, infeasibility_report(lp))
        if res.status != 0:
            raise RuntimeError(f"HiGHS failed: {res.message}")
        x = res.x * scale
        return LPSolution(value=np.asarray(lp.c @ x + lp.c0), x=x, active=active_constraints(lp, x, 1e-9 * scale))


def active_constraints(lp: LinearProgram, x: np.ndarray, tol: float) -> Tuple[str, ...]:
    names = lp.var_names()
    out = []
    for i, name in enumerate(names):
        if abs(x[i] - lp.lb[i]) <= tol:
            out.append(f"{name}>=lower")
        elif abs(x[i] - lp.ub[i]) <= tol:
            out.append(f"{name}<=upper")
    eq_names = lp.eq_names or tuple(f"eq{k}" for k in range(lp.A_eq.shape[0]))
    out.extend(f"{nm}==" for nm in eq_names)
    rng_names = lp.rng_names or tuple(f"rng{k}" for k in range(lp.A_rng.shape[0]))
    gx = lp.A_rng @ x
    for k, nm in enumerate(rng_names):
        if abs(gx[k] - lp.lo[k]) <= tol:
            out.append(f"{nm}>=lo")
        elif abs(gx[k] - lp.hi[k]) <= tol:
            out.append(f"{nm}<=hi")
    return tuple(out)


def _row_range(a: np.ndarray, lb: np.ndarray, ub: np.ndarray) -> Tuple[float, float]:
    lo = float(np.sum(np.where(a > 0, a * lb, a * ub)))
    hi = float(np.sum(np.where(a > 0, a * ub, a * lb)))
    return lo, hi


def infeasibility_report(lp: LinearProgram) -> List[str]:
    """Constraints that cannot be met even on their own against the box."""
    out = []
    names = lp.var_names()
    for i in range(lp.n):
        if lp.lb[i] > lp.ub[i]:
            out.append(f"box:{names[i]}")
    eq_names = lp.eq_names or tuple(f"eq{k}" for k in range(lp.A_eq.shape[0]))
    for k, nm in enumerate(eq_names):
        lo, hi = _row_range(lp.A_eq[k], lp.lb, lp.ub)
        if not lo <= float(lp.b_eq[k]) <= hi:
            out.append(nm)
    rng_names = lp.rng_names or tuple(f"rng{k}" for k in range(lp.A_rng.shape[0]))
    for k, nm in enumerate(rng_names):
        lo, hi = _row_range(lp.A_rng[k], lp.lb, lp.ub)
        if hi < float(lp.lo[k]) or lo > float(lp.hi[k]) or lp.lo[k] > lp.hi[k]:
            out.append(nm)
    return out or ["joint"]


def get_solver(name: Optional[str] = None):
    if name in (None, "vertex"):
        return VertexEnumerationSolver()
    if name == "highs":
        return HighsSolver()
    raise ValueError(f"unknown LP backend {name!r}")
