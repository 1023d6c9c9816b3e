"""Random small linear programs whose vertices all lie on a 5-point-per-axis grid."""

from itertools import product

import numpy as np

from mdiqkd.lp import LinearProgram

N_VARS = 7
WIDTH = 4  # integer box width, so 5 grid points hit every integer


def lattice_instance(rng: np.random.Generator) -> LinearProgram:
    lb = rng.integers(-3, 4, N_VARS).astype(float)
    ub = lb + WIDTH
    perm = rng.permutation(N_VARS)
    k_eq = int(rng.integers(2, 4))
    k_rng = int(rng.integers(2, 4))
    a_eq = np.zeros(N_VARS)
    a_rng = np.zeros(N_VARS)
    # unit coefficients on disjoint supports keep every basic solution integral
    a_eq[perm[:k_eq]] = rng.choice([-1.0, 1.0], k_eq)
    a_rng[perm[k_eq : k_eq + k_rng]] = rng.choice([-1.0, 1.0], k_rng)
    x0 = lb + rng.integers(0, WIDTH + 1, N_VARS)
    g0 = float(a_rng @ x0)
    return LinearProgram(
        c=rng.normal(size=N_VARS),
        lb=lb,
        ub=ub,
        A_eq=a_eq[None, :],
        b_eq=np.array([float(a_eq @ x0)]),
        A_rng=a_rng[None, :],
        lo=np.array([g0 - int(rng.integers(0, 3))]),
        hi=np.array([g0 + int(rng.integers(0, 3))]),
    )


_GRID = np.array(list(product(range(WIDTH + 1), repeat=N_VARS)), dtype=float)


def grid_minimum(lp: LinearProgram, tol: float = 1e-9) -> float:
    """Brute-force minimum over the feasibility-filtered 5^7 grid."""
    pts = lp.lb + _GRID * (lp.ub - lp.lb) / WIDTH
    ok = np.abs(pts @ lp.A_eq[0] - lp.b_eq[0]) <= tol
    g = pts @ lp.A_rng[0]
    ok &= (g >= lp.lo[0] - tol) & (g <= lp.hi[0] + tol)
    return float(np.min(pts[ok] @ lp.c) + lp.c0)
