"""Independent brute-force oracles shared by the test modules.

The quadratic-on-cone oracle works on a dense angular grid (step 1e-3
rad) augmented with exact boundary and stationary candidates computed
from closed-form trigonometry: a bare grid misses boundary minima by
O(step.||H||), which is far above the comparison tolerances used here,
while the augmented candidate set is exact up to rounding.  None of this
shares code with the library's facial enumeration.
"""

import itertools

import numpy as np

TWO_PI = 2.0 * np.pi
GRID_STEP = 1e-3
EDGE_TOL = 1e-9


def _null_basis(rows, n):
    """Orthonormal basis of the common nullspace of the given rows."""
    if len(rows) == 0:
        return np.eye(n)
    a = np.array(rows, dtype=float).reshape(len(rows), n)
    u, s, vt = np.linalg.svd(a)
    rank = int(np.sum(s > 1e-12 * max(1.0, s[0] if s.size else 0.0)))
    return vt[rank:].T


def _arcs_for_halfplane(r):
    """Angular intervals of {theta : r . (cos, sin) <= 0} on [0, 2pi)."""
    norm = np.hypot(r[0], r[1])
    if norm <= 1e-14:
        return [(0.0, TWO_PI)]
    alpha = np.arctan2(r[1], r[0])
    lo = (alpha + 0.5 * np.pi) % TWO_PI
    hi = lo + np.pi
    if hi <= TWO_PI:
        return [(lo, hi)]
    return [(lo, TWO_PI), (0.0, hi - TWO_PI)]


def _intersect_arc_lists(a, b):
    out = []
    for lo1, hi1 in a:
        for lo2, hi2 in b:
            lo, hi = max(lo1, lo2), min(hi1, hi2)
            if hi > lo + 1e-15:
                out.append((lo, hi))
    return out


def _quad_min_on_arcs(h2, arcs):
    """Exact minimum of d(theta)^T h2 d(theta) over angular intervals.

    v(theta) = c0 + c1 cos(2 theta) + c2 sin(2 theta); candidates are the
    interval endpoints, the four stationary angles, and a safety grid.
    """
    a, b, d = h2[0, 0], h2[0, 1], h2[1, 1]
    c0, c1, c2 = 0.5 * (a + d), 0.5 * (a - d), b

    def value(theta):
        return c0 + c1 * np.cos(2.0 * theta) + c2 * np.sin(2.0 * theta)

    base = 0.5 * np.arctan2(c2, c1)
    stationary = [base + 0.5 * np.pi * k for k in range(4)]
    best = None
    for lo, hi in arcs:
        cand = [lo, hi]
        for theta in stationary:
            shifted = lo + (theta - lo) % TWO_PI
            if shifted <= hi:
                cand.append(shifted)
        cand.extend(np.arange(lo, hi, GRID_STEP))
        vals = value(np.array(cand))
        vmin = float(vals.min())
        if best is None or vmin < best:
            best = vmin
    return best


def _min_on_circle(H, basis, extra_rows):
    """Minimum over the unit circle spanned by an orthonormal 2-col basis,
    restricted by extra inequality rows (row . d <= EDGE_TOL)."""
    h2 = basis.T @ H @ basis
    arcs = [(0.0, TWO_PI)]
    for r in extra_rows:
        r2 = np.asarray(r, dtype=float) @ basis
        arcs = _intersect_arc_lists(arcs, _arcs_for_halfplane(r2))
        if not arcs:
            return None
    return _quad_min_on_arcs(h2, arcs)


def quad_cone_min_oracle(H, a_eq, a_in):
    """Brute-force minimum of d^T H d over unit d with a_eq d = 0 and
    a_in d <= 0.  Returns None when the cone is {0}.

    Works in the nullspace of the equality block; the inequality region
    there is handled by exact arc intersection (dim 2), complete
    stationary-candidate enumeration (dim 3), or sign inspection (dim 1).
    """
    H = np.asarray(H, dtype=float)
    n = H.shape[0]
    a_eq = np.asarray(a_eq, dtype=float).reshape(-1, n)
    a_in = np.asarray(a_in, dtype=float).reshape(-1, n)
    basis = _null_basis(list(a_eq), n)
    k = basis.shape[1]
    if k == 0:
        return None
    hk = basis.T @ H @ basis
    rows = [r @ basis for r in a_in]
    rows = [r for r in rows if np.abs(r).max(initial=0.0) > 1e-14]

    if k == 1:
        val = float(hk[0, 0])
        for sign in (1.0, -1.0):
            if all(sign * r[0] <= EDGE_TOL for r in rows):
                return val
        return None

    if k == 2:
        arcs = [(0.0, TWO_PI)]
        for r in rows:
            arcs = _intersect_arc_lists(arcs, _arcs_for_halfplane(r))
        if not arcs:
            return None
        return _quad_min_on_arcs(hk, arcs)

    # k == 3: candidates are eigenvectors (interior stationary points),
    # one-row boundary circles, and two-row boundary lines
    def feasible(d):
        return all(float(r @ d) <= EDGE_TOL for r in rows)

    best = None

    def consider(value):
        nonlocal best
        if value is not None and (best is None or value < best):
            best = value

    w, v = np.linalg.eigh(hk)
    for i in range(3):
        for sign in (1.0, -1.0):
            d = sign * v[:, i]
            if feasible(d):
                consider(float(w[i]))

    for i, r in enumerate(rows):
        circle = _null_basis([r], 3)
        others = [rows[j] for j in range(len(rows)) if j != i]
        consider(_min_on_circle(hk, circle, others))

    for i, j in itertools.combinations(range(len(rows)), 2):
        line = _null_basis([rows[i], rows[j]], 3)
        if line.shape[1] != 1:
            continue
        for sign in (1.0, -1.0):
            d = sign * line[:, 0]
            if feasible(d):
                consider(float(d @ hk @ d))

    # coarse full-sphere sweep as a blunder check on the candidate logic
    theta = np.arange(0.0, np.pi + 0.02, 0.02)
    phi = np.arange(0.0, TWO_PI, 0.02)
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    dirs = np.stack(
        [np.sin(tt) * np.cos(pp), np.sin(tt) * np.sin(pp), np.cos(tt)],
        axis=-1,
    ).reshape(-1, 3)
    ok = np.ones(dirs.shape[0], dtype=bool)
    for r in rows:
        ok &= dirs @ r <= EDGE_TOL
    if ok.any():
        vals = np.einsum("ij,jk,ik->i", dirs[ok], hk, dirs[ok])
        consider(float(vals.min()))
    return best
