"""Constraint qualification checks at a feasible candidate point.

Four classical qualifications are covered, in decreasing strength:

* LICQ: gradients of active inequalities and all equalities are linearly
  independent.  Decided by one numerical rank.
* MFCQ: equality gradients have full rank and some direction satisfies
  ``grad h . d = 0`` with ``grad g_i . d < 0`` on the active set.  Decided by
  a small LP maximizing the strict-descent margin.
* CRCQ: every subset of active-inequality plus equality gradients keeps a
  locally constant rank.  Sampled over shrinking neighborhoods.
* RCRCQ: same, but only subsets that contain every equality gradient.

Rank constancy over a neighborhood cannot be certified by finitely many
samples, so the sampled scans return "fails" with a re-checkable witness
when a mismatch is found and "undetermined" otherwise -- never "holds".
The Abadie qualification is probed purely empirically, by attempting to
realize sampled linearized-cone directions with feasible arcs; its verdict
is always "undetermined" with evidence attached.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import chain, combinations
from typing import Iterator

import numpy as np
from scipy.stats import qmc

from nlpcheck import arc as arc_mod
from nlpcheck.cones import linearized_cone, sample_directions
from nlpcheck.expr import DomainError, grad_hess
from nlpcheck.linalg import numerical_rank, simplex_lp
from nlpcheck.model import PointData, Problem, evaluate_point

__all__ = [
    "Verdict",
    "NeighborhoodSampler",
    "check_licq",
    "check_mfcq",
    "check_crcq",
    "check_rcrcq",
    "check_acq_empirical",
    "recheck_rank_certificate",
]


@dataclass
class Verdict:
    """Outcome of a qualification check.

    ``status`` is "holds", "fails", or "undetermined".  A failing verdict
    always carries a certificate that can be re-verified from its own data;
    sampling-based checks attach their sampling parameters as evidence.
    """

    status: str
    certificate: dict | None
    evidence: dict = field(default_factory=dict)


@dataclass
class NeighborhoodSampler:
    """Deterministic low-discrepancy samples on shrinking infinity-balls.

    For each radius a scrambled Sobol sequence (seeded from ``seed`` and the
    shell index) fills the cube ``center + radius * [-1, 1]^n``.  The same
    parameters always reproduce the same points.
    """

    radii: tuple[float, ...] = (1e-2, 1e-3, 1e-4)
    samples_per_radius: int = 64
    seed: int = 0

    def points(self, center) -> Iterator[tuple[float, int, np.ndarray]]:
        """Yield (radius, sample_index, point) in deterministic order."""
        center = np.asarray(center, dtype=float)
        count = int(self.samples_per_radius)
        if count <= 0:
            return
        pow2 = 1
        while pow2 < count:
            pow2 *= 2
        for shell, radius in enumerate(self.radii):
            eng = qmc.Sobol(
                d=center.size,
                scramble=True,
                seed=np.random.default_rng([self.seed, shell]),
            )
            u = eng.random(pow2)[:count]
            pts = center + radius * (2.0 * u - 1.0)
            for idx in range(count):
                yield float(radius), idx, pts[idx]


def check_licq(pd: PointData, tol_rank: float = 1e-8) -> Verdict:
    """Rank test on the stacked active-inequality and equality gradients."""
    rows = np.vstack([pd.active_g_grads(), pd.h_grads]) if (pd.active or pd.p) else np.zeros((0, pd.n))
    needed = len(pd.active) + pd.p
    evidence = {
        "active": list(pd.active),
        "num_equalities": pd.p,
        "tol_rank": tol_rank,
    }
    if needed == 0:
        evidence["note"] = "no active constraints; independence is vacuous"
        return Verdict("holds", None, evidence)
    info = numerical_rank(rows, tol_rank)
    evidence["rank"] = info.rank
    evidence["required_rank"] = needed
    evidence["singular_values"] = [float(s) for s in info.magnitudes]
    if info.rank == needed:
        return Verdict("holds", None, evidence)
    certificate = {
        "rank": info.rank,
        "required_rank": needed,
        "active": list(pd.active),
        "num_equalities": pd.p,
        "singular_values": [float(s) for s in info.magnitudes],
        "tol_rank": tol_rank,
    }
    return Verdict("fails", certificate, evidence)


def check_mfcq(pd: PointData, tol_rank: float = 1e-8) -> Verdict:
    """Full-rank equalities plus a strict descent direction on the actives.

    The direction search maximizes ``s`` subject to ``grad g_i . d <= -s``
    on the active set, ``grad h . d = 0``, ``|d_k| <= 1``, ``s <= 1``; MFCQ
    holds exactly when the optimum is positive (classified at 1e-9).
    """
    n = pd.n
    evidence = {"active": list(pd.active), "num_equalities": pd.p, "tol_rank": tol_rank}
    if pd.p:
        info = numerical_rank(pd.h_grads, tol_rank)
        evidence["equality_rank"] = info.rank
        if info.rank < pd.p:
            certificate = {
                "reason": "equality gradients are rank deficient",
                "equality_rank": info.rank,
                "num_equalities": pd.p,
                "singular_values": [float(s) for s in info.magnitudes],
                "tol_rank": tol_rank,
            }
            return Verdict("fails", certificate, evidence)
    if not pd.active and not pd.p:
        evidence["note"] = "no active constraints; any direction works"
        return Verdict("holds", {"direction": [0.0] * n, "lp_optimum": 1.0}, evidence)
    a = len(pd.active)
    c = np.zeros(n + 1)
    c[n] = -1.0  # maximize s
    A_ub = None
    b_ub = None
    if a:
        A_ub = np.hstack([pd.active_g_grads(), np.ones((a, 1))])
        b_ub = np.zeros(a)
    A_eq = None
    b_eq = None
    if pd.p:
        A_eq = np.hstack([pd.h_grads, np.zeros((pd.p, 1))])
        b_eq = np.zeros(pd.p)
    bounds = [(-1.0, 1.0)] * n + [(None, 1.0)]
    res = simplex_lp(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds)
    if res.status != "optimal" or res.x is None:
        raise RuntimeError(f"descent-direction LP did not solve: status {res.status}")
    s_star = -float(res.value)
    d = res.x[:n]
    evidence["lp_optimum"] = s_star
    if s_star > 1e-9:
        certificate = {"direction": [float(v) for v in d], "lp_optimum": s_star}
        return Verdict("holds", certificate, evidence)
    certificate = {
        "reason": "no strict descent direction for the active gradients",
        "lp_optimum": s_star,
        "active": list(pd.active),
        "tol_rank": tol_rank,
    }
    return Verdict("fails", certificate, evidence)


def _subsets(labels: tuple[int, ...], include_empty: bool) -> list[tuple[int, ...]]:
    start = 0 if include_empty else 1
    return list(
        chain.from_iterable(combinations(labels, k) for k in range(start, len(labels) + 1))
    )


def _gradient_table(
    problem: Problem, x: np.ndarray, labels_g: tuple[int, ...]
) -> np.ndarray | None:
    """Gradients of the listed inequalities then all equalities at ``x``.

    Returns None when any needed function leaves its domain at ``x``.
    """
    rows = []
    try:
        for i in labels_g:
            rows.append(grad_hess(problem.ineq[i - 1], x).grad)
        for e in problem.eq:
            rows.append(grad_hess(e, x).grad)
    except DomainError:
        return None
    if not rows:
        return np.zeros((0, problem.n))
    return np.vstack(rows)


def _scan_rank_constancy(
    problem: Problem,
    x,
    sampler: NeighborhoodSampler,
    pairs: list[tuple[tuple[int, ...], tuple[int, ...]]],
    active: tuple[int, ...],
    tol_rank: float,
    partial: bool,
    scan_name: str,
) -> Verdict:
    """Shared engine for the CRCQ/RCRCQ scans.

    ``pairs`` lists (inequality subset, equality subset) in the order to be
    scanned; the first rank mismatch (by subset, then radius, then sample
    index) becomes the certificate.
    """
    x = np.asarray(x, dtype=float)
    pos = {label: k for k, label in enumerate(active)}
    center_table = _gradient_table(problem, x, active)
    if center_table is None:
        raise DomainError(f"{scan_name}: gradients undefined at the center point")
    samples = []
    skipped = 0
    for radius, idx, pt in sampler.points(x):
        table = _gradient_table(problem, x=pt, labels_g=active)
        if table is None:
            skipped += 1
            continue
        samples.append((radius, idx, pt, table))
    evidence = {
        "radii": [float(r) for r in sampler.radii],
        "samples_per_radius": sampler.samples_per_radius,
        "seed": sampler.seed,
        "subsets_scanned": len(pairs),
        "samples_used": len(samples),
        "samples_skipped_domain": skipped,
        "tol_rank": tol_rank,
        "partial": partial,
    }

    def rows_for(table: np.ndarray, I: tuple[int, ...], J: tuple[int, ...]) -> np.ndarray:
        sel = [pos[i] for i in I] + [len(active) + (j - 1) for j in J]
        return table[sel]

    for I, J in pairs:
        center_rank = numerical_rank(rows_for(center_table, I, J), tol_rank).rank
        for radius, idx, pt, table in samples:
            rank = numerical_rank(rows_for(table, I, J), tol_rank).rank
            if rank != center_rank:
                certificate = {
                    "ineq_subset": list(I),
                    "eq_subset": list(J),
                    "center": [float(v) for v in x],
                    "center_rank": center_rank,
                    "witness": [float(v) for v in pt],
                    "witness_rank": rank,
                    "radius": radius,
                    "sample_index": idx,
                    "tol_rank": tol_rank,
                }
                return Verdict("fails", certificate, evidence)
    evidence["note"] = (
        "no rank mismatch at the sampled radii; constancy cannot be certified "
        "from finitely many samples"
    )
    return Verdict("undetermined", None, evidence)


_PAIR_BUDGET = 1 << 20


def _capped_pairs(
    pairs: list[tuple[tuple[int, ...], tuple[int, ...]]],
    full_pair: tuple[tuple[int, ...], tuple[int, ...]],
    points_per_pair: int,
) -> tuple[list[tuple[tuple[int, ...], tuple[int, ...]]], bool]:
    """Cut the scan to small subsets plus the full set when over budget."""
    if len(pairs) * max(points_per_pair, 1) <= _PAIR_BUDGET:
        return pairs, False
    kept = [pq for pq in pairs if len(pq[0]) + len(pq[1]) <= 2]
    if full_pair not in kept:
        kept.append(full_pair)
    return kept, True


def check_crcq(
    problem: Problem,
    x,
    sampler: NeighborhoodSampler,
    tol_active: float = 1e-8,
    tol_rank: float = 1e-8,
) -> Verdict:
    """Sampled rank-constancy over every subset pair (I, J).

    I ranges over subsets of the active inequalities and J over subsets of
    the equalities, skipping only the doubly-empty pair.  Scan order is by
    total subset size, then lexicographic.
    """
    pd = evaluate_point(problem, x, tol_active)
    active = pd.active
    eq_labels = tuple(range(1, problem.p + 1))
    pairs = [
        (I, J)
        for I in _subsets(active, include_empty=True)
        for J in _subsets(eq_labels, include_empty=True)
        if I or J
    ]
    pairs.sort(key=lambda IJ: (len(IJ[0]) + len(IJ[1]), IJ[0], IJ[1]))
    n_points = len(sampler.radii) * sampler.samples_per_radius + 1
    full_pair = (active, eq_labels)
    pairs, partial = _capped_pairs(pairs, full_pair, n_points)
    verdict = _scan_rank_constancy(
        problem, x, sampler, pairs, active, tol_rank, partial, "crcq"
    )
    verdict.evidence["active"] = list(active)
    return verdict


def check_rcrcq(
    problem: Problem,
    x,
    sampler: NeighborhoodSampler,
    tol_active: float = 1e-8,
    tol_rank: float = 1e-8,
) -> Verdict:
    """Sampled rank-constancy restricted to subsets containing every equality.

    With no equalities the scan runs over the nonempty subsets of the active
    inequalities; otherwise I may also be empty because the equality block
    alone must keep constant rank.
    """
    pd = evaluate_point(problem, x, tol_active)
    active = pd.active
    eq_labels = tuple(range(1, problem.p + 1))
    include_empty = problem.p > 0
    pairs = [(I, eq_labels) for I in _subsets(active, include_empty=include_empty)]
    pairs.sort(key=lambda IJ: (len(IJ[0]), IJ[0]))
    n_points = len(sampler.radii) * sampler.samples_per_radius + 1
    full_pair = (active, eq_labels)
    pairs, partial = _capped_pairs(pairs, full_pair, n_points)
    verdict = _scan_rank_constancy(
        problem, x, sampler, pairs, active, tol_rank, partial, "rcrcq"
    )
    verdict.evidence["active"] = list(active)
    return verdict


def recheck_rank_certificate(problem: Problem, certificate: dict) -> tuple[int, int]:
    """Recompute the two ranks named by a CRCQ/RCRCQ certificate.

    Returns (rank at center, rank at witness) using only certificate data,
    so a reported mismatch can be audited independently of the scan.
    """
    I = tuple(int(i) for i in certificate["ineq_subset"])
    J = tuple(int(j) for j in certificate["eq_subset"])
    tol_rank = float(certificate["tol_rank"])

    def rank_at(point) -> int:
        x = np.asarray(point, dtype=float)
        rows = [grad_hess(problem.ineq[i - 1], x).grad for i in I]
        rows += [grad_hess(problem.eq[j - 1], x).grad for j in J]
        table = np.vstack(rows) if rows else np.zeros((0, problem.n))
        return numerical_rank(table, tol_rank).rank

    return rank_at(certificate["center"]), rank_at(certificate["witness"])


def check_acq_empirical(
    problem: Problem,
    x,
    count: int = 8,
    seed: int = 0,
    tol_active: float = 1e-8,
    delta: float = 0.1,
    samples: int = 41,
    tol_dir: float = 1e-8,
    newton_tol: float = 1e-12,
    verify_tol: float = 1e-7,
    tol_rank: float = 1e-8,
) -> Verdict:
    """Probe the Abadie qualification by realizing sampled directions.

    For each sampled linearized-cone direction an arc is constructed; the
    direction counts as realized when the arc starts at the point with the
    right velocity and stays feasible forward in time.  Finitely many arcs
    can refute nothing about the tangent cone, so the verdict is always
    "undetermined"; the realization statistics are the evidence.
    """
    pd = evaluate_point(problem, x, tol_active)
    cone = linearized_cone(pd)
    dirs = sample_directions(cone, count, seed, tol_dir)
    reports = [
        arc_mod.arc_for_direction(
            problem,
            pd,
            d,
            delta=delta,
            samples=samples,
            tol_dir=tol_dir,
            tol_rank=tol_rank,
            newton_tol=newton_tol,
            verify_tol=verify_tol,
        )
        for d in dirs
    ]
    evidence = summarize_acq(reports, requested=count, seed=seed)
    if not dirs:
        evidence["note"] = (
            "no nonzero linearized-cone directions at the sampling tolerance; "
            "vacuously realized"
        )
    return Verdict("undetermined", None, evidence)


def summarize_acq(reports: list, requested: int, seed: int) -> dict:
    """Realization statistics for a batch of direction arc reports."""
    realized = 0
    failures = 0
    per_direction = []
    for rep in reports:
        ok = rep.realized()
        realized += int(ok)
        failures += int(rep.error is not None)
        per_direction.append(rep.acq_summary())
    return {
        "directions_requested": requested,
        "directions_sampled": len(reports),
        "seed": seed,
        "realized": realized,
        "construction_failures": failures,
        "per_direction": per_direction,
    }
