"""Problem container and candidate-point evaluation.

A problem is

    minimize f(x)  subject to  g_i(x) <= 0 (i = 1..m),  h_j(x) = 0 (j = 1..p),

with every function given in the expression language of :mod:`nlpcheck.expr`.
Problems load from a small line-oriented text format::

    # comment (anywhere; '#' starts a comment)
    vars 2
    objective x2
    ineq x1^2 + (x2 - 1)^2 - 1
    ineq 1 - x1^2 - (x2 + 1)^2
    eq x1 + x2          # optional equality constraints
    point 0 0           # optional candidate point

``vars`` must precede any expression line so variable indices can be
validated while parsing.  Constraint indices reported by this package are
1-based and follow file order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from nlpcheck.expr import DomainError, Expression, evaluate, grad_hess, parse

__all__ = [
    "ProblemError",
    "Problem",
    "PointData",
    "FeasibilityReport",
    "load_problem",
    "evaluate_point",
    "lagrangian_hessian",
    "feasibility",
]


class ProblemError(Exception):
    """A problem file could not be read; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
        self.message = message
        self.line = line


@dataclass(frozen=True, eq=False)
class Problem:
    """Immutable smooth nonlinear program."""

    n: int
    objective: Expression
    ineq: tuple[Expression, ...]
    eq: tuple[Expression, ...]
    point: np.ndarray | None
    source: str = ""

    @property
    def m(self) -> int:
        return len(self.ineq)

    @property
    def p(self) -> int:
        return len(self.eq)


def load_problem(text: str) -> Problem:
    """Parse the problem text format; errors carry 1-based line numbers."""
    n: int | None = None
    objective: Expression | None = None
    ineq: list[Expression] = []
    eq: list[Expression] = []
    point: np.ndarray | None = None

    def parse_expr(source: str, line_no: int) -> Expression:
        assert n is not None
        try:
            return parse(source, n)
        except Exception as exc:
            raise ProblemError(str(exc), line_no) from exc

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split(None, 1)
        directive = parts[0]
        rest = parts[1] if len(parts) > 1 else ""
        if directive == "vars":
            if n is not None:
                raise ProblemError("duplicate 'vars' directive", line_no)
            try:
                n = int(rest.strip())
            except ValueError:
                raise ProblemError(f"'vars' expects an integer, got {rest!r}", line_no)
            if n <= 0:
                raise ProblemError("number of variables must be positive", line_no)
        elif directive in ("objective", "ineq", "eq"):
            if n is None:
                raise ProblemError("'vars' must precede expression lines", line_no)
            if not rest.strip():
                raise ProblemError(f"'{directive}' expects an expression", line_no)
            node = parse_expr(rest, line_no)
            if directive == "objective":
                if objective is not None:
                    raise ProblemError("duplicate 'objective' directive", line_no)
                objective = node
            elif directive == "ineq":
                ineq.append(node)
            else:
                eq.append(node)
        elif directive == "point":
            if n is None:
                raise ProblemError("'vars' must precede 'point'", line_no)
            if point is not None:
                raise ProblemError("duplicate 'point' directive", line_no)
            try:
                values = [float(tok) for tok in rest.split()]
            except ValueError:
                raise ProblemError(f"'point' expects numbers, got {rest!r}", line_no)
            if len(values) != n:
                raise ProblemError(
                    f"'point' has {len(values)} coordinates, expected {n}", line_no
                )
            point = np.array(values, dtype=float)
        else:
            raise ProblemError(f"unknown directive {directive!r}", line_no)
    if n is None:
        raise ProblemError("missing 'vars' directive")
    if objective is None:
        raise ProblemError("missing 'objective' directive")
    return Problem(n, objective, tuple(ineq), tuple(eq), point, source=text)


@dataclass
class PointData:
    """Values, gradients, and Hessians of all problem functions at a point.

    ``active`` holds the 1-based labels of inequality constraints with
    ``|g_i(x)| <= tol_active``; feasibility is not assumed here.
    """

    x: np.ndarray
    f_val: float
    f_grad: np.ndarray
    f_hess: np.ndarray
    g_vals: np.ndarray  # (m,)
    g_grads: np.ndarray  # (m, n)
    g_hesses: np.ndarray  # (m, n, n)
    h_vals: np.ndarray  # (p,)
    h_grads: np.ndarray  # (p, n)
    h_hesses: np.ndarray  # (p, n, n)
    active: tuple[int, ...]
    tol_active: float

    @property
    def n(self) -> int:
        return self.x.size

    @property
    def m(self) -> int:
        return self.g_vals.size

    @property
    def p(self) -> int:
        return self.h_vals.size

    def active_g_grads(self) -> np.ndarray:
        """Gradients of the active inequality constraints, label order."""
        if not self.active:
            return np.zeros((0, self.n))
        return self.g_grads[[i - 1 for i in self.active]]


def evaluate_point(problem: Problem, x, tol_active: float = 1e-8) -> PointData:
    """Evaluate every problem function with derivatives at ``x``.

    Domain violations are re-raised with the offending function named
    (objective, or a 1-based constraint label).
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.n,):
        raise ValueError(f"point must have shape ({problem.n},), got {x.shape}")
    if not np.isfinite(x).all():
        raise ValueError("point has non-finite coordinates")
    n = problem.n

    def jet(e: Expression, label: str):
        try:
            return grad_hess(e, x)
        except DomainError as exc:
            raise DomainError(f"{label}: {exc.message}", exc.node) from exc

    f = jet(problem.objective, "objective")
    m, p = problem.m, problem.p
    g_vals = np.zeros(m)
    g_grads = np.zeros((m, n))
    g_hesses = np.zeros((m, n, n))
    for i, e in enumerate(problem.ineq):
        t = jet(e, f"ineq {i + 1}")
        g_vals[i], g_grads[i], g_hesses[i] = t.value, t.grad, t.hess
    h_vals = np.zeros(p)
    h_grads = np.zeros((p, n))
    h_hesses = np.zeros((p, n, n))
    for j, e in enumerate(problem.eq):
        t = jet(e, f"eq {j + 1}")
        h_vals[j], h_grads[j], h_hesses[j] = t.value, t.grad, t.hess
    active = tuple(
        i + 1 for i in range(m) if abs(g_vals[i]) <= tol_active
    )
    return PointData(
        x=x.copy(),
        f_val=f.value,
        f_grad=f.grad,
        f_hess=f.hess,
        g_vals=g_vals,
        g_grads=g_grads,
        g_hesses=g_hesses,
        h_vals=h_vals,
        h_grads=h_grads,
        h_hesses=h_hesses,
        active=active,
        tol_active=tol_active,
    )


def lagrangian_hessian(pd: PointData, mu, lam) -> np.ndarray:
    """Hessian of f + mu @ g + lam @ h at the evaluated point.

    Requires ``mu >= 0`` and zero multipliers on inactive constraints, which
    is what complementarity demands of a KKT multiplier.
    """
    mu = np.asarray(mu, dtype=float).ravel()
    lam = np.asarray(lam, dtype=float).ravel()
    if mu.size != pd.m:
        raise ValueError(f"mu must have length {pd.m}")
    if lam.size != pd.p:
        raise ValueError(f"lam must have length {pd.p}")
    if (mu < -1e-12).any():
        raise ValueError("negative inequality multiplier")
    active = set(pd.active)
    for i in range(pd.m):
        if (i + 1) not in active and abs(mu[i]) > 1e-12:
            raise ValueError(f"nonzero multiplier on inactive constraint {i + 1}")
    H = pd.f_hess.copy()
    if pd.m:
        H = H + np.einsum("i,ijk->jk", mu, pd.g_hesses)
    if pd.p:
        H = H + np.einsum("j,jkl->kl", lam, pd.h_hesses)
    return H


@dataclass
class FeasibilityReport:
    """Worst constraint violations at a point, classified at ``tol``."""

    max_ineq_violation: float
    max_eq_violation: float
    tol: float
    feasible: bool


def feasibility(problem: Problem, x, tol: float = 1e-8) -> FeasibilityReport:
    """Check ``g(x) <= tol`` and ``|h(x)| <= tol`` componentwise."""
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.n,):
        raise ValueError(f"point must have shape ({problem.n},), got {x.shape}")
    worst_g = 0.0
    for i, e in enumerate(problem.ineq):
        try:
            worst_g = max(worst_g, evaluate(e, x))
        except DomainError as exc:
            raise DomainError(f"ineq {i + 1}: {exc.message}", exc.node) from exc
    worst_h = 0.0
    for j, e in enumerate(problem.eq):
        try:
            worst_h = max(worst_h, abs(evaluate(e, x)))
        except DomainError as exc:
            raise DomainError(f"eq {j + 1}: {exc.message}", exc.node) from exc
    return FeasibilityReport(
        max_ineq_violation=worst_g,
        max_eq_violation=worst_h,
        tol=tol,
        feasible=(worst_g <= tol and worst_h <= tol),
    )
