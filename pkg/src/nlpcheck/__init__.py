"""Optimality diagnostics for smooth nonlinear programs.

Given a problem

    minimize f(x)  subject to  g_i(x) <= 0,  h_j(x) = 0,

and a candidate point, this package evaluates first- and second-order
optimality conditions, checks classical constraint qualifications, and
constructs feasible arcs numerically through a local chart built from the
constraints that stay pinned along a chosen direction.
"""

from nlpcheck import arc, cli, cones, cq, expr, kkt, linalg, model, problems
from nlpcheck._version import __version__

__all__ = [
    "arc",
    "cli",
    "cones",
    "cq",
    "expr",
    "kkt",
    "linalg",
    "model",
    "problems",
    "__version__",
]
