from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class LpStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


@dataclass(frozen=True)
class LinearProgram:
    """minimize c.x  s.t.  A_eq x = b_eq,  A_ub x <= b_ub,  x >= lower.

    A lower bound of ``-inf`` makes the variable free.
    """

    c: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    a_ub: np.ndarray
    b_ub: np.ndarray
    lower: np.ndarray
    names: tuple[str, ...] = ()
    eq_names: tuple[str, ...] = ()
    ub_names: tuple[str, ...] = ()
    title: str = "lp"

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        n = c.size

        def mat(m):
            m = np.asarray(m, dtype=float)
            return m.reshape(0, n) if m.size == 0 else m

        a_eq, a_ub = mat(self.a_eq), mat(self.a_ub)
        b_eq = np.asarray(self.b_eq, dtype=float).ravel()
        b_ub = np.asarray(self.b_ub, dtype=float).ravel()
        lower = np.asarray(self.lower, dtype=float).ravel()
        if a_eq.shape != (b_eq.size, n) or a_ub.shape != (b_ub.size, n):
            raise ValueError("constraint matrix dimensions do not match")
        if lower.size != n:
            raise ValueError("lower bounds must have one entry per variable")
        if not (np.all(np.isfinite(b_eq)) and np.all(np.isfinite(b_ub))):
            raise ValueError("right-hand sides must be finite")
        if np.any(np.isposinf(lower)) or np.any(np.isnan(lower)):
            raise ValueError("lower bounds must be finite or -inf")
        names = self.names or tuple(f"x{j}" for j in range(n))
        if len(names) != n:
            raise ValueError("need one name per variable")
        eq_names = self.eq_names or tuple(f"e{i}" for i in range(b_eq.size))
        ub_names = self.ub_names or tuple(f"u{i}" for i in range(b_ub.size))
        for name, val in [("c", c), ("a_eq", a_eq), ("b_eq", b_eq), ("a_ub", a_ub),
                          ("b_ub", b_ub), ("lower", lower), ("names", tuple(names)),
                          ("eq_names", tuple(eq_names)), ("ub_names", tuple(ub_names))]:
            object.__setattr__(self, name, val)

    @property
    def n_vars(self) -> int:
        return self.c.size

    def objective(self, x) -> float:
        return float(np.dot(self.c, x))

    def max_residual(self, x) -> float:
        """Largest violation of any constraint or bound at ``x``."""
        x = np.asarray(x, dtype=float)
        res = [0.0]
        if self.b_eq.size:
            res.append(float(np.abs(self.a_eq @ x - self.b_eq).max()))
        if self.b_ub.size:
            res.append(float(max(0.0, (self.a_ub @ x - self.b_ub).max())))
        finite = np.isfinite(self.lower)
        if finite.any():
            res.append(float(max(0.0, (self.lower[finite] - x[finite]).max())))
        return max(res)


@dataclass(frozen=True)
class LpSolution:
    status: LpStatus
    value: float
    point: np.ndarray = field(repr=False)
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


def _fmt(x: float) -> str:
    return repr(float(x))


def _expr(coefs: np.ndarray, names: Sequence[str]) -> str:
    parts = []
    for j in np.flatnonzero(coefs):
        v = float(coefs[j])
        sign = "-" if v < 0 else "+"
        mag = abs(v)
        term = names[j] if mag == 1.0 else f"{_fmt(mag)} {names[j]}"
        parts.append(f"{sign} {term}")
    if not parts:
        return "0 " + names[0] if names else "0"
    out = " ".join(parts)
    return out[2:] if out.startswith("+ ") else out


def to_lp_format(lp: LinearProgram) -> str:
    """Render ``lp`` in the CPLEX LP text format."""
    lines = [f"\\ {lp.title}", "Minimize", f" obj: {_expr(lp.c, lp.names)}", "Subject To"]
    for i, name in enumerate(lp.eq_names):
        lines.append(f" {name}: {_expr(lp.a_eq[i], lp.names)} = {_fmt(lp.b_eq[i])}")
    for i, name in enumerate(lp.ub_names):
        lines.append(f" {name}: {_expr(lp.a_ub[i], lp.names)} <= {_fmt(lp.b_ub[i])}")
    lines.append("Bounds")
    for j, name in enumerate(lp.names):
        lo = lp.lower[j]
        if math.isinf(lo):
            lines.append(f" {name} free")
        else:
            lines.append(f" {name} >= {_fmt(lo)}")
    lines.append("End")
    return "\n".join(lines) + "\n"


def solution_summary(sol: Optional[LpSolution]) -> dict:
    if sol is None:
        return {"status": None}
    return {"status": sol.status.value, "value": sol.value, "iterations": sol.iterations}
