"""Bounded-variable primal simplex for small dense LPs.

Solves::

    min  c @ x
    s.t. A @ x == b
         lower <= x <= upper        (bounds may be infinite)

Nonbasic variables rest at a bound, or at zero when zero lies strictly between
their bounds (free or two-sided variables such as angles and flows). Phase 1
drives artificial variables out; phase 2 optimizes the real objective.
Pricing is Dantzig's rule with a switch to Bland's rule after a run of
degenerate pivots.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class LPError(RuntimeError):
    pass


class LPInfeasible(LPError):
    def __init__(self, infeasibility: float):
        super().__init__(f"LP infeasible (phase-1 residual {infeasibility:.6g})")
        self.infeasibility = infeasibility


class LPUnbounded(LPError):
    pass


@dataclass
class LPResult:
    x: np.ndarray
    objective: float
    duals: np.ndarray
    iterations: int


def _start_values(lower, upper):
    return np.clip(np.zeros_like(lower), lower, upper)


class _Simplex:
    def __init__(self, A, b, c, lower, upper, basis, x, tol):
        self.A, self.b, self.c = A, b, c
        self.lower, self.upper = lower, upper
        self.basis = basis
        self.x = x
        self.tol = tol
        self.iterations = 0
        self.is_basic = np.zeros(A.shape[1], dtype=bool)
        self.is_basic[basis] = True

    def _refresh(self):
        B = self.A[:, self.basis]
        nb = ~self.is_basic
        rhs = self.b - self.A[:, nb] @ self.x[nb]
        self.x[self.basis] = np.linalg.solve(B, rhs)
        return B

    def run(self, max_iter: int):
        A, c, lo, up = self.A, self.c, self.lower, self.upper
        n = A.shape[1]
        dtol = self.tol * max(1.0, float(np.max(np.abs(c))) if n else 1.0)
        ptol = 1e-11
        degenerate = 0
        B = self._refresh()
        while True:
            if self.iterations > max_iter:
                raise LPError("simplex iteration limit reached")
            y = np.linalg.solve(B.T, c[self.basis])
            d = c - A.T @ y
            x = self.x
            can_up = (d < -dtol) & (x < up - 1e-12)
            can_down = (d > dtol) & (x > lo + 1e-12)
            elig = (can_up | can_down) & ~self.is_basic & (lo < up)
            if not elig.any():
                return y
            cand = np.flatnonzero(elig)
            if degenerate > 50:
                j = int(cand[0])
            else:
                j = int(cand[np.argmax(np.abs(d[cand]))])
            direction = 1.0 if d[j] < 0 else -1.0

            alpha = np.linalg.solve(B, A[:, j])
            delta = -direction * alpha  # change of x_B per unit step
            basis = np.asarray(self.basis)
            xb, lb, ub = x[basis], lo[basis], up[basis]
            ratios = np.full(len(basis), np.inf)
            dec = (delta < -ptol) & np.isfinite(lb)
            inc = (delta > ptol) & np.isfinite(ub)
            ratios[dec] = np.maximum(xb[dec] - lb[dec], 0.0) / -delta[dec]
            ratios[inc] = np.maximum(ub[inc] - xb[inc], 0.0) / delta[inc]
            step = up[j] - x[j] if direction > 0 else x[j] - lo[j]
            leave = -1
            tmin = float(ratios.min()) if len(ratios) else np.inf
            if tmin < step:
                ties = np.flatnonzero(ratios <= tmin + 1e-12)
                if degenerate > 50:
                    leave = int(ties[np.argmin(basis[ties])])
                else:
                    leave = int(ties[np.argmax(np.abs(delta[ties]))])
                step = tmin
            if not np.isfinite(step):
                raise LPUnbounded("LP is unbounded")
            self.iterations += 1
            degenerate = degenerate + 1 if step <= 1e-12 else 0
            x[j] += direction * step
            x[self.basis] += delta * step
            if leave < 0:
                # bound flip, basis unchanged
                x[j] = up[j] if direction > 0 else lo[j]
                continue
            out = self.basis[leave]
            x[out] = lo[out] if delta[leave] < 0 else up[out]
            self.basis[leave] = j
            self.is_basic[out] = False
            self.is_basic[j] = True
            B = self._refresh()


def solve_lp(c, A, b, lower, upper, *, tol: float = 1e-10, feas_tol: float = 1e-7,
             max_iter: int | None = None) -> LPResult:
    """Minimize ``c @ x`` subject to ``A @ x == b`` and variable bounds.

    Raises LPInfeasible when phase 1 cannot reach zero residual; its
    ``infeasibility`` attribute is the remaining sum of row violations.
    """
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    m, n = A.shape
    if np.any(lower > upper):
        raise LPInfeasible(float(np.max(lower - upper)))
    if max_iter is None:
        max_iter = 50 * (m + n) + 100

    x0 = _start_values(lower, upper)
    resid = b - A @ x0
    signs = np.where(resid >= 0, 1.0, -1.0)
    A1 = np.hstack([A, np.diag(signs)])
    lo1 = np.concatenate([lower, np.zeros(m)])
    up1 = np.concatenate([upper, np.full(m, np.inf)])
    x1 = np.concatenate([x0, np.abs(resid)])
    basis = list(range(n, n + m))

    c1 = np.concatenate([np.zeros(n), np.ones(m)])
    sx = _Simplex(A1, b, c1, lo1, up1, basis, x1, tol)
    sx.run(max_iter)
    infeas = float(np.sum(sx.x[n:]))
    scale = max(1.0, float(np.max(np.abs(b))) if m else 1.0)
    if infeas > feas_tol * scale:
        raise LPInfeasible(infeas)

    # phase 2: artificials pinned at zero
    sx.upper = np.concatenate([upper, np.zeros(m)])
    sx.x[n:] = 0.0
    sx.c = np.concatenate([c, np.zeros(m)])
    y = sx.run(max_iter)
    x = sx.x[:n].copy()
    # snap round-off just outside bounds
    x = np.minimum(np.maximum(x, lower), upper)
    return LPResult(x=x, objective=float(c @ x), duals=y, iterations=sx.iterations)
