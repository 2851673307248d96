"""Bounded-variable simplex on a dense tableau.

The LP is ``min c @ x`` subject to ``A @ x + s = b`` and ``lo <= (x, s) <= hi``.
Every row gets a slack whose bounds encode the row sense (``<=``: s >= 0,
``>=``: s <= 0, ``==``: s = 0), so the slack columns give a starting basis.

Cold starts run a two-phase primal simplex with artificial columns. Warm
starts after bound changes (the branch-and-bound case) run the dual simplex
from a stored basis, which stays dual feasible when only bounds move.
"""

from __future__ import annotations

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

FEAS_TOL = 1e-7
OPT_TOL = 1e-9
PIVOT_TOL = 1e-9
REFACTOR_EVERY = 100
DEGENERATE_BEFORE_BLAND = 30


class NumericalTrouble(RuntimeError):
    pass


class BoundedSimplex:
    def __init__(self, A, b, c, lo, hi, senses, max_iter: int = 50_000):
        A = np.asarray(A, dtype=float)
        m, n = A.shape
        self.m, self.n = m, n
        s_lo = np.zeros(m)
        s_hi = np.zeros(m)
        for r, sense in enumerate(senses):
            if sense == "<=":
                s_hi[r] = np.inf
            elif sense == ">=":
                s_lo[r] = -np.inf
        self.A = np.hstack([A, np.eye(m)])
        self.b = np.asarray(b, dtype=float).copy()
        self.c = np.concatenate([np.asarray(c, dtype=float), np.zeros(m)])
        self.lo = np.concatenate([np.asarray(lo, dtype=float), s_lo])
        self.hi = np.concatenate([np.asarray(hi, dtype=float), s_hi])
        self.max_iter = max_iter
        self.iterations = 0
        self.basis = np.arange(n, n + m)
        self.at_upper = np.zeros(n + m, dtype=bool)
        self.x = np.zeros(n + m)
        self.T = None
        self.d = None
        self._since_refactor = 0
        self._cost = None

    # -- public ------------------------------------------------------------------

    @property
    def n_total(self) -> int:
        return self.A.shape[1]

    @property
    def objective(self) -> float:
        return float(self.c @ self.x)

    @property
    def x_struct(self) -> np.ndarray:
        return self.x[: self.n].copy()

    def solve(self) -> str:
        """Cold start from the slack basis."""
        # artificial columns from earlier cold starts stay, fixed at zero, so
        # that stored snapshots keep valid column indices
        ntot = self.n_total
        self.basis = np.arange(self.n, self.n + self.m)
        self.at_upper = np.zeros(ntot, dtype=bool)
        x = np.zeros(ntot)
        for j in range(self.n):
            if np.isfinite(self.lo[j]):
                x[j] = self.lo[j]
            elif np.isfinite(self.hi[j]):
                x[j] = self.hi[j]
                self.at_upper[j] = True
        resid = self.b - self.A[:, : self.n] @ x[: self.n]

        art_cols, art_rows, art_sign = [], [], []
        for r in range(self.m):
            k = self.n + r
            v = resid[r]
            if v < self.lo[k] - FEAS_TOL or v > self.hi[k] + FEAS_TOL:
                bound = self.lo[k] if v < self.lo[k] else self.hi[k]
                x[k] = bound
                self.at_upper[k] = bound == self.hi[k] and bound != self.lo[k]
                sign = 1.0 if v - bound > 0 else -1.0
                art_rows.append(r)
                art_sign.append(sign)
                art_cols.append(abs(v - bound))
            else:
                x[k] = v
        if art_rows:
            cols = np.zeros((self.m, len(art_rows)))
            for q, (r, sg) in enumerate(zip(art_rows, art_sign)):
                cols[r, q] = sg
            self.A = np.hstack([self.A, cols])
            self.c = np.concatenate([self.c, np.zeros(len(art_rows))])
            self.lo = np.concatenate([self.lo, np.zeros(len(art_rows))])
            self.hi = np.concatenate([self.hi, np.full(len(art_rows), np.inf)])
            self.at_upper = np.concatenate([self.at_upper, np.zeros(len(art_rows), dtype=bool)])
            x = np.concatenate([x, np.array(art_cols)])
            for q, r in enumerate(art_rows):
                self.basis[r] = ntot + q
        self.x = x
        self._cost = None
        self._refactor()

        if art_rows:
            phase1 = np.zeros(self.n_total)
            phase1[ntot:] = 1.0
            status = self._primal(phase1)
            infeas = float(self.x[ntot:].sum())
            self.hi[ntot:] = 0.0
            if status != OPTIMAL or infeas > FEAS_TOL * max(1.0, np.abs(self.b).max(initial=0.0)):
                return INFEASIBLE
        return self._primal(self.c)

    def snapshot(self):
        return (self.basis.copy(), self.at_upper.copy())

    def reoptimize(self, lo_struct, hi_struct, snapshot=None) -> str:
        """Re-solve after changing structural bounds, warm from the current basis.

        Falls back to a cold start if the basis is not dual feasible or the
        dual simplex stalls.
        """
        self.lo[: self.n] = lo_struct
        self.hi[: self.n] = hi_struct
        if snapshot is not None:
            basis, at_upper = snapshot
            self.basis = basis.copy()
            pad = self.n_total - at_upper.size
            self.at_upper = np.concatenate([at_upper, np.zeros(pad, dtype=bool)])
            self._refactor(values=False)
        if self.T is None:
            return self.solve()
        self._place_nonbasics()
        if not self._make_dual_feasible():
            return self.solve()
        self._recompute_basics()
        try:
            status = self._dual()
        except NumericalTrouble:
            return self.solve()
        if status != OPTIMAL:
            return status
        return self._primal(self.c)

    # -- internals ---------------------------------------------------------------

    def _nonbasic_mask(self) -> np.ndarray:
        mask = np.ones(self.n_total, dtype=bool)
        mask[self.basis] = False
        return mask

    def _refactor(self, values: bool = True):
        if self.m == 0:
            self.T = np.zeros((0, self.n_total))
        else:
            try:
                Binv = np.linalg.inv(self.A[:, self.basis])
            except np.linalg.LinAlgError as exc:
                raise NumericalTrouble("singular basis") from exc
            self.T = Binv @ self.A
        self._since_refactor = 0
        if values:
            self._recompute_basics()
        if self._cost is not None:
            self.d = self._reduced_costs(self._cost)

    def _place_nonbasics(self):
        nb = self._nonbasic_mask()
        lo_fin = np.isfinite(self.lo)
        hi_fin = np.isfinite(self.hi)
        upper = nb & ((self.at_upper & hi_fin) | (~lo_fin & hi_fin))
        lower = nb & ~upper & lo_fin
        free = nb & ~upper & ~lower
        self.x[upper] = self.hi[upper]
        self.x[lower] = self.lo[lower]
        self.x[free] = 0.0
        self.at_upper[nb] = upper[nb]

    def _recompute_basics(self):
        nb = self._nonbasic_mask()
        Binv = self.T[:, self.n : self.n + self.m]
        rhs = self.b - self.A[:, nb] @ self.x[nb]
        self.x[self.basis] = Binv @ rhs

    def _reduced_costs(self, cost):
        return cost - cost[self.basis] @ self.T

    def _make_dual_feasible(self) -> bool:
        self._cost = self.c
        self.d = self._reduced_costs(self.c)
        nb = self._nonbasic_mask()
        fixed = self.hi - self.lo <= 0
        for j in np.flatnonzero(nb & ~fixed):
            dj = self.d[j]
            if self.at_upper[j] and dj > OPT_TOL:
                if not np.isfinite(self.lo[j]):
                    return False
                self.at_upper[j] = False
                self.x[j] = self.lo[j]
            elif not self.at_upper[j] and dj < -OPT_TOL:
                if not np.isfinite(self.hi[j]):
                    return False
                self.at_upper[j] = True
                self.x[j] = self.hi[j]
        return True

    def _pivot(self, r: int, j: int):
        T = self.T
        piv = T[r, j]
        T[r] /= piv
        col = T[:, j].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        self.d -= self.d[j] * T[r]
        self.d[j] = 0.0
        leaving = self.basis[r]
        self.basis[r] = j
        self.at_upper[j] = False
        self.iterations += 1
        self._since_refactor += 1
        if self._since_refactor >= REFACTOR_EVERY:
            self._refactor()
        return leaving

    def _primal(self, cost) -> str:
        self._cost = np.asarray(cost, dtype=float)
        self.d = self._reduced_costs(self._cost)
        degenerate = 0
        for _ in range(self.max_iter):
            nb = self._nonbasic_mask()
            movable = nb & (self.hi - self.lo > 0)
            d = self.d
            up = movable & ~self.at_upper & (d < -OPT_TOL)
            down = movable & self.at_upper & (d > OPT_TOL)
            free = movable & ~np.isfinite(self.lo) & ~np.isfinite(self.hi) & (np.abs(d) > OPT_TOL)
            cand = up | down | free
            if not cand.any():
                return OPTIMAL
            bland = degenerate >= DEGENERATE_BEFORE_BLAND
            if bland:
                j = int(np.flatnonzero(cand)[0])
            else:
                score = np.where(cand, np.abs(d), -1.0)
                j = int(np.argmax(score))
            direction = -1.0 if (self.at_upper[j] or (free[j] and d[j] > 0)) else 1.0

            col = self.T[:, j]
            alpha = direction * col
            xb = self.x[self.basis]
            lob = self.lo[self.basis]
            hib = self.hi[self.basis]
            ratios = np.full(self.m, np.inf)
            pos = alpha > PIVOT_TOL
            neg = alpha < -PIVOT_TOL
            ratios[pos] = (xb[pos] - lob[pos]) / alpha[pos]
            ratios[neg] = (hib[neg] - xb[neg]) / (-alpha[neg])
            ratios = np.maximum(ratios, 0.0)
            t_min = ratios.min() if self.m else np.inf
            t_flip = self.hi[j] - self.lo[j]
            if not np.isfinite(t_min) and not np.isfinite(t_flip):
                return UNBOUNDED

            if t_flip <= t_min:
                step = direction * t_flip
                self.x[self.basis] = xb - col * step
                self.x[j] += step
                self.at_upper[j] = not self.at_upper[j]
                degenerate = 0
                continue

            near = np.flatnonzero(ratios <= t_min + 1e-12)
            if bland:
                r = int(near[np.argmin(self.basis[near])])
            else:
                r = int(near[np.argmax(np.abs(alpha[near]))])
            t = ratios[r]
            step = direction * t
            leaving = self.basis[r]
            hit_upper = alpha[r] < 0
            self.x[self.basis] = xb - col * step
            self.x[j] += step
            self.x[leaving] = self.hi[leaving] if hit_upper else self.lo[leaving]
            self._pivot(r, j)
            self.at_upper[leaving] = bool(hit_upper)
            degenerate = degenerate + 1 if t <= 1e-12 else 0
        raise NumericalTrouble("primal simplex iteration limit")

    def _dual(self) -> str:
        for _ in range(self.max_iter):
            xb = self.x[self.basis]
            lob = self.lo[self.basis]
            hib = self.hi[self.basis]
            below = lob - xb
            above = xb - hib
            viol = np.maximum(below, above)
            r = int(np.argmax(viol)) if self.m else 0
            if not self.m or viol[r] <= FEAS_TOL:
                return OPTIMAL
            increase = below[r] > above[r]
            target = lob[r] if increase else hib[r]
            row = self.T[r]
            nb = self._nonbasic_mask() & (self.hi - self.lo > 0)
            at_up = self.at_upper
            if increase:
                ok = nb & ((~at_up & (row < -PIVOT_TOL)) | (at_up & (row > PIVOT_TOL)))
            else:
                ok = nb & ((~at_up & (row > PIVOT_TOL)) | (at_up & (row < -PIVOT_TOL)))
            if not ok.any():
                return INFEASIBLE
            idx = np.flatnonzero(ok)
            ratios = np.abs(self.d[idx]) / np.abs(row[idx])
            rmin = ratios.min()
            near = idx[ratios <= rmin + 1e-12]
            j = int(near[np.argmax(np.abs(row[near]))])

            step = (xb[r] - target) / row[j]
            leaving = self.basis[r]
            self.x[self.basis] = xb - self.T[:, j] * step
            self.x[j] += step
            self.x[leaving] = target
            self._pivot(r, j)
            self.at_upper[leaving] = not increase
        raise NumericalTrouble("dual simplex iteration limit")
