"""Derivative-free minimizers used by the falsifier.

Both work on box-bounded problems and never exceed their evaluation budget.
"""

import math

import numpy as np


class BudgetError(ValueError):
    pass


class _Counted:
    """Objective wrapper that projects onto the box and enforces the budget."""

    def __init__(self, f, lo, hi, budget):
        self.f, self.lo, self.hi, self.budget = f, lo, hi, budget
        self.n = 0
        self.history = []

    def project(self, x):
        return np.clip(x, self.lo, self.hi)

    def __call__(self, x):
        if self.n >= self.budget:
            raise _Exhausted
        x = self.project(np.asarray(x, dtype=float))
        fx = float(self.f(x))
        self.n += 1
        self.history.append((x.copy(), fx))
        return x, fx


class _Exhausted(Exception):
    pass


def _bounds(bounds, dim):
    lo = np.asarray([b[0] for b in bounds], dtype=float)
    hi = np.asarray([b[1] for b in bounds], dtype=float)
    if lo.shape != (dim,) or not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)):
        raise ValueError("bounds must be finite, one (lo, hi) pair per coordinate")
    if np.any(lo > hi):
        raise ValueError("bounds must satisfy lo <= hi")
    return lo, hi


def nelder_mead(objective, x_init, bounds, budget, initial_step=None,
                xtol=1e-12, ftol=0.0, return_history=False):
    """Minimize with the Nelder-Mead simplex (reflection 1, expansion 2,
    contraction 0.5, shrink 0.5), projecting every trial point onto the box.

    Returns ``(x_best, f_best)``, plus the list of all evaluated
    ``(x, f)`` pairs when ``return_history`` is set.
    """
    x0 = np.asarray(x_init, dtype=float)
    dim = x0.size
    if budget < dim + 1:
        raise BudgetError(f"budget {budget} is smaller than the simplex size {dim + 1}")
    lo, hi = _bounds(bounds, dim)
    f = _Counted(objective, lo, hi, budget)
    alpha, gamma, rho, sigma = 1.0, 2.0, 0.5, 0.5

    if initial_step is None:
        initial_step = 0.1 * (hi - lo)
    step = np.broadcast_to(np.asarray(initial_step, dtype=float), (dim,))

    try:
        pts, vals = [], []
        x, fx = f(x0)
        pts.append(x)
        vals.append(fx)
        for i in range(dim):
            y = x.copy()
            # Step away from the nearer bound so the vertex stays distinct.
            y[i] += step[i] if y[i] + step[i] <= hi[i] else -step[i]
            y, fy = f(y)
            pts.append(y)
            vals.append(fy)
        pts = np.array(pts)
        vals = np.array(vals)

        while True:
            order = np.argsort(vals, kind="stable")
            pts, vals = pts[order], vals[order]
            if np.max(np.abs(pts[1:] - pts[0])) <= xtol or vals[-1] - vals[0] < ftol:
                break
            centroid = pts[:-1].mean(axis=0)
            xr, fr = f(centroid + alpha * (centroid - pts[-1]))
            if fr < vals[0]:
                xe, fe = f(centroid + gamma * (xr - centroid))
                if fe < fr:
                    pts[-1], vals[-1] = xe, fe
                else:
                    pts[-1], vals[-1] = xr, fr
                continue
            if fr < vals[-2]:
                pts[-1], vals[-1] = xr, fr
                continue
            if fr < vals[-1]:
                xc, fc = f(centroid + rho * (xr - centroid))
                accept = fc <= fr
            else:
                xc, fc = f(centroid + rho * (pts[-1] - centroid))
                accept = fc < vals[-1]
            if accept:
                pts[-1], vals[-1] = xc, fc
                continue
            for i in range(1, dim + 1):
                pts[i], vals[i] = f(pts[0] + sigma * (pts[i] - pts[0]))
    except _Exhausted:
        pass

    xb, fb = min(f.history, key=lambda h: h[1])
    if return_history:
        return xb, fb, f.history
    return xb, fb


def cma_es(objective, x_init, sigma0, bounds, budget, popsize=None, seed=0,
           ftarget=-math.inf, tolx=1e-14):
    """(mu/mu_w, lambda)-CMA-ES with rank-one and rank-mu covariance updates.

    Candidates are projected onto the box before evaluation and the squared
    projection distance is added as a penalty for ranking.  Returns
    ``(x_best, f_best, evaluated)`` where ``evaluated`` lists every
    ``(x, f)`` pair, with ``f`` the raw objective value of the projected point.
    """
    xmean = np.asarray(x_init, dtype=float).copy()
    n = xmean.size
    lo, hi = _bounds(bounds, n)
    lam = 4 + int(3 * math.log(n)) if popsize is None else int(popsize)
    if lam < 4:
        raise ValueError(f"population size must be at least 4, got {lam}")
    if not sigma0 > 0:
        raise ValueError("sigma0 must be positive")
    if budget < lam:
        raise BudgetError(f"budget {budget} cannot cover one generation of {lam}")
    rng = np.random.default_rng(seed)

    mu = lam // 2
    w = math.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    w /= w.sum()
    mueff = 1.0 / np.sum(w ** 2)
    cc = (4 + mueff / n) / (n + 4 + 2 * mueff / n)
    cs = (mueff + 2) / (n + mueff + 5)
    c1 = 2 / ((n + 1.3) ** 2 + mueff)
    cmu = min(1 - c1, 2 * (mueff - 2 + 1 / mueff) / ((n + 2) ** 2 + mueff))
    damps = 1 + 2 * max(0.0, math.sqrt((mueff - 1) / (n + 1)) - 1) + cs
    chi_n = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n ** 2))

    pc = np.zeros(n)
    ps = np.zeros(n)
    B = np.eye(n)
    D = np.ones(n)
    C = np.eye(n)
    invsqrtC = np.eye(n)
    sigma = float(sigma0)
    eigeneval = 0
    count = 0
    evaluated = []
    gen = 0

    while count + lam <= budget:
        gen += 1
        z = rng.standard_normal((lam, n))
        y = (z * D) @ B.T
        x = xmean + sigma * y
        fit = np.empty(lam)
        for k in range(lam):
            xp = np.clip(x[k], lo, hi)
            fx = float(objective(xp))
            evaluated.append((xp, fx))
            fit[k] = fx + float(np.sum((x[k] - xp) ** 2))
        count += lam

        idx = np.argsort(fit, kind="stable")
        xold = xmean
        xmean = w @ x[idx[:mu]]
        ymean = (xmean - xold) / sigma

        ps = (1 - cs) * ps + math.sqrt(cs * (2 - cs) * mueff) * (invsqrtC @ ymean)
        hsig = (np.linalg.norm(ps) / math.sqrt(1 - (1 - cs) ** (2 * gen)) / chi_n
                < 1.4 + 2 / (n + 1))
        pc = (1 - cc) * pc + hsig * math.sqrt(cc * (2 - cc) * mueff) * ymean
        artmp = (x[idx[:mu]] - xold) / sigma
        C = ((1 - c1 - cmu) * C
             + c1 * (np.outer(pc, pc) + (1 - hsig) * cc * (2 - cc) * C)
             + cmu * (artmp.T * w) @ artmp)
        sigma *= math.exp((cs / damps) * (np.linalg.norm(ps) / chi_n - 1))

        if count - eigeneval > lam / (c1 + cmu) / n / 10:
            eigeneval = count
            C = np.triu(C) + np.triu(C, 1).T
            D2, B = np.linalg.eigh(C)
            D = np.sqrt(np.maximum(D2, 1e-300))
            invsqrtC = (B / D) @ B.T

        best = min(evaluated, key=lambda e: e[1])[1]
        if best <= ftarget or sigma * np.max(D) < tolx:
            break

    xb, fb = min(evaluated, key=lambda e: e[1])
    return xb, fb, evaluated
