"""Least-squares fitting of g(x) = x (a + b x^2 / (x + c)^2) to I-V data."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import (NonConvergenceError, ParseError, RankDeficientError,
                     SingularInputError, TooFewSamplesError, ZeroVarianceError)
from .model import POLE_EPS, GCoeffs, eval_g

MIN_POINTS = 4
MAX_LOG_C = 700.0
MAX_LOG_C_STEP = 2.0  # trust-region cap on one change of log c


@dataclass(frozen=True, eq=False)
class IVDataset:
    points: np.ndarray  # shape (n, 2): dimensionless current x, voltage v
    source: str = ""

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError("points must have shape (n, 2)")
        if len(pts) < MIN_POINTS:
            raise TooFewSamplesError(f"need at least {MIN_POINTS} points, got {len(pts)}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("dataset contains non-finite values")
        object.__setattr__(self, "points", pts)

    @property
    def x(self):
        return self.points[:, 0]

    @property
    def v(self):
        return self.points[:, 1]

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class FitResult:
    coeffs: GCoeffs
    r_squared: float
    residual_norm: float
    iterations: int
    converged: bool
    covariance_diag: tuple  # variances of a, b, c
    gradient_norm: float

    def to_dict(self):
        d = asdict(self)
        d["covariance_diag"] = list(self.covariance_diag)
        return d

    def to_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def r_squared(data: IVDataset, coeffs: GCoeffs):
    v = data.v
    ss_tot = float(np.sum((v - v.mean()) ** 2))
    if ss_tot == 0.0:
        raise ZeroVarianceError("voltage data has zero variance")
    ss_res = float(np.sum((v - eval_g(data.x, coeffs)) ** 2))
    return 1.0 - ss_res / ss_tot


def g_partials(x, a, b, c):
    """Columns dg/da, dg/db, dg/d(log c) at each x."""
    s = x + c
    r = x / s
    return np.column_stack([x, x * r * r, -2.0 * b * c * r**3])


def slope_init(data: IVDataset):
    """(a, b, c) from the first- and last-decile slopes, c = 0.01."""
    order = np.argsort(data.x)
    x, v = data.x[order], data.v[order]
    k = max(2, len(x) // 10)
    lo = np.polyfit(x[:k], v[:k], 1)[0]
    hi = np.polyfit(x[-k:], v[-k:], 1)[0]
    return GCoeffs(a=float(lo), b=float(hi - lo), c=0.01)


def _project(x, v, c):
    """Least-squares (a, b) at fixed c and the resulting SSE; g is linear in (a, b)."""
    r = x / (x + c)
    A = np.column_stack([x, x * r * r])
    coef, *_ = np.linalg.lstsq(A, v, rcond=None)
    return coef, float(np.sum((A @ coef - v) ** 2))


def default_init(data: IVDataset, n_grid=60):
    """Best (a, b, c) over a log grid of c."""
    x, v = data.x, data.v
    xmax = float(np.max(np.abs(x))) or 1.0
    best = None
    for c in np.geomspace(1e-4 * xmax, 10.0 * xmax, n_grid):
        if np.any(np.abs(x + c) < POLE_EPS):
            continue
        coef, sse = _project(x, v, c)
        if best is None or sse < best[0]:
            best = (sse, coef, c)
    if best is None:
        return slope_init(data)
    _, (a, b), c = best
    return GCoeffs(a=float(a), b=float(b), c=float(c))


def _sse(x, v, theta):
    a, b, logc = theta
    if not logc < MAX_LOG_C:
        return math.inf, None
    c = math.exp(logc)
    if np.any(np.abs(x + c) < POLE_EPS):
        return math.inf, None
    s = x + c
    res = v - x * (a + b * (x / s) ** 2)
    return float(res @ res), res


def fit_g(data: IVDataset, init: GCoeffs | None = None, max_iter=200, xtol=1e-10,
          gtol=1e-12, cond_max=1e12):
    """Levenberg-Marquardt fit of (a, b, c) with c kept positive through log c.

    (a, b) of ``init`` are first replaced by their least-squares values at
    ``init.c`` when that lowers the error; g is linear in them, so this
    removes most of the initial error cheaply. Converges when the relative
    step falls below ``xtol`` or the largest cosine between the residual and
    a Jacobian column falls below ``gtol``.
    """
    init = init or default_init(data)
    x, v = data.x, data.v
    theta = np.array([init.a, init.b, math.log(init.c)])
    sse, res = _sse(x, v, theta)
    if res is None:
        raise SingularInputError("initial c places the pole on a data point")
    coef, sse_p = _project(x, v, init.c)
    if sse_p < sse:
        theta[:2] = coef
        sse, res = _sse(x, v, theta)
    scale = max(float(np.linalg.norm(v)), np.finfo(float).tiny)
    lam = 1e-3
    converged = False
    grad_cos = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        A = g_partials(x, theta[0], theta[1], math.exp(theta[2]))
        grad = A.T @ res
        col = np.linalg.norm(A, axis=0)
        rn = math.sqrt(sse)
        if rn == 0.0:
            grad_cos = 0.0
            converged = True
            break
        if np.any(col <= 1e-10 * scale):
            raise RankDeficientError(
                "a Jacobian column vanishes; parameters unidentifiable from this data")
        grad_cos = float(np.max(np.abs(grad) / np.where(col > 0, col * rn, np.inf)))
        if grad_cos < gtol:
            converged = True
            break
        H = A.T @ A
        D = np.diag(np.diag(H))
        accepted = False
        while lam < 1e16:
            step = np.linalg.solve(H + lam * D, grad)
            if abs(step[2]) > MAX_LOG_C_STEP:
                step *= MAX_LOG_C_STEP / abs(step[2])
            trial = theta + step
            sse_t, res_t = _sse(x, v, trial)
            if sse_t < sse:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            # no decrease possible at any damping: at a minimum to rounding
            converged = True
            break
        lam = max(lam / 10.0, 1e-12)
        small = np.linalg.norm(step) <= xtol * (np.linalg.norm(theta) + xtol)
        theta, sse, res = trial, sse_t, res_t
        if small:
            converged = True
            break
    if not converged:
        raise NonConvergenceError(f"no convergence after {max_iter} iterations")

    a, b, c = float(theta[0]), float(theta[1]), math.exp(theta[2])
    coeffs = GCoeffs(a, b, c)
    A = g_partials(x, a, b, c)
    _check_rank(A, cond_max)
    dof = max(len(x) - 3, 1)
    try:
        cov = np.linalg.inv(A.T @ A) * (sse / dof)
        var = (float(cov[0, 0]), float(cov[1, 1]), float(cov[2, 2]) * c * c)
    except np.linalg.LinAlgError:
        var = (math.inf, math.inf, math.inf)
    return FitResult(coeffs=coeffs, r_squared=r_squared(data, coeffs),
                     residual_norm=math.sqrt(sse), iterations=it, converged=converged,
                     covariance_diag=var, gradient_norm=float(np.linalg.norm(A.T @ res)))


def _check_rank(A, cond_max):
    sv = np.linalg.svd(A / np.linalg.norm(A, axis=0), compute_uv=False)
    if sv[-1] == 0.0 or sv[0] / sv[-1] > cond_max:
        raise RankDeficientError(f"Jacobian condition number {sv[0] / sv[-1]:.3g} too large")


def load_iv_csv(path, source=None):
    """Two numeric columns (x, v); an optional non-numeric header on line 1."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 2:
                raise ParseError(f"expected 2 columns, got {len(row)}", lineno)
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError:
                if lineno == 1:
                    continue
                raise ParseError(f"non-numeric value in {row[:2]}", lineno) from None
    if len(rows) < MIN_POINTS:
        raise TooFewSamplesError(f"{path}: need at least {MIN_POINTS} rows, got {len(rows)}")
    return IVDataset(np.array(rows), source=source or str(path))


def to_dimensionless(current, voltage, k, alpha_scale=1e-3, v_scale=1.0):
    """Physical emitter current (A) and voltage (V) to (x, g) with
    i = alpha k x and V = (v / k) g."""
    return (np.asarray(current, dtype=float) / (alpha_scale * k),
            np.asarray(voltage, dtype=float) * k / v_scale)


def to_physical(x, g, k, alpha_scale=1e-3, v_scale=1.0):
    return (np.asarray(x, dtype=float) * alpha_scale * k,
            np.asarray(g, dtype=float) * v_scale / k)


def dataset_from_physical(current, voltage, k, alpha_scale=1e-3, v_scale=1.0, source=""):
    x, v = to_dimensionless(current, voltage, k, alpha_scale, v_scale)
    return IVDataset(np.column_stack([x, v]), source=source)


def synthetic_dataset(coeffs: GCoeffs, n=50, x_range=(0.01, 1.0), noise=0.0, rng=None):
    """``n`` evenly spaced currents with v = g(x) (1 + noise * N(0, 1))."""
    x = np.linspace(x_range[0], x_range[1], n)
    v = eval_g(x, coeffs)
    if noise:
        rng = rng if rng is not None else np.random.default_rng()
        v = v * (1.0 + noise * rng.standard_normal(n))
    return IVDataset(np.column_stack([x, v]), source=f"synthetic n={n} noise={noise}")
