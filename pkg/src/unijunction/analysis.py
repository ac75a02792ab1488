"""Equilibria and their linear stability across the control parameter."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import NoPositiveRootError, NonConvergenceError, UnijunctionError
from .model import GCoeffs, ModelParams, State, eval_g, eval_g_prime, vector_field

ZERO_RE = 1e-9


@dataclass(frozen=True)
class FixedPoint:
    state: State
    m_value: float
    residual: float


@dataclass(frozen=True)
class EigenResult:
    eigenvalues: np.ndarray  # complex, sorted by descending real part
    pairs: tuple  # two tuples of eigenvalues grouped as conjugate/adjacent pairs
    stable_pair_re: float
    unstable_pair_re: float
    is_unstable: bool
    char_poly: np.ndarray  # monic quartic coefficients, highest degree first
    char_residual: float  # max relative residual of the polynomial at the roots


@dataclass(frozen=True)
class StabilityPoint:
    m: float
    fixed_point: FixedPoint
    eigen: EigenResult


class StabilitySweep(list):
    """List of :class:`StabilityPoint` in grid order, plus failure flags."""

    @property
    def stable_at(self):
        """m values where the fixed point was *not* found unstable."""
        return [pt.m for pt in self if not pt.eigen.is_unstable]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            head = ["m", "x_star", "y_star", "z_star"]
            for i in range(1, 5):
                head += [f"re{i}", f"im{i}"]
            w.writerow(head + ["is_unstable"])
            for pt in self:
                s = pt.fixed_point.state
                row = [repr(pt.m), repr(s.x), repr(s.y), repr(s.z)]
                for lam in pt.eigen.eigenvalues:
                    row += [repr(float(lam.real)), repr(float(lam.imag))]
                w.writerow(row + [int(pt.eigen.is_unstable)])


def _nullcline_residual(x, p, g, slope):
    return eval_g(x, g) - (p.a0 / p.a1 - slope * x)


def _safeguarded_newton(f, df, lo, hi, tol=1e-15, maxiter=200):
    flo = f(lo)
    x = 0.5 * (lo + hi)
    for _ in range(maxiter):
        fx = f(x)
        if fx == 0.0:
            return x
        if (fx < 0) == (flo < 0):
            lo, flo = x, fx
        else:
            hi = x
        d = df(x)
        step_ok = d != 0.0
        if step_ok:
            xn = x - fx / d
            step_ok = lo < xn < hi
        if not step_ok:
            xn = 0.5 * (lo + hi)
        if abs(xn - x) <= tol * max(1.0, abs(x)):
            return xn
        x = xn
    raise NonConvergenceError("fixed-point Newton iteration did not converge")


def find_fixed_point(p: ModelParams, g: GCoeffs, x_lo=1e-9, n_scan=2000, max_widen=8):
    """Positive equilibrium (x*, y*, z*, 0) via the nullcline equation.

    Solves g(x) = A0/A1 - (A2/A1 - m gamma/omega^2) x for x > 0 by scanning a
    geometric grid for sign changes, then a bracketed Newton iteration. Warns
    when more than one positive root is bracketed and returns the smallest.
    """
    if not p.a1 > 0 or not p.omega > 0:
        raise ValueError("need a1 > 0 and omega > 0")
    ratio = p.gamma / p.omega**2
    slope = p.a2 / p.a1 - p.m * ratio
    f = lambda x: _nullcline_residual(x, p, g, slope)  # noqa: E731
    df = lambda x: eval_g_prime(x, g) + slope  # noqa: E731

    min_slope = abs(g.a) if g.a != 0 else 1.0
    x_hi = max(abs(p.a0 / p.a1) / min_slope * 10.0, 10 * x_lo)
    for _ in range(max_widen + 1):
        grid = np.geomspace(x_lo, x_hi, n_scan)
        vals = f(grid)
        idx = np.nonzero(np.sign(vals[1:]) * np.sign(vals[:-1]) <= 0)[0]
        if len(idx):
            break
        x_hi *= 10.0
    else:
        raise NoPositiveRootError(
            f"no positive fixed point found on [{x_lo:g}, {x_hi:g}] at m={p.m}")
    if len(idx) > 1:
        warnings.warn(f"{len(idx)} sign changes of the nullcline equation at m={p.m}; "
                      "returning the smallest positive root", stacklevel=2)
    i = idx[0]
    if vals[i] == 0.0:
        xs = float(grid[i])
    else:
        xs = _safeguarded_newton(f, df, float(grid[i]), float(grid[i + 1]))

    state = State(xs, p.a0 / p.a1 - (p.a2 / p.a1) * xs + p.m * ratio * xs, ratio * xs, 0.0)
    residual = float(np.linalg.norm(vector_field(state, p, g)))
    return FixedPoint(state=state, m_value=p.m, residual=residual)


def characteristic_polynomial(J):
    """Monic characteristic polynomial of a square matrix (Faddeev-LeVerrier)."""
    n = J.shape[0]
    coeffs = [1.0]
    M = np.zeros_like(J)
    ident = np.eye(n)
    ck = 1.0
    for k in range(1, n + 1):
        M = J @ M + ck * ident
        ck = -np.trace(J @ M) / k
        coeffs.append(ck)
    return np.array(coeffs)


def model_characteristic_polynomial(fp: FixedPoint, p: ModelParams, g: GCoeffs):
    """Monic quartic det(lambda I - J) at ``fp`` in closed form.

    The Jacobian couples an (x, y) block and a (z, u) block through one
    4-cycle, so det = D1 D2 - A1 m gamma / mu with
    D1 = (lambda + g'/mu)(lambda + A1) + A2/mu and D2 = lambda^2 + beta lambda + omega^2.
    Avoids the cancellation of trace-based recurrences when g'/mu dwarfs
    the other entries.
    """
    s = eval_g_prime(fp.state.x, g) / p.mu
    d1 = np.array([1.0, s + p.a1, s * p.a1 + p.a2 / p.mu])
    d2 = np.array([1.0, p.beta, p.omega**2])
    coeffs = np.polymul(d1, d2)
    coeffs[-1] -= p.a1 * p.m * p.gamma / p.mu
    return coeffs


def _poly_residual(coeffs, lam):
    n = len(coeffs) - 1
    powers = np.array([lam ** (n - i) for i in range(n + 1)])
    scale = np.sum(np.abs(coeffs) * np.abs(powers))
    return abs(np.polyval(coeffs, lam)) / scale if scale > 0 else 0.0


def _polish(coeffs, lam, max_iter=8):
    """Newton steps on the polynomial while they reduce |p(lambda)|."""
    d = np.polyder(coeffs)
    val = abs(np.polyval(coeffs, lam))
    for _ in range(max_iter):
        dv = np.polyval(d, lam)
        if dv == 0 or val == 0:
            break
        cand = lam - np.polyval(coeffs, lam) / dv
        cval = abs(np.polyval(coeffs, cand))
        if cval >= val:
            break
        lam, val = cand, cval
    return lam


def _group_pairs(eigs):
    remaining = list(eigs)
    pairs = []
    # conjugate pairs first
    for lam in sorted(eigs, key=lambda v: -abs(v.imag)):
        if lam not in remaining or abs(lam.imag) == 0.0:
            continue
        remaining.remove(lam)
        j = min(range(len(remaining)), key=lambda i: abs(remaining[i] - np.conj(lam)))
        pairs.append((lam, remaining.pop(j)))
    reals = sorted(remaining, key=lambda v: -v.real)
    pairs += [tuple(reals[i:i + 2]) for i in range(0, len(reals), 2)]
    return sorted(pairs, key=lambda pr: -max(v.real for v in pr))


def eigenvalues_at(fp: FixedPoint, p: ModelParams, g: GCoeffs):
    coeffs = model_characteristic_polynomial(fp, p, g)
    roots = np.roots(coeffs).astype(complex)
    if not np.all(np.isfinite(roots)):
        raise NonConvergenceError("characteristic polynomial root solve failed")
    roots = np.array([_polish(coeffs, r) for r in roots])
    # enforce exact conjugate symmetry for real matrices
    roots = np.where(np.abs(roots.imag) <= 1e-12 * np.abs(roots), roots.real + 0j, roots)
    roots = roots[np.lexsort((-roots.imag, -roots.real))]
    residual = max(_poly_residual(coeffs, r) for r in roots)
    pairs = _group_pairs(roots)
    pair_re = [max(v.real for v in pr) for pr in pairs]
    return EigenResult(
        eigenvalues=roots,
        pairs=tuple(pairs),
        stable_pair_re=float(min(pair_re)),
        unstable_pair_re=float(max(pair_re)),
        is_unstable=bool(np.any(roots.real > ZERO_RE)),
        char_poly=coeffs,
        char_residual=float(residual),
    )


def stability_sweep(m_grid, p_base: ModelParams, g: GCoeffs):
    m_grid = np.atleast_1d(np.asarray(m_grid, dtype=float))
    if m_grid.size == 0:
        raise ValueError("m_grid is empty")
    out = StabilitySweep()
    for m in m_grid:
        p = p_base.with_m(m)
        try:
            fp = find_fixed_point(p, g)
            eig = eigenvalues_at(fp, p, g)
        except UnijunctionError as exc:
            raise type(exc)(f"m={m}: {exc}") from exc
        out.append(StabilityPoint(float(m), fp, eig))
    return out
