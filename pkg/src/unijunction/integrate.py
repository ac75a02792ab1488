"""Adaptive time integration, local-maxima extraction and the driven branch."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy.optimize import brentq

from . import _kernels as K
from .errors import (BlowUpError, IntegrationError, NonFiniteStateError,
                     SingularInputError, TooFewSamplesError)
from .model import STATE_FIELDS, GCoeffs, ModelParams, State, eval_g, param_vector


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-8
    atol: float = 1e-10
    h_init: float = 1e-4
    h_max: float = 0.1
    t_transient: float = 500.0
    t_record: float = 500.0
    sample_dt: float = 0.005
    blowup_bound: float = 1e9
    max_steps: int = 2_000_000_000

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("rtol and atol must be positive")
        if not 0 < self.h_init <= self.h_max:
            raise ValueError("need 0 < h_init <= h_max")
        if self.t_transient < 0 or self.t_record < 0:
            raise ValueError("t_transient and t_record must be non-negative")
        if not self.sample_dt > 0:
            raise ValueError("sample_dt must be positive")

    def replace(self, **kw):
        return replace(self, **kw)

    def as_dict(self):
        return asdict(self)


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # shape (n, 4), columns x, y, z, u
    params_used: ModelParams

    def __len__(self):
        return len(self.times)

    def coordinate(self, name):
        return self.states[:, STATE_FIELDS.index(name)]

    @property
    def final_state(self):
        return State.from_array(self.states[-1])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("t",) + STATE_FIELDS)
            for t, s in zip(self.times, self.states):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in s])


@dataclass(frozen=True, eq=False)
class MaximaSeries:
    coordinate: str
    times: np.ndarray
    values: np.ndarray

    def __len__(self):
        return len(self.values)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("t", "value"))
            for t, v in zip(self.times, self.values):
                w.writerow((repr(float(t)), repr(float(v))))


@dataclass(frozen=True, eq=False)
class HysteresisLoop:
    drive_offset: float
    drive_amplitude: float
    drive_freq: float
    samples: np.ndarray  # shape (n, 2): drive value, x
    loop_area: float
    pinch_distance: float
    extent: float  # diagonal of the loop's bounding box

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("drive", "x"))
            for d, x in self.samples:
                w.writerow((repr(float(d)), repr(float(x))))


_sample_model = K.make_sampler(K.model_rhs)
_sample_driven = K.make_sampler(K.driven_rhs)


def raise_for_status(status, t, where=""):
    """Translate a kernel status code into the matching exception."""
    if status == K.OK:
        return
    at = f" at t={t:.6g}" + (f" ({where})" if where else "")
    if status == K.BLOWUP:
        raise BlowUpError("state norm exceeded the blow-up bound" + at, t=t)
    if status == K.POLE:
        raise SingularInputError("trajectory reached the pole of g" + at)
    if status == K.NONFINITE:
        raise NonFiniteStateError("non-finite state" + at)
    if status == K.STEP_UNDERFLOW:
        raise IntegrationError("step size underflow" + at)
    if status == K.MAX_STEPS:
        raise IntegrationError("step budget exhausted" + at)
    raise IntegrationError(f"integrator status {status}" + at)


def sample_times(cfg: IntegratorConfig):
    n = int(math.floor(cfg.t_record / cfg.sample_dt + 1e-9)) + 1
    return cfg.t_transient + cfg.sample_dt * np.arange(n)


def run_sampler(sampler, y0, pvec, t_out, cfg: IntegratorConfig, t0=0.0, where=""):
    y0 = np.ascontiguousarray(y0, dtype=float)
    if not np.all(np.isfinite(y0)):
        raise NonFiniteStateError(f"non-finite initial state {y0}")
    out = np.empty((len(t_out), len(y0)))
    status, t, _ = sampler(y0, pvec, float(t0), np.ascontiguousarray(t_out, dtype=float),
                           cfg.h_init, cfg.h_max, cfg.rtol, cfg.atol, cfg.blowup_bound,
                           cfg.max_steps, out)
    raise_for_status(status, t, where)
    return out


def default_initial_state(p: ModelParams, g: GCoeffs, dx=1e-2):
    """Fixed point at the given m, nudged by ``dx`` along x."""
    from .analysis import find_fixed_point

    s = find_fixed_point(p, g).state
    return State(s.x + dx, s.y, s.z, s.u)


def integrate_trajectory(s0, p: ModelParams, g: GCoeffs, cfg: IntegratorConfig | None = None):
    """Integrate from ``s0`` and sample on [t_transient, t_transient + t_record].

    ``s0=None`` starts from :func:`default_initial_state`.
    """
    cfg = cfg or IntegratorConfig()
    if s0 is None:
        s0 = default_initial_state(p, g)
    y0 = s0.as_array() if isinstance(s0, State) else np.asarray(s0, dtype=float)
    if abs(y0[0] + g.c) < K.POLE_EPS:
        raise SingularInputError("initial state sits on the pole of g")
    t_out = sample_times(cfg)
    states = run_sampler(_sample_model, y0, param_vector(p, g), t_out, cfg, where=f"m={p.m}")
    return Trajectory(times=t_out, states=states, params_used=p)


def find_maxima(times, values):
    """Strict interior local maxima, refined by a parabola through three samples.

    Returns ``(times, values)`` arrays; empty arrays for monotone input.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(v) < 3:
        raise TooFewSamplesError(f"need at least 3 samples, got {len(v)}")
    i = np.nonzero((v[1:-1] > v[:-2]) & (v[1:-1] > v[2:]))[0] + 1
    t0, t1, t2 = t[i - 1], t[i], t[i + 1]
    v0, v1, v2 = v[i - 1], v[i], v[i + 1]
    # vertex of the interpolating parabola (divided differences)
    d01 = (v1 - v0) / (t1 - t0)
    d12 = (v2 - v1) / (t2 - t1)
    curv = (d12 - d01) / (t2 - t0)
    tv = 0.5 * (t0 + t1) - d01 / (2.0 * curv)
    vv = v1 + d01 * (tv - t1) + curv * (tv - t0) * (tv - t1)
    return tv, vv


def extract_maxima(traj: Trajectory, coordinate="u"):
    if coordinate not in STATE_FIELDS:
        raise ValueError(f"unknown coordinate {coordinate!r}")
    tv, vv = find_maxima(traj.times, traj.coordinate(coordinate))
    return MaximaSeries(coordinate=coordinate, times=tv, values=vv)


def invert_g(y, g: GCoeffs):
    """Solve g(x) = y on the branch x > -c.

    Assumes g is increasing there, which holds for a, b > 0.
    """
    if y == 0.0:
        return 0.0
    if y > 0:
        hi = 1.0
        while eval_g(hi, g) < y:
            hi *= 2.0
        return brentq(lambda x: eval_g(x, g) - y, 0.0, hi, xtol=1e-15, rtol=1e-15)
    gap = g.c / 2.0
    while eval_g(-g.c + gap, g) > y:
        gap /= 10.0
    return brentq(lambda x: eval_g(x, g) - y, -g.c + gap, 0.0, xtol=1e-15, rtol=1e-15)


def _shoelace(pts):
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def simulate_driven_branch(g: GCoeffs, mu, drive_offset, drive_amplitude, drive_freq,
                           cfg: IntegratorConfig | None = None, transient_periods=5,
                           record_periods=2, samples_per_period=2000):
    """Drive the fast branch mu dx/dt = y_in(t) - g(x) with a sinusoid.

    y_in(t) = offset + amplitude sin(freq t). The loop is recorded over
    ``record_periods`` periods after discarding ``transient_periods``; the
    area is the shoelace area of the final period (positive when the curve
    runs counter-clockwise in the (drive, x) plane).
    """
    cfg = cfg or IntegratorConfig()
    if drive_amplitude < 0:
        raise ValueError("drive_amplitude must be non-negative")
    if transient_periods < 5 or record_periods < 2:
        raise ValueError("need at least 5 transient and 2 recorded periods")
    if not mu > 0:
        raise ValueError("mu must be positive")
    if drive_freq > 0:
        period = 2.0 * np.pi / drive_freq
    else:
        period = max(cfg.t_record, 1.0)
    t_start = transient_periods * period
    n = record_periods * samples_per_period
    t_out = t_start + period * np.arange(n + 1) / samples_per_period

    pvec = np.array([mu, drive_offset, drive_amplitude, drive_freq, g.a, g.b, g.c])
    x0 = invert_g(drive_offset, g)
    xs = run_sampler(_sample_driven, np.array([x0]), pvec, t_out, cfg, where="driven branch")
    drive = drive_offset + drive_amplitude * np.sin(drive_freq * t_out)
    samples = np.column_stack([drive, xs[:, 0]])

    last = samples[-samples_per_period - 1:-1]
    area = _shoelace(last)
    pinch = float(np.min(np.hypot(samples[:, 0], samples[:, 1])))
    extent = float(np.hypot(np.ptp(samples[:, 0]), np.ptp(samples[:, 1])))
    return HysteresisLoop(drive_offset=float(drive_offset),
                          drive_amplitude=float(drive_amplitude),
                          drive_freq=float(drive_freq), samples=samples,
                          loop_area=area, pinch_distance=pinch, extent=extent)


def physical_to_drive_freq(f_hz, beta1=1e-4):
    """Dimensionless angular frequency 2 pi f beta1 of a physical drive."""
    return 2.0 * np.pi * f_hz * beta1
