"""Lyapunov spectra, Kaplan-Yorke dimension, attractor classes, next-maxima maps."""

from __future__ import annotations

import csv
import enum
import functools
import json
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import DegenerateTangentError, TooFewSamplesError
from .integrate import (IntegratorConfig, MaximaSeries, _sample_model,
                        default_initial_state, raise_for_status, run_sampler)
from .model import GCoeffs, ModelParams, State, param_vector

DEFAULT_ZERO_THRESHOLD = 0.05
DEFAULT_RENORM_INTERVAL = 1e-3
DEFAULT_TOTAL_TIME = 2000.0
TINY_NORM = 1e-250


class AttractorKind(enum.Enum):
    FIXED_POINT = "FixedPointAttractor"
    LIMIT_CYCLE = "LimitCycle"
    TORUS = "Torus"
    CHAOS = "Chaos"
    UNCLASSIFIED = "Unclassified"


# labels used by the reference classification table
REFERENCE_LABELS = {
    AttractorKind.LIMIT_CYCLE: "Periodic Motion (Limit Cycle)",
    AttractorKind.CHAOS: "2-Chaos",
    AttractorKind.TORUS: "3-Torus",
}

_PATTERNS = {
    "----": AttractorKind.FIXED_POINT,
    "0---": AttractorKind.LIMIT_CYCLE,
    "00--": AttractorKind.TORUS,
    "+0--": AttractorKind.CHAOS,
}


@dataclass(frozen=True)
class AttractorClass:
    kind: AttractorKind
    zero_threshold: float
    sign_pattern: str

    @property
    def report(self):
        ref = REFERENCE_LABELS.get(self.kind)
        s = f"{self.kind.value} ({self.sign_pattern}, |lambda| <= {self.zero_threshold:g} is zero)"
        return s + (f"; reference table label: {ref}" if ref else "")


@dataclass(frozen=True, eq=False)
class LyapunovResult:
    spectrum: np.ndarray
    renorm_interval: float
    total_time: float
    history_times: np.ndarray
    convergence_history: np.ndarray  # running estimates, one row per renormalization
    mean_trace: float  # time average of trace J over the averaging window
    d_ky: float
    attractor_class: AttractorClass
    settings: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "spectrum": [float(v) for v in self.spectrum],
            "sign_pattern": self.attractor_class.sign_pattern,
            "d_ky": self.d_ky,
            "class": self.attractor_class.kind.value,
            "class_report": self.attractor_class.report,
            "zero_threshold": self.attractor_class.zero_threshold,
            "mean_trace": self.mean_trace,
            "renorm_interval": self.renorm_interval,
            "total_time": self.total_time,
            "settings": self.settings,
        }

    def to_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    def history_to_csv(self, path, every=1):
        n = self.convergence_history.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"lambda{i + 1}" for i in range(n)])
            for t, row in zip(self.history_times[::every], self.convergence_history[::every]):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in row])


@dataclass(frozen=True, eq=False)
class NextMaximaMap:
    points: np.ndarray  # shape (n - 1, 2): (M_k, M_{k+1})

    def __len__(self):
        return len(self.points)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("mk", "mk1"))
            for a, b in self.points:
                w.writerow((repr(float(a)), repr(float(b))))


@dataclass(frozen=True)
class System:
    """Compiled right-hand side and Jacobian sharing one parameter vector.

    Both are numba functions returning an integer status (0 for success):
    ``rhs(t, y, p, dy)`` and ``jac(t, y, p, J)``.

    ``tangent_rhs`` optionally replaces the generic tangent extension built
    from ``rhs`` and ``jac``.
    """

    rhs: object
    jac: object
    dim: int
    tangent_rhs: object = None


MODEL_SYSTEM = System(K.model_rhs, K.model_jac, 4, K.model_tangent_rhs)


@functools.lru_cache(maxsize=None)
def _lyapunov_kernel(system: System):
    ext = system.tangent_rhs
    if ext is None:
        ext = K.make_tangent_system(system.rhs, system.jac, system.dim)
    return K.make_lyapunov(ext, system.dim)


@functools.lru_cache(maxsize=None)
def _state_sampler(system: System):
    if system.rhs is K.model_rhs:
        return _sample_model
    return K.make_sampler(system.rhs)


def lyapunov_spectrum_system(system: System, y0, pvec, cfg: IntegratorConfig | None = None,
                             renorm_interval=DEFAULT_RENORM_INTERVAL,
                             total_time=DEFAULT_TOTAL_TIME,
                             zero_threshold=DEFAULT_ZERO_THRESHOLD):
    """Benettin estimate of the full spectrum of any compiled system.

    Runs ``cfg.t_transient`` of plain integration first, then co-integrates
    ``dim`` tangent vectors, re-orthonormalising them (modified Gram-Schmidt)
    every ``renorm_interval``.
    """
    cfg = cfg or IntegratorConfig()
    if not 0 < renorm_interval < total_time:
        raise ValueError("need 0 < renorm_interval < total_time")
    n = system.dim
    y0 = np.asarray(y0, dtype=float)
    pvec = np.ascontiguousarray(pvec, dtype=float)
    if cfg.t_transient > 0:
        y0 = run_sampler(_state_sampler(system), y0, pvec, np.array([cfg.t_transient]),
                         cfg, where="transient")[0]
    Y0 = np.concatenate([y0, np.eye(n).ravel(), [0.0]])
    n_renorm = int(round(total_time / renorm_interval))
    sums = np.zeros(n)
    history = np.zeros((n_renorm, n))
    trace_int = np.zeros(1)
    run = _lyapunov_kernel(system)
    h_init = min(cfg.h_init, renorm_interval)
    status, t, done = run(Y0, pvec, 0.0, float(renorm_interval), n_renorm, h_init,
                          cfg.h_max, cfg.rtol, cfg.atol, cfg.blowup_bound, cfg.max_steps,
                          TINY_NORM, sums, history, trace_int)
    if status == K.DEGENERATE:
        raise DegenerateTangentError(
            f"tangent vector norm underflowed at t={t:.6g}; shorten renorm_interval")
    raise_for_status(status, t, "tangent integration")
    window = n_renorm * renorm_interval
    spectrum = np.sort(sums / window)[::-1]
    cls = classify_attractor(spectrum, zero_threshold)
    return LyapunovResult(
        spectrum=spectrum,
        renorm_interval=float(renorm_interval),
        total_time=float(window),
        history_times=renorm_interval * np.arange(1, n_renorm + 1),
        convergence_history=history,
        mean_trace=float(trace_int[0] / window),
        d_ky=kaplan_yorke(spectrum),
        attractor_class=cls,
        settings={"integrator": cfg.as_dict(), "initial_state": [float(v) for v in y0]},
    )


def lyapunov_spectrum(s0, p: ModelParams, g: GCoeffs, cfg: IntegratorConfig | None = None,
                      renorm_interval=DEFAULT_RENORM_INTERVAL, total_time=DEFAULT_TOTAL_TIME,
                      zero_threshold=DEFAULT_ZERO_THRESHOLD):
    """Lyapunov spectrum of the memristor model, transient discarded first."""
    if s0 is None:
        s0 = default_initial_state(p, g)
    y0 = s0.as_array() if isinstance(s0, State) else np.asarray(s0, dtype=float)
    res = lyapunov_spectrum_system(MODEL_SYSTEM, y0, param_vector(p, g), cfg,
                                   renorm_interval, total_time, zero_threshold)
    res.settings.update({"start_state": [float(v) for v in y0], "params": p.as_dict(),
                         "g": g.as_dict()})
    return res


def kaplan_yorke(spectrum):
    """Kaplan-Yorke dimension of a descending spectrum.

    j is the largest count whose partial sum is non-negative;
    D = j + S_j / |lambda_{j+1}|, or D = len(spectrum) if all partial sums
    are non-negative, and 0 when the leading exponent is negative.
    """
    lam = np.asarray(spectrum, dtype=float)
    if len(lam) == 0 or lam[0] < 0:
        return 0.0
    csum = np.cumsum(lam)
    j = int(np.nonzero(csum >= 0)[0][-1]) + 1
    if j == len(lam):
        return float(j)
    return float(j + csum[j - 1] / abs(lam[j]))


def sign_pattern(spectrum, zero_threshold=DEFAULT_ZERO_THRESHOLD):
    return "".join("0" if abs(v) <= zero_threshold else ("+" if v > 0 else "-")
                   for v in spectrum)


def classify_attractor(spectrum, zero_threshold=DEFAULT_ZERO_THRESHOLD):
    pat = sign_pattern(spectrum, zero_threshold)
    kind = _PATTERNS.get(pat, AttractorKind.UNCLASSIFIED)
    return AttractorClass(kind=kind, zero_threshold=float(zero_threshold), sign_pattern=pat)


def next_maxima_map(ms):
    values = ms.values if isinstance(ms, MaximaSeries) else np.asarray(ms, dtype=float)
    if len(values) < 2:
        raise TooFewSamplesError(f"need at least 2 maxima, got {len(values)}")
    return NextMaximaMap(points=np.column_stack([values[:-1], values[1:]]))


class MapStructure(enum.Enum):
    POINT = "point"  # no sustained oscillation
    CLUSTER = "cluster"  # finitely many clusters: periodic
    CURVE = "curve"  # closed one-dimensional curve: quasi-periodic
    SCATTER = "scatter"  # neither: chaotic
    SPARSE = "sparse"  # too few points to decide


# which map structure each Lyapunov class should produce
EXPECTED_STRUCTURE = {
    AttractorKind.FIXED_POINT: MapStructure.POINT,
    AttractorKind.LIMIT_CYCLE: MapStructure.CLUSTER,
    AttractorKind.TORUS: MapStructure.CURVE,
    AttractorKind.CHAOS: MapStructure.SCATTER,
}


def count_clusters(values, gap):
    """Number of groups in 1-D data separated by gaps larger than ``gap``."""
    v = np.sort(np.asarray(values, dtype=float))
    if len(v) == 0:
        return 0
    return int(np.sum(np.diff(v) > gap)) + 1


def curve_gap(points):
    """Largest step between angular neighbours around the centroid, as a
    fraction of the point set's extent.

    Small values mean the points trace a closed star-shaped curve.
    """
    pts = np.asarray(points, dtype=float)
    extent = float(max(np.ptp(pts[:, 0]), np.ptp(pts[:, 1])))
    if extent == 0.0:
        return 0.0
    centred = pts - pts.mean(axis=0)
    order = np.argsort(np.arctan2(centred[:, 1], centred[:, 0]))
    ring = pts[order]
    steps = np.hypot(*(np.roll(ring, -1, axis=0) - ring).T)
    return float(steps.max() / extent)


def map_structure(nmm: NextMaximaMap, signal_amplitude=None, amp_tol=1e-6,
                  cluster_tol=1e-3, curve_tol=0.05, min_curve_points=20):
    """Structural reading of a next-maxima map.

    ``signal_amplitude`` is the peak-to-peak range of the sampled signal;
    below ``amp_tol`` the motion counts as an equilibrium regardless of the
    map's shape.
    """
    if signal_amplitude is not None and signal_amplitude < amp_tol:
        return MapStructure.POINT
    if len(nmm) == 0:
        return MapStructure.POINT
    first = nmm.points[:, 0]
    if count_clusters(first, cluster_tol) <= max(1, len(first) // 10):
        return MapStructure.CLUSTER
    if len(nmm) < min_curve_points:
        return MapStructure.SPARSE
    if curve_gap(nmm.points) < curve_tol:
        return MapStructure.CURVE
    return MapStructure.SCATTER
