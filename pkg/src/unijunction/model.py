"""Uni-junction memristor model: domain types, characteristics, vector field.

The dimensionless system is

    mu dx/dt = y - g(x)
       dy/dt = A0 - A1 y - A2 x + A1 m z
       dz/dt = u
       du/dt = -beta u - omega^2 z + gamma x

with the memristive characteristic g(x) = x (a + b x^2 / (x + c)^2).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import _kernels
from .errors import NonFiniteStateError, SingularInputError

POLE_EPS = _kernels.POLE_EPS

STATE_FIELDS = ("x", "y", "z", "u")


@dataclass(frozen=True)
class State:
    """Point in phase space: current x, voltage y, modulation z and dz/dt = u."""

    x: float
    y: float
    z: float
    u: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.as_tuple()):
            raise NonFiniteStateError(f"non-finite state {self.as_tuple()}")

    def as_tuple(self):
        return (self.x, self.y, self.z, self.u)

    def as_array(self):
        return np.array(self.as_tuple(), dtype=float)

    @classmethod
    def from_array(cls, arr):
        x, y, z, u = (float(v) for v in arr)
        return cls(x, y, z, u)


@dataclass(frozen=True)
class ModelParams:
    mu: float
    a0: float
    a1: float
    a2: float
    beta: float
    omega: float
    gamma: float = 1.0
    m: float = 0.0

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if not self.a1 > 0:
            raise ValueError(f"a1 must be positive, got {self.a1}")
        if not 0.0 <= self.m <= 1.0:
            warnings.warn(f"control parameter m={self.m} outside [0, 1]", stacklevel=3)

    def with_m(self, m):
        return replace(self, m=float(m))

    def as_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class GCoeffs:
    a: float
    b: float
    c: float

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"offset coefficient c must be positive, got {self.c}")

    def as_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class MemristorDCCoeffs:
    alpha_m: float  # amperes
    beta_m: float  # ohms

    def __post_init__(self):
        if self.alpha_m == 0:
            raise ValueError("alpha_m must be non-zero")


@dataclass(frozen=True)
class CircuitValues:
    """Physical component values (SI units) and the scaling constants."""

    v_s: float
    v_bias: float
    r: float
    r2: float
    rb2: float
    cap: float
    ind: float
    alpha_scale: float = 1e-3
    beta1: float = 1e-4
    v_scale: float = 1.0

    def __post_init__(self):
        for name in ("r", "cap", "ind", "alpha_scale", "beta1", "v_scale"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        for name in ("r2", "rb2"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def as_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class Discrepancy:
    """A derived coefficient that disagrees with a reference parameter set."""

    name: str
    computed: float
    reference: float
    relative_difference: float
    note: str


@dataclass(frozen=True)
class DerivedParams:
    k: float
    beta2: float
    v_bias_prime: float
    a0: float
    a1: float
    a2: float
    mu: float
    discrepancies: tuple = field(default=())

    def as_dict(self):
        d = asdict(self)
        d["discrepancies"] = [asdict(x) for x in self.discrepancies]
        return d


PAPER_PARAMS = ModelParams(mu=0.05, a0=26.0, a1=0.7925, a2=49.59, beta=0.008,
                           omega=1.2, gamma=1.0, m=0.0)
PAPER_G = GCoeffs(a=419.888, b=422.443, c=0.0129707)
PAPER_CIRCUIT = CircuitValues(v_s=7.0, v_bias=4.67, r=12.6e3, r2=677.0, rb2=2.5e3,
                              cap=49.73e-9, ind=0.2e-3)

DISCREPANCY_RTOL = 0.05


def _check_pole(x, c, what="x"):
    if np.any(np.abs(np.asarray(x) + c) < POLE_EPS):
        raise SingularInputError(f"{what} within {POLE_EPS:g} of the pole at {-c:g}")


def eval_g(x, coeffs: GCoeffs):
    """Memristive characteristic g(x) = x (a + b x^2 / (x + c)^2).

    Accepts scalars or arrays.
    """
    _check_pole(x, coeffs.c)
    x = np.asarray(x, dtype=float)
    r = x / (x + coeffs.c)
    out = x * (coeffs.a + coeffs.b * r * r)
    return float(out) if out.ndim == 0 else out


def eval_g_prime(x, coeffs: GCoeffs):
    _check_pole(x, coeffs.c)
    x = np.asarray(x, dtype=float)
    a, b, c = coeffs.a, coeffs.b, coeffs.c
    s = c + x
    out = (a * s**3 + b * x * x * (3.0 * c + x)) / s**3
    return float(out) if out.ndim == 0 else out


def eval_memristor_dc(i_m, coeffs: MemristorDCCoeffs):
    """DC v-i characteristic v = beta i (-1 + i^2 / (i + alpha)^2)."""
    alpha = coeffs.alpha_m
    if np.any(np.abs(np.asarray(i_m) + alpha) < POLE_EPS):
        raise SingularInputError(f"current at the pole i = {-alpha:g}")
    i = np.asarray(i_m, dtype=float)
    out = i * (-1.0 + i * i / (i + alpha) ** 2) * coeffs.beta_m
    return float(out) if out.ndim == 0 else out


def param_vector(p: ModelParams, g: GCoeffs):
    """Flat parameter layout consumed by the compiled kernels."""
    return np.array([p.mu, p.a0, p.a1, p.a2, p.beta, p.omega, p.gamma, p.m,
                     g.a, g.b, g.c], dtype=float)


def _state_array(s):
    arr = s.as_array() if isinstance(s, State) else np.asarray(s, dtype=float)
    if arr.shape != (4,):
        raise ValueError(f"state must have 4 components, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteStateError(f"non-finite state {arr}")
    return arr


def vector_field(s, p: ModelParams, coeffs: GCoeffs):
    """Time derivative (dx, dy, dz, du) at state ``s`` as a length-4 array."""
    x, y, z, u = _state_array(s)
    gx = eval_g(x, coeffs)
    return np.array([
        (y - gx) / p.mu,
        p.a0 - p.a1 * y - p.a2 * x + p.a1 * p.m * z,
        u,
        -p.beta * u - p.omega**2 * z + p.gamma * x,
    ])


def jacobian(s, p: ModelParams, coeffs: GCoeffs):
    x = _state_array(s)[0]
    gp = eval_g_prime(x, coeffs)
    return np.array([
        [-gp / p.mu, 1.0 / p.mu, 0.0, 0.0],
        [-p.a2, -p.a1, p.m * p.a1, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [p.gamma, 0.0, -p.omega**2, -p.beta],
    ])


def derive_dimensionless(cv: CircuitValues, reference: ModelParams | None = PAPER_PARAMS):
    """Dimensionless coefficients from physical component values.

    When ``reference`` is given, every coefficient differing from it by more
    than 5% relative is reported in ``discrepancies``; the computed values are
    always returned unchanged.
    """
    r_base = cv.r2 + cv.rb2
    if r_base == 0:
        raise ZeroDivisionError("r2 + rb2 is zero")
    k = 1.0 + cv.r / r_base
    beta2 = cv.r * cv.cap / k
    v_bias_prime = cv.v_s + cv.r * cv.v_bias / r_base
    a1 = cv.beta1 / beta2
    a0 = a1 * v_bias_prime / cv.v_scale
    a2 = a1 * cv.r * cv.alpha_scale * k / cv.v_scale
    mu = cv.alpha_scale * cv.ind * k * k / (cv.beta1 * cv.v_scale)

    notes = []
    if reference is not None:
        for name, value in (("a0", a0), ("a1", a1), ("a2", a2), ("mu", mu)):
            ref = getattr(reference, name)
            rel = abs(value - ref) / abs(ref)
            if rel > DISCREPANCY_RTOL:
                notes.append(Discrepancy(
                    name=name, computed=value, reference=ref, relative_difference=rel,
                    note=(f"{name} computed from the circuit values is {value:.6g}, "
                          f"reference set uses {ref:.6g}; dynamics runs use the "
                          f"reference value"),
                ))
    return DerivedParams(k=k, beta2=beta2, v_bias_prime=v_bias_prime, a0=a0, a1=a1,
                         a2=a2, mu=mu, discrepancies=tuple(notes))


def params_from_derived(d: DerivedParams, base: ModelParams = PAPER_PARAMS):
    """ModelParams with the circuit-derived a0..mu and the rest from ``base``."""
    return replace(base, a0=d.a0, a1=d.a1, a2=d.a2, mu=d.mu)
