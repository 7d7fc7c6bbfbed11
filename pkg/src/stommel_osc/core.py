"""Shared domain types and the piecewise-smooth vector field abstraction."""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

__all__ = [
    "DimensionError",
    "ParameterError",
    "PiecewiseVectorField",
    "ModelParams",
    "DimensionalParams",
    "Trajectory",
    "ForcingSpec",
    "evaluate",
    "region_of",
]

Region = tuple  # tuple of +1 / -1, one entry per switching function
Rhs = Callable[[float, np.ndarray], Sequence[float]]
Switch = Callable[[np.ndarray], float]


class DimensionError(ValueError):
    """State vector length does not match the field dimension."""


class ParameterError(ValueError):
    """Parameter record violates its invariants."""


@dataclass(frozen=True)
class PiecewiseVectorField:
    """A continuous vector field made of smooth pieces glued along switching surfaces.

    ``regions`` maps a sign pattern (one ``+1``/``-1`` per switching function,
    zero counted as ``+1``) to the smooth right-hand side ``f(t, s)`` valid on
    that side.  Each piece is also used as the smooth extension of itself
    slightly past its boundary by the integrator.
    """

    dim: int
    switching_functions: tuple[Switch, ...]
    regions: Mapping[Region, Rhs]
    time_dependent: bool = False
    labels: Mapping[Region, str] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        if self.dim < 1:
            raise ParameterError("dim must be positive")
        object.__setattr__(self, "switching_functions", tuple(self.switching_functions))
        n = len(self.switching_functions)
        for key in self.regions:
            if len(key) != n:
                raise ParameterError(f"region key {key!r} does not match {n} switching functions")

    def check_state(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if s.shape != (self.dim,):
            raise DimensionError(f"expected state of length {self.dim}, got shape {s.shape}")
        return s

    def switch_values(self, s: np.ndarray) -> np.ndarray:
        return np.array([g(s) for g in self.switching_functions], dtype=float)

    def rhs_in(self, region: Region, t: float, s: np.ndarray) -> np.ndarray:
        """Evaluate the smooth piece attached to ``region`` (no dispatch)."""
        return np.asarray(self.regions[region](t, s), dtype=float)


def region_of(field: PiecewiseVectorField, s) -> Region:
    s = field.check_state(s)
    return tuple(1 if g(s) >= 0.0 else -1 for g in field.switching_functions)


def evaluate(field: PiecewiseVectorField, t: float, s) -> np.ndarray:
    """Right-hand side of the active region at state ``s``.

    Points on a splitting surface go to the ``>=`` side; the pieces agree there.
    """
    s = field.check_state(s)
    return field.rhs_in(region_of(field, s), t, s)


@dataclass(frozen=True)
class ModelParams:
    """Dimensionless parameters of the box-model hierarchy.

    ``lambda_`` and ``delta0`` drive the reduced planar model; ``a``, ``b`` and
    ``delta`` the three time-scale model; ``mu`` is the fixed forcing ratio of
    the Stommel model.  Unused entries keep their defaults.
    """

    A: float
    epsilon: float = 0.01
    delta0: float = 0.1
    lambda_: float = 0.8
    mu: float = 1.0
    a: float = 0.6
    b: float = 2.0

    def __post_init__(self):
        if not self.A > 0:
            raise ParameterError(f"A must be positive, got {self.A}")
        if not 0 < self.epsilon < 1:
            raise ParameterError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not self.delta0 > 0:
            raise ParameterError(f"delta0 must be positive, got {self.delta0}")
        if not self.b > 0:
            raise ParameterError(f"b must be positive, got {self.b}")
        if not self.a > 0:
            raise ParameterError(f"a must be positive, got {self.a}")

    @property
    def delta(self) -> float:
        """Slow rate of the three time-scale model, ``delta0 / b``."""
        return self.delta0 / self.b

    @classmethod
    def from_feedback(cls, A: float, epsilon: float, delta: float, a: float, b: float,
                      mu: float = 1.0) -> "ModelParams":
        return cls(A=A, epsilon=epsilon, delta0=delta * b, lambda_=(1.0 + a) / b,
                   mu=mu, a=a, b=b)

    @classmethod
    def reduced(cls, A: float, lambda_: float, delta0: float) -> "ModelParams":
        # keep (a, b) consistent with lambda = (1 + a) / b where possible
        b = 2.0
        a = lambda_ * b - 1.0
        if a <= 0:
            b = 2.0 / lambda_
            a = 1.0
        return cls(A=A, delta0=delta0, lambda_=lambda_, a=a, b=b)


@dataclass(frozen=True)
class DimensionalParams:
    """Physical parameters of the Stommel box model.

    ``T_a`` and ``S_a`` are the equator-minus-pole atmospheric gradients;
    ``X_a`` and ``Y_a`` the corresponding sums, which only enter the
    decoupled mean equations of the four-box form.
    """

    R_T: float
    R_S: float
    alpha: float
    beta: float
    psi0: float
    T_a: float
    S_a: float
    X_a: float = 0.0
    Y_a: float = 0.0
    T0: float = 0.0
    S0: float = 0.0
    rho0: float = 1.0

    def validate(self) -> "DimensionalParams":
        if not self.R_T > self.R_S > 0:
            raise ParameterError("need R_T > R_S > 0")
        if not (self.alpha > 0 and self.beta > 0 and self.psi0 > 0 and self.T_a > 0):
            raise ParameterError("alpha, beta, psi0, T_a must be positive")
        return self

    @property
    def box_forcing(self) -> tuple[float, float, float, float]:
        """Atmospheric values (T_e, T_p, S_e, S_p) per box."""
        return ((self.X_a + self.T_a) / 2, (self.X_a - self.T_a) / 2,
                (self.Y_a + self.S_a) / 2, (self.Y_a - self.S_a) / 2)

    @classmethod
    def from_nondim(cls, A: float, epsilon: float, mu: float, **extra) -> "DimensionalParams":
        """Canonical physical scales (R_S = alpha = beta = T_a = 1) for given A, epsilon, mu."""
        return cls(R_T=1.0 / epsilon, R_S=1.0, alpha=1.0, beta=1.0, psi0=A / 2.0,
                   T_a=1.0, S_a=mu, **extra)


@dataclass
class Trajectory:
    """Time-ordered samples of one integration, with switching-event markers.

    ``events`` holds ``(time, switch index, direction)``; ``direction`` is +1
    when the switching function goes from negative to non-negative.
    ``crossings`` holds ``(time, section index, direction, state)`` for
    observer sections that do not change the active region.
    """

    times: np.ndarray
    states: np.ndarray
    events: list = field(default_factory=list)
    crossings: list = field(default_factory=list)
    # per-step dense-output objects from the integrator, if any
    segments: list | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.states.ndim == 1:
            self.states = self.states[:, None]
        if len(self.times) != len(self.states):
            raise ValueError("times and states have different lengths")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t1(self) -> float:
        return float(self.times[-1])

    @property
    def final(self) -> np.ndarray:
        return self.states[-1].copy()

    def event_mask(self) -> np.ndarray:
        """Per-sample switching index, -1 where the sample is not an event."""
        out = np.full(len(self.times), -1, dtype=int)
        if self.events:
            idx = np.searchsorted(self.times, [e[0] for e in self.events])
            out[idx] = [e[1] for e in self.events]
        return out


@dataclass(frozen=True)
class ForcingSpec:
    """Periodic forcing of the advective strength A and nullcline position lambda.

    With ``table`` set, A(tau) is interpolated linearly from its
    ``(tau, A)`` rows instead of the sinusoid.
    """

    A_bar: float = 3.5
    p: float = 2.4
    lambda_bar: float = 0.8
    q: float = 1.99
    omega: float = math.pi / 270
    theta: float = 250.0
    table: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.p < 0 or self.q < 0:
            raise ParameterError("forcing amplitudes must be non-negative")
        if not self.omega > 0:
            raise ParameterError("omega must be positive")
        if self.table is not None:
            tab = np.asarray(self.table, dtype=float)
            if tab.ndim != 2 or tab.shape[1] != 2 or len(tab) < 2:
                raise ParameterError("table needs at least two (tau, A) rows")
            if not np.all(np.diff(tab[:, 0]) > 0):
                raise ParameterError("table must be strictly increasing in tau")
            object.__setattr__(self, "table", tuple(map(tuple, tab.tolist())))

    @property
    def period(self) -> float:
        return 2 * math.pi / self.omega

    def A_at(self, tau: float) -> float:
        if self.table is None:
            return self.A_bar + self.p * math.sin(self.omega * tau)
        tab = self.table
        if not tab[0][0] <= tau <= tab[-1][0]:
            raise ValueError(f"tau={tau} outside forcing table range [{tab[0][0]}, {tab[-1][0]}]")
        taus = self._taus()
        k = min(max(bisect.bisect_right(taus, tau) - 1, 0), len(taus) - 2)
        (t0, a0), (t1, a1) = tab[k], tab[k + 1]
        return a0 + (a1 - a0) * (tau - t0) / (t1 - t0)

    def _taus(self):
        cached = self.__dict__.get("_tau_cache")
        if cached is None:
            cached = [r[0] for r in self.table]
            object.__setattr__(self, "_tau_cache", cached)
        return cached

    def lambda_at(self, tau: float) -> float:
        return self.lambda_bar + self.q * math.sin(self.omega * (tau - self.theta))
