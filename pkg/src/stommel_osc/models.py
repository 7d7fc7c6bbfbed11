"""Right-hand sides of the Stommel box-model hierarchy.

Four-box and two-box dimensional forms, the dimensionless Stommel model,
the three time-scale model with a dynamic forcing ratio, its planar
reduction on the slow manifold ``x = 1``, and the orbitally forced variant.
Each model also comes as a :class:`PiecewiseVectorField` whose switching
function is the zero set of the circulation.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import DimensionalParams, ForcingSpec, ModelParams, ParameterError, PiecewiseVectorField

__all__ = [
    "BoxState",
    "NondimState",
    "Scaling",
    "DegenerateParameters",
    "rhs_stom4",
    "reduce_4box",
    "rhs_stom2",
    "nondimensionalize",
    "rhs_nondim",
    "rhs_lin3",
    "rhs_reduced",
    "rhs_forced",
    "psi",
    "stom4_field",
    "stom2_field",
    "nondim_field",
    "lin3_field",
    "reduced_field",
    "forced_field",
    "MODEL_COLUMNS",
]


class DegenerateParameters(ParameterError):
    pass


class BoxState(NamedTuple):
    T_e: float
    T_p: float
    S_e: float
    S_p: float


class NondimState(NamedTuple):
    x: float
    y: float
    mu: float


MODEL_COLUMNS = {
    "stom4": ("T_e", "T_p", "S_e", "S_p"),
    "stom2": ("T", "S"),
    "nondim": ("x", "y"),
    "lin3": ("x", "y", "mu"),
    "reduced": ("y", "mu"),
    "forced": ("y", "mu"),
}


def _circulation(p: DimensionalParams, dT: float, dS: float) -> float:
    return p.psi0 * (p.alpha * dT - p.beta * dS)


def rhs_stom4(s, p: DimensionalParams) -> BoxState:
    T_e, T_p, S_e, S_p = s
    Tea, Tpa, Sea, Spa = p.box_forcing
    q = abs(_circulation(p, T_e - T_p, S_e - S_p))
    return BoxState(
        p.R_T * (Tea - T_e) + q * (T_p - T_e),
        p.R_T * (Tpa - T_p) + q * (T_e - T_p),
        p.R_S * (Sea - S_e) + q * (S_p - S_e),
        p.R_S * (Spa - S_p) + q * (S_e - S_p),
    )


def reduce_4box(s) -> tuple[float, float, float, float]:
    """Gradients and sums ``(T, S, X, Y)`` of a four-box state."""
    T_e, T_p, S_e, S_p = s
    return T_e - T_p, S_e - S_p, T_e + T_p, S_e + S_p


def rhs_stom2(T: float, S: float, p: DimensionalParams) -> tuple[float, float]:
    q = abs(_circulation(p, T, S))
    return (p.R_T * (p.T_a - T) - 2 * q * T,
            p.R_S * (p.S_a - S) - 2 * q * S)


@dataclass(frozen=True)
class Scaling:
    """Dimensionless groups and the state/time map of the two-box model.

    ``tau = R_S t`` is the slow time; the dimensionless right-hand sides in
    this module run in fast time ``R_T t = tau / epsilon``.
    """

    epsilon: float
    A: float
    mu: float
    T_a: float
    alpha: float
    beta: float
    R_S: float
    R_T: float

    def to_nondim(self, T, S, t):
        return (np.asarray(T) / self.T_a,
                self.beta * np.asarray(S) / (self.alpha * self.T_a),
                self.R_S * np.asarray(t))

    def to_dim(self, x, y, tau):
        return (np.asarray(x) * self.T_a,
                np.asarray(y) * self.alpha * self.T_a / self.beta,
                np.asarray(tau) / self.R_S)

    def fast_time(self, t):
        return self.R_T * np.asarray(t)

    def model_params(self, **extra) -> ModelParams:
        return ModelParams(A=self.A, epsilon=self.epsilon, mu=self.mu, **extra)


def nondimensionalize(p: DimensionalParams) -> Scaling:
    if p.T_a == 0 or p.R_S == 0 or p.R_T == 0 or p.alpha == 0:
        raise DegenerateParameters("T_a, R_S, R_T and alpha must be nonzero")
    return Scaling(
        epsilon=p.R_S / p.R_T,
        A=2 * p.psi0 * p.alpha * p.T_a / p.R_S,
        mu=p.beta * p.S_a / (p.alpha * p.T_a),
        T_a=p.T_a, alpha=p.alpha, beta=p.beta, R_S=p.R_S, R_T=p.R_T,
    )


def rhs_nondim(x: float, y: float, params: ModelParams) -> tuple[float, float]:
    eps, A = params.epsilon, params.A
    adv = A * abs(x - y)
    return 1 - x - eps * adv * x, eps * (params.mu - y - adv * y)


def rhs_lin3(x: float, y: float, mu: float, params: ModelParams) -> tuple[float, float, float]:
    eps, A = params.epsilon, params.A
    adv = A * abs(x - y)
    return (1 - x - eps * adv * x,
            eps * (mu - y - adv * y),
            eps * params.delta * (1 + params.a * x - params.b * y))


def rhs_reduced(y: float, mu: float, params: ModelParams) -> tuple[float, float]:
    return (mu - y - params.A * abs(1 - y) * y,
            params.delta0 * (params.lambda_ - y))


def rhs_forced(y: float, mu: float, tau: float, params: ModelParams,
               f: ForcingSpec) -> tuple[float, float]:
    A = f.A_at(tau)
    return (mu - y - A * abs(1 - y) * y,
            params.delta0 * (f.lambda_at(tau) - y))


def psi(x, y, p: DimensionalParams | None = None):
    """Circulation strength ``alpha psi0 (x - y)``; unit scale when ``p`` is None."""
    scale = 1.0 if p is None else p.alpha * p.psi0
    return scale * (np.asarray(x, dtype=float) - y)


# -- piecewise fields -------------------------------------------------------
# Each region gets the smooth formula with |.| replaced by +/- its argument.

_THERMAL, _HALINE = (1,), (-1,)


def stom4_field(p: DimensionalParams) -> PiecewiseVectorField:
    Tea, Tpa, Sea, Spa = p.box_forcing
    RT, RS = p.R_T, p.R_S

    def piece(sign):
        def f(t, s):
            T_e, T_p, S_e, S_p = s
            q = sign * _circulation(p, T_e - T_p, S_e - S_p)
            return (RT * (Tea - T_e) + q * (T_p - T_e), RT * (Tpa - T_p) + q * (T_e - T_p),
                    RS * (Sea - S_e) + q * (S_p - S_e), RS * (Spa - S_p) + q * (S_e - S_p))
        return f

    return PiecewiseVectorField(
        dim=4,
        switching_functions=(lambda s: p.alpha * (s[0] - s[1]) - p.beta * (s[2] - s[3]),),
        regions={_THERMAL: piece(1.0), _HALINE: piece(-1.0)},
        labels={_THERMAL: "psi >= 0", _HALINE: "psi < 0"},
        name="stom4",
    )


def stom2_field(p: DimensionalParams) -> PiecewiseVectorField:
    def piece(sign):
        def f(t, s):
            T, S = s
            q = sign * _circulation(p, T, S)
            return p.R_T * (p.T_a - T) - 2 * q * T, p.R_S * (p.S_a - S) - 2 * q * S
        return f

    return PiecewiseVectorField(
        dim=2,
        switching_functions=(lambda s: p.alpha * s[0] - p.beta * s[1],),
        regions={_THERMAL: piece(1.0), _HALINE: piece(-1.0)},
        labels={_THERMAL: "psi >= 0", _HALINE: "psi < 0"},
        name="stom2",
    )


def nondim_field(params: ModelParams) -> PiecewiseVectorField:
    eps, A, mu = params.epsilon, params.A, params.mu

    def piece(sign):
        def f(t, s):
            x, y = s
            adv = sign * A * (x - y)
            return 1 - x - eps * adv * x, eps * (mu - y - adv * y)
        return f

    return PiecewiseVectorField(
        dim=2,
        switching_functions=(lambda s: s[0] - s[1],),
        regions={_THERMAL: piece(1.0), _HALINE: piece(-1.0)},
        labels={_THERMAL: "x >= y", _HALINE: "x < y"},
        name="nondim",
    )


def lin3_field(params: ModelParams) -> PiecewiseVectorField:
    eps, A = params.epsilon, params.A
    ed, a, b = eps * params.delta, params.a, params.b

    def piece(sign):
        def f(t, s):
            x, y, mu = s
            adv = sign * A * (x - y)
            return 1 - x - eps * adv * x, eps * (mu - y - adv * y), ed * (1 + a * x - b * y)
        return f

    return PiecewiseVectorField(
        dim=3,
        switching_functions=(lambda s: s[0] - s[1],),
        regions={_THERMAL: piece(1.0), _HALINE: piece(-1.0)},
        labels={_THERMAL: "x >= y", _HALINE: "x < y"},
        name="lin3",
    )


# on the slow manifold the thermal state is y < 1, i.e. the switching
# function 1 - y is >= 0 there; we use y - 1 so "y >= 1" is the tie side
_LOW, _HIGH = (-1,), (1,)


def _switch_y(s):
    return s[0] - 1.0


def reduced_field(params: ModelParams) -> PiecewiseVectorField:
    A, d0, lam = params.A, params.delta0, params.lambda_

    def low(t, s):
        y, mu = s
        return mu - y - A * (1 - y) * y, d0 * (lam - y)

    def high(t, s):
        y, mu = s
        return mu - y - A * (y - 1) * y, d0 * (lam - y)

    return PiecewiseVectorField(
        dim=2,
        switching_functions=(_switch_y,),
        regions={_LOW: low, _HIGH: high},
        labels={_LOW: "y < 1", _HIGH: "y >= 1"},
        name="reduced",
    )


def forced_field(params: ModelParams, f: ForcingSpec) -> PiecewiseVectorField:
    d0 = params.delta0

    def low(t, s):
        y, mu = s
        return mu - y - f.A_at(t) * (1 - y) * y, d0 * (f.lambda_at(t) - y)

    def high(t, s):
        y, mu = s
        return mu - y - f.A_at(t) * (y - 1) * y, d0 * (f.lambda_at(t) - y)

    return PiecewiseVectorField(
        dim=2,
        switching_functions=(_switch_y,),
        regions={_LOW: low, _HIGH: high},
        time_dependent=True,
        labels={_LOW: "y < 1", _HIGH: "y >= 1"},
        name="forced",
    )
