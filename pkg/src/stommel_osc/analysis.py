"""Closed-form geometry of the reduced model and corner-bifurcation rules.

The critical manifold of the reduced system is ``mu = F(y) = y + A|1 - y|y``
with branches ``F_+`` (y < 1) and ``F_-`` (y > 1).  Regime decisions use
exact rational arithmetic on the decimal values of the inputs, so boundary
cases such as ``lambda = (1 + A) / (2A)`` are recognised exactly.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from .core import ModelParams
from .models import rhs_reduced

__all__ = [
    "NoFold",
    "ShapeError",
    "SplittingLineError",
    "EquilibriumReport",
    "RegimeReport",
    "critical_manifold_mu",
    "critical_manifold_slope",
    "fold_point",
    "jacobian",
    "equilibrium",
    "classify_regime",
    "equilibria_of_2d",
    "classify_corner_bifurcation",
    "corner_slopes",
    "jacobian_fd_check",
]


class NoFold(ValueError):
    """The critical manifold is monotone (A <= 1)."""


class ShapeError(ValueError):
    """Corner slopes violate g'(0) < 0 < h'(0)."""


class SplittingLineError(ValueError):
    """Point too close to the splitting line y = 1."""


def _q(x) -> Fraction:
    # decimal value as typed, e.g. 0.6 -> 3/5
    return Fraction(repr(float(x)))


def critical_manifold_mu(y, A):
    y = np.asarray(y, dtype=float)
    out = y + A * np.abs(1.0 - y) * y
    return float(out) if out.ndim == 0 else out


def critical_manifold_slope(y, A):
    """dF/dy, using the right-hand slope ``1 + A`` at the corner."""
    y = np.asarray(y, dtype=float)
    out = np.where(y < 1.0, 1 + A - 2 * A * y, 1 - A + 2 * A * y)
    return float(out) if out.ndim == 0 else out


def fold_point(A: float) -> tuple[float, float]:
    if A <= 1:
        raise NoFold(f"no fold for A={A} <= 1")
    return (1 + A) / (2 * A), (1 + A) ** 2 / (4 * A)


def jacobian(params: ModelParams, y: float) -> np.ndarray:
    """Jacobian of the reduced field at any point with ordinate ``y`` off the corner."""
    return np.array([[-critical_manifold_slope(y, params.A), 1.0],
                     [-params.delta0, 0.0]])


@dataclass(frozen=True)
class EquilibriumReport:
    y0: float
    mu0: float
    trace: float | None
    det: float
    discriminant: float | None
    eq_class: str
    branch: str

    def to_dict(self) -> dict:
        d = asdict(self)
        d["class"] = d.pop("eq_class")
        return d


@dataclass(frozen=True)
class RegimeReport:
    regime: str
    bifurcation_at_corner: str
    fold: tuple[float, float] | None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["fold"] = list(self.fold) if self.fold else None
        return d


def _classify(trace: Fraction, disc: Fraction) -> str:
    if trace == 0:
        return "degenerate-hopf"
    side = "stable" if trace < 0 else "unstable"
    return f"{side}-{'node' if disc >= 0 else 'focus'}"


def equilibrium(params: ModelParams) -> EquilibriumReport:
    """The unique equilibrium ``(lambda, F(lambda))`` and its linear type."""
    A, lam, d0 = _q(params.A), _q(params.lambda_), _q(params.delta0)
    mu0 = critical_manifold_mu(params.lambda_, params.A)
    if lam == 1:
        return EquilibriumReport(1.0, mu0, None, params.delta0, None, "nonsmooth-corner", "corner")
    slope = 1 + A - 2 * A * lam if lam < 1 else 1 - A + 2 * A * lam
    trace = -slope
    disc = trace * trace - 4 * d0
    return EquilibriumReport(
        y0=params.lambda_, mu0=mu0, trace=float(trace), det=params.delta0,
        discriminant=float(disc), eq_class=_classify(trace, disc),
        branch="thermal" if lam < 1 else "haline",
    )


def classify_regime(params: ModelParams) -> RegimeReport:
    A, lam, d0 = _q(params.A), _q(params.lambda_), _q(params.delta0)
    if A <= 1:
        return RegimeReport("equilibration-A<1", "not-applicable", None)
    fold = fold_point(params.A)
    y_f = (1 + A) / (2 * A)
    if lam >= 1:
        regime = "stable-haline"
    elif lam <= y_f:
        regime = "stable-thermal"
    else:
        regime = "oscillating"
    # A < 1 + 2 sqrt(d0)  <=>  (A - 1)^2 < 4 d0, exact for A > 1
    corner = "canard-focus" if (A - 1) ** 2 < 4 * d0 else "super-explosion-node"
    return RegimeReport(regime, corner, fold)


def _quadratic_roots(a: float, b: float, c: float) -> list[float]:
    disc = b * b - 4 * a * c
    if disc < -1e-12 * max(b * b, abs(4 * a * c), 1e-300):
        return []
    if disc <= 1e-12 * max(b * b, abs(4 * a * c)):
        return [-b / (2 * a)]
    r = math.sqrt(disc)
    q = -0.5 * (b + math.copysign(r, b))
    return sorted([q / a, c / q])


def equilibria_of_2d(mu: float, A: float) -> list[tuple[float, str]]:
    """Equilibria of the slow-manifold flow of the Stommel model for fixed ``mu``.

    Stability follows the sign of dmu/dy along the curve of equilibria.
    Tangencies (fold) and the corner with slopes of opposite sign are marked
    ``degenerate``.
    """
    roots: list[tuple[float, str]] = []
    # y < 1:  A y^2 - (1 + A) y + mu = 0
    for y in _quadratic_roots(A, -(1 + A), mu):
        if y < 1 and abs(y - 1) > 1e-12:
            s = 1 + A - 2 * A * y
            roots.append((y, _slope_label(s, tangent=abs(s) < 1e-9)))
    # y > 1:  A y^2 + (1 - A) y - mu = 0
    for y in _quadratic_roots(A, 1 - A, -mu):
        if y > 1 and abs(y - 1) > 1e-12:
            roots.append((y, _slope_label(1 - A + 2 * A * y)))
    if mu == 1:
        left, right = 1 - A, 1 + A
        if left > 0 and right > 0:
            label = "stable"
        elif left < 0 and right < 0:
            label = "unstable"
        else:
            label = "degenerate"
        roots.append((1.0, label))
    return sorted(roots)


def _slope_label(s: float, tangent: bool = False) -> str:
    if tangent or s == 0:
        return "degenerate"
    return "stable" if s > 0 else "unstable"


def classify_corner_bifurcation(g_prime0: float, h_prime0: float, eps: float) -> tuple[str, str]:
    """Type and criticality of the nonsmooth bifurcation at a corner.

    For ``x' = -y + F(x)``, ``y' = eps (x - lambda)`` with ``F = g`` left and
    ``F = h`` right of the corner.  Returns ``(type, criticality)`` with type
    ``canard-cycles`` or ``super-explosion``.
    """
    if not (g_prime0 < 0 and h_prime0 > 0):
        raise ShapeError(f"need g'(0) < 0 < h'(0), got {g_prime0}, {h_prime0}")
    root = 2 * math.sqrt(eps)
    g_focus = abs(g_prime0) < root
    if h_prime0 < root:
        sub = g_focus and abs(g_prime0) < abs(h_prime0)
        return "canard-cycles", "subcritical" if sub else "supercritical"
    return "super-explosion", "subcritical" if g_focus else "supercritical"


def corner_slopes(params: ModelParams) -> tuple[float, float]:
    """Slopes ``(g'(0), h'(0))`` of the reduced model after ``(y - 1, -mu)``.

    The assignment g' = -F'_-(1), h' = -F'_+(1) is an assumed convention.
    """
    return -(1 + params.A), params.A - 1


def jacobian_fd_check(params: ModelParams, point, h: float = 1e-5) -> float:
    """Max deviation between the analytic Jacobian and central differences."""
    y, mu = map(float, point)
    if abs(y - 1) <= h:
        raise SplittingLineError(f"|y - 1| = {abs(y - 1)} <= h = {h}")
    fd = np.empty((2, 2))
    for j, (dy, dm) in enumerate(((h, 0.0), (0.0, h))):
        plus = np.array(rhs_reduced(y + dy, mu + dm, params))
        minus = np.array(rhs_reduced(y - dy, mu - dm, params))
        fd[:, j] = (plus - minus) / (2 * h)
    return float(np.max(np.abs(fd - jacobian(params, y))))
