"""Adaptive Dormand-Prince 5(4) integration of piecewise-smooth fields.

Every step is taken with the right-hand side of a single region (the one
active at the step start).  After each accepted step the switching functions
are sampled along the dense output; a sign change is localized by bisection,
the step is retaken up to the crossing, an event is recorded and integration
resumes in the new region.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import PiecewiseVectorField, Trajectory, evaluate, region_of

__all__ = [
    "IntegratorConfig",
    "IntegrationError",
    "BudgetExceeded",
    "Divergence",
    "integrate",
    "integrate_fixed",
    "dense_eval",
    "dense_sample",
    "resample",
    "convergence_order",
    "NOMINAL_ORDER",
]

NOMINAL_ORDER = 5

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.zeros((7, 7))
_A[1, :1] = [1 / 5]
_A[2, :2] = [3 / 40, 9 / 40]
_A[3, :3] = [44 / 45, -56 / 15, 32 / 9]
_A[4, :4] = [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]
_A[5, :5] = [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# fifth-order minus embedded fourth-order weights
_E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
# Shampine's continuous extension, coefficients of theta**1..4
_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])
_A_ROWS = [_A[i, :i].copy() for i in range(7)]

# fractions of a step where switching functions are sampled
_PROBES = (0.25, 0.5, 0.75, 1.0)


class IntegrationError(RuntimeError):
    pass


class BudgetExceeded(IntegrationError):
    pass


class Divergence(IntegrationError):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    event_tol: float = 1e-12
    max_step: float = math.inf
    max_steps: int = 2_000_000

    def __post_init__(self):
        if min(self.rel_tol, self.abs_tol, self.event_tol, self.max_step, self.max_steps) <= 0:
            raise ValueError("integrator settings must be positive")
        if self.event_tol > self.rel_tol:
            raise ValueError("event_tol must not exceed rel_tol")

    def halved(self) -> "IntegratorConfig":
        return IntegratorConfig(self.rel_tol / 2, self.abs_tol / 2, min(self.event_tol, self.rel_tol / 2),
                                self.max_step, self.max_steps)


def _stages(rhs, t, y, k1, h):
    K = np.empty((7, y.shape[0]))
    K[0] = k1
    for i in range(1, 6):
        K[i] = rhs(t + _C[i] * h, y + h * (_A_ROWS[i] @ K[:i]))
    y_new = y + h * (_B[:6] @ K[:6])
    K[6] = rhs(t + h, y_new)
    return y_new, K


def _poly(theta: float) -> np.ndarray:
    return np.array([theta, theta * theta, theta ** 3, theta ** 4])


class _Segment:
    """Dense output of one step, ``y(t + theta h) = y + Q @ theta_powers``."""

    __slots__ = ("t", "h", "y", "Q")

    def __init__(self, t, h, y, K):
        self.t, self.h, self.y = t, h, y
        self.Q = h * (K.T @ _P)

    def at(self, theta: float) -> np.ndarray:
        return self.y + self.Q @ _poly(theta)


def _pattern(funcs, y) -> tuple:
    return tuple(1 if g(y) >= 0.0 else -1 for g in funcs)


def _bisect(pred, lo: float, hi: float, width: float) -> float:
    """Smallest theta in (lo, hi] (to ``width``) where ``pred`` turns true."""
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _first_change(seg, funcs, ref, width):
    """Locate the first theta where the sign pattern of ``funcs`` leaves ``ref``."""
    prev = 0.0
    for theta in _PROBES:
        if _pattern(funcs, seg.at(theta)) != ref:
            return _bisect(lambda th: _pattern(funcs, seg.at(th)) != ref, prev, theta, width)
        prev = theta
    return None


def _land(rhs, t, y, f, seg, theta, g, side, tol):
    """Retake the step so it ends on the zero set of ``g``.

    Starts from the dense-output root ``theta`` and applies a few Newton
    corrections to the step length (slope from the dense output), then
    nudges forward until the end state sits on ``side`` of the surface.
    """
    lo, hi = max(theta - 1e-6, 0.0), min(theta + 1e-6, 1.0)
    slope = (g(seg.at(hi)) - g(seg.at(lo))) / ((hi - lo) * seg.h)
    h_c = max(theta * seg.h, tol)
    y_c, K_c = _stages(rhs, t, y, f, h_c)
    if slope == 0.0 or not math.isfinite(slope):
        return h_c, y_c, K_c
    for _ in range(4):
        phi = g(y_c)
        if abs(phi) <= 0.1 * tol * abs(slope):
            break
        h_c = min(max(h_c - phi / slope, tol), seg.h)
        y_c, K_c = _stages(rhs, t, y, f, h_c)
    for _ in range(3):
        if (1 if g(y_c) >= 0.0 else -1) == side:
            break
        h_c = min(h_c + abs(g(y_c) / slope) + 4 * np.spacing(t + h_c), seg.h)
        y_c, K_c = _stages(rhs, t, y, f, h_c)
    return h_c, y_c, K_c


def _wrap(rhs):
    return lambda t, y: np.asarray(rhs(t, y), dtype=float)


def _initial_step(rhs, t0, y0, f0, direction_span, rtol, atol):
    scale = atol + rtol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, direction_span)
    f1 = rhs(t0 + h0, y0 + h0 * f0)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, direction_span)


def integrate(field: PiecewiseVectorField, s0, t_span, cfg: IntegratorConfig | None = None, *,
              events: bool = True, sections: Sequence[Callable[[np.ndarray], float]] = (),
              stop: Callable | None = None, first_step: float | None = None) -> Trajectory:
    """Integrate ``field`` from ``s0`` over ``t_span``.

    ``sections`` are observer functions whose sign changes are localized and
    stored in ``Trajectory.crossings`` without affecting the dynamics.
    ``stop(t, y, events, crossings)`` is called after every accepted step and
    ends the integration early when it returns true.  With ``events=False``
    the right-hand side is dispatched per stage and crossings go undetected.
    """
    # overflow in a trial step is handled by step rejection / Divergence
    with np.errstate(over="ignore", invalid="ignore"):
        return _integrate(field, s0, t_span, cfg, events, tuple(sections), stop, first_step)


def _integrate(field, s0, t_span, cfg, events, sections, stop, first_step):
    cfg = cfg or IntegratorConfig()
    t0, t1 = map(float, t_span)
    if not t1 > t0:
        raise ValueError("t_span must satisfy t1 > t0")
    y = field.check_state(s0).copy()
    switches = field.switching_functions
    sections = tuple(sections)

    region = region_of(field, y)
    if events:
        rhs = _wrap(field.regions[region])
    else:
        rhs = lambda t, s: evaluate(field, t, s)  # noqa: E731

    rtol, atol = cfg.rel_tol, cfg.abs_tol
    t = t0
    f = rhs(t, y)
    h = first_step or _initial_step(rhs, t, y, f, t1 - t0, rtol, atol)
    h = min(h, cfg.max_step)

    times, states, segs = [t], [y.copy()], []
    ev_list, cross_list = [], []
    sec_signs = _pattern(sections, y) if sections else ()
    width_abs = cfg.event_tol
    n_steps = 0

    while t < t1:
        n_steps += 1
        if n_steps > cfg.max_steps:
            raise BudgetExceeded(f"max_steps={cfg.max_steps} exceeded at t={t}")
        h = min(h, t1 - t, cfg.max_step)
        y_new, K = _stages(rhs, t, y, f, h)
        err = h * (_E @ K)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err_norm = math.sqrt(float(np.mean((err / scale) ** 2)))
        if not np.all(np.isfinite(y_new)) or not math.isfinite(err_norm):
            if h < 1e-14 * max(1.0, abs(t)):
                raise Divergence(f"nonfinite state at t={t}")
            h *= 0.1
            continue
        if err_norm > 1.0:
            h *= max(0.2, 0.9 * err_norm ** -0.2)
            if t + h == t:
                raise Divergence(f"step size underflow at t={t}")
            continue

        seg = _Segment(t, h, y, K)
        t_new = t + h if h < t1 - t else t1
        new_region = region
        if events and switches:
            theta = _first_change(seg, switches, region, width_abs / h)
            if theta is not None:
                y_dense = seg.at(theta)
                new_region = _pattern(switches, y_dense)
                i = next(k for k, (a, b) in enumerate(zip(region, new_region)) if a != b)
                h_c, y_c, K_c = _land(rhs, t, y, f, seg, theta, switches[i], new_region[i], width_abs)
                if _pattern(switches, y_c) != new_region:
                    y_c = y_dense
                seg = _Segment(t, h_c, y, K_c)
                t_new, y_new, K = t + h_c, y_c, K_c
                for i, (a, b) in enumerate(zip(region, new_region)):
                    if a != b:
                        ev_list.append((t_new, i, b))

        if sections:
            new_signs = _pattern(sections, y_new)
            for j, g in enumerate(sections):
                if new_signs[j] != sec_signs[j]:
                    ref = sec_signs[j]
                    th = _bisect(lambda x: (1 if g(seg.at(x)) >= 0.0 else -1) != ref,
                                 0.0, 1.0, width_abs / seg.h)
                    cross_list.append((t + th * seg.h, j, new_signs[j], seg.at(th)))
            sec_signs = new_signs

        segs.append(seg)
        times.append(t_new)
        states.append(y_new)
        fac = 10.0 if err_norm == 0 else min(10.0, max(0.2, 0.9 * err_norm ** -0.2))
        h_next = h * fac
        t, y = t_new, y_new
        if new_region != region:
            region = new_region
            rhs = _wrap(field.regions[region])
            f = rhs(t, y)
        else:
            f = K[6]
        h = h_next
        if stop is not None and stop(t, y, ev_list, cross_list):
            break

    return Trajectory(np.array(times), np.array(states), ev_list, cross_list, segments=segs)


def integrate_fixed(field: PiecewiseVectorField, s0, t_span, h: float, *, events: bool = True) -> np.ndarray:
    """Fixed-step DP5 run, returning the terminal state.

    With ``events`` the step containing a crossing is cut at the crossing
    (bisection to ~1e-15 relative) and the region is switched there.
    """
    t0, t1 = map(float, t_span)
    y = field.check_state(s0).copy()
    switches = field.switching_functions
    region = region_of(field, y)
    if events:
        rhs = _wrap(field.regions[region])
    else:
        rhs = lambda t, s: evaluate(field, t, s)  # noqa: E731
    t = t0
    while t1 - t > 1e-14 * max(1.0, abs(t1)):
        step = min(h, t1 - t)
        f = rhs(t, y)
        y_new, K = _stages(rhs, t, y, f, step)
        if events and switches:
            seg = _Segment(t, step, y, K)
            theta = _first_change(seg, switches, region, 1e-15)
            if theta is not None:
                step = theta * step
                y_new, K = _stages(rhs, t, y, f, step)
                region = _pattern(switches, seg.at(theta))
                rhs = _wrap(field.regions[region])
        t, y = t + step, y_new
    return y


def dense_eval(traj: Trajectory, t: float) -> np.ndarray:
    """Interpolated state at ``t`` on the step that contains it.

    Sample times return the stored state.  Trajectories without dense data
    (e.g. read back from disk) fall back to linear interpolation.
    """
    t = float(t)
    if not traj.t0 <= t <= traj.t1:
        raise ValueError(f"t={t} outside trajectory range [{traj.t0}, {traj.t1}]")
    k = int(np.searchsorted(traj.times, t))
    if k < len(traj.times) and traj.times[k] == t:
        return traj.states[k].copy()
    k -= 1
    segs = traj.segments
    if segs:
        seg = segs[k]
        return seg.at((t - seg.t) / seg.h)
    w = (t - traj.times[k]) / (traj.times[k + 1] - traj.times[k])
    return (1 - w) * traj.states[k] + w * traj.states[k + 1]


def dense_sample(traj: Trajectory, per_step: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate the dense output at ``per_step`` equally spaced points per step."""
    segs = traj.segments
    if not segs:
        return traj.times.copy(), traj.states.copy()
    thetas = np.arange(per_step) / per_step
    powers = np.stack([thetas, thetas ** 2, thetas ** 3, thetas ** 4])
    ts = [traj.times[:1]]
    ys = [traj.states[:1]]
    for k, seg in enumerate(segs):
        ts.append(seg.t + seg.h * thetas[1:])
        ys.append((seg.y[:, None] + seg.Q @ powers[:, 1:]).T)
        ts.append(traj.times[k + 1:k + 2])
        ys.append(traj.states[k + 1:k + 2])
    return np.concatenate(ts), np.concatenate(ys)


def convergence_order(field: PiecewiseVectorField, s0, t_span, h: float = 0.1, *,
                      events: bool = True) -> float:
    """Observed order from fixed-step runs at h, h/2, h/4 (Richardson ratio)."""
    y1 = integrate_fixed(field, s0, t_span, h, events=events)
    y2 = integrate_fixed(field, s0, t_span, h / 2, events=events)
    y4 = integrate_fixed(field, s0, t_span, h / 4, events=events)
    num = np.max(np.abs(y1 - y2))
    den = np.max(np.abs(y2 - y4))
    return float(math.log2(num / den))


def resample(traj: Trajectory, times) -> np.ndarray:
    """Dense output at many times at once; shape ``(len(times), dim)``."""
    times = np.asarray(times, dtype=float)
    if times.size and (times.min() < traj.t0 or times.max() > traj.t1):
        raise ValueError("resample times outside trajectory range")
    segs = traj.segments
    if not segs:
        return np.stack([np.interp(times, traj.times, traj.states[:, j]) for j in range(traj.dim)], axis=1)
    k = np.clip(np.searchsorted(traj.times, times, side="right") - 1, 0, len(segs) - 1)
    t_start = traj.times[k]
    h = np.array([s.h for s in segs])[k]
    theta = (times - t_start) / h
    Y0 = np.array([s.y for s in segs])[k]
    Q = np.array([s.Q for s in segs])[k]  # (n, dim, 4)
    powers = np.stack([theta, theta ** 2, theta ** 3, theta ** 4], axis=1)
    out = Y0 + np.einsum("ndk,nk->nd", Q, powers)
    exact = np.isin(times, traj.times)
    if exact.any():
        out[exact] = traj.states[np.searchsorted(traj.times, times[exact])]
    return out
