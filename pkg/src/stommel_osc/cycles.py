"""Periodic orbits of the reduced model: return maps, cycle measurement,
canard detection, lambda sweeps and forced-run diagnostics.

The primary Poincare section is the splitting line ``{y = 1, mu > 1}``,
crossed upward (``y' = mu - 1 > 0`` there).  Orbits that never reach it fall
back to ``{mu = F(lambda), y > lambda}``, crossed downward.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import maximum_filter1d, minimum_filter1d
from scipy.optimize import minimize_scalar

from .analysis import EquilibriumReport, critical_manifold_mu, equilibrium
from .core import ForcingSpec, ModelParams, Trajectory
from .integrate import IntegrationError, IntegratorConfig, dense_eval, dense_sample, integrate, resample
from .models import forced_field, psi, reduced_field

__all__ = [
    "NoCrossing",
    "CanardSegment",
    "CycleReport",
    "BifurcationDiagram",
    "ExcursionStats",
    "ForcedRun",
    "poincare_crossings",
    "find_limit_cycle",
    "classify_cycle",
    "sweep_lambda",
    "compare_sweeps",
    "forced_run",
    "count_large_excursions",
    "low_amplitude_episodes",
]

log = logging.getLogger(__name__)

DEFAULT_CFG = IntegratorConfig(rel_tol=1e-9, abs_tol=1e-11, event_tol=1e-12)
MAX_CROSSINGS = 200
BUDGET_SLOW_TIME = 50.0
SETTLE_TOL = 1e-10


class NoCrossing(RuntimeError):
    """No recurrent section crossings: the orbit settles or never returns."""

    def __init__(self, msg, crossings=None, final_state=None):
        super().__init__(msg)
        self.crossings = crossings if crossings is not None else np.empty((0, 2))
        self.final_state = final_state


@dataclass(frozen=True)
class CanardSegment:
    onset: float       # model time at which tracking starts
    duration: float    # slow time, delta0 * model time
    max_distance: float


@dataclass
class CycleReport:
    """Attracting periodic orbit found from a given start (or its absence).

    ``period`` is in the model time of the reduced system.  ``crossings``
    lists successive section values leading to convergence.
    """

    converged: bool
    period: float | None = None
    y_min: float | None = None
    y_max: float | None = None
    mu_min: float | None = None
    mu_max: float | None = None
    section_value: float | None = None
    canard: CanardSegment | None = None
    kind: str = "none"
    section: str | None = None
    crossings: list = field(default_factory=list, repr=False)
    terminal_state: np.ndarray | None = field(default=None, repr=False)
    orbit: Trajectory | None = field(default=None, repr=False)

    @property
    def amplitude(self) -> float:
        return 0.0 if not self.converged else self.y_max - self.y_min

    def to_dict(self) -> dict:
        return {
            "converged": self.converged, "period": self.period,
            "y_min": self.y_min, "y_max": self.y_max,
            "mu_min": self.mu_min, "mu_max": self.mu_max,
            "section_value": self.section_value,
            "canard": None if self.canard is None else {
                "onset": self.canard.onset, "duration": self.canard.duration,
                "max_distance": self.canard.max_distance},
            "kind": self.kind,
        }


# -- sections -----------------------------------------------------------------

def _default_start(params: ModelParams) -> np.ndarray:
    lam = params.lambda_
    return np.array([lam, critical_manifold_mu(lam, params.A) + 0.05])


def _run_to_sections(params, s0, cfg, n_max, t_budget, conv_tol=None):
    """Integrate collecting primary and fallback section hits ``(t, y, mu)``.

    Stops after ``n_max`` hits on a section, when the last two hits agree to
    ``conv_tol`` (at least three hits), or once the state has settled.
    """
    field_ = reduced_field(params)
    lam = params.lambda_
    mu_eq = critical_manifold_mu(lam, params.A)
    primary, fallback = [], []
    status = {"settled": False, "converged": None}
    seen = [0, 0]
    pieces = field_.regions

    def stop(t, y, events, crossings):
        # an event always ends the step, so ``y`` is the event state
        for te, _, direction in events[seen[0]:]:
            if direction == 1 and te == t and y[1] > 1.0:
                primary.append((te, y[0], y[1]))
        seen[0] = len(events)
        for tc, _, direction, sc in crossings[seen[1]:]:
            if direction == -1 and sc[0] > lam:
                fallback.append((tc, sc[0], sc[1]))
        seen[1] = len(crossings)
        for name, hits, col, rest in (("primary", primary, 2, 1.0), ("fallback", fallback, 1, lam)):
            if name == "fallback" and primary:
                continue
            if conv_tol is not None and len(hits) >= 3:
                step = abs(hits[-1][col] - hits[-2][col])
                # hits creeping onto the equilibrium are a damped spiral, not a cycle
                if step < conv_tol and step < 1e-3 * abs(hits[-1][col] - rest):
                    status["converged"] = name
                    return True
            if len(hits) >= n_max:
                return True
        v = pieces[(1,) if y[0] >= 1.0 else (-1,)](t, y)
        if max(abs(v[0]), abs(v[1])) < SETTLE_TOL:
            status["settled"] = True
            return True
        return False

    traj = integrate(field_, s0, (0.0, t_budget), cfg,
                     sections=(lambda s: s[1] - mu_eq,), stop=stop)
    return traj, primary, fallback, status


def poincare_crossings(params: ModelParams, s0, n: int, cfg: IntegratorConfig | None = None,
                       t_budget: float | None = None) -> np.ndarray:
    """Successive section states ``(y, mu)``, at most ``n`` of them."""
    if n < 1:
        raise ValueError("n must be >= 1")
    cfg = cfg or DEFAULT_CFG
    t_budget = t_budget or BUDGET_SLOW_TIME / params.delta0
    traj, primary, fallback, status = _run_to_sections(params, np.asarray(s0, float), cfg, n, t_budget)
    hits = primary if primary else fallback
    out = np.array([(y, mu) for _, y, mu in hits[:n]]).reshape(-1, 2)
    if len(out) == 0 or (status["settled"] and len(out) < n):
        raise NoCrossing("no recurrent section crossings", out, traj.final)
    return out


def _extremum(traj, t_grid, values, j, k, sign):
    """Refine a sampled extremum of component ``j`` near grid index ``k``."""
    lo = t_grid[max(k - 1, 0)]
    hi = t_grid[min(k + 1, len(t_grid) - 1)]
    if hi <= lo:
        return values[k]
    res = minimize_scalar(lambda t: sign * dense_eval(traj, t)[j], bounds=(lo, hi),
                          method="bounded", options={"xatol": 1e-12})
    return min(sign * values[k], res.fun) * sign


def _measure_orbit(params, start, cfg, section, t_max):
    """Integrate one return from a section point; returns (orbit, period)."""
    field_ = reduced_field(params)
    lam = params.lambda_
    mu_eq = critical_manifold_mu(lam, params.A)
    if section == "primary":
        def stop(t, y, events, crossings):
            return any(d == 1 and t == te for te, _, d in events[-1:]) and y[1] > 1.0
        orbit = integrate(field_, start, (0.0, t_max), cfg, stop=stop)
        ups = [te for te, _, d in orbit.events if d == 1]
        if not ups:
            return orbit, None
        return orbit, ups[-1]

    def stop(t, y, events, crossings):
        return any(d == -1 and s[0] > lam for _, _, d, s in crossings)
    orbit = integrate(field_, start, (0.0, t_max), cfg,
                      sections=(lambda s: s[1] - mu_eq,), stop=stop)
    hits = [c for c in orbit.crossings if c[2] == -1 and c[3][0] > lam]
    if not hits:
        return orbit, None
    return orbit, hits[-1][0]


def find_limit_cycle(params: ModelParams, cfg: IntegratorConfig | None = None, conv_tol: float = 1e-8,
                     s0=None, *, max_crossings: int = MAX_CROSSINGS, t_budget: float | None = None,
                     kappa: float = 3.0, d_min: float = 0.1) -> CycleReport:
    """Converge onto the attracting periodic orbit reached from ``s0``.

    Transient section hits are discarded until two successive values agree
    to ``conv_tol``; one more full return then gives period and extrema.
    """
    cfg = cfg or DEFAULT_CFG
    t_budget = t_budget or BUDGET_SLOW_TIME / params.delta0
    s0 = _default_start(params) if s0 is None else np.asarray(s0, float)
    traj, primary, fallback, status = _run_to_sections(params, s0, cfg, max_crossings, t_budget, conv_tol)
    section = status["converged"]
    if section is None:
        return CycleReport(False, terminal_state=traj.final,
                           crossings=[h[2] for h in primary] or [h[1] for h in fallback])
    hits = primary if section == "primary" else fallback
    col = 2 if section == "primary" else 1
    start = np.array(hits[-1][1:])
    last_period = hits[-1][0] - hits[-2][0]
    orbit, period = _measure_orbit(params, start, cfg, section, 4 * last_period + 10.0)
    if period is None:
        return CycleReport(False, terminal_state=orbit.final, crossings=[h[col] for h in hits])

    t_grid, samples = dense_sample(orbit, 8)
    y_k, mu_k = int(np.argmin(samples[:, 0])), int(np.argmax(samples[:, 0]))
    y_min = _extremum(orbit, t_grid, samples[:, 0], 0, y_k, 1)
    y_max = _extremum(orbit, t_grid, samples[:, 0], 0, mu_k, -1)
    mu_min = _extremum(orbit, t_grid, samples[:, 1], 1, int(np.argmin(samples[:, 1])), 1)
    mu_max = _extremum(orbit, t_grid, samples[:, 1], 1, int(np.argmax(samples[:, 1])), -1)
    report = CycleReport(True, period=period, y_min=float(y_min), y_max=float(y_max),
                         mu_min=float(mu_min), mu_max=float(mu_max),
                         section_value=float(hits[-1][col]), section=section,
                         crossings=[h[col] for h in hits], terminal_state=orbit.final, orbit=orbit)
    report.kind, report.canard = classify_cycle(orbit, params, kappa, d_min, y_min=report.y_min)
    return report


def classify_cycle(orbit: Trajectory, params: ModelParams, kappa: float = 3.0, d_min: float = 0.1,
                   *, y_min: float | None = None) -> tuple[str, CanardSegment | None]:
    """Relaxation vs canard cycle from one period of samples.

    Distance to the repelling branch ``mu = F_+(y)``, ``y_f < y < 1``, is the
    fast-direction mismatch ``|mu - F_+(y)|`` (infinite off that y-range).
    A canard segment is the longest run below ``kappa sqrt(delta0)`` lasting
    at least ``d_min`` in slow time ``delta0 * t``.
    """
    A, d0 = params.A, params.delta0
    t, s = dense_sample(orbit, 8)
    if y_min is None:
        y_min = float(s[:, 0].min())
    if A <= 1:
        return "relaxation", None
    y_f = (1 + A) / (2 * A)
    y, mu = s[:, 0], s[:, 1]
    on_branch = (y > y_f) & (y < 1)
    dist = np.where(on_branch, np.abs(mu - (y + A * (1 - y) * y)), np.inf)
    near = dist < kappa * math.sqrt(d0)
    best = None
    k = 0
    n = len(t)
    while k < n:
        if not near[k]:
            k += 1
            continue
        j = k
        while j + 1 < n and near[j + 1]:
            j += 1
        duration = d0 * (t[j] - t[k])
        if duration >= d_min and (best is None or duration > best.duration):
            best = CanardSegment(float(t[k]), float(duration), float(dist[k:j + 1].max()))
        k = j + 1
    kind = "canard-cycle" if best is not None and y_min > y_f else "relaxation"
    return kind, best


# -- sweeps -------------------------------------------------------------------

@dataclass
class BifurcationDiagram:
    A: float
    delta0: float
    lambda_grid: np.ndarray
    equilibria: list[EquilibriumReport]
    cycles: list[CycleReport]
    errors: dict = field(default_factory=dict)

    def __post_init__(self):
        self.lambda_grid = np.asarray(self.lambda_grid, dtype=float)
        if len(self.lambda_grid) > 1 and not np.all(np.diff(self.lambda_grid) > 0):
            raise ValueError("lambda grid must be strictly increasing")

    @property
    def kinds(self) -> list[str]:
        return [c.kind for c in self.cycles]

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([c.amplitude for c in self.cycles])


def _sweep_point(A, delta0, lam, cfg, s0, conv_tol):
    params = ModelParams.reduced(A, lam, delta0)
    eq = equilibrium(params)
    try:
        cyc = find_limit_cycle(params, cfg, conv_tol, s0)
        err = None
    except (IntegrationError, ValueError) as exc:
        cyc, err = CycleReport(False), f"{type(exc).__name__}: {exc}"
    return eq, cyc, err


def sweep_lambda(A: float, delta0: float, lambda_grid, cfg: IntegratorConfig | None = None, *,
                 conv_tol: float = 1e-8, jobs: int = 1, continuation: bool = True,
                 reverse: bool = False) -> BifurcationDiagram:
    """Equilibrium and attracting-cycle report at each lambda of the grid.

    Sequential runs seed each point with the terminal state of the previous
    one (``reverse`` walks the grid from the top); parallel runs use the
    default start for every point.  Results are always in grid order.
    """
    cfg = cfg or DEFAULT_CFG
    grid = np.asarray(lambda_grid, dtype=float)
    if np.any(grid <= 0) or np.any(grid >= 2):
        raise ValueError("lambda grid must lie inside (0, 2)")
    n = len(grid)
    eqs, cycs, errors = [None] * n, [None] * n, {}
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futs = [pool.submit(_sweep_point, A, delta0, lam, cfg, None, conv_tol) for lam in grid]
            for k, fut in enumerate(futs):
                eqs[k], cycs[k], err = fut.result()
                if err:
                    errors[k] = err
    else:
        order = range(n - 1, -1, -1) if reverse else range(n)
        seed = None
        for k in order:
            eqs[k], cycs[k], err = _sweep_point(A, delta0, grid[k], cfg, seed, conv_tol)
            if err:
                errors[k] = err
            if continuation and cycs[k].terminal_state is not None:
                seed = cycs[k].terminal_state
    return BifurcationDiagram(A, delta0, grid, eqs, cycs, errors)


def compare_sweeps(forward: BifurcationDiagram, backward: BifurcationDiagram) -> list[tuple[float, str, str]]:
    """Grid points where two sweeps disagree on the cycle kind (hysteresis)."""
    return [(float(lam), a, b) for lam, a, b in zip(forward.lambda_grid, forward.kinds, backward.kinds)
            if a != b]


# -- forced runs ----------------------------------------------------------------

@dataclass
class ExcursionStats:
    count_large: int
    episodes: list       # (start, end, psi_min, psi_max)
    envelope: np.ndarray  # (n, 2): time, windowed half-range of psi

    def to_dict(self) -> dict:
        return {"count_large": self.count_large,
                "episodes": [list(map(float, e)) for e in self.episodes],
                "envelope": self.envelope.tolist()}


def _envelope(times, values, window):
    dt = float(np.median(np.diff(times))) if len(times) > 1 else 1.0
    width = max(1, int(round(window / dt)))
    hi = maximum_filter1d(values, size=width, mode="nearest")
    lo = minimum_filter1d(values, size=width, mode="nearest")
    return np.column_stack([times, (hi - lo) / 2])


def count_large_excursions(times, psi_values, threshold: float | None = None, min_gap: float = 5.0,
                           window: float | None = None) -> ExcursionStats:
    """Episodes where psi rises more than ``threshold`` above its mean.

    Episodes separated by less than ``min_gap`` (in the series' time unit)
    are merged.  The default threshold is a quarter of the psi range; the
    envelope is the half-range over a sliding ``window`` (default a tenth of
    the record).
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(psi_values, dtype=float)
    if len(t) == 0:
        raise ValueError("empty series")
    if threshold is None:
        threshold = 0.5 * (v.max() - v.min()) / 2
    if window is None:
        window = (t[-1] - t[0]) / 10 if len(t) > 1 else 1.0
    above = (v - v.mean()) > threshold if threshold > 0 else np.zeros(len(v), bool)
    episodes = []
    k = 0
    while k < len(v):
        if not above[k]:
            k += 1
            continue
        j = k
        while j + 1 < len(v) and above[j + 1]:
            j += 1
        seg = v[k:j + 1]
        if episodes and t[k] - episodes[-1][1] < min_gap:
            s, _, lo, hi = episodes[-1]
            episodes[-1] = (s, t[j], min(lo, seg.min()), max(hi, seg.max()))
        else:
            episodes.append((t[k], t[j], seg.min(), seg.max()))
        k = j + 1
    episodes = [tuple(float(x) for x in e) for e in episodes]
    return ExcursionStats(len(episodes), episodes, _envelope(t, v, window))


def low_amplitude_episodes(envelope: np.ndarray, frac: float = 0.5, min_length: float = 0.0):
    """Maximal intervals where the envelope stays below ``frac`` of its maximum."""
    t, a = envelope[:, 0], envelope[:, 1]
    low = a < frac * a.max()
    out = []
    k = 0
    while k < len(a):
        if not low[k]:
            k += 1
            continue
        j = k
        while j + 1 < len(a) and low[j + 1]:
            j += 1
        if t[j] - t[k] >= min_length:
            out.append((float(t[k]), float(t[j])))
        k = j + 1
    return out


@dataclass
class ForcedRun:
    trajectory: Trajectory
    times: np.ndarray
    states: np.ndarray
    A_tau: np.ndarray
    lambda_tau: np.ndarray
    psi: np.ndarray
    stats: ExcursionStats


def forced_run(f: ForcingSpec, delta0: float, t_span=None, cfg: IntegratorConfig | None = None, *,
               s0=None, dt: float = 0.25, threshold: float | None = None, min_gap: float = 5.0,
               window: float | None = None) -> ForcedRun:
    """Integrate the forced model and summarise the circulation ``psi = 1 - y``.

    The output series is resampled on a uniform grid of spacing ``dt``,
    plus ``t1`` itself when the span is not a multiple of ``dt``.
    """
    cfg = cfg or DEFAULT_CFG
    if t_span is None:
        if f.table is not None:
            t_span = (f.table[0][0], f.table[-1][0])
        else:
            t_span = (0.0, 3 * f.period)
    t0, t1 = map(float, t_span)
    params = ModelParams(A=max(f.A_bar, 1e-12), delta0=delta0, lambda_=f.lambda_bar)
    if s0 is None:
        lam0 = f.lambda_at(t0)
        s0 = (lam0, critical_manifold_mu(lam0, f.A_at(t0)) + 0.05)
    traj = integrate(forced_field(params, f), s0, (t0, t1), cfg)
    n = int(math.floor((t1 - t0) / dt + 1e-9)) + 1
    times = t0 + dt * np.arange(n)
    if t1 - times[-1] > 1e-9 * dt:
        times = np.append(times, t1)  # always report the end of the span
    states = resample(traj, times)
    A_tau = np.array([f.A_at(t) for t in times])
    lam_tau = np.array([f.lambda_at(t) for t in times])
    psi_tau = psi(1.0, states[:, 0])
    stats = count_large_excursions(times, psi_tau, threshold, min_gap, window)
    return ForcedRun(traj, times, states, A_tau, lam_tau, psi_tau, stats)
