"""Simulation of the delayed firm-value dynamics.

The state obeys

    dV(t) = (alpha V(t) V(t - l1) - C) dt + g(V(t - l2)) V(t) dW(t),   V = phi on [-L, 0].

Delayed values at off-grid times are read by linear interpolation, either
from the supplied history or from the already simulated part of the path.
All routines here work on arrays of shape ``(n_steps + 1, n_paths)`` and
have thin single-path wrappers returning :class:`HistoryPath`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigurationError, DomainError, SimulationError
from .model import TIME_EPS, FirmModel, HistoryPath, MarketParams, path_lookup, vol_eval
from .rng import BrownianIncrements, _check_seed


class Scheme(str, Enum):
    EULER = "euler"
    LOG_EULER = "log-euler"
    EXACT = "exact-representation"


@dataclass(frozen=True)
class SimConfig:
    """Step ``h``, simulated length ``horizon`` (measured from the end of the history) and seed.

    ``scheme=None`` picks log-Euler when the payout rate is zero and plain
    Euler otherwise. The horizon is split into ``ceil(horizon / step)``
    equal steps, so the effective step never exceeds ``step``.
    """

    step: float
    horizon: float
    seed: int
    scheme: Scheme | None = None

    def __post_init__(self):
        if not self.step > 0:
            raise ConfigurationError(f"step must be positive, got {self.step}")
        if not self.horizon > 0:
            raise ConfigurationError(f"horizon must be positive, got {self.horizon}")
        _check_seed(self.seed)
        if self.scheme is not None:
            object.__setattr__(self, "scheme", Scheme(self.scheme))

    @property
    def n_steps(self) -> int:
        return n_steps_for(self.horizon, self.step)

    def resolved_scheme(self, model: FirmModel) -> Scheme:
        if self.scheme is not None:
            return self.scheme
        return Scheme.LOG_EULER if model.payout_c == 0 else Scheme.EULER


def n_steps_for(horizon: float, step: float) -> int:
    return max(1, math.ceil(horizon / step - 1e-9))


def _check_step(model: FirmModel, h: float) -> None:
    m = min(model.l1, model.l2)
    if h > m * (1 + 1e-12):
        raise ConfigurationError(f"step {h} exceeds the shortest delay {m}; "
                                 "delays must span at least one step")


class _DelayedReader:
    """Reads V(s) for s in the history or on the simulated grid (known nodes only)."""

    def __init__(self, history: HistoryPath, start: float, h: float, V: np.ndarray):
        self.history = history
        self.start = start
        self.h = h
        self.V = V
        self.eps = TIME_EPS * max(1.0, abs(start))

    def __call__(self, times: np.ndarray, known: int) -> np.ndarray:
        """Values at ``times`` (1-D), shape ``(len(times), n_paths)``; nodes ``<= known`` are filled."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        n_paths = self.V.shape[1]
        out = np.empty((times.size, n_paths))
        past = times <= self.start + self.eps
        if np.any(past):
            out[past] = np.asarray(path_lookup(self.history, np.minimum(times[past], self.history.t_end)),
                                   dtype=float).reshape(-1, 1)
        fut = ~past
        if np.any(fut):
            pos = (times[fut] - self.start) / self.h
            j = np.floor(pos + 1e-9).astype(int)
            w = np.clip(pos - j, 0.0, 1.0)
            w[w < 1e-9] = 0.0
            if np.any(j + (w > 0) > known):
                raise AssertionError("delayed lookup reached an unsimulated node")
            j1 = np.minimum(j + 1, known)
            out[fut] = (1.0 - w)[:, None] * self.V[j] + w[:, None] * self.V[j1]
        return out


def _setup(model: FirmModel, history: HistoryPath, h: float, dw: np.ndarray):
    _check_step(model, h)
    start = history.t_end
    history.require(start - model.delay, start)
    dw = np.asarray(dw, dtype=float)
    if dw.ndim == 1:
        dw = dw[:, None]
    V = np.empty((dw.shape[0] + 1, dw.shape[1]))
    V[0] = history.values[-1]
    return start, dw, V, _DelayedReader(history, start, h, V)


def simulate_paths(model: FirmModel, history: HistoryPath, h: float, dw: np.ndarray,
                   scheme: Scheme = Scheme.LOG_EULER, rate: float | None = None) -> np.ndarray:
    """Step the SDDE forward from the end of ``history``.

    Parameters
    ----------
    dw : array, shape (n_steps,) or (n_steps, n_paths)
        Brownian increments with variance ``h``.
    scheme : Scheme
        ``euler`` or ``log-euler``; ``exact-representation`` is delegated to
        :func:`exact_paths`.
    rate : float, optional
        If given, simulate the risk-neutral dynamics dV = rate V dt + g V dW*
        (log-Euler only).

    Returns
    -------
    ndarray, shape (n_steps + 1, n_paths)
        Row 0 is the last history value.
    """
    scheme = Scheme(scheme)
    if scheme is Scheme.EXACT:
        if rate is not None:
            raise ConfigurationError("exact representation is a physical-measure scheme")
        return exact_paths(model, history, h, dw)
    if scheme is Scheme.LOG_EULER and model.payout_c != 0:
        raise ConfigurationError("log-euler requires payout_c == 0; use the euler scheme")
    if rate is not None and scheme is not Scheme.LOG_EULER:
        raise ConfigurationError("risk-neutral simulation uses the log-euler scheme")
    start, dw, V, delayed = _setup(model, history, h, dw)
    n = dw.shape[0]
    alpha, c, vol = model.alpha, model.payout_c, model.vol
    for k in range(n):
        t = start + k * h
        g = vol_eval(vol, delayed([t - model.l2], k)[0])
        if scheme is Scheme.EULER:
            vd1 = delayed([t - model.l1], k)[0]
            V[k + 1] = V[k] + (alpha * V[k] * vd1 - c) * h + g * V[k] * dw[k]
            if np.any(V[k + 1] <= 0):
                raise SimulationError(f"euler step {k} produced a non-positive firm value; "
                                      "use the log-euler scheme", step=k)
        else:
            if rate is None:
                drift = alpha * delayed([t - model.l1], k)[0]
            else:
                drift = rate
            # multiplicative update keeps a zero-increment path exactly constant
            V[k + 1] = V[k] * np.exp((drift - 0.5 * g * g) * h + g * dw[k])
    return V


def exact_paths(model: FirmModel, history: HistoryPath, h: float, dw: np.ndarray) -> np.ndarray:
    """Evaluate the exponential solution formula window by window (payout must be zero).

    On a window of ``floor(min(l1, l2) / h)`` steps every delayed argument is
    already known, so the three integrals in the exponent are accumulated
    for the whole window at once (left-point rule on the increment grid).
    """
    if model.payout_c != 0:
        raise ConfigurationError("the exponential representation only exists for payout_c == 0")
    start, dw, V, delayed = _setup(model, history, h, dw)
    n = dw.shape[0]
    width = max(1, int(math.floor(min(model.l1, model.l2) / h + 1e-9)))
    phi0 = V[0].copy()
    exponent = np.zeros_like(phi0)
    ka = 0
    while ka < n:
        kb = min(ka + width, n)
        t = start + h * np.arange(ka, kb)
        g = vol_eval(model.vol, delayed(t - model.l2, ka))
        vd1 = delayed(t - model.l1, ka)
        incr = model.alpha * vd1 * h - 0.5 * g * g * h + g * dw[ka:kb]
        cum = exponent + np.cumsum(incr, axis=0)
        V[ka + 1:kb + 1] = phi0 * np.exp(cum)
        exponent = cum[-1]
        ka = kb
    return V


def _as_path(history: HistoryPath, h: float, V: np.ndarray) -> HistoryPath:
    """History resampled on the simulation grid, followed by the simulated values."""
    start = history.t_end
    m = int(math.floor((start - history.t0) / h + 1e-9))
    past = path_lookup(history, start - h * np.arange(m, 0, -1)) if m else np.empty(0)
    return HistoryPath(start - m * h, h, np.concatenate([np.atleast_1d(past), V[:, 0]]))


def _increments_for(cfg: SimConfig) -> BrownianIncrements:
    n = cfg.n_steps
    return BrownianIncrements.generate(cfg.seed, n, cfg.horizon / n)


def simulate_em(model: FirmModel, history: HistoryPath, cfg: SimConfig,
                increments: BrownianIncrements | None = None) -> HistoryPath:
    """Simulate one physical-measure path from the end of ``history``.

    The increments are drawn from path index 0 of ``cfg.seed`` unless given
    explicitly (then ``cfg.step``/``cfg.horizon`` are ignored). The returned
    path starts with the history resampled on the simulation grid.
    """
    scheme = cfg.resolved_scheme(model)
    inc = increments if increments is not None else _increments_for(cfg)
    if inc.dw.ndim != 1:
        raise DomainError("simulate_em expects single-path increments")
    V = simulate_paths(model, history, inc.step, inc.dw, scheme)
    return _as_path(history, inc.step, V)


def exact_representation(model: FirmModel, history: HistoryPath,
                         increments: BrownianIncrements) -> HistoryPath:
    if increments.dw.ndim != 1:
        raise DomainError("exact_representation expects single-path increments")
    V = exact_paths(model, history, increments.step, increments.dw)
    return _as_path(history, increments.step, V)


def risk_neutral_simulate(model: FirmModel, history: HistoryPath, mkt: MarketParams,
                          cfg: SimConfig, increments: BrownianIncrements | None = None) -> HistoryPath:
    """One path of dV = r V dt + g(V(t - l2)) V dW* (log-Euler, strictly positive)."""
    if model.payout_c != 0:
        raise ConfigurationError("risk-neutral simulation requires payout_c == 0")
    inc = increments if increments is not None else _increments_for(cfg)
    V = simulate_paths(model, history, inc.step, inc.dw, Scheme.LOG_EULER, rate=mkt.r)
    return _as_path(history, inc.step, V)


def girsanov_kernel(model: FirmModel, path: HistoryPath, mkt: MarketParams, t: float) -> float:
    """Market price of risk (alpha V(t - l1) - r) / g(V(t - l2))."""
    path.require(t - model.delay, t)
    g = vol_eval(model.vol, path_lookup(path, t - model.l2))
    if g <= 0:
        raise DomainError("girsanov kernel needs a strictly positive volatility")
    return (model.alpha * path_lookup(path, t - model.l1) - mkt.r) / g


def vol_integral(path: HistoryPath, vol, l2: float, t: float, T: float) -> float:
    """Trapezoidal value of the integral of g(V(s - l2))**2 over s in [t, T].

    Quadrature nodes are the path nodes strictly inside ``[t - l2, T - l2]``
    plus both (interpolated) endpoints.
    """
    if not t < T:
        raise DomainError(f"vol_integral needs t < T, got t={t}, T={T}")
    a, b = t - l2, T - l2
    path.require(a, b)
    eps = 1e-9
    k_lo = math.ceil((a - path.t0) / path.dt - eps)
    k_hi = math.floor((b - path.t0) / path.dt + eps)
    nodes = path.t0 + path.dt * np.arange(k_lo, k_hi + 1)
    tol = 1e-9 * path.dt
    nodes = nodes[(nodes > a + tol) & (nodes < b - tol)]
    u = np.concatenate([[a], nodes, [b]])
    g = vol_eval(vol, path_lookup(path, u))
    return float(np.trapezoid(np.asarray(g) ** 2, u))
