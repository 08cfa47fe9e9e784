"""Finite-difference and heat-kernel solutions of the claim pricing PDE.

Inside the closed-form window the diffusion coefficient g(V(t - l2))**2 is
a known function of time, sigma2(t), and every claim solves

    1/2 sigma2(t) v^2 F_vv + r v F_v + F_t - r F = 0,   0 < v < v_max,

backwards from its payoff at maturity. :func:`solve_claim_pde` uses a
theta scheme on a uniform v-grid with Dirichlet rows at both ends;
:func:`solve_via_heat_transform` maps the problem to h_tau = h_xx and
evaluates the Green's-function convolution by adaptive quadrature.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded

from .errors import DomainError, NumericalInstabilityError, WindowError
from .model import Claim, DebtContract, FirmModel, HistoryPath, MarketParams, path_lookup, vol_eval


def payoff(kind, v, face: float):
    kind = Claim(kind)
    v = np.asarray(v, dtype=float)
    if kind is Claim.EQUITY:
        return np.maximum(v - face, 0.0)
    if kind is Claim.DEBT:
        return np.minimum(v, face)
    return np.maximum(face - v, 0.0)


@dataclass(frozen=True)
class PdeGrid:
    """Space/time mesh for one backward solve from ``maturity`` to ``t0``.

    ``sigma_of_t`` holds sigma2 = g(V(s - l2))**2 at the ``n_time + 1`` time
    nodes ``t0 + j * (maturity - t0) / n_time``. The v-grid has
    ``n_space`` interior nodes plus the two boundary nodes 0 and ``v_max``.
    """

    v_max: float
    n_space: int
    n_time: int
    sigma_of_t: np.ndarray
    t0: float
    maturity: float
    theta: float = 0.5
    startup_steps: int = 2

    def __post_init__(self):
        s2 = np.array(self.sigma_of_t, dtype=float).ravel()
        if self.n_space < 16:
            raise DomainError(f"n_space must be >= 16, got {self.n_space}")
        if self.n_time < 8:
            raise DomainError(f"n_time must be >= 8, got {self.n_time}")
        if s2.size != self.n_time + 1:
            raise DomainError(f"sigma_of_t needs {self.n_time + 1} samples, got {s2.size}")
        if not np.all(s2 > 0) or not np.all(np.isfinite(s2)):
            raise DomainError("sigma_of_t must be positive and finite")
        if not 0.0 <= self.theta <= 1.0:
            raise DomainError(f"theta must lie in [0, 1], got {self.theta}")
        if not self.maturity > self.t0:
            raise DomainError("grid maturity must come after t0")
        s2.flags.writeable = False
        object.__setattr__(self, "sigma_of_t", s2)

    @property
    def dv(self) -> float:
        return self.v_max / (self.n_space + 1)

    @property
    def v(self) -> np.ndarray:
        return self.dv * np.arange(self.n_space + 2)

    @property
    def t(self) -> np.ndarray:
        return np.linspace(self.t0, self.maturity, self.n_time + 1)

    def check_contract(self, contract: DebtContract) -> None:
        if self.v_max < 5 * contract.face * (1 - 1e-12):
            raise DomainError(f"v_max={self.v_max} must be at least 5 x face ({contract.face})")
        if abs(self.maturity - contract.maturity) > 1e-9 * max(1.0, contract.maturity):
            raise DomainError("grid maturity differs from the contract maturity")

    @classmethod
    def build(cls, contract: DebtContract, t0: float, sigma2, n_space: int = 400, n_time: int = 400,
              v_max: float | None = None, theta: float = 0.5, startup_steps: int = 2) -> "PdeGrid":
        """Grid on ``[t0, contract.maturity]``; ``sigma2`` is a constant or a callable of time."""
        t = np.linspace(t0, contract.maturity, n_time + 1)
        s2 = np.array([sigma2(s) for s in t]) if callable(sigma2) else np.full(t.size, float(sigma2))
        return cls(v_max=8.0 * contract.face if v_max is None else v_max, n_space=n_space,
                   n_time=n_time, sigma_of_t=s2, t0=t0, maturity=contract.maturity,
                   theta=theta, startup_steps=startup_steps)


@dataclass(frozen=True)
class ValueSurface:
    """Claim values on a (t, v) mesh; ``values[j, i]`` is the value at ``(t[j], v[i])``."""

    v: np.ndarray
    t: np.ndarray
    values: np.ndarray

    def row(self, t: float | None = None) -> np.ndarray:
        j = 0 if t is None else int(np.argmin(np.abs(self.t - t)))
        if t is not None and abs(self.t[j] - t) > 1e-9 * max(1.0, abs(t)):
            raise DomainError(f"t={t} is not a node of the surface")
        return self.values[j]

    def value_at(self, v, t: float | None = None):
        """Cubic-spline value in v on the time row ``t`` (default: the first row)."""
        row = self.row(t)
        if self.v.size < 4:
            return np.interp(v, self.v, row)
        out = CubicSpline(self.v, row)(np.asarray(v, dtype=float))
        return float(out) if np.ndim(out) == 0 else out

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["v", "t", "value"])
            for j, tj in enumerate(self.t):
                for i, vi in enumerate(self.v):
                    w.writerow([repr(float(vi)), repr(float(tj)), repr(float(self.values[j, i]))])
        return path


def realized_sigma(history: HistoryPath, model: FirmModel, t0: float, T: float, n_time: int) -> np.ndarray:
    """sigma2 at the ``n_time + 1`` nodes of [t0, T] read off the realized history."""
    if T - t0 > model.l2 * (1 + 1e-12) or not history.covers(t0 - model.l2, T - model.l2):
        raise WindowError(f"sigma2 on [{t0:g}, {T:g}] needs T - t0 <= L2 = {model.l2:g} and history "
                          f"covering [{t0 - model.l2:g}, {T - model.l2:g}]")
    s = np.linspace(t0, T, n_time + 1)
    return np.asarray(vol_eval(model.vol, path_lookup(history, s - model.l2)), dtype=float) ** 2


def _boundaries(kind: Claim, face: float, r: float, T: float, t: float, v_max: float):
    disc = face * math.exp(-r * (T - t))
    if kind is Claim.EQUITY:
        return 0.0, v_max - disc
    if kind is Claim.DEBT:
        return 0.0, disc
    return disc, 0.0


def solve_claim_pde(kind, grid: PdeGrid, contract: DebtContract, mkt: MarketParams) -> ValueSurface:
    """Backward theta-scheme solve with central differences in v.

    The first ``grid.startup_steps`` steps after maturity are fully implicit
    to damp the payoff kink. Raises :class:`NumericalInstabilityError` if an
    implicit matrix is not diagonally dominant.
    """
    kind = Claim(kind)
    grid.check_contract(contract)
    r, B = mkt.r, contract.face
    v, t = grid.v, grid.t
    n, N = grid.n_time, grid.n_space
    dt = (grid.maturity - grid.t0) / n
    i = np.arange(1, N + 1, dtype=float)

    def coefficients(s2):
        lo = 0.5 * s2 * i * i - 0.5 * r * i
        up = 0.5 * s2 * i * i + 0.5 * r * i
        di = -s2 * i * i - r
        return lo, di, up

    U = np.empty((n + 1, N + 2))
    U[n] = payoff(kind, v, B)
    U[n, 0], U[n, -1] = _boundaries(kind, B, r, grid.maturity, grid.maturity, grid.v_max)

    ab = np.zeros((3, N))
    for j in range(n - 1, -1, -1):
        theta = 1.0 if (n - 1 - j) < grid.startup_steps and grid.theta < 1.0 else grid.theta
        lo_n, di_n, up_n = coefficients(grid.sigma_of_t[j + 1])
        lo, di, up = coefficients(grid.sigma_of_t[j])
        old = U[j + 1]
        rhs = old[1:-1].copy()
        if theta < 1.0:
            rhs += (1.0 - theta) * dt * (lo_n * old[:-2] + di_n * old[1:-1] + up_n * old[2:])
        b0, b1 = _boundaries(kind, B, r, grid.maturity, t[j], grid.v_max)
        U[j, 0], U[j, -1] = b0, b1
        main = 1.0 - theta * dt * di
        lower = -theta * dt * lo
        upper = -theta * dt * up
        rhs[0] -= lower[0] * b0
        rhs[-1] -= upper[-1] * b1
        off = np.abs(lower) + np.abs(upper)
        if np.any(np.abs(main) < off):
            raise NumericalInstabilityError(
                f"implicit matrix lost diagonal dominance at step {j} (dt={dt:g}); "
                "use a smaller time step or theta=1")
        ab[0, 1:] = upper[:-1]
        ab[1] = main
        ab[2, :-1] = lower[1:]
        U[j, 1:-1] = solve_banded((1, 1), ab, rhs, check_finite=False)
        if not np.all(np.isfinite(U[j])):
            raise NumericalInstabilityError(f"non-finite values at step {j}")
    return ValueSurface(v=v, t=t, values=U)


def _heat_value(kind: Claim, v: float, t: float, tau: float, face: float, r: float, T: float,
                epsrel: float) -> float:
    # v = B e^x; h solves h_tau = h_xx with h(eta, 0) = e^{-rT} payoff(B e^eta) / B
    # and f(v, t) = B e^{rt} h(x - tau + r (T - t), tau).
    x = math.log(v / face)
    y = x - tau + r * (T - t)
    width = 10.0 * math.sqrt(2.0 * tau)
    a, b = y - width, y + width

    def integrand(eta):
        g = math.exp(-(y - eta) ** 2 / (4.0 * tau)) / math.sqrt(4.0 * math.pi * tau)
        return g * math.exp(-r * T) * float(payoff(kind, face * math.exp(eta), face)) / face

    points = [0.0] if a < 0.0 < b else None
    scale = math.exp(-r * T) * max(1.0, math.exp(b))
    val, _ = integrate.quad(integrand, a, b, points=points, epsrel=epsrel,
                            epsabs=1e-14 * scale, limit=200)
    return face * math.exp(r * t) * val


def solve_via_heat_transform(kind, grid: PdeGrid, contract: DebtContract, mkt: MarketParams,
                             v_points: Sequence[float], t_points: Sequence[float] | None = None,
                             epsrel: float = 1e-8) -> ValueSurface:
    """Claim values at ``v_points`` x ``t_points`` from the Green's-function convolution.

    ``tau(t)`` is half the trapezoidal integral of ``grid.sigma_of_t`` from
    ``t`` to maturity, so ``t_points`` must be time nodes of the grid
    (default: ``grid.t0`` only).
    """
    kind = Claim(kind)
    grid.check_contract(contract)
    tg = grid.t
    # tail[j] = int_{t_j}^T sigma2
    seg = 0.5 * (grid.sigma_of_t[1:] + grid.sigma_of_t[:-1]) * np.diff(tg)
    tail = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])
    t_points = [grid.t0] if t_points is None else list(t_points)
    vs = np.asarray(v_points, dtype=float)
    if np.any(vs <= 0):
        raise DomainError("heat transform needs positive firm values")
    out = np.empty((len(t_points), vs.size))
    for row, tp in enumerate(t_points):
        j = int(np.argmin(np.abs(tg - tp)))
        if abs(tg[j] - tp) > 1e-9 * max(1.0, abs(tp)):
            raise DomainError(f"t={tp} is not a node of the grid")
        tau = 0.5 * tail[j]
        if not tau > 0:
            raise DomainError(f"heat-equation time must be positive, got tau={tau}")
        for col, vv in enumerate(vs):
            out[row, col] = _heat_value(kind, vv, tg[j], tau, contract.face, mkt.r,
                                        grid.maturity, epsrel)
    return ValueSurface(v=vs, t=np.asarray([tg[int(np.argmin(np.abs(tg - tp)))] for tp in t_points]),
                        values=out)


def heat_value(kind, v: float, t: float, I: float, contract: DebtContract, mkt: MarketParams,
               epsrel: float = 1e-8) -> float:
    """Heat-kernel value at a single point given the volatility integral ``I``."""
    if not I > 0:
        raise DomainError(f"heat-equation time must be positive, got tau={0.5 * I}")
    return _heat_value(Claim(kind), v, t, 0.5 * I, contract.face, mkt.r, contract.maturity, epsrel)


@dataclass(frozen=True)
class ConvergenceRow:
    n_space: int
    n_time: int
    max_rel_error: float
    order: float | None


def convergence_report(kind, contract: DebtContract, mkt: MarketParams,
                       sigma_of_t: float | Callable[[float], float],
                       ladder: Sequence[tuple[int, int]], t0: float = 0.0, theta: float = 0.5,
                       v_points: Sequence[float] | None = None, v_max: float | None = None,
                       workers: int = 1, vol_integral: float | None = None) -> list[ConvergenceRow]:
    """Max relative error against the closed form at ``t0`` for each grid of ``ladder``.

    ``order`` is log2 of the error ratio to the previous rung (assumes each
    rung doubles the resolution). ``vol_integral`` overrides the quadrature
    of ``sigma_of_t`` used for the reference values.
    """
    from .closedform import CLAIM_PRICERS

    kind = Claim(kind)
    if vol_integral is not None:
        I = float(vol_integral)
    elif callable(sigma_of_t):
        I, _ = integrate.quad(sigma_of_t, t0, contract.maturity, epsabs=1e-14, epsrel=1e-13, limit=200)
    else:
        I = float(sigma_of_t) * (contract.maturity - t0)
    B = contract.face
    pts = [0.75 * B, B, 1.25 * B] if v_points is None else list(v_points)
    exact = np.array([CLAIM_PRICERS[kind](p, contract, mkt, t0, I).value for p in pts])

    def run(rung):
        ns, nt = rung
        grid = PdeGrid.build(contract, t0, sigma_of_t, n_space=ns, n_time=nt, v_max=v_max, theta=theta)
        approx = solve_claim_pde(kind, grid, contract, mkt).value_at(pts)
        return float(np.max(np.abs(approx - exact) / np.abs(exact)))

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            errors = list(ex.map(run, ladder))
    else:
        errors = [run(rung) for rung in ladder]
    rows, prev = [], None
    for (ns, nt), err in zip(ladder, errors):
        order = math.log2(prev / err) if prev is not None and err > 0 else None
        rows.append(ConvergenceRow(ns, nt, err, order))
        prev = err
    return rows


def fitted_order(rows: Sequence[ConvergenceRow]) -> float:
    """Least-squares slope of -log(error) against log(n_space + 1)."""
    h = np.log([1.0 / (r.n_space + 1) for r in rows])
    e = np.log([r.max_rel_error for r in rows])
    return float(np.polyfit(h, e, 1)[0])
