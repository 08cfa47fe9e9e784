"""Domain types, the volatility family and the normal CDF.

Everything here is immutable after construction and safe to share between
threads.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from types import MappingProxyType
from typing import Any, Mapping

import numpy as np
from scipy.special import ndtr

from .errors import DomainError, OutOfRangeError

# relative slack when deciding whether a time sits on a node / inside an interval
TIME_EPS = 1e-9


class Claim(str, Enum):
    EQUITY = "equity"
    DEBT = "debt"
    GUARANTEE = "guarantee"


class Method(str, Enum):
    CLOSED_FORM = "closed-form"
    PDE = "pde"
    MC = "mc"
    HEAT_KERNEL = "heat-kernel"


def std_normal_cdf(x):
    """Standard normal CDF, accurate to ~1e-16 absolute over the whole real line.

    Accepts scalars or arrays; non-finite input raises :class:`DomainError`.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"std_normal_cdf needs finite input, got {x!r}")
    out = ndtr(arr)
    return float(out) if out.ndim == 0 else out


class VolKind(str, Enum):
    CONSTANT = "constant"
    AFFINE_CLAMPED = "affine-clamped"
    TABLE = "table"


@dataclass(frozen=True)
class VolSpec:
    """Volatility function g of the (delayed) firm value.

    ``constant``        params ``sigma``; g(x) = max(sigma, floor)
    ``affine-clamped``  params ``a``, ``b``; g(x) = max(floor, a + b*x)
    ``table``           params ``x``, ``y``; linear interpolation, flat beyond the ends,
                        then clamped at ``floor``

    The floor must be positive for the affine and table kinds. A constant ``VolSpec``
    may carry ``sigma = 0`` (deterministic firm value); such a volatility cannot be
    used where the volatility appears in a denominator.
    """

    kind: VolKind
    params: Mapping[str, Any] = field(default_factory=dict)
    floor: float = 0.0

    def __post_init__(self):
        kind = VolKind(self.kind)
        object.__setattr__(self, "kind", kind)
        params = dict(self.params)
        floor = float(self.floor)
        if not math.isfinite(floor) or floor < 0:
            raise DomainError(f"vol floor must be a finite non-negative number, got {floor}")
        if kind is VolKind.CONSTANT:
            sigma = float(params.get("sigma", math.nan))
            if not math.isfinite(sigma) or sigma < 0:
                raise DomainError(f"constant vol needs sigma >= 0, got {params.get('sigma')!r}")
            params = {"sigma": sigma}
        else:
            if floor <= 0:
                raise DomainError(f"{kind.value} vol needs a positive floor, got {floor}")
            if kind is VolKind.AFFINE_CLAMPED:
                try:
                    params = {"a": float(params["a"]), "b": float(params["b"])}
                except KeyError as exc:
                    raise DomainError(f"affine-clamped vol is missing parameter {exc}") from None
            else:
                xs = np.asarray(params.get("x", ()), dtype=float)
                ys = np.asarray(params.get("y", ()), dtype=float)
                if xs.ndim != 1 or xs.size < 2 or xs.shape != ys.shape:
                    raise DomainError("table vol needs equal-length 'x' and 'y' with >= 2 points")
                if np.any(np.diff(xs) <= 0):
                    raise DomainError("table vol 'x' must be strictly increasing")
                params = {"x": tuple(xs.tolist()), "y": tuple(ys.tolist())}
        object.__setattr__(self, "params", MappingProxyType(params))
        object.__setattr__(self, "floor", floor)

    @classmethod
    def constant(cls, sigma: float) -> "VolSpec":
        return cls(VolKind.CONSTANT, {"sigma": sigma}, floor=0.0)

    @classmethod
    def affine(cls, a: float, b: float, floor: float) -> "VolSpec":
        return cls(VolKind.AFFINE_CLAMPED, {"a": a, "b": b}, floor=floor)

    @classmethod
    def table(cls, x, y, floor: float) -> "VolSpec":
        return cls(VolKind.TABLE, {"x": list(x), "y": list(y)}, floor=floor)

    @property
    def lower_bound(self) -> float:
        """Smallest value the function can return."""
        if self.kind is VolKind.CONSTANT:
            return max(self.params["sigma"], self.floor)
        return self.floor

    def __call__(self, v):
        return vol_eval(self, v)

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "params": {k: (list(v) if isinstance(v, tuple) else v)
                                                    for k, v in self.params.items()},
                "floor": self.floor}


def vol_eval(vol: VolSpec, v):
    """Evaluate g(v) for a scalar or array of firm values (all must be > 0)."""
    arr = np.asarray(v, dtype=float)
    if not np.all(arr > 0):
        raise DomainError("volatility is only defined for positive firm values")
    if vol.kind is VolKind.CONSTANT:
        out = np.full_like(arr, max(vol.params["sigma"], vol.floor))
    elif vol.kind is VolKind.AFFINE_CLAMPED:
        out = np.maximum(vol.floor, vol.params["a"] + vol.params["b"] * arr)
    else:
        out = np.maximum(vol.floor, np.interp(arr, vol.params["x"], vol.params["y"]))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class HistoryPath:
    """Uniformly sampled, strictly positive firm-value trajectory.

    Covers ``[t0, t0 + (n - 1) * dt]``; values between nodes are linearly
    interpolated.
    """

    t0: float
    dt: float
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float).ravel()
        if vals.size == 0:
            raise DomainError("history path must contain at least one value")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise DomainError(f"history dt must be positive, got {self.dt}")
        if not math.isfinite(self.t0):
            raise DomainError("history t0 must be finite")
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
            raise DomainError("history values must be finite and strictly positive")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "dt", float(self.dt))

    def __len__(self) -> int:
        return self.values.size

    @property
    def t_end(self) -> float:
        return self.t0 + (self.values.size - 1) * self.dt

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.values.size)

    def _slack(self) -> float:
        return TIME_EPS * max(1.0, abs(self.t0), abs(self.t_end), self.dt)

    def covers(self, a: float, b: float | None = None) -> bool:
        b = a if b is None else b
        eps = self._slack()
        return a >= self.t0 - eps and b <= self.t_end + eps

    def require(self, a: float, b: float | None = None) -> None:
        b = a if b is None else b
        if not self.covers(a, b):
            raise OutOfRangeError(
                f"history covers [{self.t0:.10g}, {self.t_end:.10g}] but "
                f"[{a:.10g}, {b:.10g}] is required", required=(a, b))

    def lookup(self, t):
        return path_lookup(self, t)

    def node_index(self, t: float) -> int:
        """Index of the node at time ``t``; raises if ``t`` is not a node."""
        pos = (t - self.t0) / self.dt
        k = int(round(pos))
        if abs(pos - k) > 1e-7 or not 0 <= k < self.values.size:
            raise DomainError(f"t={t} is not a node of the history grid")
        return k

    def until(self, t: float) -> "HistoryPath":
        """Prefix of the path ending at node ``t``."""
        k = self.node_index(t)
        return HistoryPath(self.t0, self.dt, self.values[: k + 1])

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "V"])
            for t, v in zip(self.times, self.values):
                w.writerow([repr(float(t)), repr(float(v))])
        return path

    @classmethod
    def from_csv(cls, path) -> "HistoryPath":
        """Read a ``t,V`` CSV written by :meth:`to_csv` (uniform spacing required)."""
        with Path(path).open(newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows or "t" not in rows[0] or "V" not in rows[0]:
            raise DomainError(f"{path}: expected a CSV with header 't,V'")
        ts = np.array([float(r["t"]) for r in rows])
        vs = np.array([float(r["V"]) for r in rows])
        if ts.size == 1:
            return cls(ts[0], 1.0, vs)
        steps = np.diff(ts)
        dt = (ts[-1] - ts[0]) / (ts.size - 1)
        if np.any(np.abs(steps - dt) > 1e-6 * dt):
            raise DomainError(f"{path}: time column is not uniformly spaced")
        return cls(ts[0], dt, vs)

    @classmethod
    def constant(cls, value: float, t0: float, t1: float, dt: float) -> "HistoryPath":
        n = int(round((t1 - t0) / dt)) + 1
        return cls(t0, dt, np.full(n, float(value)))

    @classmethod
    def from_function(cls, fn, t0: float, t1: float, dt: float) -> "HistoryPath":
        n = int(round((t1 - t0) / dt)) + 1
        return cls(t0, dt, np.array([fn(t0 + k * dt) for k in range(n)], dtype=float))


def path_lookup(path: HistoryPath, t):
    """Firm value at time ``t`` (scalar or array) by linear interpolation."""
    ts = np.asarray(t, dtype=float)
    lo, hi = float(np.min(ts)), float(np.max(ts))
    path.require(lo, hi)
    pos = np.clip((ts - path.t0) / path.dt, 0.0, path.values.size - 1)
    k = np.minimum(np.floor(pos).astype(int), path.values.size - 2) if path.values.size > 1 \
        else np.zeros_like(pos, dtype=int)
    if path.values.size == 1:
        out = np.full_like(pos, path.values[0])
    else:
        w = pos - k
        out = (1.0 - w) * path.values[k] + w * path.values[k + 1]
        # exact at nodes
        on_node = np.isclose(pos, np.round(pos), rtol=0.0, atol=1e-9)
        out = np.where(on_node, path.values[np.round(pos).astype(int)], out)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class FirmModel:
    """Coefficients of dV = (alpha V(t) V(t-l1) - C) dt + g(V(t-l2)) V(t) dW."""

    alpha: float
    l1: float
    l2: float
    vol: VolSpec
    payout_c: float = 0.0

    def __post_init__(self):
        for name in ("alpha", "l1", "l2", "payout_c"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if self.l1 <= 0 or self.l2 <= 0:
            raise DomainError(f"delays must be positive, got l1={self.l1}, l2={self.l2}")

    @property
    def delay(self) -> float:
        """Length of the required past, max(l1, l2)."""
        return max(self.l1, self.l2)


@dataclass(frozen=True)
class DebtContract:
    face: float
    maturity: float

    def __post_init__(self):
        if not (self.face > 0 and math.isfinite(self.face)):
            raise DomainError(f"face value must be positive, got {self.face}")
        if not (self.maturity > 0 and math.isfinite(self.maturity)):
            raise DomainError(f"maturity must be positive, got {self.maturity}")


@dataclass(frozen=True)
class MarketParams:
    r: float

    def __post_init__(self):
        if not (self.r >= 0 and math.isfinite(self.r)):
            raise DomainError(f"riskless rate must be finite and >= 0, got {self.r}")


@dataclass(frozen=True)
class PricingResult:
    value: float
    method: Method
    kind: Claim | None = None
    vol_integral: float | None = None
    stderr: float | None = None
    extra: Mapping[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind.value if self.kind is not None else None,
            "method": Method(self.method).value,
            "value": self.value,
            "vol_integral": self.vol_integral,
            "stderr": self.stderr,
        }
        out.update(self.extra)
        return out
