"""Risk-premium term structures and the additional-debt comparison."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from .closedform import default_argument, default_probability, history_vol_integral, risk_premium, terms
from .errors import DelayCreditError, DomainError
from .model import DebtContract, FirmModel, HistoryPath, MarketParams


@dataclass(frozen=True)
class CurveRequest:
    """Grid of quasi-debt ratios and maturities.

    ``vol_integral`` maps a time to maturity ``tau1`` to the integrated
    squared volatility over ``[T - tau1, T]`` and raises when that window is
    not covered.
    """

    d_values: Sequence[float]
    tau_values: Sequence[float]
    vol_integral: Callable[[float], float]

    def __post_init__(self):
        for name in ("d_values", "tau_values"):
            vals = [float(x) for x in getattr(self, name)]
            if not vals or any(x <= 0 for x in vals):
                raise DomainError(f"{name} must be a non-empty grid of positive numbers")
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise DomainError(f"{name} must be sorted ascending without repeats")
            object.__setattr__(self, name, tuple(vals))


def constant_vol_supplier(sigma: float) -> Callable[[float], float]:
    return lambda tau1: sigma * sigma * tau1


def history_vol_supplier(history: HistoryPath, model: FirmModel, maturity: float) -> Callable[[float], float]:
    return lambda tau1: history_vol_integral(history, model, maturity - tau1, maturity)


@dataclass(frozen=True)
class CurveCell:
    tau1: float
    d: float
    premium: float | None
    valid: bool
    reason: str = ""


def premium_cell(d: float, tau1: float, I: float, contract: DebtContract, mkt: MarketParams) -> float:
    # firm value implied by d for the contract's face at time to maturity tau1
    v = contract.face * math.exp(-mkt.r * tau1) / d
    return risk_premium(terms(v, contract, mkt, contract.maturity - tau1, I))


def premium_curve(req: CurveRequest, contract: DebtContract, mkt: MarketParams) -> list[CurveCell]:
    """Risk premium R - r for every (tau1, d); cells outside the window are kept but marked invalid."""
    cells = []
    for tau1 in req.tau_values:
        try:
            I = req.vol_integral(tau1)
        except DelayCreditError as exc:
            cells.extend(CurveCell(tau1, d, None, False, str(exc)) for d in req.d_values)
            continue
        for d in req.d_values:
            try:
                cells.append(CurveCell(tau1, d, premium_cell(d, tau1, I, contract, mkt), True))
            except DelayCreditError as exc:
                cells.append(CurveCell(tau1, d, None, False, str(exc)))
    return cells


@dataclass(frozen=True)
class DebtImpact:
    p_before: float
    p_after: float
    widened: bool


def additional_debt_impact(v: float, B: float, B_prime: float, mkt: MarketParams, t: float, T: float,
                           I: float) -> DebtImpact:
    """Default probability before and after issuing extra face ``B_prime``.

    The proceeds are added to the firm, V' = V + B', and the same volatility
    integral is used on both sides.
    """
    if not (v > 0 and B > 0 and B_prime > 0):
        raise DomainError("v, B and B_prime must all be positive")
    before = terms(v, DebtContract(B, T), mkt, t, I)
    after = terms(v + B_prime, DebtContract(B + B_prime, T), mkt, t, I)
    return DebtImpact(p_before=default_probability(before), p_after=default_probability(after),
                      widened=default_argument(after) > default_argument(before))


def write_curve_csv(cells: Sequence[CurveCell], path) -> Path:
    """``tau1,d,premium`` rows; invalid cells carry an empty premium."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tau1", "d", "premium"])
        for c in sorted(cells, key=lambda c: (c.tau1, c.d)):
            w.writerow([repr(c.tau1), repr(c.d), repr(c.premium) if c.valid else ""])
    return path


def write_impact_csv(rows: Sequence[tuple[float, float, float, DebtImpact]], path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["v", "B", "Bprime", "p_before", "p_after"])
        for v, B, Bp, imp in rows:
            w.writerow([repr(v), repr(B), repr(Bp), repr(imp.p_before), repr(imp.p_after)])
    return path
