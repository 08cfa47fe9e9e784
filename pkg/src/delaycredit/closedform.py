"""Closed-form values of equity, risky debt and loan guarantees.

All formulas take the integrated squared delayed volatility

    I = int_t^T g(V(s - l2))**2 ds

as an input. ``I`` is a known number only while every argument
``s - l2`` lies in the observed past, i.e. ``T - t <= l2``; the
``*_from_history`` helpers enforce this window and compute ``I`` from the
path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import erfcx

from .errors import DomainError, WindowError
from .model import (Claim, DebtContract, FirmModel, HistoryPath, MarketParams, Method,
                    PricingResult, path_lookup, std_normal_cdf)
from .sdde import vol_integral

Phi = std_normal_cdf

_SQRT_HALF_PI = math.sqrt(0.5 * math.pi)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _mills(x: float) -> float:
    """Phi(-x) / phi(x), accurate for large positive x."""
    return _SQRT_HALF_PI * float(erfcx(x / math.sqrt(2.0)))


def _v_density(ct: ClosedFormTerms) -> float:
    # V phi(x1), which equals B e^{-r tau1} phi(x2)
    return ct.v * _INV_SQRT_2PI * math.exp(-0.5 * ct.x1 * ct.x1)


def _equity(ct: ClosedFormTerms) -> float:
    if ct.x1 < 0:
        # deep out of the money both Phi terms nearly cancel; the Mills form does not
        return _v_density(ct) * (_mills(-ct.x1) - _mills(-ct.x2))
    return ct.v * Phi(ct.x1) - ct.discounted_face * Phi(ct.x2)


def _guarantee(ct: ClosedFormTerms) -> float:
    if ct.x2 > 0:
        return _v_density(ct) * (_mills(ct.x2) - _mills(ct.x1))
    return ct.discounted_face * Phi(-ct.x2) - ct.v * Phi(-ct.x1)


@dataclass(frozen=True)
class ClosedFormTerms:
    x1: float
    x2: float
    d: float          # quasi-debt ratio B e^{-r tau1} / V
    I: float          # integrated squared volatility
    tau1: float       # time to maturity
    v: float
    face: float

    @property
    def discounted_face(self) -> float:
        return self.d * self.v

    @property
    def tau(self) -> float:
        """Heat-equation time, half the volatility integral."""
        return 0.5 * self.I


def terms(v: float, contract: DebtContract, mkt: MarketParams, t: float, I: float) -> ClosedFormTerms:
    if not (v > 0 and math.isfinite(v)):
        raise DomainError(f"firm value must be positive, got {v}")
    if not (I > 0 and math.isfinite(I)):
        raise DomainError(f"volatility integral must be positive, got {I}")
    tau1 = contract.maturity - t
    if not tau1 > 0:
        raise DomainError(f"valuation time {t} is not before maturity {contract.maturity}")
    B = contract.face
    root = math.sqrt(I)
    x1 = (math.log(v / B) + mkt.r * tau1 + 0.5 * I) / root
    return ClosedFormTerms(x1=x1, x2=x1 - root, d=B * math.exp(-mkt.r * tau1) / v,
                           I=I, tau1=tau1, v=v, face=B)


def _result(value: float, kind: Claim, I: float) -> PricingResult:
    return PricingResult(value=value, method=Method.CLOSED_FORM, kind=kind, vol_integral=I)


def equity_value(v, contract, mkt, t, I) -> PricingResult:
    """Levered equity: V Phi(x1) - B e^{-r tau1} Phi(x2)."""
    ct = terms(v, contract, mkt, t, I)
    return _result(max(_equity(ct), 0.0), Claim.EQUITY, I)


def debt_value(v, contract, mkt, t, I) -> PricingResult:
    """Risky debt: B e^{-r tau1} [Phi(x2) + Phi(-x1) / d]."""
    ct = terms(v, contract, mkt, t, I)
    pv_face = ct.discounted_face
    value = pv_face * Phi(ct.x2) + v * Phi(-ct.x1)
    return _result(value, Claim.DEBT, I)


def guarantee_value(v, contract, mkt, t, I) -> PricingResult:
    """Fair loan-guarantee premium: B e^{-r tau1} Phi(-x2) - V Phi(-x1).

    This is the put-type form; it makes guaranteed debt worth exactly the
    riskless ``B e^{-r tau1}``.
    """
    ct = terms(v, contract, mkt, t, I)
    return _result(max(_guarantee(ct), 0.0), Claim.GUARANTEE, I)


CLAIM_PRICERS = {
    Claim.EQUITY: equity_value,
    Claim.DEBT: debt_value,
    Claim.GUARANTEE: guarantee_value,
}


def risk_premium(ct: ClosedFormTerms) -> float:
    """Yield spread R(tau1) - r of the risky debt."""
    # Phi(x2) + Phi(-x1)/d == 1 - G / (B e^{-r tau1}); log1p keeps tiny spreads accurate
    shortfall = -_guarantee(ct) / ct.discounted_face
    if not shortfall > -1.0:
        raise ArithmeticError("risk premium logarithm argument is not positive")
    return max(-math.log1p(shortfall) / ct.tau1, 0.0)


def default_argument(ct: ClosedFormTerms) -> float:
    """(ln d + I/2) / sqrt(I), which equals -x2."""
    return (math.log(ct.d) + 0.5 * ct.I) / math.sqrt(ct.I)


def default_probability(ct: ClosedFormTerms) -> float:
    """Risk-neutral probability that V(T) < B."""
    return Phi(default_argument(ct))


def check_closed_form_window(history: HistoryPath, model: FirmModel, t: float, T: float) -> bool:
    slack = 1e-9 * max(1.0, abs(T))
    if T - t > model.l2 + slack:
        return False
    return history.covers(t - model.l2, T - model.l2)


def _require_window(history, model, t, T):
    if not check_closed_form_window(history, model, t, T):
        if T - t > model.l2:
            raise WindowError(f"time to maturity T-t={T - t:g} exceeds the volatility delay "
                              f"L2={model.l2:g}; use the Monte Carlo route")
        raise WindowError(f"history [{history.t0:g}, {history.t_end:g}] does not cover "
                          f"[{t - model.l2:g}, {T - model.l2:g}] needed for the volatility integral")


def history_vol_integral(history: HistoryPath, model: FirmModel, t: float, T: float) -> float:
    """Volatility integral over [t, T] after checking the closed-form window."""
    _require_window(history, model, t, T)
    return vol_integral(history, model.vol, model.l2, t, T)


def price_from_history(kind, history: HistoryPath, model: FirmModel, contract: DebtContract,
                       mkt: MarketParams, t: float | None = None) -> PricingResult:
    """Closed-form price at ``t`` (default: end of the history) using the realized path."""
    if model.payout_c != 0:
        raise DomainError("closed forms require payout_c == 0")
    t = history.t_end if t is None else t
    I = history_vol_integral(history, model, t, contract.maturity)
    v = path_lookup(history, t)
    return CLAIM_PRICERS[Claim(kind)](v, contract, mkt, t, I)


def terms_from_history(history, model, contract, mkt, t=None) -> ClosedFormTerms:
    t = history.t_end if t is None else t
    I = history_vol_integral(history, model, t, contract.maturity)
    return terms(path_lookup(history, t), contract, mkt, t, I)
