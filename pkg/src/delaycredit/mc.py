"""Risk-neutral Monte Carlo valuation of equity, debt and guarantees.

Works for any horizon, including ``T - t > l2`` where the closed forms do
not apply. Equity, debt and guarantee are always evaluated on the same
simulated terminal values, so

    min(V, B) + max(V - B, 0) = V   and   min(V, B) + max(B - V, 0) = B

hold path by path.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DomainError
from .model import Claim, DebtContract, FirmModel, HistoryPath, MarketParams, Method, PricingResult
from .pde import payoff
from .rng import BLOCK, _check_seed, standard_normals
from .sdde import Scheme, _check_step, n_steps_for, simulate_paths

# paths per work unit; a multiple of BLOCK so chunks never split a substream block
CHUNK = 64 * BLOCK


@dataclass(frozen=True)
class McConfig:
    n_paths: int
    step: float
    seed: int
    antithetic: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.n_paths < 100:
            raise ConfigurationError(f"n_paths must be >= 100, got {self.n_paths}")
        if self.antithetic and self.n_paths % 2:
            raise ConfigurationError("antithetic sampling needs an even number of paths")
        if not self.step > 0:
            raise ConfigurationError(f"step must be positive, got {self.step}")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")
        _check_seed(self.seed)


@dataclass(frozen=True)
class TerminalSample:
    """Simulated V(T) in path order plus the grid it was produced on."""

    values: np.ndarray
    horizon: float
    step: float
    antithetic: bool


def _start(history: HistoryPath, t: float | None) -> HistoryPath:
    if t is None or abs(t - history.t_end) <= 1e-9 * max(1.0, abs(t)):
        return history
    return history.until(t)


def simulate_terminal(model: FirmModel, history: HistoryPath, mkt: MarketParams, T: float,
                      cfg: McConfig, t: float | None = None) -> TerminalSample:
    """Risk-neutral V(T) for ``cfg.n_paths`` paths started at ``t`` (default: end of history).

    Base path ``i`` uses substream ``i`` of ``cfg.seed``; with antithetic
    sampling paths ``2i`` and ``2i + 1`` use the increments of base path
    ``i`` and their negation.
    """
    if model.payout_c != 0:
        raise ConfigurationError("risk-neutral pricing requires payout_c == 0")
    hist = _start(history, t)
    horizon = T - hist.t_end
    if not horizon > 0:
        raise DomainError(f"maturity {T} must lie after the valuation time {hist.t_end}")
    n_steps = n_steps_for(horizon, cfg.step)
    h = horizon / n_steps
    _check_step(model, h)
    hist.require(hist.t_end - model.delay, hist.t_end)
    n_base = cfg.n_paths // 2 if cfg.antithetic else cfg.n_paths
    sqrt_h = math.sqrt(h)

    def run(first: int) -> np.ndarray:
        count = min(CHUNK, n_base - first)
        dw = standard_normals(cfg.seed, first, count, n_steps) * sqrt_h
        if cfg.antithetic:
            dw = np.stack([dw, -dw], axis=2).reshape(n_steps, 2 * count)
        return simulate_paths(model, hist, h, dw, Scheme.LOG_EULER, rate=mkt.r)[-1]

    starts = range(0, n_base, CHUNK)
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as ex:
            parts = list(ex.map(run, starts))
    else:
        parts = [run(s) for s in starts]
    return TerminalSample(np.concatenate(parts), horizon, h, cfg.antithetic)


def _estimate(samples: np.ndarray, antithetic: bool) -> tuple[float, float]:
    if antithetic:
        samples = 0.5 * (samples[0::2] + samples[1::2])
    n = samples.size
    return float(np.mean(samples)), float(np.std(samples, ddof=1) / math.sqrt(n))


def claims_from_sample(sample: TerminalSample, contract: DebtContract, mkt: MarketParams,
                       cfg: McConfig, kinds=tuple(Claim)) -> dict[Claim, PricingResult]:
    disc = math.exp(-mkt.r * sample.horizon)
    out = {}
    for kind in map(Claim, kinds):
        pay = disc * payoff(kind, sample.values, contract.face)
        value, se = _estimate(pay, sample.antithetic)
        out[kind] = PricingResult(value=value, method=Method.MC, kind=kind, stderr=se,
                                  extra={"n_paths": cfg.n_paths, "seed": cfg.seed, "h": sample.step})
    return out


def price_all_mc(model: FirmModel, history: HistoryPath, contract: DebtContract, mkt: MarketParams,
                 cfg: McConfig, t: float | None = None) -> dict[Claim, PricingResult]:
    """Equity, debt and guarantee on one shared set of paths."""
    sample = simulate_terminal(model, history, mkt, contract.maturity, cfg, t)
    return claims_from_sample(sample, contract, mkt, cfg)


def price_claim_mc(kind, model: FirmModel, history: HistoryPath, contract: DebtContract,
                   mkt: MarketParams, cfg: McConfig, t: float | None = None) -> PricingResult:
    sample = simulate_terminal(model, history, mkt, contract.maturity, cfg, t)
    return claims_from_sample(sample, contract, mkt, cfg, kinds=(Claim(kind),))[Claim(kind)]


def default_frequency_mc(model: FirmModel, history: HistoryPath, contract: DebtContract,
                         mkt: MarketParams, cfg: McConfig, t: float | None = None) -> dict:
    """Fraction of risk-neutral paths with V(T) < B and its binomial standard error."""
    sample = simulate_terminal(model, history, mkt, contract.maturity, cfg, t)
    hits = (sample.values < contract.face).astype(float)
    p = float(np.mean(hits))
    if cfg.antithetic:
        _, se = _estimate(hits, True)
    else:
        se = math.sqrt(p * (1.0 - p) / hits.size)
    return {"probability": p, "stderr": se, "n_paths": cfg.n_paths, "seed": cfg.seed, "h": sample.step}


def write_result_json(result: PricingResult, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(result.to_dict(), indent=2) + "\n")
    return path
