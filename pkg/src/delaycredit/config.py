"""JSON run configuration for the command-line front end."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, ValidationError, model_validator

from .errors import ConfigurationError, DelayCreditError
from .model import DebtContract, FirmModel, HistoryPath, MarketParams, VolSpec


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class VolConfig(_Strict):
    kind: Literal["constant", "affine-clamped", "table"]
    params: dict[str, Any]
    floor: float = 0.0


class ModelConfig(_Strict):
    alpha: float
    payout_c: float = 0.0
    l1: float = Field(gt=0)
    l2: float = Field(gt=0)
    vol: VolConfig


class MarketConfig(_Strict):
    r: float = Field(ge=0)


class ContractConfig(_Strict):
    face: float = Field(gt=0)
    maturity: float = Field(gt=0)


class HistoryConfig(_Strict):
    """Either inline samples (``t0``, ``dt``, ``values``) or a ``csv`` path with columns t,V."""

    t0: Optional[float] = None
    dt: Optional[float] = Field(default=None, gt=0)
    values: Optional[list[float]] = None
    csv: Optional[str] = None

    @model_validator(mode="after")
    def _one_source(self):
        inline = self.values is not None
        if inline == (self.csv is not None):
            raise ValueError("give exactly one of 'values' (with t0, dt) or 'csv'")
        if inline and (self.t0 is None or self.dt is None):
            raise ValueError("inline history needs 't0' and 'dt'")
        return self


class SimulateOptions(_Strict):
    scheme: Optional[Literal["euler", "log-euler", "exact-representation"]] = None
    step: Optional[float] = Field(default=None, gt=0)
    horizon: Optional[float] = Field(default=None, gt=0)
    risk_neutral: bool = False


class McOptions(_Strict):
    paths: int = Field(default=100_000, ge=100)
    step: Optional[float] = Field(default=None, gt=0)
    antithetic: bool = False
    workers: int = Field(default=1, ge=1)


class PdeOptions(_Strict):
    n_space: int = Field(default=400, ge=16)
    n_time: int = Field(default=400, ge=8)
    theta: float = Field(default=0.5, ge=0, le=1)
    v_max: Optional[float] = Field(default=None, gt=0)


class CurveOptions(_Strict):
    d: list[float] = Field(default_factory=lambda: [0.1, 0.3, 0.5, 0.7, 0.9, 1.0, 1.2, 1.5])
    tau: Optional[list[float]] = None


class DefaultProbOptions(_Strict):
    b_prime: Optional[float] = Field(default=None, gt=0)


class RunConfig(_Strict):
    model: ModelConfig
    market: MarketConfig
    contract: ContractConfig
    history: HistoryConfig
    valuation_time: Optional[float] = None
    seed: Optional[int] = Field(default=None, ge=0, lt=2**64)
    simulate: SimulateOptions = Field(default_factory=SimulateOptions)
    mc: McOptions = Field(default_factory=McOptions)
    pde: PdeOptions = Field(default_factory=PdeOptions)
    curve: CurveOptions = Field(default_factory=CurveOptions)
    default_prob: DefaultProbOptions = Field(default_factory=DefaultProbOptions)

    # relative CSV paths are resolved against the config file's directory
    _base_dir: Path = PrivateAttr(default=Path("."))


def _format_validation(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{loc}: {err['msg']}")
    return "\n".join(lines)


def load_config(path) -> RunConfig:
    """Parse and validate a JSON config; raises :class:`ConfigurationError` naming bad fields."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigurationError(f"config: file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config: invalid JSON: {exc}") from None
    try:
        cfg = RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigurationError(_format_validation(exc)) from None
    cfg._base_dir = path.parent
    return cfg


def _field(name: str, fn):
    try:
        return fn()
    except DelayCreditError as exc:
        raise ConfigurationError(f"{name}: {exc}") from None


def build_model(cfg: RunConfig) -> FirmModel:
    m = cfg.model
    vol = _field("model.vol", lambda: VolSpec(m.vol.kind, m.vol.params, m.vol.floor))
    return _field("model", lambda: FirmModel(alpha=m.alpha, l1=m.l1, l2=m.l2, vol=vol,
                                             payout_c=m.payout_c))


def build_market(cfg: RunConfig) -> MarketParams:
    return _field("market", lambda: MarketParams(cfg.market.r))


def build_contract(cfg: RunConfig) -> DebtContract:
    return _field("contract", lambda: DebtContract(cfg.contract.face, cfg.contract.maturity))


def build_history(cfg: RunConfig) -> HistoryPath:
    h = cfg.history
    if h.csv is not None:
        p = Path(h.csv)
        if not p.is_absolute():
            p = cfg._base_dir / p
        if not p.exists():
            raise ConfigurationError(f"history.csv: file not found: {p}")
        return _field("history.csv", lambda: HistoryPath.from_csv(p))
    return _field("history", lambda: HistoryPath(h.t0, h.dt, h.values))
