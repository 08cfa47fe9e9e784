"""Pricing of equity, risky debt and loan guarantees when firm value follows a
stochastic delay differential equation."""
from .closedform import (ClosedFormTerms, check_closed_form_window, debt_value, default_probability,
                         equity_value, guarantee_value, price_from_history, risk_premium, terms)
from .errors import (ConfigurationError, DelayCreditError, DomainError, NumericalInstabilityError,
                     OutOfRangeError, SimulationError, WindowError)
from .mc import McConfig, default_frequency_mc, price_all_mc, price_claim_mc
from .model import (Claim, DebtContract, FirmModel, HistoryPath, MarketParams, Method, PricingResult,
                    VolKind, VolSpec, path_lookup, std_normal_cdf, vol_eval)
from .pde import PdeGrid, ValueSurface, convergence_report, realized_sigma, solve_claim_pde, solve_via_heat_transform
from .rng import BrownianIncrements
from .sdde import (Scheme, SimConfig, exact_representation, girsanov_kernel, risk_neutral_simulate,
                   simulate_em, vol_integral)

__version__ = "0.1.0"
