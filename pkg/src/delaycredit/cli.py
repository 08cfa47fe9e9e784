"""Command-line batch front end.

Exit codes: 0 ok, 2 configuration/validation, 3 simulation failure,
4 closed-form window violated.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import closedform, pde, riskstructure
from .config import (RunConfig, build_contract, build_history, build_market, build_model,
                     load_config)
from .errors import (ConfigurationError, DelayCreditError, NumericalInstabilityError,
                     SimulationError, WindowError)
from .mc import McConfig, default_frequency_mc, price_claim_mc
from .model import Claim, Method, PricingResult
from .sdde import SimConfig, Scheme, risk_neutral_simulate, simulate_em

EXIT_OK, EXIT_CONFIG, EXIT_SIMULATION, EXIT_WINDOW = 0, 2, 3, 4


class _Inputs:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.model = build_model(cfg)
        self.market = build_market(cfg)
        self.contract = build_contract(cfg)
        self.history = build_history(cfg)
        self.t = self.history.t_end if cfg.valuation_time is None else cfg.valuation_time


def _seed(args, cfg: RunConfig) -> int:
    seed = args.seed if args.seed is not None else cfg.seed
    if seed is None:
        raise ConfigurationError("seed: randomized commands need --seed or a 'seed' config entry")
    if not 0 <= seed < 2**64:
        raise ConfigurationError(f"seed: must be an unsigned 64-bit integer, got {seed}")
    return seed


def _parse_grid(text: str) -> tuple[int, int]:
    try:
        ns, nt = (int(p) for p in text.lower().split("x"))
    except ValueError:
        raise ConfigurationError(f"--grid: expected NxM (space x time nodes), got {text!r}") from None
    return ns, nt


def _parse_floats(text: str, name: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigurationError(f"{name}: expected comma-separated numbers, got {text!r}") from None


def _emit_json(obj: dict, out) -> None:
    text = json.dumps(obj, indent=2) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_simulate(args, inp: _Inputs) -> int:
    opts = inp.cfg.simulate
    step = args.step or opts.step or min(inp.model.l1, inp.model.l2) / 64
    horizon = args.horizon or opts.horizon or inp.contract.maturity - inp.history.t_end
    scheme = args.scheme or opts.scheme
    sim = SimConfig(step=step, horizon=horizon, seed=_seed(args, inp.cfg),
                    scheme=Scheme(scheme) if scheme else None)
    if args.risk_neutral or opts.risk_neutral:
        path = risk_neutral_simulate(inp.model, inp.history, inp.market, sim)
    else:
        path = simulate_em(inp.model, inp.history, sim)
    if args.out:
        path.to_csv(args.out)
    else:
        w = csv.writer(sys.stdout)
        w.writerow(["t", "V"])
        for t, v in zip(path.times, path.values):
            w.writerow([repr(float(t)), repr(float(v))])
    return EXIT_OK


def _pde_grid(inp: _Inputs, n_space: int, n_time: int, theta: float, v_max):
    s2 = pde.realized_sigma(inp.history, inp.model, inp.t, inp.contract.maturity, n_time)
    return pde.PdeGrid(v_max=v_max or 8.0 * inp.contract.face, n_space=n_space, n_time=n_time,
                       sigma_of_t=s2, t0=inp.t, maturity=inp.contract.maturity, theta=theta)


def _price(args, inp: _Inputs) -> dict:
    kind = Claim(args.kind)
    method = args.method
    v = float(inp.history.lookup(inp.t))
    if method == "mc":
        opts = inp.cfg.mc
        step = args.step or opts.step or inp.model.l2 / 64
        cfg = McConfig(n_paths=args.paths or opts.paths, step=step, seed=_seed(args, inp.cfg),
                       antithetic=opts.antithetic, workers=args.workers or opts.workers)
        res = price_claim_mc(kind, inp.model, inp.history, inp.contract, inp.market, cfg, t=inp.t)
        out = res.to_dict()
        out["tolerance"] = 3.0 * res.stderr
        return out

    I = closedform.history_vol_integral(inp.history, inp.model, inp.t, inp.contract.maturity)
    if method == "closed":
        res = closedform.price_from_history(kind, inp.history, inp.model, inp.contract,
                                            inp.market, inp.t)
        out = res.to_dict()
        out["tolerance"] = 1e-12 * max(abs(res.value), inp.contract.face)
        return out
    opts = inp.cfg.pde
    ns, nt = _parse_grid(args.grid) if args.grid else (opts.n_space, opts.n_time)
    theta = args.theta if args.theta is not None else opts.theta
    grid = _pde_grid(inp, ns, nt, theta, opts.v_max)
    if method == "heat":
        surf = pde.solve_via_heat_transform(kind, grid, inp.contract, inp.market, [v])
        value = float(surf.values[0, 0])
        res = PricingResult(value=value, method=Method.HEAT_KERNEL, kind=kind, vol_integral=I)
        out = res.to_dict()
        out["tolerance"] = 1e-6 * max(abs(value), inp.contract.face)
        return out
    value = pde.solve_claim_pde(kind, grid, inp.contract, inp.market).value_at(v)
    # discretization error estimate from a grid with half the resolution
    coarse = _pde_grid(inp, max(16, (ns + 1) // 2 - 1), max(8, nt // 2), theta, opts.v_max)
    value_c = pde.solve_claim_pde(kind, coarse, inp.contract, inp.market).value_at(v)
    res = PricingResult(value=float(value), method=Method.PDE, kind=kind, vol_integral=I,
                        extra={"n_space": ns, "n_time": nt, "theta": theta})
    out = res.to_dict()
    out["tolerance"] = abs(value - value_c)
    return out


def cmd_price(args, inp: _Inputs) -> int:
    _emit_json(_price(args, inp), args.out)
    return EXIT_OK


def cmd_curve(args, inp: _Inputs) -> int:
    opts = inp.cfg.curve
    d = _parse_floats(args.d_grid, "--d-grid") if args.d_grid else opts.d
    if args.tau_grid:
        tau = _parse_floats(args.tau_grid, "--tau-grid")
    elif opts.tau:
        tau = opts.tau
    else:
        tau = [inp.model.l2 * k / 4 for k in range(1, 5)]
    supplier = riskstructure.history_vol_supplier(inp.history, inp.model, inp.contract.maturity)
    req = riskstructure.CurveRequest(d, tau, supplier)
    cells = riskstructure.premium_curve(req, inp.contract, inp.market)
    if args.out:
        riskstructure.write_curve_csv(cells, args.out)
    else:
        w = csv.writer(sys.stdout)
        w.writerow(["tau1", "d", "premium"])
        for c in cells:
            w.writerow([c.tau1, c.d, c.premium if c.valid else ""])
    return EXIT_OK


def cmd_default_prob(args, inp: _Inputs) -> int:
    ct = closedform.terms_from_history(inp.history, inp.model, inp.contract, inp.market, inp.t)
    out = {"v": ct.v, "B": ct.face, "d": ct.d, "vol_integral": ct.I, "tau1": ct.tau1,
           "probability": closedform.default_probability(ct)}
    b_prime = args.b_prime if args.b_prime is not None else inp.cfg.default_prob.b_prime
    if b_prime is not None:
        if not b_prime > 0:
            raise ConfigurationError(f"--b-prime: must be positive, got {b_prime}")
        imp = riskstructure.additional_debt_impact(ct.v, ct.face, b_prime, inp.market, inp.t,
                                                   inp.contract.maturity, ct.I)
        out.update({"Bprime": b_prime, "p_before": imp.p_before, "p_after": imp.p_after,
                    "widened": imp.widened})
    if args.paths:
        step = args.step or inp.cfg.mc.step or inp.model.l2 / 64
        cfg = McConfig(n_paths=args.paths, step=step, seed=_seed(args, inp.cfg))
        freq = default_frequency_mc(inp.model, inp.history, inp.contract, inp.market, cfg, t=inp.t)
        out["mc"] = freq
    _emit_json(out, args.out)
    return EXIT_OK


def cmd_converge(args, inp: _Inputs) -> int:
    ns, nt = _parse_grid(args.grid) if args.grid else (39, 40)
    ladder = [((ns + 1) * 2**k - 1, nt * 2**k) for k in range(args.levels)]
    T = inp.contract.maturity
    I = closedform.history_vol_integral(inp.history, inp.model, inp.t, T)

    def sigma2(s):
        return float(inp.model.vol(inp.history.lookup(s - inp.model.l2))) ** 2

    theta = args.theta if args.theta is not None else inp.cfg.pde.theta
    rows = pde.convergence_report(args.kind, inp.contract, inp.market, sigma2, ladder,
                                  t0=inp.t, theta=theta, v_max=inp.cfg.pde.v_max, vol_integral=I)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(["n_space", "n_time", "max_rel_error", "order"])
        for r in rows:
            w.writerow([r.n_space, r.n_time, repr(r.max_rel_error),
                        "" if r.order is None else repr(r.order)])
    finally:
        if args.out:
            fh.close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="delaycredit",
                                     description="Price corporate claims under a delayed firm-value model.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--seed", type=int, help="RNG seed (unsigned 64-bit)")

    p = sub.add_parser("simulate", help="simulate one firm-value path to CSV")
    common(p)
    p.add_argument("--scheme", choices=[s.value for s in Scheme])
    p.add_argument("--step", type=float)
    p.add_argument("--horizon", type=float)
    p.add_argument("--risk-neutral", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("price", help="price equity, debt or a loan guarantee")
    common(p)
    p.add_argument("--kind", choices=[k.value for k in Claim], required=True)
    p.add_argument("--method", choices=["closed", "pde", "mc", "heat"], default="closed")
    p.add_argument("--paths", type=int)
    p.add_argument("--step", type=float)
    p.add_argument("--grid", help="PDE grid as NxM (interior space nodes x time steps)")
    p.add_argument("--theta", type=float)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_price)

    p = sub.add_parser("curve", help="risk-premium table over (tau1, d)")
    common(p)
    p.add_argument("--d-grid", help="comma-separated quasi-debt ratios")
    p.add_argument("--tau-grid", help="comma-separated times to maturity")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("default-prob", help="default probability and additional-debt impact")
    common(p)
    p.add_argument("--b-prime", type=float, help="face value of additional debt")
    p.add_argument("--paths", type=int, help="also report the Monte Carlo default frequency")
    p.add_argument("--step", type=float)
    p.set_defaults(func=cmd_default_prob)

    p = sub.add_parser("converge", help="PDE grid-refinement study against the closed form")
    common(p)
    p.add_argument("--kind", choices=[k.value for k in Claim], default="equity")
    p.add_argument("--grid", help="coarsest grid NxM; each level doubles both")
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--theta", type=float)
    p.set_defaults(func=cmd_converge)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        inp = _Inputs(load_config(args.config))
        return args.func(args, inp)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationError as exc:
        print(f"simulation failed: {exc}", file=sys.stderr)
        return EXIT_SIMULATION
    except WindowError as exc:
        print(f"window violation: {exc}", file=sys.stderr)
        return EXIT_WINDOW
    except NumericalInstabilityError as exc:
        print(f"numerical instability: {exc}", file=sys.stderr)
        return EXIT_SIMULATION
    except DelayCreditError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
