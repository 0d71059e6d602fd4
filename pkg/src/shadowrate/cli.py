"""Command-line entry point.

Subcommands: ``price``, ``verify``, ``simulate``, ``estimate`` and
``perpetual``.  Configuration is JSON (a file path or an inline document);
bulk output is CSV.  Exit codes: 0 ok, 1 invariant failure, 2 config error,
3 IO error.

Config document::

    {
      "market": {"mu": .., "sigma": .., "mu_tilde": .., "sigma_tilde": ..}
                or {"r_bar": .., "sigma": .., "sigma_tilde": .., "mu": ..}
                or {"mu": .., "sigma": .., "r_f": ..}          (single-asset models)
      "option": {"strike": .., "maturity": .., "eta": 1.0, "payoff": "call-on-portfolio"},
      "spot": {"S": .., "Z": ..},
      "lattice": {"n": .., "p": 0.5},
      "mc": {"paths": .., "antithetic": false}
    }

Any parameter may be a schedule: a list of ``{"t_start": .., "value": ..}``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import closed_form, companion, estimation, lattice, monte_carlo, pde_verifier
from .errors import PricingError
from .market import DualAssetParams, OptionSpec, SingleAssetParams, shadow_rate

DEFAULT_SEED = 42
DEFAULT_PATHS = 1_000_000
DEFAULT_TREE_N = 800

LR_MODELS = ("lr-closed", "lr-quad", "lr-tree", "lr-mc")
PI_MODELS = ("pi-tree", "pi-mc", "pi-numeraire")
MODELS = LR_MODELS + PI_MODELS

# daily drift, volatility and riskless rate used when no market is supplied to
# the path and curve generators
DEFAULT_DAILY = {"mu": 4.38e-4, "sigma": 1.935e-2, "r_f": 1.635e-4}

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


class ConfigError(Exception):
    pass


# -- config ------------------------------------------------------------------

def load_config(raw: str | None) -> dict:
    if raw is None:
        return {}
    text = raw.strip()
    if not text.startswith("{"):
        text = Path(raw).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return doc


def _section(cfg: dict, name: str) -> dict:
    sec = cfg.get(name)
    if not isinstance(sec, dict):
        raise ConfigError(f"config needs a '{name}' object")
    return sec


def dual_params(cfg: dict) -> DualAssetParams:
    m = _section(cfg, "market")
    if "r_bar" in m:
        return DualAssetParams.from_shadow_rate(float(m["r_bar"]), float(m["sigma"]),
                                                float(m["sigma_tilde"]), m.get("mu"))
    missing = [k for k in ("mu", "sigma", "mu_tilde", "sigma_tilde") if k not in m]
    if missing:
        raise ConfigError(f"market is missing {', '.join(missing)}")
    return DualAssetParams.from_json(m)


def single_params(cfg: dict) -> SingleAssetParams:
    m = _section(cfg, "market")
    missing = [k for k in ("mu", "sigma", "r_f") if k not in m]
    if missing:
        raise ConfigError(f"market is missing {', '.join(missing)}")
    return SingleAssetParams.from_json(m)


def option_spec(cfg: dict, default_payoff: str) -> OptionSpec:
    o = dict(_section(cfg, "option"))
    o.setdefault("payoff", default_payoff)
    return OptionSpec.from_json(o)


def _spot(cfg: dict) -> tuple[float, float]:
    s = cfg.get("spot", {})
    S = float(s.get("S", 100.0))
    return S, float(s.get("Z", S))


# -- output ------------------------------------------------------------------

def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def dump_json(doc: dict) -> str:
    return json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n"


def dump_csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


# -- price -------------------------------------------------------------------

def _price_lr(args, cfg: dict) -> dict:
    params = dual_params(cfg)
    spec = option_spec(cfg, "call-on-portfolio")
    S, Z = _spot(cfg)
    if args.model in ("lr-closed", "lr-quad"):
        inp = closed_form.LrClosedFormInputs(S, Z, params, spec)
        if args.model == "lr-closed":
            root = closed_form.solve_y_star(inp)
            price = closed_form.lr_call_price(inp, root)
            diag = {"y_star": root.y_star, "root_residual": root.residual, "r_bar": inp.r_bar}
        else:
            price = closed_form.lr_call_price_quadrature(inp)
            diag = {"r_bar": inp.r_bar}
        return {"price": price, "diagnostics": diag}
    if args.model == "lr-tree":
        lat = cfg.get("lattice", {})
        cfg_l = lattice.LatticeConfig(args.n or int(lat.get("n", DEFAULT_TREE_N)), spec.maturity,
                                      float(lat.get("p", 0.5)))
        res = lattice.price_lr_tree(S, Z, params, spec, cfg_l, keep_nodes=bool(args.node_dump))
        if args.node_dump:
            _dump_nodes(args.node_dump, res)
        return {"price": res.option_value_root,
                "diagnostics": {"n": cfg_l.n, "p": cfg_l.p, "q_first": float(res.q_schedule[0]),
                                "layout": res.layout, "warnings": res.warnings}}
    mc = cfg.get("mc", {})
    est = monte_carlo.mc_price_lr(S, Z, params, spec, args.paths or int(mc.get("paths", DEFAULT_PATHS)),
                                  args.seed, antithetic=bool(mc.get("antithetic", False)))
    return {"price": est.value, "std_error": est.std_error, "diagnostics": {"n_paths": est.n_paths}}


def _price_pi(args, cfg: dict) -> dict:
    params = single_params(cfg)
    spec = option_spec(cfg, "call-on-single")
    S, _ = _spot(cfg)
    mc = cfg.get("mc", {})
    n_paths = args.paths or int(mc.get("paths", DEFAULT_PATHS))
    if args.model == "pi-tree":
        lat = cfg.get("lattice", {})
        cfg_l = lattice.LatticeConfig(args.n or int(lat.get("n", DEFAULT_TREE_N)), spec.maturity,
                                      float(lat.get("p", 0.5)))
        tree = lattice.build_pi_tree(S, params, cfg_l)
        res = lattice.price_pi_tree(tree, spec, keep_nodes=bool(args.node_dump))
        if args.node_dump:
            _dump_nodes(args.node_dump, res)
        return {"price": res.option_value_root,
                "diagnostics": {"n": cfg_l.n, "p": cfg_l.p, "pi": float(tree.pi[0]),
                                "q_implied_first": float(np.asarray(res.extra["q_implied"])[0]),
                                "warnings": tree.warnings}}
    if args.model == "pi-mc":
        est = monte_carlo.mc_price_pi(S, params, spec, n_paths, args.seed,
                                      antithetic=bool(mc.get("antithetic", False)))
    else:
        est = monte_carlo.mc_price_deflated_numeraire(S, params, spec, n_paths, args.seed,
                                                      antithetic=bool(mc.get("antithetic", False)))
    diag = {"n_paths": est.n_paths}
    try:
        cmp = monte_carlo.compare_bsm_vs_pi(S, params, spec)
        diag.update(bsm_sigma=cmp.price_bsm, bsm_sigma_R=cmp.price_pi, sigma=cmp.sigma, sigma_R=cmp.sigma_R)
    except ValueError:
        pass
    return {"price": est.value, "std_error": est.std_error, "diagnostics": diag}


def _dump_nodes(path: str, res: lattice.LatticeResult) -> None:
    rows = []
    for step, values in enumerate(res.node_values or []):
        S = res.node_S[step] if res.node_S is not None else [None] * len(values)
        Z = res.node_Z[step] if res.node_Z is not None else [None] * len(values)
        for i, v in enumerate(values):
            rows.append((step, i, S[i], Z[i], v))
    Path(path).write_text(dump_csv(["step", "node", "S", "Z", "value"], rows))


def cmd_price(args) -> int:
    cfg = load_config(args.config)
    if args.model is None:
        raise ConfigError(f"--model is required; choose from {', '.join(MODELS)}")
    out = _price_lr(args, cfg) if args.model in LR_MODELS else _price_pi(args, cfg)
    out = {"model": args.model, **out}
    if args.format == "csv":
        emit(dump_csv(["model", "price", "std_error"],
                      [(args.model, float(out["price"]), out.get("std_error", ""))]), args.output)
    else:
        emit(dump_json(out), args.output)
    return EXIT_OK


# -- verify ------------------------------------------------------------------

def cmd_verify(args) -> int:
    n = args.n if args.n is not None else 100
    if n <= 0:
        raise ConfigError("grid size must be positive")
    if args.inject_fault and args.inject_fault not in pde_verifier.PARTIAL_FIELDS:
        raise ConfigError(f"--inject-fault must be one of {', '.join(pde_verifier.PARTIAL_FIELDS)}")
    tol = args.tolerance
    worst = {"residual": 0.0, "identity": 0.0, "first_order": 0.0, "second_order": 0.0}
    failures = []
    for inp in pde_verifier.random_instances(n, seed=args.seed):
        rep = pde_verifier.verify_instance(inp, fault=args.inject_fault)
        scale = max(1.0, rep.price)
        worst["residual"] = max(worst["residual"], abs(rep.residual) / scale)
        worst["identity"] = max([worst["identity"], *rep.identity_errors.values()])
        first = [v for k, v in rep.fd_vs_analytic.items() if k in pde_verifier.PartialSet.FIRST_ORDER]
        second = [v for k, v in rep.fd_vs_analytic.items() if k in pde_verifier.PartialSet.SECOND_ORDER]
        worst["first_order"] = max([worst["first_order"], *first])
        worst["second_order"] = max([worst["second_order"], *second])
        kw = {"residual_tol": tol} if tol is not None else {}
        bad = rep.failures(**kw)
        if bad:
            failures.append({"failed": bad, "S": inp.S, "Z": inp.Z, "strike": inp.spec.strike,
                             "eta": inp.spec.eta, "tau": inp.tau, "params": inp.params.to_json()})
    report = {"instances": n, "worst": worst, "n_failures": len(failures), "failures": failures[:20]}
    emit(dump_json(report), args.output)
    if failures:
        names = sorted({f for fail in failures for f in fail["failed"]})
        print(f"verification failed: {', '.join(names)}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


# -- simulate / perpetual ----------------------------------------------------

def _daily_params(args, cfg: dict) -> SingleAssetParams:
    if "market" in cfg:
        return single_params(cfg)
    return SingleAssetParams(**DEFAULT_DAILY)


def xi_curve_csv(delta: float, lo: float, hi: float, points: int) -> str:
    grid = np.linspace(lo, hi, points)
    pts = companion.xi_curve(delta, grid)
    return dump_csv(["gamma", "xi", "label"], [(p.gamma, p.xi, p.label or "") for p in pts])


def paths_csv(params: SingleAssetParams, gamma: float, days: int, seed: int) -> str:
    stock, deriv = estimation.synthesize_pair(params, days, seed, gamma)
    rows = [(i, d.isoformat(), s, g) for i, (d, s, g) in enumerate(zip(stock.dates, stock.closes, deriv.closes))]
    return dump_csv(["day", "date", "S", "S_gamma"], rows)


def _mc_paths_csv(args, cfg: dict) -> str:
    n_paths = args.paths or 10
    n_steps = args.n or 252
    model = args.model or "lr-mc"
    S, Z = _spot(cfg)
    rows = []
    if model in LR_MODELS:
        params = dual_params(cfg)
        T = float(_section(cfg, "option")["maturity"]) if "option" in cfg else 1.0
        batches = monte_carlo.simulate_q_pair(S, Z, params, T, n_steps, n_paths, args.seed)
    else:
        params = single_params(cfg)
        T = float(_section(cfg, "option")["maturity"]) if "option" in cfg else 1.0
        batches = (monte_carlo.simulate_p_single(S, params, T, n_steps, n_paths, args.seed, deflated=False),
                   monte_carlo.simulate_p_single(S, params, T, n_steps, n_paths, args.seed, deflated=True))
    for b in batches:
        for i in range(b.paths.shape[0]):
            for k, (t, v) in enumerate(zip(b.times, b.paths[i])):
                rows.append((i, k, float(t), b.process_tag, float(v)))
    return dump_csv(["path_id", "step", "time", "process", "value"], rows)


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if args.what == "xi-curve":
        delta = args.delta
        if delta is None:
            p = _daily_params(args, cfg)
            delta = companion.delta_exponent(float(p.r_f), float(p.sigma))
        emit(xi_curve_csv(delta, args.gamma_min, args.gamma_max, args.points), args.output)
    elif args.what == "paths":
        p = _daily_params(args, cfg)
        gamma = args.gamma if args.gamma is not None else -companion.delta_exponent(float(p.r_f), float(p.sigma))
        emit(paths_csv(p, gamma, args.days, args.seed), args.output)
    else:
        emit(_mc_paths_csv(args, cfg), args.output)
    return EXIT_OK


def cmd_perpetual(args) -> int:
    cfg = load_config(args.config)
    p = _daily_params(args, cfg)
    if args.what == "xi-curve":
        delta = args.delta if args.delta is not None else companion.delta_exponent(float(p.r_f), float(p.sigma))
        emit(xi_curve_csv(delta, args.gamma_min, args.gamma_max, args.points), args.output)
        return EXIT_OK
    gamma = args.gamma if args.gamma is not None else -companion.delta_exponent(float(p.r_f), float(p.sigma))
    if args.what == "paths":
        emit(paths_csv(p, gamma, args.days, args.seed), args.output)
        return EXIT_OK
    spec = companion.PerpetualSpec.from_single(p, gamma)
    mu_t, sigma_t = companion.perpetual_dynamics(spec)
    pair = companion.perpetual_pair(spec)
    doc = {"gamma": gamma, "delta": spec.delta(), "xi": float(companion.xi(gamma, spec.delta())),
           "mu_tilde": mu_t, "sigma_tilde": sigma_t,
           "shadow_rate": shadow_rate(pair) if gamma != 1 else None, "r_f": float(p.r_f)}
    emit(dump_json(doc), args.output)
    return EXIT_OK


# -- estimate ----------------------------------------------------------------

def cmd_estimate(args) -> int:
    if not args.input:
        raise ConfigError("--input price CSV is required")
    series = estimation.load_series(args.input)
    if args.yields:
        r_f = estimation.load_yields(args.yields)
    elif args.rf is not None:
        r_f = args.rf
    else:
        raise ConfigError("supply --yields CSV or a constant --rf annual yield")
    est = estimation.rolling_estimates(series, args.window, r_f)
    rows = [(e.date.isoformat(), e.mu_hat, e.sigma_hat, e.delta_hat) for e in est]
    emit(dump_csv(["date", "mu_hat", "sigma_hat", "delta_hat"], rows), args.output)
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config: a file path or an inline JSON object")
    p.add_argument("--output", help="write output here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"RNG seed (default {DEFAULT_SEED})")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shadowrate", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("price", help="price a European option",
                       description="Models: two risky assets " + ", ".join(LR_MODELS)
                       + " (market needs mu, sigma, mu_tilde, sigma_tilde or r_bar); "
                       "stock plus riskless rate " + ", ".join(PI_MODELS)
                       + " (market needs mu, sigma, r_f).  The option section needs strike and maturity.")
    _common(p)
    p.add_argument("--model", choices=MODELS)
    p.add_argument("--n", type=int, help="lattice steps")
    p.add_argument("--paths", type=int, help="Monte Carlo paths")
    p.add_argument("--node-dump", help="CSV file for lattice node values")
    p.set_defaults(func=cmd_price)

    p = sub.add_parser("verify", help="randomized pricing-PDE and identity check of the closed form",
                       description="Runs the residual, identity and finite-difference checks on a random grid.")
    _common(p)
    p.add_argument("--n", type=int, help="number of random instances (default 100)")
    p.add_argument("--tolerance", type=float, help="override the relative PDE residual tolerance")
    p.add_argument("--inject-fault", metavar="PARTIAL",
                   help="flip the sign of one analytic partial (negative control)")
    p.set_defaults(func=cmd_verify)

    for name, func, desc in (("simulate", cmd_simulate, "data for the xi curve, joint stock/derivative "
                              "paths, or Monte Carlo path dumps (models: lr-* or pi-*)"),
                             ("perpetual", cmd_perpetual, "perpetual derivative: xi curve, paths or dynamics")):
        p = sub.add_parser(name, help=desc, description=desc)
        _common(p)
        choices = ("xi-curve", "paths", "mc-paths") if name == "simulate" else ("xi-curve", "paths", "dynamics")
        p.add_argument("what", choices=choices)
        p.add_argument("--delta", type=float, help="xi-curve exponent 2 r_f / sigma^2")
        p.add_argument("--gamma", type=float, help="derivative exponent (default -delta)")
        p.add_argument("--gamma-min", type=float, default=-2.5)
        p.add_argument("--gamma-max", type=float, default=1.5)
        p.add_argument("--points", type=int, default=81)
        p.add_argument("--days", type=int, default=512)
        if name == "simulate":
            p.add_argument("--model", choices=MODELS, help="mc-paths: lr-* simulates S, Z; pi-* simulates S, S_pi")
            p.add_argument("--n", type=int, help="mc-paths: time steps")
            p.add_argument("--paths", type=int, help="mc-paths: number of paths")
        p.set_defaults(func=func)

    p = sub.add_parser("estimate", help="rolling-window drift, volatility and delta from a price CSV",
                       description="Input CSV header date,close; yields CSV header date,annual_yield.")
    _common(p)
    p.add_argument("--input", help="price CSV")
    p.add_argument("--yields", help="annual yield CSV (forward-filled)")
    p.add_argument("--rf", type=float, help="constant annual yield instead of --yields")
    p.add_argument("--window", type=int, default=512)
    p.set_defaults(func=cmd_estimate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, PricingError, ValueError, KeyError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
