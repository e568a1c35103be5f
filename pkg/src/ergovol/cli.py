"""Command-line front end: config ingestion, dispatch, CSV reports.

The config is a flat ``section.key = value`` text file (UTF-8, ``#``
comments).  Unknown keys are rejected by name so typos fail loudly.  Every
command prints a metadata line carrying the seed that produced its output.

Exit codes are a stable contract: 0 ok, 1 condition-fail, 2 config error,
3 numerical failure, 4 inconclusive.
"""

import argparse
import csv
import math
import os
import sys

import numpy as np

from .errors import ConfigError, ErgovolError, ParameterError
from .harness import convergence_study, edgeworth_fit_study
from .mc import McConfig, extract_cycles
from .model import (
    CheckStatus,
    MarketSpec,
    build_ergodic_measure,
    check_assgam,
    check_assint,
    check_assk,
    preset,
)
from .pricer import (
    Payoff,
    alpha_coefficient,
    calibrate_skew,
    price_corrected,
    sigma_total,
    skew_line,
)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_INCONCLUSIVE = 4

_BOOL = {"true": True, "false": False, "1": True, "0": False,
         "yes": True, "no": False}


def _parse_bool(text):
    try:
        return _BOOL[text.strip().lower()]
    except KeyError:
        raise ConfigError(f"expected a boolean, got {text!r}")


def _parse_floats(text):
    return tuple(float(tok) for tok in text.split(",") if tok.strip())


#: every accepted config key and its parser
_SCHEMA = {
    "model.preset": str,
    "model.xi": float,
    "model.mu": float,
    "model.rho": float,
    "model.eta": float,
    "model.nu_tilde": float,
    "model.m": float,
    "model.nu": float,
    "model.allow_attainable_origin": _parse_bool,
    "model.gamma_plus": float,
    "model.gamma_minus": float,
    "model.delta": float,
    "market.spot_log": float,
    "market.rate": float,
    "market.maturity": float,
    "mc.n_paths": int,
    "mc.dt": float,
    "mc.seed": int,
    "mc.scheme": str,
    "mc.antithetic": _parse_bool,
    "pricing.strike": float,
    "pricing.sigma_bar": float,
    "harness.etas": _parse_floats,
    "harness.t_scale": float,
    "harness.n_samples": int,
    "harness.x0": float,
    "harness.x1": float,
    "harness.horizon": float,
    "output_dir": str,
}

_PRESET_KEYS = {
    "heston_log": ("xi", "mu", "rho", "eta", "nu_tilde"),
    "fouque_ou": ("m", "nu", "rho", "eta"),
    "sinh_mix": ("xi", "rho", "eta"),
}


def load_config(path):
    """Parse a flat key = value config file against the schema."""
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}")
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        try:
            values[key] = _SCHEMA[key](val.strip())
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}")
    return values


def _build_spec(cfg):
    name = cfg.get("model.preset")
    if name is None:
        raise ConfigError("config is missing model.preset")
    if name not in _PRESET_KEYS:
        raise ConfigError(f"unknown model.preset {name!r}")
    kwargs = {k: cfg["model." + k] for k in _PRESET_KEYS[name]
              if "model." + k in cfg}
    return preset(name,
                  allow_attainable_origin=cfg.get(
                      "model.allow_attainable_origin", False),
                  **kwargs)


def _build_market(cfg):
    return MarketSpec(spot_log=cfg.get("market.spot_log", 0.0),
                      rate=cfg.get("market.rate", 0.0),
                      maturity=cfg.get("market.maturity", 1.0))


def _build_mc(cfg, seed_override=None):
    seed = cfg.get("mc.seed", 0) if seed_override is None else seed_override
    return McConfig(n_paths=cfg.get("mc.n_paths", 200_000),
                    dt=cfg.get("mc.dt", 1e-4),
                    seed=seed,
                    scheme=cfg.get("mc.scheme", "euler"),
                    antithetic=cfg.get("mc.antithetic", False))


def _out_dir(cfg, args):
    path = args.out or cfg.get("output_dir", ".")
    os.makedirs(path, exist_ok=True)
    return path


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _payoff_from_args(args):
    kind = args.payoff
    if kind in ("put", "call", "digital"):
        if args.strike is None:
            raise ConfigError(f"--strike is required for --payoff {kind}")
        return getattr(Payoff, kind)(args.strike)
    if kind == "custom":
        if args.bound is None:
            raise ConfigError(
                "--bound is required for --payoff custom: the expansion "
                "needs a bounded payoff")
        if args.strike is None:
            raise ConfigError("--strike is required for --payoff custom")
        strike, bound = args.strike, args.bound

        def capped_put(z):
            return np.minimum(np.maximum(strike - np.exp(z), 0.0), bound)

        return Payoff.custom(capped_put, bound=bound,
                             breakpoints=(math.log(strike),))
    raise ConfigError(f"unknown payoff kind {args.payoff!r}")


def cmd_price(cfg, args):
    spec = _build_spec(cfg)
    market = _build_market(cfg)
    payoff = _payoff_from_args(args)
    measure = build_ergodic_measure(spec)
    quote = price_corrected(payoff, measure, spec, market)
    out = _out_dir(cfg, args)
    header = ["payoff", "strike", "price_corrected", "price_bs",
              "correction", "alpha", "sigma2", "discount", "error_bound"]
    row = [args.payoff, "" if args.strike is None else args.strike,
           quote.price_corrected, quote.price_bs, quote.correction,
           quote.alpha, quote.sigma2, quote.discount, quote.error]
    _write_csv(os.path.join(out, "price.csv"), header, [row])
    print("# seed = n/a (quadrature)")
    for name, val in zip(header, row):
        print(f"{name:16s} {val}")
    return EXIT_OK


def cmd_skew(cfg, args, seed=None):
    spec = _build_spec(cfg)
    market = _build_market(cfg)
    measure = build_ergodic_measure(spec)
    alpha, alpha_err = alpha_coefficient(measure, spec, full=True)
    a, b = skew_line(alpha, measure, spec, market)
    var_rate = sigma_total(measure, spec, market) / market.maturity
    v3 = -alpha * var_rate
    out = _out_dir(cfg, args)
    header = ["a", "b", "v2", "v3", "alpha", "alpha_error"]
    row = [a, b, 2.0 * v3, v3, alpha, alpha_err]
    _write_csv(os.path.join(out, "skew.csv"), header, [row])
    print("# seed = n/a (quadrature)")
    for name, val in zip(header, row):
        print(f"{name:12s} {val}")
    if abs(alpha) < alpha_err:
        print("note: alpha indistinguishable from 0 "
              "(|alpha| below its quadrature error estimate)")
    return EXIT_OK


def cmd_check(cfg, args):
    spec = _build_spec(cfg)
    measure = build_ergodic_measure(spec)
    gamma = (cfg.get("model.gamma_plus", 2.0),
             cfg.get("model.gamma_minus", 2.0))
    delta = cfg.get("model.delta", 0.01)
    gam_ok, gam_witness = check_assgam(spec, measure, gamma, delta)
    int_ok, int_witness = check_assint(spec, measure, delta)
    gam_ok = CheckStatus.PASS if gam_ok else CheckStatus.FAIL
    int_ok = CheckStatus.PASS if int_ok else CheckStatus.FAIL
    report = check_assk(spec, gamma)
    print(f"# gamma = {gamma}, delta = {delta}")
    print(f"growth-bound check : {gam_ok.name:12s} witness {gam_witness}")
    print(f"regularity check   : {int_ok.name:12s} witness {int_witness}")
    print(f"drift-ratio check  : {report.assk_ok.name:12s} "
          f"kappa {report.kappa}")
    statuses = (gam_ok, int_ok, report.assk_ok)
    if any(s == CheckStatus.FAIL for s in statuses):
        return EXIT_FAIL
    if any(s == CheckStatus.INCONCLUSIVE for s in statuses):
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def cmd_mc_converge(cfg, args, seed=None):
    spec = _build_spec(cfg)
    market = _build_market(cfg)
    mc = _build_mc(cfg, seed)
    strike = cfg.get("pricing.strike", 1.0)
    etas = cfg.get("harness.etas", (0.4, 0.2, 0.1))
    report = convergence_study(spec, market, Payoff.put(strike), etas, mc)
    out = _out_dir(cfg, args)
    _write_csv(os.path.join(out, "convergence.csv"),
               ["eta", "error", "se", "runtime"], list(report.rows()))
    print(f"# seed = {mc.seed}")
    for eta, err, se, rt in report.rows():
        print(f"eta {eta:8.4f}  error {err:.3e}  se {se:.3e}  {rt:7.1f}s")
    if report.flag:
        print("note:", report.flag)
    print(f"fitted order: {report.fitted_order:.3f}")
    return EXIT_OK


def cmd_calibrate(cfg, args):
    try:
        with open(args.iv_csv, encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or \
                    not {"strike", "maturity", "iv"} <= set(reader.fieldnames):
                raise ConfigError(
                    f"{args.iv_csv}: need columns strike, maturity, iv")
            points = [(float(r["strike"]), float(r["maturity"]),
                       float(r["iv"])) for r in reader]
    except OSError as exc:
        raise ConfigError(f"cannot read {args.iv_csv!r}: {exc}")
    if not points:
        raise ConfigError(f"{args.iv_csv}: no data rows")
    market = _build_market(cfg)
    fit = calibrate_skew(points, spot=math.exp(market.spot_log),
                         rate=market.rate if not callable(market.rate)
                         else market.integrated_rate() / market.maturity,
                         sigma_bar=cfg.get("pricing.sigma_bar"))
    out = _out_dir(cfg, args)
    header = ["a", "b", "v2", "v3"]
    row = [fit.a, fit.b, fit.v2, fit.v3]
    _write_csv(os.path.join(out, "calibration.csv"), header, [row])
    print(f"# fitted from {len(points)} quotes")
    for name, val in zip(header, row):
        print(f"{name:4s} {val}")
    return EXIT_OK


def cmd_edgeworth(cfg, args, seed=None):
    spec = _build_spec(cfg)
    mc = _build_mc(cfg, seed)
    t_scale = cfg.get("harness.t_scale", 100.0)
    n_samples = cfg.get("harness.n_samples", 100_000)
    report = edgeworth_fit_study(spec, t_scale, n_samples, config=mc)
    out = _out_dir(cfg, args)
    _write_csv(os.path.join(out, "fit.csv"),
               ["statistic", "baseline", "n"],
               [[report.statistic, report.baseline_statistic,
                 report.n_samples]])
    print(f"# seed = {mc.seed}")
    print(f"edgeworth sup-CDF distance {report.statistic:.6f}")
    print(f"gaussian  sup-CDF distance {report.baseline_statistic:.6f}")
    print("edgeworth beats gaussian:", report.passed)
    return EXIT_OK


def cmd_cycles_dump(cfg, args, seed=None):
    spec = _build_spec(cfg)
    mc = _build_mc(cfg, seed)
    measure = build_ergodic_measure(spec)
    x0 = cfg.get("harness.x0")
    x1 = cfg.get("harness.x1")
    if x0 is None or x1 is None:
        raise ConfigError("cycles-dump needs harness.x0 and harness.x1")
    horizon = cfg.get("harness.horizon", 50.0)
    sample = extract_cycles(spec, mc, x0, x1, horizon, measure=measure)
    out = _out_dir(cfg, args)
    rows = zip(sample.tau_start, sample.l, sample.g_h, sample.g_vol,
               sample.int_k[:, 0], sample.int_k[:, 1])
    _write_csv(os.path.join(out, "cycles.csv"),
               ["tau_start", "length", "g_h", "g_vol", "int_k1", "int_k2"],
               rows)
    print(f"# seed = {mc.seed}")
    print(f"wrote {len(sample)} cycles (cycle anchors {x0}, {x1})")
    return EXIT_OK


_COMMANDS = {
    "price": cmd_price,
    "skew": cmd_skew,
    "check": cmd_check,
    "mc-converge": cmd_mc_converge,
    "calibrate": cmd_calibrate,
    "edgeworth": cmd_edgeworth,
    "cycles-dump": cmd_cycles_dump,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ergovol",
        description="corrected Black-Scholes pricing under ergodic "
                    "stochastic volatility")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="config file path")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override mc.seed")
        if name == "price":
            p.add_argument("--payoff", default="put",
                           choices=["put", "call", "digital", "custom"])
            p.add_argument("--strike", type=float, default=None)
            p.add_argument("--bound", type=float, default=None,
                           help="payoff bound (custom payoffs)")
        if name == "calibrate":
            p.add_argument("iv_csv", help="CSV with strike, maturity, iv")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    cfg_cmd = _COMMANDS[args.command]
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg["mc.seed"] = args.seed
        return cfg_cmd(cfg, args)
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ErgovolError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
