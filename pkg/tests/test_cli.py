"""CLI contract: config parsing, CSV outputs, exit codes."""

import csv
import math
import os

import numpy as np
import pytest

from ergovol.cli import main
from ergovol.model import MarketSpec, build_ergodic_measure, preset
from ergovol.pricer import (
    Payoff,
    alpha_coefficient,
    price_corrected,
)

HESTON_CFG = """\
# unit-variance square-root volatility driver
model.preset = heston_log
model.xi = 2.0
model.mu = 0.3
model.rho = -0.6
market.spot_log = 0.0
market.rate = 0.02
market.maturity = 1.0
"""


def _write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# config parsing


def test_unknown_key_rejected_by_name(tmp_path, capsys):
    cfg = _write(tmp_path, HESTON_CFG + "model.xl = 3\n")
    code = main(["skew", "--config", cfg, "--out", str(tmp_path)])
    assert code == 2
    err = capsys.readouterr().err
    assert "model.xl" in err
    assert ":9:" in err  # line number of the typo


def test_malformed_line_rejected(tmp_path, capsys):
    cfg = _write(tmp_path, "model.preset heston_log\n")
    assert main(["skew", "--config", cfg]) == 2


def test_missing_config_file(tmp_path):
    assert main(["skew", "--config", str(tmp_path / "nope.cfg")]) == 2


def test_bad_value_reports_line(tmp_path, capsys):
    cfg = _write(tmp_path, HESTON_CFG + "mc.n_paths = many\n")
    assert main(["skew", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "mc.n_paths" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# price


def test_price_csv_round_trip(tmp_path, heston_spec, heston_measure, market):
    cfg = _write(tmp_path, HESTON_CFG)
    code = main(["price", "--config", cfg, "--out", str(tmp_path),
                 "--payoff", "put", "--strike", "1.05"])
    assert code == 0
    rows = _read_csv(tmp_path / "price.csv")
    assert len(rows) == 1
    quote = price_corrected(Payoff.put(1.05), heston_measure, heston_spec,
                            market)
    assert float(rows[0]["price_corrected"]) == pytest.approx(
        quote.price_corrected, abs=1e-12)
    assert float(rows[0]["alpha"]) == pytest.approx(quote.alpha, abs=1e-12)
    assert rows[0]["payoff"] == "put"


def test_price_custom_needs_bound(tmp_path, capsys):
    cfg = _write(tmp_path, HESTON_CFG)
    code = main(["price", "--config", cfg, "--out", str(tmp_path),
                 "--payoff", "custom", "--strike", "1.0"])
    assert code == 2
    assert "--bound" in capsys.readouterr().err


def test_price_put_needs_strike(tmp_path):
    cfg = _write(tmp_path, HESTON_CFG)
    assert main(["price", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_price_metadata_line(tmp_path, capsys):
    cfg = _write(tmp_path, HESTON_CFG)
    main(["price", "--config", cfg, "--out", str(tmp_path),
          "--strike", "1.0"])
    assert "# seed" in capsys.readouterr().out


# ---------------------------------------------------------------------------
# skew


def test_skew_csv(tmp_path, heston_spec, heston_measure):
    cfg = _write(tmp_path, HESTON_CFG)
    assert main(["skew", "--config", cfg, "--out", str(tmp_path)]) == 0
    row = _read_csv(tmp_path / "skew.csv")[0]
    alpha = alpha_coefficient(heston_measure, heston_spec)
    assert float(row["alpha"]) == pytest.approx(alpha, rel=1e-10)
    assert float(row["v2"]) == pytest.approx(2.0 * float(row["v3"]),
                                             rel=1e-12)


# ---------------------------------------------------------------------------
# check


def test_check_pass_and_fail(tmp_path):
    ok_cfg = _write(tmp_path, "model.preset = sinh_mix\nmodel.xi = 5\n"
                    "model.gamma_plus = 2\nmodel.gamma_minus = 2\n"
                    "model.delta = 0.01\n", "ok.cfg")
    assert main(["check", "--config", ok_cfg, "--out", str(tmp_path)]) == 0
    bad_cfg = _write(tmp_path, "model.preset = sinh_mix\nmodel.xi = 3\n"
                     "model.gamma_plus = 2\nmodel.gamma_minus = 2\n"
                     "model.delta = 0.01\n", "bad.cfg")
    assert main(["check", "--config", bad_cfg, "--out", str(tmp_path)]) == 1


# ---------------------------------------------------------------------------
# calibrate


def test_calibrate_exact_line(tmp_path):
    a_true, b_true = -0.11, 0.24
    quotes = tmp_path / "iv.csv"
    with open(quotes, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["strike", "maturity", "iv"])
        for strike in (0.85, 0.95, 1.05, 1.2):
            for mat in (0.5, 1.0, 1.5):
                w.writerow([strike, mat,
                            a_true * math.log(strike) / mat + b_true])
    cfg = _write(tmp_path, "market.rate = 0.0\n")
    code = main(["calibrate", "--config", cfg, "--out", str(tmp_path),
                 str(quotes)])
    assert code == 0
    row = _read_csv(tmp_path / "calibration.csv")[0]
    assert float(row["a"]) == pytest.approx(a_true, abs=1e-12)
    assert float(row["b"]) == pytest.approx(b_true, abs=1e-12)


def test_calibrate_empty_csv(tmp_path):
    quotes = tmp_path / "iv.csv"
    quotes.write_text("strike,maturity,iv\n")
    cfg = _write(tmp_path, "market.rate = 0.0\n")
    assert main(["calibrate", "--config", cfg, "--out", str(tmp_path),
                 str(quotes)]) == 2


def test_calibrate_missing_columns(tmp_path):
    quotes = tmp_path / "iv.csv"
    quotes.write_text("k,t,vol\n1.0,1.0,0.2\n")
    cfg = _write(tmp_path, "market.rate = 0.0\n")
    assert main(["calibrate", "--config", cfg, "--out", str(tmp_path),
                 str(quotes)]) == 2


# ---------------------------------------------------------------------------
# cycles-dump


def test_cycles_dump(tmp_path):
    cfg = _write(tmp_path, "model.preset = fouque_ou\n"
                 "mc.n_paths = 400\nmc.dt = 0.001\nmc.seed = 3\n"
                 "harness.x0 = -0.3\nharness.x1 = 0.3\n"
                 "harness.horizon = 10.0\n")
    assert main(["cycles-dump", "--config", cfg,
                 "--out", str(tmp_path)]) == 0
    rows = _read_csv(tmp_path / "cycles.csv")
    assert len(rows) > 100
    lengths = np.array([float(r["length"]) for r in rows])
    assert np.all(lengths > 0.0)
    assert set(rows[0]) == {"tau_start", "length", "g_h", "g_vol",
                            "int_k1", "int_k2"}


def test_cycles_dump_needs_anchors(tmp_path):
    cfg = _write(tmp_path, "model.preset = fouque_ou\nmc.n_paths = 100\n"
                 "mc.dt = 0.001\n")
    assert main(["cycles-dump", "--config", cfg,
                 "--out", str(tmp_path)]) == 2


# ---------------------------------------------------------------------------
# seed override


def test_seed_override_in_metadata(tmp_path, capsys):
    cfg = _write(tmp_path, "model.preset = fouque_ou\n"
                 "mc.n_paths = 400\nmc.dt = 0.001\nmc.seed = 3\n"
                 "harness.x0 = -0.3\nharness.x1 = 0.3\n"
                 "harness.horizon = 10.0\n")
    main(["cycles-dump", "--config", cfg, "--out", str(tmp_path),
          "--seed", "77"])
    assert "# seed = 77" in capsys.readouterr().out
