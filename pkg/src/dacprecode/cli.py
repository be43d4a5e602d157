"""Command-line front end: BER/rate/PSD sweeps written as CSV plus a JSON sidecar."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .config import SystemConfig, preset, preset_names
from .errors import ConfigError, NumericRangeError
from .montecarlo import AXES, MODELS, psd_curves, sweep

log = logging.getLogger("dacprecode")

CSV_FLOAT = "{:.12g}"


def parse_grid(text: str) -> list[float]:
    """``"a:step:b"`` (inclusive), ``"a,b,c"`` or a single number."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"range must look like start:step:stop, got {text!r}")
        start, step, stop = (float(p) for p in parts)
        if step == 0 or (stop - start) / step < 0:
            raise ValueError(f"empty or infinite range {text!r}")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [start + i * step for i in range(count)]
    return [float(v) for v in text.split(",") if v.strip()]


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return CSV_FLOAT.format(float(v))


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dacprecode", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON file with SystemConfig fields")
        sp.add_argument("--preset", choices=preset_names())
        sp.add_argument("--bits", type=int, help="DAC resolution in bits (L = 2**bits)")
        sp.add_argument("--eps", type=float, help="CSI error parameter in [0, 1]")
        sp.add_argument("--osr", type=float, help="oversampling ratio N/S at fixed N")
        sp.add_argument("--precoder", choices=("ZF", "MRT"))
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", default="-", help="CSV path ('-' for stdout)")
        sp.add_argument("--workers", type=int, help="worker processes (default from DACPRECODE_WORKERS)")

    for name in ("ber", "rate"):
        sp = sub.add_parser(name, help=f"{'BER' if name == 'ber' else 'sum rate'} versus SNR")
        common(sp)
        sp.add_argument("--snr-db", default="0", help="SNR grid in dB, e.g. 0:2:14")
        sp.add_argument("--trials", type=int, default=0, help="Monte Carlo channel realizations")
        sp.add_argument("--symbols", type=int, default=10, help="OFDM symbols per trial")
        sp.add_argument("--realizations", type=int, help="channels averaged by the analytic models")
        sp.add_argument("--model", default="rounding,diagonal", help=f"comma list from {MODELS}")

    sp = sub.add_parser("sweep", help="sweep one parameter at fixed SNR")
    common(sp)
    sp.add_argument("--axis", required=True, choices=AXES)
    sp.add_argument("--values", required=True, help="grid, e.g. 0:0.1:0.6 or 1,2,3")
    sp.add_argument("--snr-db", default="10")
    sp.add_argument("--trials", type=int, default=0)
    sp.add_argument("--symbols", type=int, default=10)
    sp.add_argument("--realizations", type=int)
    sp.add_argument("--model", default="rounding,diagonal")

    sp = sub.add_parser("psd", help="normalized transmit or receive PSD per subcarrier")
    common(sp)
    sp.add_argument("--realizations", type=int, default=100)
    sp.add_argument("--symbols", type=int, default=4)
    sp.add_argument("--side", choices=("transmit", "receive"), default="transmit")
    sp.add_argument("--model", default="rounding", help="covariance model for the analytic curve")
    sp.add_argument("--no-empirical", action="store_true", help="skip the periodogram")

    sub.add_parser("selftest", help="run the closed-form invariant checks")
    return p


def resolve_config(args) -> SystemConfig:
    if args.config and args.preset:
        raise ConfigError("preset", "give either --config or --preset, not both")
    if args.config:
        cfg = SystemConfig.from_json(args.config)
    elif args.preset:
        cfg = preset(args.preset)
    else:
        cfg = SystemConfig()
    changes = {}
    if args.bits is not None:
        if args.bits < 1:
            raise ConfigError("bits", f"need at least one bit, got {args.bits}")
        changes["L"] = 2**args.bits
    if args.eps is not None:
        changes["eps"] = args.eps
    if args.precoder is not None:
        changes["precoder"] = args.precoder
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.osr is not None:
        if not args.osr >= 1:
            raise ConfigError("osr", f"oversampling ratio must be at least 1, got {args.osr}")
        changes["S"] = min(int(round(cfg.N / args.osr)), cfg.N - 1)
    return cfg.replace(**changes) if changes else cfg


def _models(text: str) -> tuple[str, ...]:
    models = tuple(m.strip() for m in text.split(",") if m.strip())
    for m in models:
        if m not in MODELS:
            raise ConfigError("model", f"unknown model {m!r}; choose from {MODELS}")
    return models


def _write(out: str, header: list[str], rows: list[list]) -> None:
    fh = sys.stdout if out == "-" else open(out, "w", newline="")
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    finally:
        if fh is not sys.stdout:
            fh.close()


def _sidecar(out: str, cfg: SystemConfig, command: str, extra: dict) -> None:
    if out == "-":
        return
    payload = {"command": command, "config": cfg.to_dict(), **extra}
    Path(out).with_suffix(Path(out).suffix + ".json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _table_rows(table, models, axis_name):
    header = [axis_name, "analytic_rounding", "analytic_diagonal", "empirical", "ci_low", "ci_high"]
    extra = [f"analytic_{m}" for m in models if m not in ("rounding", "diagonal")]
    rates = [f"rate_{m}" for m in models]
    header += extra + rates + ["bits", "errors"]
    rows = []
    for r in table:
        rows.append([r.get(h, math.nan) if h not in ("bits", "errors") else r.get(h) for h in header])
        rows[-1][0] = r["value"]
    return header, rows


def _run_sweep(args, cfg, axis, values, command):
    models = _models(args.model)
    if args.trials < 0:
        raise ConfigError("trials", "must be non-negative")
    base = cfg
    if axis != "snr":
        snr = parse_grid(args.snr_db)
        if len(snr) != 1:
            raise ConfigError("snr_db", "sweeps over another axis take a single SNR value")
        base = cfg.with_snr_db(snr[0])
    table = sweep(
        base, axis, values, args.trials, n_symbols=args.symbols, models=models,
        realizations=args.realizations, workers=args.workers,
    )
    name = {"snr": "snr_db", "bits": "bits", "eps": "eps", "osr": "osr"}[axis]
    header, rows = _table_rows(table, models, name)
    _write(args.out, header, rows)
    _sidecar(args.out, base, command, {
        "axis": axis, "values": values, "trials": args.trials, "symbols": args.symbols,
        "realizations": args.realizations, "models": list(models),
    })


def _run_psd(args, cfg):
    models = _models(args.model)
    if len(models) != 1:
        raise ConfigError("model", "psd takes exactly one model")
    if models[0] == "arcsine" and cfg.L != 2:
        raise ConfigError("model", "the arcsine model needs --bits 1")
    ana, emp = psd_curves(
        cfg, args.realizations, args.symbols, models[0], args.side, not args.no_empirical, args.workers
    )
    rows = []
    occ = set(int(k) for k in cfg.occupied)
    for k in range(cfg.N):
        row = [k, 1 if k in occ else 0, 10 * np.log10(max(ana[k], 1e-300))]
        if emp is not None:
            row.append(10 * np.log10(max(emp[k], 1e-300)))
        rows.append(row)
    header = ["subcarrier", "occupied", f"analytic_{models[0]}_db"] + (["empirical_db"] if emp is not None else [])
    _write(args.out, header, rows)
    _sidecar(args.out, cfg, "psd", {
        "realizations": args.realizations, "symbols": args.symbols, "side": args.side, "model": models[0],
        "empirical": emp is not None,
    })


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "selftest":
            from .selftest import run_selftest

            return 0 if run_selftest() else 1
        cfg = resolve_config(args)
        if args.command in ("ber", "rate"):
            _run_sweep(args, cfg, "snr", parse_grid(args.snr_db), args.command)
        elif args.command == "sweep":
            _run_sweep(args, cfg, args.axis, parse_grid(args.values), "sweep")
        else:
            _run_psd(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except NumericRangeError as exc:
        print(f"numeric range error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
