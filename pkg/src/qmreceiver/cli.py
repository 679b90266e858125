"""Command-line entry point: analytic tables, sweeps, Monte Carlo, circuits, Dolinar studies."""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import hadamard, infotheory as it
from .circuit import decompose_triangular, format_plan
from .detection import DetectorModel, DolinarConfig, dolinar_decide_batch
from .infotheory import ChannelParams
from .simulation import Scheme, SchemeConfig, compare_report, run_trials

DEFAULT_N_BARS = (2e-4, 2e-2)
DEFAULT_LENGTHS = (2, 4, 8, 12, 16, 20, 24, 28, 32)
ALL_SCHEMES = ("INDIVIDUAL", "DIRECT_PPM", "HYBRID", "HOLEVO", "CAPACITY_ASYMPTOTE")


class UsageError(Exception):
    pass


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def emit(rows: list[dict], fmt_name: str, out: Optional[str]) -> None:
    if fmt_name == "json":
        text = json.dumps([{k: (float(v) if isinstance(v, np.floating) else v) for k, v in r.items()} for r in rows], indent=1)
        text += "\n"
    else:
        buf = io.StringIO()
        cols = list(dict.fromkeys(k for r in rows for k in r))
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([fmt(r.get(c)) for c in cols])
        text = buf.getvalue()
    if out:
        try:
            with open(out, "w") as f:
                f.write(text)
        except OSError as exc:
            raise UsageError(f"cannot write {out}: {exc}") from None
    else:
        sys.stdout.write(text)


# --- analytic --------------------------------------------------------------

def analytic_table(n_bar: float, L: int, lam: Optional[float] = None, transmission: float = 1.0) -> list[dict]:
    if L not in hadamard.SUPPORTED_ORDERS:
        raise UsageError(f"no Hadamard matrix of order {L} (supported: {hadamard.SUPPORTED_ORDERS})")
    if not n_bar > 0:
        raise UsageError("--nbar must be positive")
    if not 0 < transmission <= 1:
        raise UsageError("--transmission must be in (0, 1]")
    if lam is not None and not 0 <= lam <= 1:
        raise UsageError("--lambda must be in [0, 1]")
    n = n_bar * transmission
    ind = float(it.rate_individual(n))
    ind_asym = float(it.rate_individual_asymptotic(n))
    rows = [
        dict(quantity="helstrom_error", value=it.helstrom_error(n)),
        dict(quantity="helstrom_error_word", value=it.helstrom_error(L * n)),
        dict(quantity="rate_individual", value=ind, asymptotic=ind_asym),
        dict(quantity="holevo_bpsk", value=it.holevo_bpsk(n), asymptotic=it.holevo_bpsk_asymptotic(n)),
        dict(quantity="click_probability", value=it.ppm_click_probability(n, L)),
    ]
    if n < 1:
        rows.append(dict(quantity="capacity_asymptote", value=it.capacity_asymptote(n)))
    if L >= 2:
        ppm = float(it.rate_ppm(n, L))
        ppm_asym = float(it.rate_ppm_asymptotic(n, L))
        rows.append(dict(quantity="rate_ppm", value=ppm, asymptotic=ppm_asym,
                         ratio=ppm / ind, asymptotic_ratio=ppm_asym / ind_asym))
        lam_opt, hyb_opt = it.optimize_lambda(n, L)
        hyb_asym = float(it.rate_hybrid_asymptotic(n, L))
        rows.append(dict(quantity="rate_hybrid_optimal", value=hyb_opt, asymptotic=hyb_asym,
                         ratio=float(hyb_opt) / ind, asymptotic_ratio=hyb_asym / ind_asym, **{"lambda": lam_opt}))
        rows.append(dict(quantity="lambda_star_asymptotic", value=it.lambda_star_asymptotic(L)))
        if lam is not None:
            hyb = float(it.rate_hybrid(n, L, lam))
            rows.append(dict(quantity="rate_hybrid", value=hyb, ratio=hyb / ind, **{"lambda": lam}))
    if n < 0.1:
        L_opt, r_opt = it.ppm_optimal_length(n)
        rows.append(dict(quantity="ppm_optimal_length", value=L_opt))
        rows.append(dict(quantity="rate_ppm_at_optimal_length", value=r_opt, asymptotic=it.ppm_second_order(n)))
    return rows


# --- sweep -----------------------------------------------------------------

@dataclass
class SweepSpec:
    n_bar_values: Sequence[float] = DEFAULT_N_BARS
    L_values: Sequence[int] = DEFAULT_LENGTHS
    schemes: Sequence[str] = ("DIRECT_PPM", "HYBRID")
    normalize_by_individual: bool = True
    continuous_points: int = 0
    continuous_range: tuple = (2.0, 32.0)

    def __post_init__(self):
        if not self.n_bar_values or not self.L_values or not self.schemes:
            raise UsageError("sweep lists must be nonempty")
        if any(not n > 0 for n in self.n_bar_values):
            raise UsageError("n_bar values must be positive")
        unknown = set(self.schemes) - set(ALL_SCHEMES)
        if unknown:
            raise UsageError(f"unknown schemes {sorted(unknown)}")


def _sweep_row(scheme: str, n: float, L, kind: str, normalize: bool) -> dict:
    ind = float(it.rate_individual(n))
    ind_asym = float(it.rate_individual_asymptotic(n))
    row = dict(scheme=scheme, kind=kind, n_bar=n, L=L, individual_rate=ind, individual_asymptotic=ind_asym)
    lam = None
    if scheme == "INDIVIDUAL":
        exact, asym = ind, ind_asym
    elif scheme == "HOLEVO":
        exact, asym = float(it.holevo_bpsk(n)), float(it.holevo_bpsk_asymptotic(n))
    elif scheme == "CAPACITY_ASYMPTOTE":
        exact = asym = float(it.capacity_asymptote(n))
    elif scheme == "DIRECT_PPM":
        exact, asym = float(it.rate_ppm(n, L)), float(it.rate_ppm_asymptotic(n, L))
    else:
        lam, exact = it.optimize_lambda(n, L)
        exact, lam = float(exact), float(lam)
        asym = float(it.rate_hybrid_asymptotic(n, L))
    row.update(exact_rate=exact, asymptotic_rate=asym, **{"lambda": lam})
    if normalize:
        row.update(ratio=exact / ind, asymptotic_ratio=asym / ind_asym)
    else:
        for k in ("individual_rate", "individual_asymptotic"):
            row.pop(k)
    return row


def build_sweep(spec: SweepSpec) -> list[dict]:
    rows = []
    for n in spec.n_bar_values:
        for scheme in spec.schemes:
            if scheme in ("INDIVIDUAL", "HOLEVO", "CAPACITY_ASYMPTOTE"):
                if scheme == "CAPACITY_ASYMPTOTE" and n >= 1:
                    continue
                rows.append(_sweep_row(scheme, n, None, "single", spec.normalize_by_individual))
                continue
            for L in spec.L_values:
                if L < 2:
                    continue
                rows.append(_sweep_row(scheme, n, int(L), "discrete", spec.normalize_by_individual))
            if spec.continuous_points:
                lo, hi = spec.continuous_range
                for L in np.geomspace(lo, hi, spec.continuous_points):
                    if L > 2 or scheme == "DIRECT_PPM":
                        rows.append(_sweep_row(scheme, n, float(L), "continuous", spec.normalize_by_individual))
    return rows


# --- dolinar ---------------------------------------------------------------

def dolinar_table(n_eff: float, slices: Sequence[int], trials: int, seed: int = 0) -> list[dict]:
    """Empirical Dolinar error vs. slice count; every slice count reuses the same seed."""
    if n_eff < 0:
        raise UsageError("n_eff must be nonnegative")
    if trials < 1:
        raise UsageError("trials must be >= 1")
    a = float(np.sqrt(n_eff))
    target = float(it.helstrom_error(n_eff))
    rows = []
    for N in slices:
        rng = np.random.default_rng([seed, 1])
        truth = np.where(rng.random(trials) < 0.5, 1, -1)
        dec = dolinar_decide_batch(truth * a, (a, -a), DolinarConfig(int(N), rng_seed=seed), np.random.default_rng([seed, 2]))
        err = float(np.mean(dec != truth))
        rows.append(dict(slices=int(N), n_eff=n_eff, empirical_error=err,
                         stderr=float(np.sqrt(max(err * (1 - err), 1e-300) / trials)), helstrom_error=target))
    return rows


# --- config ----------------------------------------------------------------

CONFIG_KEYS = {
    "scheme": str, "nbar": float, "L": int, "lambda": float, "trials": int, "seed": int,
    "slices": int, "efficiency": float, "dark": float, "transmission": float,
    "op_transmission": float, "use_decomposed_plan": "bool", "stratified": "bool", "workers": int,
}


def _convert(key: str, raw: str):
    kind = CONFIG_KEYS[key]
    if kind == "bool":
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    return kind(raw)


def parse_config(text: str) -> tuple[dict, dict]:
    """Parse ``key = value`` lines; returns values and the line each key came from."""
    values, lines = {}, {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise UsageError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _convert(key, raw)
        except ValueError as exc:
            raise UsageError(f"line {lineno}: bad value for {key}: {exc}") from None
        lines[key] = lineno
    return values, lines


def config_from_values(values: dict, lines: Optional[dict] = None) -> SchemeConfig:
    lines = lines or {}

    def where(key):
        return f"line {lines[key]}: " if key in lines else f"--{key}: " if key in values else ""

    checks = [
        ("trials", lambda v: v >= 1, "trials must be >= 1"),
        ("nbar", lambda v: v >= 0, "nbar must be nonnegative"),
        ("L", lambda v: v in hadamard.SUPPORTED_ORDERS, f"L must be one of {hadamard.SUPPORTED_ORDERS}"),
        ("lambda", lambda v: 0 <= v <= 1, "lambda must be in [0, 1]"),
        ("slices", lambda v: v >= 1, "slices must be >= 1"),
        ("efficiency", lambda v: 0 <= v <= 1, "efficiency must be in [0, 1]"),
        ("dark", lambda v: 0 <= v < 1, "dark must be in [0, 1)"),
        ("transmission", lambda v: 0 < v <= 1, "transmission must be in (0, 1]"),
        ("op_transmission", lambda v: 0 < v <= 1, "op_transmission must be in (0, 1]"),
        ("workers", lambda v: v >= 1, "workers must be >= 1"),
    ]
    for key, ok, msg in checks:
        if key in values and not ok(values[key]):
            raise UsageError(where(key) + msg)
    try:
        scheme = Scheme(values.get("scheme", "DIRECT_PPM").upper())
    except ValueError:
        raise UsageError(where("scheme") + "scheme must be DIRECT_PPM or HYBRID") from None
    for key in ("nbar", "L"):
        if key not in values:
            raise UsageError(f"missing required setting {key!r}")
    L = values["L"]
    if scheme is Scheme.HYBRID and L < 2:
        raise UsageError(where("L") + "the hybrid scheme needs L >= 2")
    lam = values.get("lambda")
    if scheme is Scheme.HYBRID and lam is None:
        lam = float(it.optimize_lambda(values["nbar"] * values.get("transmission", 1.0), L)[0])
    params = ChannelParams(values["nbar"], L, 1.0 if lam is None else lam, values.get("transmission", 1.0))
    return SchemeConfig(
        scheme=scheme,
        params=params,
        detector=DetectorModel(values.get("efficiency", 1.0), values.get("dark", 0.0)),
        dolinar=DolinarConfig(values.get("slices", 10_000)) if scheme is Scheme.HYBRID else None,
        use_decomposed_plan=values.get("use_decomposed_plan", True),
        per_op_transmission=values.get("op_transmission", 1.0),
        trials=values.get("trials", 100_000),
        seed=values.get("seed", 0),
        stratified=values.get("stratified", False),
        workers=values.get("workers", 1),
    )


# --- argument parsing ------------------------------------------------------

def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x]


def _ints(text: str) -> list[int]:
    return [int(float(x)) for x in text.split(",") if x]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qmreceiver", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analytic", help="table of closed-form rates")
    a.add_argument("--nbar", type=float, required=True)
    a.add_argument("--L", type=int, required=True)
    a.add_argument("--lambda", dest="lam", type=float)
    a.add_argument("--transmission", type=float, default=1.0)

    s = sub.add_parser("sweep", help="ratio-to-individual dataset over n_bar and L")
    s.add_argument("--nbar", type=_floats, default=list(DEFAULT_N_BARS), help="comma-separated list")
    s.add_argument("--L", type=_ints, default=list(DEFAULT_LENGTHS), help="comma-separated list")
    s.add_argument("--schemes", default="DIRECT_PPM,HYBRID")
    s.add_argument("--raw", action="store_true", help="omit ratio columns")
    s.add_argument("--continuous", type=int, default=0, help="points on a log-spaced continuous L grid")

    m = sub.add_parser("simulate", help="Monte Carlo run with analytic comparison")
    m.add_argument("--config")
    m.add_argument("--scheme")
    m.add_argument("--nbar", type=float)
    m.add_argument("--L", type=int)
    m.add_argument("--lambda", dest="lambda", type=float)
    m.add_argument("--trials", type=int)
    m.add_argument("--seed", type=int)
    m.add_argument("--slices", type=int)
    m.add_argument("--efficiency", type=float)
    m.add_argument("--dark", type=float)
    m.add_argument("--transmission", type=float, help="channel power transmission before the receiver")
    m.add_argument("--op-transmission", dest="op_transmission", type=float,
                   help="power transmission of every beam-splitter interaction (equalized)")
    m.add_argument("--workers", type=int)
    m.add_argument("--confusion", help="CSV path for the confusion matrix")

    d = sub.add_parser("decompose", help="triangular circuit for the rescaled Hadamard matrix")
    d.add_argument("--L", type=int, required=True)

    o = sub.add_parser("dolinar", help="Dolinar error vs. number of slices")
    o.add_argument("--nbar", type=float, required=True, help="mean photon number of the pulse")
    o.add_argument("--slices", type=_ints, default=[1, 10, 100, 10_000])
    o.add_argument("--trials", type=int, default=100_000)
    o.add_argument("--seed", type=int, default=0)

    h = sub.add_parser("hadamard", help="export, import or validate Hadamard matrices")
    h.add_argument("action", choices=["export", "import", "validate"])
    h.add_argument("path", nargs="?")
    h.add_argument("--L", type=int)

    for sp in (a, s, m, d, o, h):
        sp.add_argument("--out")
        sp.add_argument("--format", choices=["csv", "json"], default="csv")
    return p


def _cmd_simulate(args) -> None:
    values, lines = {}, {}
    if args.config:
        try:
            with open(args.config) as f:
                values, lines = parse_config(f.read())
        except OSError as exc:
            raise UsageError(f"cannot read {args.config}: {exc}") from None
    for key in CONFIG_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
            lines.pop(key, None)
    config = config_from_values(values, lines)
    cm = run_trials(config)
    report = compare_report(config, cm=cm)
    sys.stderr.write(f"seed = {config.seed}\n")
    text = report.to_json() + "\n"
    if args.out:
        try:
            with open(args.out, "w") as f:
                f.write(text)
        except OSError as exc:
            raise UsageError(f"cannot write {args.out}: {exc}") from None
    else:
        sys.stdout.write(text)
    confusion = args.confusion or (os.path.splitext(args.out)[0] + ".csv" if args.out else None)
    if confusion:
        try:
            with open(confusion, "w") as f:
                f.write(cm.to_csv())
        except OSError as exc:
            raise UsageError(f"cannot write {confusion}: {exc}") from None


def _cmd_decompose(args) -> None:
    if args.L not in hadamard.SUPPORTED_ORDERS:
        raise UsageError(f"no Hadamard matrix of order {args.L}")
    W = hadamard.construct(args.L).rescaled()
    plan = decompose_triangular(W)
    err = float(np.max(np.abs(plan.to_matrix() - W)))
    text = format_plan(plan) + f"# ops = {len(plan.ops)} max_reconstruction_error = {err:.3e}\n"
    if args.out:
        try:
            with open(args.out, "w") as f:
                f.write(text)
        except OSError as exc:
            raise UsageError(f"cannot write {args.out}: {exc}") from None
    else:
        sys.stdout.write(text)


def _cmd_hadamard(args) -> None:
    if args.action == "export":
        if args.L is None:
            raise UsageError("export needs --L")
        try:
            H = hadamard.construct(args.L)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        target = args.out or args.path
        if target:
            try:
                hadamard.write_matrix(H, target)
            except OSError as exc:
                raise UsageError(f"cannot write {target}: {exc}") from None
        else:
            sys.stdout.write(hadamard.dumps(H))
        return
    if not args.path:
        raise UsageError(f"{args.action} needs a matrix file")
    try:
        H = hadamard.read_matrix(args.path)
    except OSError as exc:
        raise UsageError(f"cannot read {args.path}: {exc}") from None
    except ValueError as exc:
        raise UsageError(f"{args.path}: {exc}") from None
    if args.action == "validate":
        sys.stdout.write(f"valid Hadamard matrix of order {H.order}\n")
    else:
        sys.stdout.write(hadamard.dumps(H))


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "analytic":
            emit(analytic_table(args.nbar, args.L, args.lam, args.transmission), args.format, args.out)
        elif args.command == "sweep":
            spec = SweepSpec(args.nbar, args.L, args.schemes.split(","), not args.raw, args.continuous)
            emit(build_sweep(spec), args.format, args.out)
        elif args.command == "simulate":
            _cmd_simulate(args)
        elif args.command == "decompose":
            _cmd_decompose(args)
        elif args.command == "dolinar":
            emit(dolinar_table(args.nbar, args.slices, args.trials, args.seed), args.format, args.out)
        elif args.command == "hadamard":
            _cmd_hadamard(args)
    except (UsageError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
