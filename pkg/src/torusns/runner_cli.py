"""Configuration, orchestration, and serialization for the harness.

Config files are line-oriented ``key = value`` text with ``#`` comments and
no nesting.  Ledgers go to CSV with a fixed header; verdict bundles go to
JSON with an integer ``schema`` field.  Exit codes are a stable contract:

    0  every enabled check holds (with or without certificate)
    1  configuration or usage error
    2  some check was violated or inconclusive
    3  the integrator aborted on non-finite values
    4  output files could not be written
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np
import scipy

from . import __version__, inequality_lab, multiplier_bank, ns_dynamics, spectral_core
from .inequality_lab import (
    HOLDS,
    HOLDS_WITH_CERTIFICATE,
    CertificateConstant,
    EnergyLedger,
    verify_all,
)
from .ns_dynamics import NumericalBlowupError, SimulationConfig

SCHEMA_VERSION = 1

CHECK_KEYS = {
    "check_l2": "l2_energy",
    "check_h1": "h1_gradient",
    "check_h2": "h2_laplacian",
    "check_decay": "split_energy_decay",
    "check_rate": "supnorm_rate_monitor",
    "check_routes": "two_route_audit",
}


class ConfigError(ValueError):
    """Bad configuration text: unknown key, syntax error, or range violation."""


@dataclass(frozen=True)
class ReportBundle:
    """Everything one run publishes: metadata, verdicts, certificates."""

    config_text: str
    config_hash: str
    versions: dict
    wall_time_s: float
    reports: tuple
    certificates: tuple
    schema: int = SCHEMA_VERSION

    def __post_init__(self) -> None:
        ids = [r.inequality_id for r in self.reports]
        if len(ids) != len(set(ids)):
            raise ValueError("duplicate inequality report in bundle")

    def as_dict(self) -> dict:
        return {
            "schema": self.schema,
            "config_text": self.config_text,
            "config_hash": self.config_hash,
            "versions": self.versions,
            "wall_time_s": self.wall_time_s,
            "reports": [r.as_dict() for r in self.reports],
            "certificates": [c.as_dict() for c in self.certificates],
        }


@dataclass(frozen=True)
class RunConfig:
    """Full harness configuration; defaults reproduce the standard run."""

    n: int = 32
    box_length: float = 2.0 * math.pi
    horizon: float = 1.0
    alpha: float = 0.0625
    delta: float = 0.01
    initial_kind: str = "random_low_mode"
    seed: int = 0
    init_k_max: float = 4.0
    amplitude: float = 1.0
    c_cfl: float = 1.0
    t_min: float = float("nan")
    stride: int = 2
    strict: bool = False
    epsilon: float = 0.1
    decay_tol: float = 0.05
    check_l2: bool = True
    check_h1: bool = True
    check_h2: bool = True
    check_decay: bool = True
    check_rate: bool = True
    check_routes: bool = True
    out_dir: str = "out"
    inject_corruption: str = "none"
    threads: int = 1
    sweep_alpha: tuple[float, ...] = ()
    sweep_delta: tuple[float, ...] = ()
    sweep_n: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if math.isnan(self.t_min):
            object.__setattr__(self, "t_min", self.horizon * math.exp(-6.0))
        self.simulation()  # range validation happens there
        if self.inject_corruption not in ("none",) + inequality_lab.CORRUPTION_KINDS:
            raise ConfigError(f"unknown corruption kind {self.inject_corruption!r}")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if not self.epsilon >= 0:
            raise ConfigError("epsilon must be nonnegative")
        for a in self.sweep_alpha:
            if not 0.0 < a < 0.125:
                raise ConfigError(f"sweep alpha {a} outside (0, 1/8)")

    def simulation(self, **overrides) -> SimulationConfig:
        kwargs = dict(
            n=self.n,
            box_length=self.box_length,
            horizon=self.horizon,
            alpha=self.alpha,
            delta=self.delta,
            initial_kind=self.initial_kind,
            seed=self.seed,
            init_k_max=self.init_k_max,
            amplitude=self.amplitude,
            c_cfl=self.c_cfl,
            t_min=self.t_min,
            stride=self.stride,
            strict=self.strict,
        )
        kwargs.update(overrides)
        try:
            return SimulationConfig(**kwargs)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def enabled_checks(self) -> set[str]:
        return {name for key, name in CHECK_KEYS.items() if getattr(self, key)}

    def as_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            lines.append(f"{f.name} = {_format_value(value)}")
        return "\n".join(lines) + "\n"


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_format_value(v) for v in value)
    return str(value)


def _parse_value(name: str, raw: str, kind, line_no: int):
    raw = raw.strip()
    try:
        if kind is bool:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is str:
            return raw
        if kind in (tuple,):  # sweep axes
            if not raw:
                return ()
            elem = int if name == "sweep_n" else float
            return tuple(elem(part.strip()) for part in raw.split(","))
    except ValueError as exc:
        raise ConfigError(f"line {line_no}: bad value for {name}: {raw!r}") from exc
    raise ConfigError(f"line {line_no}: unhandled option type for {name}")


_FIELD_TYPES = {
    "n": int,
    "box_length": float,
    "horizon": float,
    "alpha": float,
    "delta": float,
    "initial_kind": str,
    "seed": int,
    "init_k_max": float,
    "amplitude": float,
    "c_cfl": float,
    "t_min": float,
    "stride": int,
    "strict": bool,
    "epsilon": float,
    "decay_tol": float,
    "check_l2": bool,
    "check_h1": bool,
    "check_h2": bool,
    "check_decay": bool,
    "check_rate": bool,
    "check_routes": bool,
    "out_dir": str,
    "inject_corruption": str,
    "threads": int,
    "sweep_alpha": tuple,
    "sweep_delta": tuple,
    "sweep_n": tuple,
}


def parse_config(text: str) -> RunConfig:
    """Parse ``key = value`` configuration text; unknown keys are errors."""
    values: dict = {}
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {raw_line!r}")
        key, _, raw_value = line.partition("=")
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {line_no}: unknown option {key!r}")
        values[key] = _parse_value(key, raw_value, _FIELD_TYPES[key], line_no)
    try:
        return RunConfig(**values)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig()
    return parse_config(Path(path).read_text(encoding="utf-8"))


def _exit_from_reports(reports) -> int:
    ok = all(r.status in (HOLDS, HOLDS_WITH_CERTIFICATE) for r in reports)
    return 0 if ok else 2


def _report_lines(reports) -> list[str]:
    lines = []
    for r in reports:
        extra = f", certificate={r.certificate:.6g}" if r.certificate is not None else ""
        lines.append(
            f"[torusns] {r.inequality_id}: {r.status}"
            f" (residual={r.max_residual:.6g}, tol={r.tolerance:.6g}{extra})"
        )
    return lines


def _bundle(config: RunConfig, reports, wall_time: float) -> ReportBundle:
    text = config.as_text()
    certificates = tuple(
        CertificateConstant(r.inequality_id, r.certificate, config.n, config.delta)
        for r in reports
        if r.certificate is not None
    )
    return ReportBundle(
        config_text=text,
        config_hash=hashlib.sha256(text.encode()).hexdigest(),
        versions={
            "torusns": __version__,
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        wall_time_s=wall_time,
        reports=tuple(reports),
        certificates=certificates,
    )


def _write_outputs(out_dir: Path, ledger: EnergyLedger, bundle: ReportBundle) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    ledger.write_csv(out_dir / "ledger.csv")
    (out_dir / "report.json").write_text(
        json.dumps(bundle.as_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def cmd_run(config: RunConfig, out_dir: str | None = None) -> int:
    """Integrate, verify, serialize; returns the contract exit code."""
    target = Path(out_dir if out_dir is not None else config.out_dir)
    started = time.perf_counter()
    try:
        ledger = ns_dynamics.run(config.simulation())
    except NumericalBlowupError as exc:
        print(f"[torusns] numerical abort: {exc}", file=sys.stderr)
        return 3
    if config.inject_corruption != "none":
        ledger = inequality_lab.corrupt_ledger(ledger, config.inject_corruption)
    reports = verify_all(
        ledger,
        alpha=config.alpha,
        epsilon=config.epsilon,
        decay_tol=config.decay_tol,
        enabled=config.enabled_checks(),
    )
    bundle = _bundle(config, reports, time.perf_counter() - started)
    try:
        _write_outputs(target, ledger, bundle)
    except OSError as exc:
        print(f"[torusns] cannot write outputs: {exc}", file=sys.stderr)
        return 4
    for line in _report_lines(reports):
        print(line)
    return _exit_from_reports(reports)


def cmd_verify(ledger_path: str, config: RunConfig) -> int:
    """Re-run the checks on an existing ledger CSV."""
    try:
        ledger = EnergyLedger.read_csv(ledger_path, meta={"alpha": config.alpha})
    except OSError as exc:
        print(f"[torusns] cannot read ledger: {exc}", file=sys.stderr)
        return 4
    reports = verify_all(
        ledger,
        alpha=config.alpha,
        epsilon=config.epsilon,
        decay_tol=config.decay_tol,
        enabled=config.enabled_checks(),
    )
    for line in _report_lines(reports):
        print(line)
    return _exit_from_reports(reports)


def cmd_signcheck(alphas: list[float]) -> int:
    """Dense-grid maxima of the two sign-certificate brackets; 0 iff all <= 1e-12."""
    worst = -math.inf
    for a in alphas:
        if not 0.0 < a < 0.125:
            print(f"[torusns] alpha {a} outside (0, 1/8)", file=sys.stderr)
            return 1
        max_a = multiplier_bank.sign_certificate_A(a)
        max_b = multiplier_bank.sign_certificate_B(a)
        worst = max(worst, max_a, max_b)
        print(f"[torusns] alpha={a:.6g}: low-range max={max_a:.3e}, transition max={max_b:.3e}")
    return 0 if worst <= 1e-12 else 2


def cmd_constants(alphas: list[float]) -> int:
    """Print the quadrature constants C(alpha, m) for m in {4, inf}."""
    print(f"{'alpha':>10} {'C(alpha,4)':>14} {'C(alpha,inf)':>14}")
    for a in alphas:
        if not 0.0 < a < 0.125:
            print(f"[torusns] alpha {a} outside (0, 1/8)", file=sys.stderr)
            return 1
        c4 = multiplier_bank.hausdorff_young_constant(a, 4)
        ci = multiplier_bank.hausdorff_young_constant(a, math.inf)
        print(f"{a:>10.6g} {c4:>14.6g} {ci:>14.6g}")
    return 0


def _sweep_points(config: RunConfig):
    alphas = config.sweep_alpha or (config.alpha,)
    deltas = config.sweep_delta or (config.delta,)
    sizes = config.sweep_n or (config.n,)
    for a in alphas:
        for d in deltas:
            for n in sizes:
                yield a, d, n


def cmd_sweep(config: RunConfig, out_dir: str | None = None) -> int:
    """Cross-product of the sweep axes; one bundle per point plus a combined
    certificate table.  The exit code is the worst over all points."""
    if not (config.sweep_alpha or config.sweep_delta or config.sweep_n):
        print("[torusns] sweep requires at least one nonempty axis", file=sys.stderr)
        return 1
    base = Path(out_dir if out_dir is not None else config.out_dir)
    worst = 0
    table: list[dict] = []
    for a, d, n in _sweep_points(config):
        point = replace(config, alpha=a, delta=d, n=n, sweep_alpha=(), sweep_delta=(), sweep_n=())
        tag = f"alpha{a:g}_delta{d:g}_n{n}"
        print(f"[torusns] sweep point {tag}")
        code = cmd_run(point, out_dir=str(base / tag))
        worst = max(worst, code)
        report_path = base / tag / "report.json"
        if report_path.exists():
            bundle = json.loads(report_path.read_text(encoding="utf-8"))
            for cert in bundle["certificates"]:
                cert = dict(cert)
                cert["alpha"] = a
                table.append(cert)
    try:
        base.mkdir(parents=True, exist_ok=True)
        lines = ["inequality_id,alpha,delta,n,value"]
        for row in table:
            lines.append(
                f"{row['inequality_id']},{row['alpha']:.17g},{row['delta']:.17g},"
                f"{row['n']},{row['value']:.17g}"
            )
        (base / "certificates.csv").write_text("\n".join(lines) + "\n", encoding="ascii")
    except OSError as exc:
        print(f"[torusns] cannot write sweep table: {exc}", file=sys.stderr)
        return 4
    return worst


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="torusns",
        description="periodic-box flow simulator with a rescaled-energy verification harness",
    )
    parser.add_argument("--config", metavar="PATH", help="configuration file")
    parser.add_argument("--out", metavar="DIR", help="output directory override")
    parser.add_argument("--strict", action="store_true", help="single-threaded, reproducible mode")
    parser.add_argument("--stride", type=int, metavar="N", help="ledger output stride override")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", help="integrate and verify one configuration")
    sub.add_parser("sweep", help="run the configured sweep axes")
    p_sign = sub.add_parser("signcheck", help="evaluate the sign-certificate brackets")
    p_sign.add_argument("alphas", nargs="*", type=float, default=None)
    p_const = sub.add_parser("constants", help="print the quadrature constant table")
    p_const.add_argument("alphas", nargs="*", type=float, default=None)
    p_verify = sub.add_parser("verify", help="re-check an existing ledger CSV")
    p_verify.add_argument("ledger", help="path to a ledger.csv")
    return parser


DEFAULT_ALPHAS = (1.0 / 32.0, 1.0 / 16.0, 3.0 / 32.0, 0.124)


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        overrides = {}
        if args.strict:
            overrides["strict"] = True
            overrides["threads"] = 1
        if args.stride is not None:
            overrides["stride"] = args.stride
        if args.out is not None:
            overrides["out_dir"] = args.out
        if overrides:
            config = replace(config, **overrides)
    except ConfigError as exc:
        print(f"[torusns] config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"[torusns] cannot read config: {exc}", file=sys.stderr)
        return 1

    spectral_core.set_fft_workers(
        1 if config.strict else max(config.threads, spectral_core.fft_workers_from_env())
    )

    if args.command == "run":
        return cmd_run(config, out_dir=args.out)
    if args.command == "sweep":
        return cmd_sweep(config, out_dir=args.out)
    if args.command == "signcheck":
        alphas = args.alphas or list(DEFAULT_ALPHAS)
        return cmd_signcheck(alphas)
    if args.command == "constants":
        alphas = args.alphas or list(DEFAULT_ALPHAS)
        return cmd_constants(alphas)
    if args.command == "verify":
        return cmd_verify(args.ledger, config)
    return 1


if __name__ == "__main__":
    sys.exit(main())
