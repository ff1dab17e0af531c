"""Command-line front end: ``eraser-sim {simulate,validate,estimate}``.

Configuration is a flat ``key = value`` file; flags override it.  Times are
given in units of 1/k and rates (``kc``, ``omega``) in units of k.

Exit codes: 0 ok, 1 validation failure, 2 config error, 3 parameter
violation, 4 unidentifiable design.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import estimate as est
from . import oracle, validation
from .errors import ConfigError, DomainError, PairingError, UnidentifiableError
from .lindblad import SystemParams
from .protocol import JointProbabilities, ProtocolConfig, Scheme, joint_probabilities
from .qcore import default_tolerance

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_PARAMETER, EXIT_UNIDENTIFIABLE = 0, 1, 2, 3, 4

CSV_COLUMNS = ["phi1", "tau", "k", "k_c", "scheme",
               "P_ee", "P_eg", "P_ge", "P_gg",
               "oracle_P_ee", "oracle_P_eg", "oracle_P_ge", "oracle_P_gg", "max_abs_diff"]
COUNT_COLUMNS = ["seed", "n_ee", "n_eg", "n_ge", "n_gg"]

SCHEME_CHOICES = {"anti": [Scheme.ANTISYMMETRIC_ABSORBER],
                  "sym": [Scheme.SYMMETRIC_ABSORBER],
                  "both": [Scheme.ANTISYMMETRIC_ABSORBER, Scheme.SYMMETRIC_ABSORBER]}

LIST_KEYS = ("phi1", "tau", "kc")
SCALAR_KEYS = {"k": float, "omega": float, "phi2": float, "mode_dim": int, "shots": int,
               "seed": int, "jobs": int, "format": str, "out": str, "scheme": str,
               "draws": int, "method": str, "result": str, "tolerance": float}

_PI_RE = re.compile(r"^([+-]?(?:\d+\.?\d*|\.\d+)?)\s*\*?\s*pi\s*(?:/\s*(\d+(?:\.\d*)?))?$")


def parse_number(tok: str) -> float:
    """Float, or a multiple of pi such as ``pi/2``, ``3pi/2``, ``0.5*pi``."""
    tok = tok.strip()
    try:
        return float(tok)
    except ValueError:
        pass
    m = _PI_RE.match(tok)
    if not m:
        raise ValueError(f"not a number: {tok!r}")
    coef = m.group(1)
    coef = 1.0 if coef in ("", "+") else -1.0 if coef == "-" else float(coef)
    div = float(m.group(2)) if m.group(2) else 1.0
    return coef * math.pi / div


def parse_list(text: str) -> list[float]:
    """Comma-separated values, or ``start:stop:num`` for an inclusive linspace."""
    text = text.strip()
    if not text:
        return []
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"range must be start:stop:num, got {text!r}")
        n = int(parts[2])
        if n < 1:
            raise ValueError("range needs num >= 1")
        return [float(x) for x in np.linspace(parse_number(parts[0]), parse_number(parts[1]), n)]
    return [parse_number(t) for t in text.split(",") if t.strip()]


@dataclass
class RunConfig:
    phi1: list = field(default_factory=lambda: [0.0])
    tau: list = field(default_factory=lambda: [0.3])
    kc: list = field(default_factory=lambda: [0.5])
    k: float = 1.0
    omega: float = 0.0
    phi2: float = 0.0
    mode_dim: int = 2
    scheme: str = "both"
    shots: int = 0
    seed: int = 0
    jobs: int = 1
    format: str = "csv"
    out: str | None = None
    draws: int = 1000
    method: str = "xi_fit"
    result: str | None = None
    tolerance: float | None = None
    tolerances: dict = field(default_factory=dict)
    explicit: set = field(default_factory=set)

    def schemes(self) -> list[Scheme]:
        return SCHEME_CHOICES[self.scheme]

    def params(self, kc_ratio: float) -> SystemParams:
        return SystemParams(omega=self.omega * self.k, k=self.k, k_c=kc_ratio * self.k,
                            mode_dim=self.mode_dim)

    def validate_shape(self):
        for key in LIST_KEYS:
            if not getattr(self, key):
                raise ConfigError(f"sweep list '{key}' is empty")
        if self.scheme not in SCHEME_CHOICES:
            raise ConfigError(f"scheme must be one of {sorted(SCHEME_CHOICES)}, got {self.scheme!r}")
        if self.format not in ("csv", "jsonl"):
            raise ConfigError(f"format must be csv or jsonl, got {self.format!r}")
        if self.method not in ("xi_fit", "joint_lsq"):
            raise ConfigError(f"method must be xi_fit or joint_lsq, got {self.method!r}")
        if self.shots < 0:
            raise ConfigError("shots must be >= 0")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.k <= 0:
            raise DomainError(f"k must be > 0, got {self.k}")

    def validate_params(self):
        """Raise DomainError for any grid point outside the physical domain."""
        for ratio in self.kc:
            self.params(ratio)
        for t in self.tau:
            if t < 0:
                raise DomainError(f"tau must be >= 0, got {t}")


def _set(cfg: RunConfig, key: str, raw: str):
    if key in LIST_KEYS:
        setattr(cfg, key, parse_list(raw))
    elif key.startswith("tol_"):
        name = key[4:]
        if name not in validation.TOLERANCES:
            raise KeyError(key)
        cfg.tolerances[name] = parse_number(raw)
    elif key in SCALAR_KEYS:
        typ = SCALAR_KEYS[key]
        val = parse_number(raw) if typ is float else int(raw) if typ is int else raw.strip()
        setattr(cfg, key, val)
    else:
        raise KeyError(key)
    cfg.explicit.add(key)


def load_config(path: str | None, cfg: RunConfig | None = None) -> RunConfig:
    cfg = cfg or RunConfig()
    if path is None:
        return cfg
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        try:
            _set(cfg, key, raw)
        except KeyError:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}") from None
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from None
    return cfg


def build_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config)
    overrides = {"out": args.out, "format": args.format, "jobs": args.jobs, "seed": args.seed,
                 "shots": args.shots, "scheme": args.scheme}
    for key, val in overrides.items():
        if val is not None:
            setattr(cfg, key, val)
            cfg.explicit.add(key)
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            _set(cfg, key.strip(), raw)
        except KeyError:
            raise ConfigError(f"--set: unknown key {key.strip()!r}") from None
        except ValueError as exc:
            raise ConfigError(f"--set: bad value for {key.strip()!r}: {exc}") from None
    if cfg.tolerance is None:
        cfg.tolerance = default_tolerance()
    cfg.validate_shape()
    return cfg


def fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def write_rows(rows: list[dict], columns: list[str], path: str | None, form: str):
    buf = io.StringIO()
    if form == "csv":
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([fmt(row[c]) for c in columns])
    else:
        for row in rows:
            buf.write(json.dumps({c: row[c] for c in columns}) + "\n")
    if path is None:
        sys.stdout.write(buf.getvalue())
    else:
        Path(path).write_text(buf.getvalue())


def read_rows(path: str, form: str) -> list[dict]:
    """Parse a simulate output file back into typed rows."""
    text = Path(path).read_text()
    if form == "jsonl":
        return [json.loads(line) for line in text.splitlines() if line.strip()]
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        rows.append({c: (v if c == "scheme" else int(v) if c.startswith("n_") or c == "seed" else float(v))
                     for c, v in rec.items()})
    return rows


def _grid(cfg: RunConfig):
    for ratio in cfg.kc:
        for tau in cfg.tau:
            for phi in cfg.phi1:
                for scheme in cfg.schemes():
                    yield ratio, tau, phi, scheme


def _simulate_point(cfg: RunConfig, point) -> tuple[dict, JointProbabilities]:
    ratio, tau_units, phi, scheme = point
    params = cfg.params(ratio)
    tau = tau_units / cfg.k
    conf = ProtocolConfig(phi, cfg.phi2, tau, scheme, params)
    sim = joint_probabilities(conf)
    ref = oracle.probabilities(conf.phi1, params, tau, scheme)
    row = {"phi1": phi, "tau": tau, "k": params.k, "k_c": params.k_c, "scheme": scheme.value}
    for o in JointProbabilities.OUTCOMES:
        row[f"P_{o}"] = sim.as_dict()[o]
        row[f"oracle_P_{o}"] = ref.as_dict()[o]
    row["max_abs_diff"] = sim.max_abs_diff(ref)
    return row, sim


def _map(cfg: RunConfig, fn, items):
    items = list(items)
    if cfg.jobs == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
        return list(pool.map(fn, items))


def cmd_simulate(cfg: RunConfig) -> int:
    cfg.validate_params()
    points = list(_grid(cfg))
    results = _map(cfg, lambda p: _simulate_point(cfg, p), points)
    columns = list(CSV_COLUMNS)
    rows = []
    oracle_tol = max(cfg.tolerance, validation.TOLERANCES["protocol_vs_oracle"])
    bad = []
    for idx, (row, sim) in enumerate(results):
        problems = sim.violations(cfg.tolerance)
        if row["max_abs_diff"] > oracle_tol:
            problems.append(f"simulator differs from closed form by {row['max_abs_diff']:.3e}")
        if problems:
            bad.append(f"grid point {idx}: " + "; ".join(problems))
        if cfg.shots > 0:
            seed = est.cell_seed(cfg.seed, idx)
            rec = est.sample_record(sim, cfg.shots, seed, scheme=Scheme(row["scheme"]),
                                    phi1=row["phi1"], tau=row["tau"])
            row["seed"] = seed
            row.update({f"n_{o}": rec.counts[o] for o in JointProbabilities.OUTCOMES})
        rows.append(row)
    if cfg.shots > 0:
        columns += COUNT_COLUMNS
    write_rows(rows, columns, cfg.out, cfg.format)
    if bad:
        for line in bad:
            print(f"invariant violation: {line}", file=sys.stderr)
        return EXIT_PARAMETER
    return EXIT_OK


def cmd_validate(cfg: RunConfig) -> int:
    cfg.validate_params()
    results = validation.run_all(cfg.tolerances, cptp_draws=cfg.draws)
    summary = {"passed": all(r.passed for r in results),
               "checks": [r.to_dict() for r in results]}
    text = json.dumps(summary, indent=2) + "\n"
    if cfg.out:
        Path(cfg.out).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK if summary["passed"] else EXIT_VALIDATION


def cmd_estimate(cfg: RunConfig, records_path: str | None = None) -> int:
    if records_path is not None:
        try:
            lines = Path(records_path).read_text().splitlines()
            records = [est.ExperimentRecord.from_json(line) for line in lines if line.strip()]
        except OSError as exc:
            raise ConfigError(f"{records_path}: cannot read records ({exc.strerror})") from None
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise ConfigError(f"{records_path}: malformed record ({exc})") from None
        pairs = _pair_records(records)
        phi = records[0].phi1 if records else 0.0
        k = cfg.k
    else:
        if len(cfg.phi1) != 1 or len(cfg.kc) != 1:
            raise ConfigError("estimate needs a single phi1 and a single kc")
        if cfg.shots < 1:
            raise ConfigError("estimate needs shots >= 1")
        taus_units = cfg.tau if "tau" in cfg.explicit else [t * cfg.k for t in est.default_tau_grid(cfg.k)]
        cfg.tau = taus_units
        cfg.validate_params()
        phi, ratio, k = cfg.phi1[0], cfg.kc[0], cfg.k
        taus = [t / k for t in taus_units]
        # fail before sampling when the design is uninformative
        est._check_design(np.array(taus), phi)
        params = cfg.params(ratio)

        def source(point):
            tau, scheme = point
            return joint_probabilities(ProtocolConfig(phi, cfg.phi2, tau, scheme, params))

        cells = [(t, s) for t in taus for s in (Scheme.ANTISYMMETRIC_ABSORBER, Scheme.SYMMETRIC_ABSORBER)]
        probs = _map(cfg, source, cells)
        cell_probs = list(zip(probs[0::2], probs[1::2]))
        pairs = est.sample_pairs(cell_probs, phi, taus, cfg.shots, cfg.seed)
        if cfg.out:
            with open(cfg.out, "w") as fh:
                for r1, r2 in pairs:
                    fh.write(r1.to_json() + "\n")
                    fh.write(r2.to_json() + "\n")

    if cfg.method == "joint_lsq":
        result = est.fit_joint([r for pair in pairs for r in pair], k_init=k)
    else:
        result = est.fit_kc(pairs, k, phi)
    text = json.dumps(result.to_dict(), indent=2) + "\n"
    if cfg.result:
        Path(cfg.result).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def _pair_records(records):
    anti = {}
    sym = {}
    for r in records:
        (anti if r.scheme is Scheme.ANTISYMMETRIC_ABSORBER else sym)[(r.phi1, r.tau)] = r
    if set(anti) != set(sym):
        raise ConfigError("record file does not pair every antisymmetric record with a symmetric one")
    return [(anti[key], sym[key]) for key in sorted(anti, key=lambda x: x[1])]


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eraser-sim", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("simulate", "gate-level probabilities vs closed forms over a sweep"),
                        ("validate", "run the invariant self-test suite"),
                        ("estimate", "sample records for both schemes and fit k_c")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", metavar="PATH")
        sp.add_argument("--out", metavar="PATH")
        sp.add_argument("--format", choices=("csv", "jsonl"))
        sp.add_argument("--jobs", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--shots", type=int)
        sp.add_argument("--scheme", choices=sorted(SCHEME_CHOICES))
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config key (repeatable)")
        if name == "estimate":
            sp.add_argument("--records", metavar="PATH", help="fit an existing JSONL record file")
            sp.add_argument("--result", metavar="PATH", help="also write the result JSON here")
    return p


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = build_config(args)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "validate":
            return cmd_validate(cfg)
        if args.result:
            cfg.result = args.result
        return cmd_estimate(cfg, args.records)
    except (ConfigError, PairingError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        print(f"parameter violation: {exc}", file=sys.stderr)
        return EXIT_PARAMETER
    except UnidentifiableError as exc:
        print(f"unidentifiable: {exc}", file=sys.stderr)
        return EXIT_UNIDENTIFIABLE


if __name__ == "__main__":
    sys.exit(main())
