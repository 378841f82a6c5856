"""Command-line interface: ``kcmd test``, ``kcmd simulate``, ``kcmd generate``.

File formats
------------
Schema file
    One column per line, ``name role kind``; ``#`` starts a comment.
    Roles: ``y``, ``x_cont``, ``x_disc``, ``w``.  Kinds: ``scalar``,
    ``vector:K`` (CSV columns ``name_1`` .. ``name_K``), ``functional:PATH``
    (PATH relative to the schema file) and ``categorical``.
Scalar CSV
    Header row, comma separated, ``.`` decimal point, UTF-8, LF or CRLF.
Functional file
    First row holds the grid, each further row one observation.
Config file
    ``key=value`` lines with ``TestConfig`` field names, ``#`` comments.
    Command-line flags override file values.

Exit codes: 0 success, 2 usage, 3 ingest, 4 validation, 5 scaling,
6 bandwidth or smoothing, 7 statistic, 8 bootstrap, 9 configuration,
1 anything else.
"""
from __future__ import annotations

import argparse
import csv
import itertools
import os
import sys
import typing
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .data import (
    CategoricalColumn,
    Dataset,
    FunctionalColumn,
    ScalarColumn,
    VectorColumn,
    validate,
)
from .errors import ConfigError, KcmdError, StageError, ValidationError
from .pipeline import TestConfig, run_significance_test
from .simulation import DGP_NAMES, UPSILON_SCALE, DgpSpec, generate, monte_carlo

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_USAGE = 2
EXIT_INGEST = 3
EXIT_VALIDATION = 4
EXIT_SCALING = 5
EXIT_SMOOTHING = 6
EXIT_STATISTIC = 7
EXIT_BOOTSTRAP = 8
EXIT_CONFIG = 9

_STAGE_EXIT = {
    "validate": EXIT_VALIDATION,
    "scaling": EXIT_SCALING,
    "bandwidth": EXIT_SMOOTHING,
    "smoothing": EXIT_SMOOTHING,
    "statistic": EXIT_STATISTIC,
    "bootstrap": EXIT_BOOTSTRAP,
}

SIMULATE_HEADER = "dgp,n,qw,alpha,rate,mc,boot,seed"
ROLES = ("y", "x_cont", "x_disc", "w")


class IngestError(KcmdError):
    """Unreadable or inconsistent input files."""


# ---------------------------------------------------------------- records

@dataclass(frozen=True)
class ReportRecord:
    """Flat, losslessly serialisable summary of one test."""

    n: int
    d_c: int
    d_d: int
    nu: int | None
    h: float | None
    h_tilde: float | None
    h_gcv: float | None
    sigma_c2: float
    kappa_n: float
    stat_nUn: float
    q_alpha: float
    p_value: float
    reject: bool
    n_boot: int
    seed: int
    version: str

    @classmethod
    def header(cls) -> str:
        return ",".join(f.name for f in fields(cls))

    @classmethod
    def from_report(cls, report) -> "ReportRecord":
        bw = report.bandwidths
        return cls(
            n=report.n, d_c=report.d_c, d_d=report.d_d, nu=bw.nu, h=bw.h,
            h_tilde=bw.h_tilde, h_gcv=bw.h_gcv, sigma_c2=report.sigma_c2,
            kappa_n=bw.kappa_n, stat_nUn=report.statistic.n_u_n,
            q_alpha=report.q_alpha, p_value=report.p_value, reject=report.reject,
            n_boot=report.bootstrap.n_boot, seed=report.bootstrap.seed,
            version=__version__,
        )

    def serialize(self) -> str:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                out.append("")
            elif isinstance(v, bool):
                out.append("true" if v else "false")
            elif isinstance(v, float):
                out.append(format(v, ".17g"))
            else:
                out.append(str(v))
        return ",".join(out)

    @classmethod
    def parse(cls, text: str) -> "ReportRecord":
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        if lines and lines[0] == cls.header():
            lines = lines[1:]
        if len(lines) != 1:
            raise ValueError("expected exactly one record line")
        cells = lines[0].split(",")
        fs = fields(cls)
        if len(cells) != len(fs):
            raise ValueError(f"expected {len(fs)} fields, got {len(cells)}")
        hints = typing.get_type_hints(cls)
        vals = {}
        for f, c in zip(fs, cells):
            t = hints[f.name]
            if c == "":
                vals[f.name] = None
            elif t is bool:
                vals[f.name] = {"true": True, "false": False}[c]
            elif t is str:
                vals[f.name] = c
            elif int in typing.get_args(t) or t is int:
                vals[f.name] = int(c)
            else:
                vals[f.name] = float(c)
        return cls(**vals)


# ---------------------------------------------------------------- ingest

@dataclass(frozen=True)
class ColumnSpec:
    name: str
    role: str
    kind: str
    width: int = 1
    path: Path | None = None


def parse_schema(path) -> list:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot read schema {path}: {exc}") from exc
    specs, problems = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            problems.append(f"schema line {lineno}: expected 'name role kind'")
            continue
        name, role, kind = parts
        if role not in ROLES:
            problems.append(f"schema line {lineno}: unknown role {role!r}")
            continue
        base, _, arg = kind.partition(":")
        if base == "vector":
            try:
                width = int(arg)
                if width < 1:
                    raise ValueError
            except ValueError:
                problems.append(f"schema line {lineno}: vector needs a positive width")
                continue
            specs.append(ColumnSpec(name, role, "vector", width))
        elif base == "functional":
            if not arg:
                problems.append(f"schema line {lineno}: functional needs a file path")
                continue
            specs.append(ColumnSpec(name, role, "functional", path=path.parent / arg))
        elif base in ("scalar", "categorical") and not arg:
            specs.append(ColumnSpec(name, role, base))
        else:
            problems.append(f"schema line {lineno}: unknown kind {kind!r}")
    roles = [s.role for s in specs]
    if roles.count("y") != 1:
        problems.append(f"schema needs exactly one y column, found {roles.count('y')}")
    if not any(r in ("x_cont", "x_disc") for r in roles):
        problems.append("schema needs at least one x_cont or x_disc column")
    if "w" not in roles:
        problems.append("schema needs at least one w column")
    for s in specs:
        if s.role == "x_cont" and s.kind not in ("scalar", "vector"):
            problems.append(f"x_cont column {s.name!r} must be scalar or vector")
        if s.role == "x_disc" and s.kind != "categorical":
            problems.append(f"x_disc column {s.name!r} must be categorical")
    if problems:
        raise IngestError("; ".join(problems))
    return specs


def _read_rows(path):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh)]
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc
    rows = [r for r in rows if r]
    if not rows:
        raise IngestError(f"{path}: empty file")
    width = len(rows[0])
    for i, r in enumerate(rows):
        if len(r) != width:
            raise IngestError(f"{path}: ragged row {i + 1} ({len(r)} cells, expected {width})")
    return rows


def _to_float(cell, path, row, col):
    try:
        return float(cell)
    except ValueError:
        raise IngestError(f"{path}: non-numeric cell {cell!r} at row {row}, column {col}") from None


def read_functional(path):
    """Grid and value matrix of a functional file."""
    rows = _read_rows(path)
    data = np.array([[_to_float(c, path, i + 1, j + 1) for j, c in enumerate(r)]
                     for i, r in enumerate(rows)])
    grid, values = data[0], data[1:]
    if np.any(np.diff(grid) <= 0):
        raise IngestError(f"{path}: grid not increasing")
    return grid, values


def ingest(data_path, schema_path) -> Dataset:
    """Build a :class:`Dataset` from a scalar CSV, functional files and a schema."""
    specs = parse_schema(schema_path)
    need_csv = any(s.kind != "functional" for s in specs)
    header, body = [], []
    if need_csv or data_path is not None:
        rows = _read_rows(data_path)
        header, body = [h.strip() for h in rows[0]], rows[1:]
    index = {h: j for j, h in enumerate(header)}
    n = len(body) if header else None

    def col(name):
        if name not in index:
            raise IngestError(f"{data_path}: missing column {name!r}")
        j = index[name]
        return [r[j].strip() for r in body]

    def numeric(name):
        j = index.get(name)
        return np.array([_to_float(v, data_path, i + 2, j + 1) for i, v in enumerate(col(name))])

    built = {r: [] for r in ROLES}
    x_names = []
    for s in specs:
        if s.kind == "scalar":
            c = ScalarColumn(numeric(s.name), s.name)
        elif s.kind == "vector":
            c = VectorColumn(np.column_stack([numeric(f"{s.name}_{k + 1}")
                                              for k in range(s.width)]), s.name)
        elif s.kind == "categorical":
            c = CategoricalColumn.from_labels(col(s.name), s.name)
        else:
            grid, values = read_functional(s.path)
            if n is None:
                n = values.shape[0]
            try:
                c = FunctionalColumn(grid, values, s.name)
            except ValidationError as exc:
                raise IngestError(f"{s.path}: {exc}") from exc
        if n is not None and len(c) != n:
            raise IngestError(f"column {s.name!r} has {len(c)} rows, expected {n}")
        n = len(c)
        if s.role == "x_cont":
            if isinstance(c, VectorColumn):
                built["x_cont"].extend(c.values.T)
                x_names.extend(f"{s.name}_{k + 1}" for k in range(s.width))
            else:
                built["x_cont"].append(c.values)
                x_names.append(s.name)
        else:
            built[s.role].append(c)
    x = np.column_stack(built["x_cont"]) if built["x_cont"] else np.zeros((n, 0))
    return Dataset(built["y"][0], x, tuple(built["x_disc"]), tuple(built["w"]),
                   tuple(x_names))


def write_dataset(dataset: Dataset, out_dir) -> tuple:
    """Write ``data.csv``, ``schema.txt`` and functional files; return paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cols, header, schema = [], [], []

    def add(c, role):
        if isinstance(c, ScalarColumn):
            header.append(c.name)
            cols.append([format(v, ".17g") for v in c.values])
            schema.append(f"{c.name} {role} scalar")
        elif isinstance(c, VectorColumn):
            for k in range(c.values.shape[1]):
                header.append(f"{c.name}_{k + 1}")
                cols.append([format(v, ".17g") for v in c.values[:, k]])
            schema.append(f"{c.name} {role} vector:{c.values.shape[1]}")
        elif isinstance(c, CategoricalColumn):
            labels = c.labels or tuple(f"L{k}" for k in range(c.n_levels))
            header.append(c.name)
            cols.append([str(labels[k]) for k in c.codes])
            schema.append(f"{c.name} {role} categorical")
        else:
            fname = f"{c.name}.csv"
            with open(out_dir / fname, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow([format(v, ".17g") for v in c.grid])
                for row in c.values:
                    w.writerow([format(v, ".17g") for v in row])
            schema.append(f"{c.name} {role} functional:{fname}")

    add(dataset.y, "y")
    for j, name in enumerate(dataset.x_names):
        add(ScalarColumn(dataset.x_cont[:, j], name), "x_cont")
    for c in dataset.x_disc:
        add(c, "x_disc")
    for c in dataset.w:
        add(c, "w")
    data_path = out_dir / "data.csv"
    with open(data_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(dataset.n):
            w.writerow([c[i] for c in cols])
    schema_path = out_dir / "schema.txt"
    schema_path.write_text("\n".join(schema) + "\n", encoding="utf-8")
    return data_path, schema_path


# ---------------------------------------------------------------- config

def _convert(field_type, raw, key):
    raw = raw.strip()
    hints = typing.get_args(field_type) or (field_type,)
    if type(None) in hints and raw.lower() in ("", "none", "auto"):
        return None
    try:
        if int in hints and float not in hints:
            return int(raw)
        if float in hints:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse {raw!r}") from None


def read_config_file(path) -> dict:
    hints = typing.get_type_hints(TestConfig)
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"config line {lineno}: expected key=value")
        if key not in hints:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        out[key] = _convert(hints[key], value, key)
    return out


_FLAG_FIELDS = {
    "alpha": "alpha",
    "boot": "n_boot",
    "seed": "seed",
    "sigma_quantile": "p_sigma",
    "m_h": "m_h",
    "m_htilde": "m_h_tilde",
    "kappa_scale": "kappa_scale",
    "nu": "nu",
}


def build_config(args, **extra) -> TestConfig:
    values = read_config_file(args.config) if getattr(args, "config", None) else {}
    if getattr(args, "seed", None) is None and "seed" not in values and os.environ.get("KCMD_SEED"):
        try:
            values["seed"] = int(os.environ["KCMD_SEED"])
        except ValueError:
            raise ConfigError(f"KCMD_SEED is not an integer: {os.environ['KCMD_SEED']!r}") from None
    for flag, name in _FLAG_FIELDS.items():
        v = getattr(args, flag, None)
        if v is not None and not isinstance(v, list):
            values[name] = v
    values.update(extra)
    return TestConfig(**values)


# ---------------------------------------------------------------- commands

def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v


def _dgp(s):
    try:
        return DgpSpec(s, 4).name
    except ValidationError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _nu(s):
    if s.lower() == "auto":
        return None
    v = int(s)
    if v not in (2, 4):
        raise argparse.ArgumentTypeError("nu must be 2, 4 or auto")
    return v


def _common(p):
    p.add_argument("--config", help="key=value file with TestConfig fields")
    p.add_argument("--alpha", type=float)
    p.add_argument("--boot", type=_positive_int, help="bootstrap replicates")
    p.add_argument("--seed", type=int, help="64-bit seed (default: $KCMD_SEED or 0)")
    p.add_argument("--kappa-scale", type=float)
    p.add_argument("--nu", type=_nu, help="kernel order: 2, 4 or auto")
    p.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1)


def _summary(report) -> str:
    bw = report.bandwidths
    lines = [
        f"n={report.n} d_C={report.d_c} d_D={report.d_d}",
        f"nU_n={report.statistic.n_u_n:.6g} q_(1-alpha)={report.q_alpha:.6g} "
        f"p={report.p_value:.4g} reject={report.reject}",
    ]
    if not bw.discrete:
        lines.append(f"h={bw.h:.4g} h_tilde={bw.h_tilde:.4g} h_gcv={bw.h_gcv:.4g} nu={bw.nu}")
    lines.append(f"sigma_c2={report.sigma_c2:.4g} switched residuals={report.switch_count}")
    lines.append("timings: " + " ".join(f"{k}={v:.3f}s" for k, v in report.timings.items()))
    return "\n".join(lines)


def cmd_test(args) -> int:
    config = build_config(args)
    try:
        dataset = ingest(args.data, args.schema)
    except ValidationError as exc:
        raise IngestError(str(exc)) from exc
    report = run_significance_test(dataset, config)
    rec = ReportRecord.from_report(report)
    line = rec.serialize()
    if args.out:
        Path(args.out).write_text(ReportRecord.header() + "\n" + line + "\n", encoding="utf-8")
    print(_summary(report), file=sys.stderr)
    sys.stdout.write(line + "\n")
    return EXIT_OK


def cmd_simulate(args) -> int:
    base = build_config(args)
    combos = itertools.product(args.dgp, args.n, args.qw, args.qx, args.alpha_list,
                               args.m_h_list, args.m_htilde_list, args.sigma_list)
    rows = [SIMULATE_HEADER]
    sys.stdout.write(SIMULATE_HEADER + "\n")
    for dgp, n, qw, qx, alpha, m_h, m_ht, p in combos:
        over = {}
        if alpha is not None:
            over["alpha"] = alpha
        if m_h is not None:
            over["m_h"] = m_h
        if m_ht is not None:
            over["m_h_tilde"] = m_ht
        if p is not None:
            over["p_sigma"] = p
        cfg = replace(base, **over)
        spec = DgpSpec(dgp, n, qw, qx, upsilon=args.upsilon)
        res = monte_carlo(spec, cfg, args.mc, cfg.seed, workers=args.threads)
        row = ",".join([spec.name, str(n), format(qw, "g"), format(cfg.alpha, "g"),
                        format(res.rate, ".17g"), str(args.mc), str(cfg.n_boot),
                        str(cfg.seed)])
        print(f"{spec.name} n={n} q_w={qw:g} q_x={qx:g} alpha={cfg.alpha:g} m_h={cfg.m_h} "
              f"m_htilde={cfg.m_h_tilde:g} p={cfg.p_sigma:g}: rate={res.rate:.4f}",
              file=sys.stderr)
        rows.append(row)
        sys.stdout.write(row + "\n")
        sys.stdout.flush()
    if args.out:
        Path(args.out).write_text("\n".join(rows) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_generate(args) -> int:
    seed = args.seed
    if seed is None:
        seed = int(os.environ.get("KCMD_SEED", "0"))
    spec = DgpSpec(args.dgp, args.n, args.qw, args.qx, upsilon=args.upsilon)
    data = generate(spec, np.random.default_rng(seed))
    validate(data)
    data_path, schema_path = write_dataset(data, args.out_dir)
    print(f"wrote {data_path} and {schema_path}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kcmd", description="Kernel-based covariate significance tests.")
    parser.add_argument("--version", action="version", version=f"kcmd {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="test whether W adds to X in predicting Y")
    t.add_argument("--data", required=True, help="scalar CSV file")
    t.add_argument("--schema", required=True, help="column schema file")
    _common(t)
    t.add_argument("--sigma-quantile", type=float)
    t.add_argument("--m-h", type=float)
    t.add_argument("--m-htilde", type=float)
    t.add_argument("--out", help="also write header and record to this file")
    t.set_defaults(func=cmd_test)

    s = sub.add_parser("simulate", help="Monte Carlo rejection rates")
    s.add_argument("--dgp", nargs="+", required=True, type=_dgp, metavar="DGP",
                   help=", ".join(DGP_NAMES))
    s.add_argument("--n", nargs="+", type=int, default=[100])
    s.add_argument("--qw", nargs="+", type=float, default=[0.0])
    s.add_argument("--qx", nargs="+", type=float, default=[1.0])
    s.add_argument("--upsilon", choices=sorted(UPSILON_SCALE), default="orthonormal",
                   help="cosine basis scaling of the Upsilon direction")
    s.add_argument("--mc", type=_positive_int, default=100)
    s.add_argument("--alpha", dest="alpha_list", nargs="+", type=float, default=[None])
    s.add_argument("--m-h", dest="m_h_list", nargs="+", type=float, default=[None])
    s.add_argument("--m-htilde", dest="m_htilde_list", nargs="+", type=float, default=[None])
    s.add_argument("--sigma-quantile", dest="sigma_list", nargs="+", type=float,
                   default=[None])
    s.add_argument("--config", help="key=value file with TestConfig fields")
    s.add_argument("--boot", type=_positive_int)
    s.add_argument("--seed", type=int)
    s.add_argument("--kappa-scale", type=float)
    s.add_argument("--nu", type=_nu)
    s.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1)
    s.add_argument("--out", help="also write the table to this file")
    s.set_defaults(func=cmd_simulate)

    g = sub.add_parser("generate", help="write a simulated dataset to files")
    g.add_argument("--dgp", required=True, type=_dgp, metavar="DGP", help=", ".join(DGP_NAMES))
    g.add_argument("--n", type=int, default=100)
    g.add_argument("--qw", type=float, default=0.0)
    g.add_argument("--qx", type=float, default=1.0)
    g.add_argument("--upsilon", choices=sorted(UPSILON_SCALE), default="orthonormal")
    g.add_argument("--seed", type=int)
    g.add_argument("--out-dir", required=True)
    g.set_defaults(func=cmd_generate)
    return parser


def exit_code_for(exc) -> int:
    if isinstance(exc, StageError):
        return _STAGE_EXIT.get(exc.stage, EXIT_OTHER)
    if isinstance(exc, IngestError):
        return EXIT_INGEST
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, ValidationError):
        return EXIT_VALIDATION
    return EXIT_OTHER


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except KcmdError as exc:
        print(f"kcmd: error: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    except (OSError, ValueError) as exc:
        print(f"kcmd: error: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
