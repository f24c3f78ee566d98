"""Command-line front end.

Subcommands: ``scattering``, ``spectrum``, ``scan``, ``verify``, ``expand``
and ``sandwich``. Settings come from built-in defaults, then an optional
flat ``key = value`` config file, then command-line flags (flags win).

Exit codes: 0 success, 1 validation failure, 2 configuration error,
3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from datetime import datetime, timezone

import numpy as np
import scipy

from . import SCHEMA_VERSION, __version__
from .bogoliubov import ad_sequence, build_generator
from .checks import failures, identity_suite, random_even_eta
from .errors import (ConfigError, CutoffTooSmall, DimensionOverflow, GPLabError, InvalidDomain,
                     NonConvergence, OrderTooLarge, SectorMismatch, ValidationFailure)
from .fock import FockBasis, b_operator, dump_operator, excitation_map
from .hamiltonians import build_HN, build_LN_parts
from .lattice import build_lattice
from .scattering import PotentialSpec, eta_coefficients, scattering_length, solve_neumann, \
    verify_scattering_relation
from .spectra import (DEFAULT_SEED, REPORT_HEADER, SCAN_COLUMNS, PipelineConfig, depletion_of,
                      lanczos_lowest, run_single, sandwich_check, trend_summary)
from .symbolic import MAX_ORDER, count_terms, dump_terms, evaluate_sum, expand_ad, iter_expand, \
    validate_terms

logger = logging.getLogger("gplab")

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_NONCONVERGENCE = 0, 1, 2, 3

COMMANDS = ("scattering", "spectrum", "scan", "verify", "expand", "sandwich")

# command-specific values used when neither the config file nor a flag sets them
COMMAND_DEFAULTS = {
    "scattering": {"n": 8, "pmax": 3},
    "spectrum": {"n": 4, "pmax": 1},
    "scan": {"n_range": "2..8", "pmax": 1},
    "verify": {"n": 3, "pmax": 1},
    "expand": {"n": 3, "pmax": 1},
    "sandwich": {"n_range": "3..6", "pmax": 1},
}


@dataclass
class RunConfig:
    """Resolved settings of one invocation (echoed into every output)."""

    potential: str = "ball"
    radius: float = 1.0
    amplitude: float = 1.0
    table: str | None = None
    kappa: float = 0.05
    ell: float = 0.4
    pmax: int | None = None
    n: int | None = None
    n_range: str | None = None
    sector: str = "0,0,0"
    grid_points: int = 2048
    ode_steps: int = 20000
    lanczos_tol: float = 1e-10
    identity_tol: float = 1e-12
    levels: int = 1
    energy_threshold: float | None = None
    format: str = "json"
    output: str | None = None
    seed: int = DEFAULT_SEED
    threads: int | None = None

    def n_values(self) -> list[int]:
        if self.n_range:
            return parse_range(self.n_range)
        return [self.n]

    def sector_tuple(self) -> tuple:
        try:
            s = tuple(int(c) for c in self.sector.split(","))
        except ValueError as exc:
            raise ConfigError(f"bad sector {self.sector!r}") from exc
        if len(s) != 3:
            raise ConfigError("sector needs three integers")
        return s

    def potential_spec(self) -> PotentialSpec:
        table = None
        if self.potential == "tabulated":
            if not self.table:
                raise ConfigError("tabulated potential needs table=<path>")
            try:
                table = tuple(map(tuple, np.loadtxt(self.table, ndmin=2)[:, :2]))
            except OSError as exc:
                raise ConfigError(f"cannot read table: {exc}") from exc
        try:
            return PotentialSpec(self.potential, self.radius, self.amplitude, table)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, value: str):
    kind = _FIELD_TYPES[key]
    if value.lower() in ("none", "null", ""):
        return None
    try:
        if kind.startswith("int"):
            return int(value)
        if kind.startswith("float"):
            return float(value)
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {value!r}") from exc
    return value


def parse_range(text: str) -> list[int]:
    """``"2..8"`` or ``"2,4,6"`` into a list of integers."""
    try:
        if ".." in text:
            lo, hi = text.split("..")
            vals = list(range(int(lo), int(hi) + 1))
        else:
            vals = [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad range {text!r}") from exc
    if not vals:
        raise ConfigError(f"empty range {text!r}")
    return vals


def read_config_file(path: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment; dashes in keys allowed."""
    out = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (x.strip() for x in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value)
    return out


def resolve_config(command: str, args: argparse.Namespace) -> RunConfig:
    values = dict(COMMAND_DEFAULTS.get(command, {}))
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    for name in _FIELD_TYPES:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    if command in ("scan", "sandwich") and args.n is not None and args.n_range is None:
        values["n_range"] = str(args.n)  # a single --n narrows the scan
    cfg = RunConfig(**values)
    validate_config(command, cfg)
    return cfg


def validate_config(command: str, cfg: RunConfig) -> None:
    if not 0 < cfg.ell < 0.5:
        raise ConfigError("ell must lie in (0, 1/2)")
    if cfg.kappa < 0:
        raise ConfigError("kappa must be non-negative")
    if cfg.pmax is None or cfg.pmax < (1 if command != "scattering" else 0):
        raise ConfigError("pmax must be >= 1 for spectral commands")
    for n in cfg.n_values():
        if n is None or n < 1:
            raise ConfigError("particle numbers must be positive")
    if cfg.format not in ("json", "csv"):
        raise ConfigError("format must be json or csv")
    if cfg.levels < 1 or cfg.levels > 10:
        raise ConfigError("levels must be between 1 and 10")
    if cfg.threads is not None and cfg.threads < 1:
        raise ConfigError("threads must be positive")
    cfg.sector_tuple()
    cfg.potential_spec()


# ---------------------------------------------------------------------------
# output


def _clean(x):
    """JSON-ready copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_clean(v) for v in x.tolist()]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def versions() -> dict:
    return {"gplab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def envelope(command: str, cfg: RunConfig, result: dict) -> dict:
    """Payload shared by every command; ``timestamp`` is the only varying field."""
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": _clean(asdict(cfg)),
        "versions": versions(),
        "seed": cfg.seed,
        "result": _clean(result),
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


def payload_bytes(doc: dict) -> bytes:
    """Serialized document without the timestamp (the reproducible part)."""
    body = {k: v for k, v in doc.items() if k != "timestamp"}
    return json.dumps(body, sort_keys=True, allow_nan=False).encode()


def _write(cfg: RunConfig, text: str) -> None:
    if cfg.output and cfg.output != "-":
        with open(cfg.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def emit_json(cfg: RunConfig, doc: dict) -> None:
    _write(cfg, json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n")


def rows_to_csv(rows: list[dict], columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow(["" if r.get(c) is None else repr(float(r[c])) if isinstance(r.get(c), (float, np.floating))
                    else r[c] for c in columns])
    return buf.getvalue()


def write_plot_data(path: str, rows: list[dict], columns) -> None:
    """Whitespace-separated columns with a ``#`` header (gnuplot ``using`` ready)."""
    with open(path, "w") as fh:
        fh.write("# " + " ".join(columns) + "\n")
        for r in rows:
            vals = []
            for c in columns:
                v = r.get(c)
                vals.append("NaN" if v is None else f"{v:.12g}" if isinstance(v, float) else str(v))
            fh.write(" ".join(vals) + "\n")


def _maybe_dump(args, ops: dict) -> None:
    name = getattr(args, "dump_operator", None)
    if not name:
        return
    if name not in ops:
        raise ConfigError(f"unknown operator {name!r}; choose from {sorted(ops)}")
    os.makedirs(args.dump_dir, exist_ok=True)
    path = os.path.join(args.dump_dir, f"{name}.coo")
    dump_operator(ops[name], path)
    logger.info("wrote %s", path)


def _modes_table(lattice, values, skip_zero=True) -> list:
    out = []
    for i in range(lattice.mode_count):
        if skip_zero and i == lattice.zero_index:
            continue
        out.append([*lattice.mode_at(i), float(values[i])])
    return out


def _threads(cfg: RunConfig) -> int:
    return cfg.threads or os.cpu_count() or 1


def _map_jobs(cfg: RunConfig, fn, items):
    """Order-preserving job map; processes only when more than one thread is allowed."""
    items = list(items)
    n = min(_threads(cfg), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------------------
# commands


def cmd_scattering(cfg: RunConfig, args) -> dict:
    V = cfg.potential_spec()
    a0 = scattering_length(V, cfg.kappa, steps=cfg.ode_steps)
    sol = solve_neumann(V, cfg.kappa, cfg.n, cfg.ell, cfg.grid_points)
    lat = build_lattice(cfg.pmax)
    sol = eta_coefficients(sol, lat)
    result = {"kappa": cfg.kappa, "ell": cfg.ell, "n_particles": cfg.n, "a0": a0,
              "lambda_ell": sol.lambda_ell, "eta": _modes_table(lat, sol.eta),
              "eta_tilde_zero": sol.eta_tilde_zero, "eta_norm": sol.eta_norm,
              "eta_constant": sol.eta_constant}
    try:
        rep = verify_scattering_relation(sol, lat, V)
        result.update(residual_max=rep.residual_max, residual_relative=rep.relative,
                      boundary_ratio=rep.boundary_ratio)
    except CutoffTooSmall as exc:
        result.update(residual_max=None, residual_note=str(exc))
    if args.profile:
        with open(args.profile, "w") as fh:
            fh.write("r,f,w\n")
            for r, f, w in zip(sol.grid, sol.f, sol.w):
                fh.write(f"{r:.12g},{f:.15g},{w:.15g}\n")
    return result


def cmd_spectrum(cfg: RunConfig, args) -> dict:
    V = cfg.potential_spec()
    lat = build_lattice(cfg.pmax)
    N = cfg.n
    sector = cfg.sector_tuple()
    b = FockBasis(lat, N, include_zero_mode=True, sector=sector)
    H = build_HN(b, V, cfg.kappa, N)
    _maybe_dump(args, {"H_N": H})
    res = lanczos_lowest(H, b.dim, k=min(cfg.levels, b.dim), tol=cfg.lanczos_tol, seed=cfg.seed)
    a0 = scattering_length(V, cfg.kappa, steps=cfg.ode_steps)
    obs = depletion_of(res.ground_vector, b, N)
    e0 = float(res.eigenvalues[0])
    offset = e0 - 4 * math.pi * a0 * N
    result = {
        "n_particles": N, "pmax": cfg.pmax, "sector": list(sector), "dim": b.dim, "a0": a0,
        "eigenvalues": res.eigenvalues, "residual_norms": res.residual_norms,
        "iterations": res.iterations, "seed": res.seed,
        "observables": {
            "depletion": obs["depletion"], "condensate_fraction": obs["condensate_fraction"],
            "gamma1_diag": [[*k, v] for k, v in sorted(obs["gamma1_diag"].items())],
            "energy_offset": offset,
        },
        "header": REPORT_HEADER,
    }
    if cfg.energy_threshold is not None:
        result["below_threshold"] = bool(offset <= cfg.energy_threshold)
    return result


def _scan_job(job):
    pcfg, N, a0 = job
    return run_single(pcfg, N, a0).as_dict()


def _pipeline_config(cfg: RunConfig, sandwich: bool) -> PipelineConfig:
    return PipelineConfig(potential=cfg.potential_spec(), kappa=cfg.kappa, ell=cfg.ell, pmax=cfg.pmax,
                          n_values=tuple(cfg.n_values()), grid_points=cfg.grid_points,
                          lanczos_tol=cfg.lanczos_tol, seed=cfg.seed, sandwich=sandwich)


def cmd_scan(cfg: RunConfig, args) -> dict:
    pcfg = _pipeline_config(cfg, args.with_sandwich)
    a0 = scattering_length(pcfg.potential, cfg.kappa, steps=cfg.ode_steps)
    rows = _map_jobs(cfg, _scan_job, [(pcfg, N, a0) for N in pcfg.n_values])
    trends = {}
    for col in ("N_times_depletion", "vac_GN_offset", "E0_minus_4pi_a0_N"):
        pts = [(r["N"], r[col]) for r in rows if r[col] is not None]
        if len(pts) >= 3:
            trends[col] = trend_summary([v for _, v in pts], [n for n, _ in pts])
    if args.plot_data:
        write_plot_data(args.plot_data, rows, SCAN_COLUMNS)
    return {"header": REPORT_HEADER, "a0": a0, "columns": list(SCAN_COLUMNS), "rows": rows,
            "trends": trends}


def cmd_verify(cfg: RunConfig, args) -> dict:
    V = cfg.potential_spec()
    lat = build_lattice(cfg.pmax)
    errors = identity_suite(lat, cfg.n, V, cfg.kappa, corrupt=args.corrupt, seed=cfg.seed)
    if args.dump_operator:
        bx = FockBasis(lat, cfg.n, sector=(0, 0, 0))
        bN = FockBasis(lat, cfg.n, include_zero_mode=True, sector=(0, 0, 0))
        ops = dict(build_LN_parts(bx, V, cfg.kappa, cfg.n).parts())
        ops["H_N"] = build_HN(bN, V, cfg.kappa, cfg.n)
        ops["U_N"] = excitation_map(bN, bx)
        _maybe_dump(args, ops)
    bad = failures(errors, cfg.identity_tol)
    return {"errors": errors, "tolerance": cfg.identity_tol, "failures": bad}


def cmd_expand(cfg: RunConfig, args) -> dict:
    n = args.order
    if n < 0:
        raise ConfigError("order must be non-negative")
    if n > MAX_ORDER:
        raise OrderTooLarge(f"order {n} exceeds {MAX_ORDER}")
    result = {"order": n, "expected_count": count_terms(n)}
    if args.validate:
        rep = validate_terms(iter_expand(n), n, raise_on_failure=False)
        result.update(rep.summary())
    else:
        result.update(count=sum(1 for _ in iter_expand(n)), distinguished_term=None, violations=[])
    if args.dump:
        with open(args.dump, "w") as fh:
            dump_terms(iter_expand(n), fh)
    if args.evaluate:
        if n > 5:
            raise ConfigError("--evaluate is limited to order <= 5")
        lat = build_lattice(cfg.pmax)
        basis = FockBasis(lat, cfg.n, sector=cfg.sector_tuple())
        rng = np.random.default_rng(cfg.seed)
        eta = random_even_eta(lat, args.eta_norm, rng)
        p = lat.index_of((1, 0, 0))
        sym = evaluate_sum(expand_ad(n), basis, eta, p)
        gen = build_generator(basis, eta, cfg.n)
        ref = ad_sequence(gen, b_operator(basis, p, False, cfg.n), n)[-1]
        diff = (sym.matrix - ref.matrix).tocsr()
        err = float(np.max(np.abs(diff.data))) if diff.nnz else 0.0
        result["evaluation"] = {"pmax": cfg.pmax, "nmax": cfg.n, "dim": basis.dim,
                                "eta_norm": args.eta_norm, "max_abs_error": err,
                                "tolerance": args.anchor_tol}
        if not err <= args.anchor_tol:
            result["violations"] = list(result.get("violations", [])) + [
                f"symbolic sum differs from matrix commutator by {err:.3g}"]
    return result


def _sandwich_job(job):
    pcfg, N, a0 = job
    lat = build_lattice(pcfg.pmax)
    b = FockBasis(lat, N, sector=(0, 0, 0))
    hams = build_LN_parts(b, pcfg.potential, pcfg.kappa, N)
    eta = np.zeros(lat.mode_count)
    if pcfg.kappa > 0:
        sol = eta_coefficients(solve_neumann(pcfg.potential, pcfg.kappa, N, pcfg.ell, pcfg.grid_points), lat)
        eta = sol.eta
    gen = build_generator(b, eta, N)
    rep = sandwich_check(hams, gen, a0, N, iterative_limit=pcfg.sandwich_limit)
    out = rep.as_dict()
    out["dim"] = b.dim
    out["eta_norm"] = gen.eta_norm
    return out


def cmd_sandwich(cfg: RunConfig, args) -> dict:
    pcfg = _pipeline_config(cfg, True)
    a0 = scattering_length(pcfg.potential, cfg.kappa, steps=cfg.ode_steps)
    rows = _map_jobs(cfg, _sandwich_job, [(pcfg, N, a0) for N in pcfg.n_values])
    if args.plot_data:
        write_plot_data(args.plot_data, rows, ("N", "C_lo", "C_mid", "C_hi"))
    return {"a0": a0, "kappa": cfg.kappa, "rows": rows}


HANDLERS = {"scattering": cmd_scattering, "spectrum": cmd_spectrum, "scan": cmd_scan,
            "verify": cmd_verify, "expand": cmd_expand, "sandwich": cmd_sandwich}


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("model and run settings")
    g.add_argument("--config", help="flat key = value file; flags override it")
    g.add_argument("--potential", choices=["ball", "gaussian-truncated", "tabulated"])
    g.add_argument("--radius", type=float)
    g.add_argument("--amplitude", type=float)
    g.add_argument("--table", help="two-column (r, V) file for the tabulated kind")
    g.add_argument("--kappa", type=float)
    g.add_argument("--ell", type=float)
    g.add_argument("--pmax", type=int)
    g.add_argument("--n", type=int, help="particle number N")
    g.add_argument("--n-range", dest="n_range", help="e.g. 2..8 or 3,4,5")
    g.add_argument("--sector", help="total momentum as nx,ny,nz (units of 2 pi)")
    g.add_argument("--grid-points", dest="grid_points", type=int)
    g.add_argument("--ode-steps", dest="ode_steps", type=int)
    g.add_argument("--lanczos-tol", dest="lanczos_tol", type=float)
    g.add_argument("--identity-tol", dest="identity_tol", type=float)
    g.add_argument("--seed", type=int)
    g.add_argument("--threads", type=int, help="job-level parallelism (default: logical cores)")
    g.add_argument("--format", choices=["json", "csv"])
    g.add_argument("--output", "-o", help="output path (default stdout)")
    g.add_argument("--dump-operator", dest="dump_operator", metavar="NAME",
                   help="write an assembled operator in coordinate text format")
    g.add_argument("--dump-dir", dest="dump_dir", default=".")
    g.add_argument("--verbose", "-v", action="store_true")

    parser = _Parser(prog="gplab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"gplab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("scattering", parents=[common], help="scattering length, Neumann problem, eta")
    p.add_argument("--profile", help="CSV file for the radial profile (r, f, w)")

    p = sub.add_parser("spectrum", parents=[common], help="low spectrum of H_N in one sector")
    p.add_argument("--levels", type=int)
    p.add_argument("--energy-threshold", dest="energy_threshold", type=float,
                   help="report whether E0 - 4 pi a0 N stays below this value")

    p = sub.add_parser("scan", parents=[common], help="ground-state observables over a range of N")
    p.add_argument("--plot-data", dest="plot_data", help="gnuplot-ready column file")
    p.add_argument("--with-sandwich", dest="with_sandwich", action="store_true",
                   help="also fit the sandwich constants for each N")

    p = sub.add_parser("verify", parents=[common], help="exact operator identities")
    p.add_argument("--corrupt", help=argparse.SUPPRESS)  # test hook: perturb one operator

    p = sub.add_parser("expand", parents=[common], help="symbolic nested-commutator expansion")
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--validate", action="store_true")
    p.add_argument("--evaluate", action="store_true",
                   help="compare the evaluated term sum with matrix commutators")
    p.add_argument("--nmax", dest="n", type=int, help="particle cap for --evaluate")
    p.add_argument("--eta-norm", dest="eta_norm", type=float, default=0.3)
    p.add_argument("--anchor-tol", dest="anchor_tol", type=float, default=1e-10)
    p.add_argument("--dump", help="one term per line text dump")

    p = sub.add_parser("sandwich", parents=[common], help="fitted constants of the operator sandwich")
    p.add_argument("--plot-data", dest="plot_data", help="gnuplot-ready column file")
    return parser


def _status(command: str, result: dict) -> int:
    if command == "verify" and result["failures"]:
        return EXIT_VALIDATION
    if command == "expand" and result.get("violations"):
        return EXIT_VALIDATION
    return EXIT_OK


def run(argv=None) -> int:
    """Parse ``argv``, execute one subcommand and return the exit code."""
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = resolve_config(args.command, args)
        result = HANDLERS[args.command](cfg, args)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvalidDomain, OrderTooLarge, DimensionOverflow, SectorMismatch, CutoffTooSmall) as exc:
        print(f"configuration error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValidationFailure as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NonConvergence as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except GPLabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    code = _status(args.command, result)
    if cfg.format == "csv" and args.command in ("scan", "sandwich"):
        cols = SCAN_COLUMNS if args.command == "scan" else ("N", "kappa", "C_lo", "C_mid", "C_hi", "method")
        _write(cfg, rows_to_csv(result["rows"], cols))
    else:
        emit_json(cfg, envelope(args.command, cfg, result))
    if code == EXIT_VALIDATION:
        print("validation failure: see 'failures'/'violations' in the output", file=sys.stderr)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
