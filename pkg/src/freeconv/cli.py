"""Command-line front end.

Subcommands
-----------
convolve M1 M2 --grid lo:hi:count     density of the free convolution -> density.csv
density M --grid lo:hi:count          smoothed density of one measure -> density.csv
bulk M1 M2 --scan lo:hi:count         regular-bulk windows -> bulk.json
sample M1 M2 --n N                    one H = A + UBU* spectrum -> spectrum.csv
rate --config CFG                     convergence-rate campaign -> result.json, errors.csv
locallaw --config CFG                 local-law scan -> result.json, scan.csv
twoatom --config CFG                  two-point-mass scan -> result.json, scan.csv
diag --config CFG                     per-replica snapshot diagnostics -> diag.csv

Measure files are JSON objects {"atoms": [...], "weights": [...]} (weights
optional, defaulting to uniform).  Campaign configs are JSON objects whose
keys mirror the experiment spec fields; unknown keys are rejected, defaults
are filled and echoed into result.json, and grids may be given as explicit
lists.  Grid flags use lo:hi:count syntax; eta schedules are comma lists.

Exit codes: 0 success, 1 validation error, 2 numerical failure, 3 I/O
error.  Every failure prints one line ``error: <category>: <reason>`` to
stderr.  All outputs are written atomically (temp file + rename); an
interrupted campaign still emits its completed replicas with
``"partial": true`` in result.json and exits 130.
"""

import argparse
import json
import os
import sys
from dataclasses import dataclass, replace

import numpy as np

from . import output
from .measures import (
    SpectralParam,
    invert_density,
    load_measure,
    make_measure,
    measure_from_dict,
    quantile_atoms,
    stieltjes,
)
from .subordination import (
    DEFAULT_ETA_SCHEDULE,
    SubordinationError,
    convolution_density,
    regular_bulk,
    solve_subordination,
)
from .ensemble import EnsembleSpec, build_h, eigen_h, rng_stream, sample_haar
from .diagnostics import all_row_quantities, green, local_law_error, omega_slots
from .experiments import (
    LocalLawScanSpec,
    NumericalBudgetError,
    RateExperimentSpec,
    TwoAtomSpec,
    run_local_law_scan,
    run_rate_experiment,
    run_two_atom_case,
)

__all__ = ["CliConfig", "parse_config", "dispatch", "main"]

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3
EXIT_INTERRUPTED = 130

_COMMANDS = ("convolve", "density", "bulk", "sample", "locallaw", "rate",
             "twoatom", "diag")


@dataclass(frozen=True)
class CliConfig:
    """Validated invocation: command, inputs, output directory, run options."""

    command: str
    inputs: tuple = ()
    config_path: str | None = None
    out_dir: str = "."
    seed: int | None = None
    threads: int | None = None
    verbosity: int = 0
    options: dict = None

    def __post_init__(self):
        if self.command not in _COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")


def _resolve_threads(flag):
    if flag is not None:
        return max(1, int(flag))
    env = os.environ.get("FREECONV_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _parse_grid(text):
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"grid {text!r} must use lo:hi:count syntax")
    lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    if not (lo < hi) or count < 1:
        raise ValueError(f"grid {text!r} needs lo < hi and count >= 1")
    return np.linspace(lo, hi, count)


def _parse_schedule(text):
    vals = tuple(float(x) for x in text.split(","))
    if len(vals) < 2:
        raise ValueError("eta schedule needs at least 2 comma-separated values")
    return vals


# ---------------------------------------------------------------------------
# config files
# ---------------------------------------------------------------------------

_REQUIRED = object()

_SOLVER_KEYS = {"tol": 1e-12, "max_iter": 10000}

_RATE_SCHEMA = {
    "alpha": _REQUIRED, "beta": _REQUIRED, "n_list": _REQUIRED,
    "interval": _REQUIRED, "replicas": 30, "subinterval_grid": 64,
    "seed": 0, "b_threshold": 0.5, "bulk_floor": 0.01, **_SOLVER_KEYS,
}

_SCAN_SCHEMA = {
    "alpha": _REQUIRED, "beta": _REQUIRED, "n_list": _REQUIRED,
    "e_grid": _REQUIRED, "replicas": 30, "eta_grid": (), "nu_grid": (),
    "gamma": 0.2, "weights_mode": "unit", "epsilon": 0.25,
    "pass_fraction": 0.9, "seed": 0, "b_threshold": 0.5, **_SOLVER_KEYS,
}

_TWOATOM_SCHEMA = {
    "xi": _REQUIRED, "zeta": _REQUIRED, "theta": _REQUIRED,
    "varsigma": 0.1, "alpha": None, "beta": None,
    "n_list": _REQUIRED, "e_grid": _REQUIRED, "replicas": 30,
    "eta_grid": (), "nu_grid": (), "gamma": 0.2, "weights_mode": "unit",
    "epsilon": 0.25, "pass_fraction": 0.9, "seed": 0, "b_threshold": 0.5,
    **_SOLVER_KEYS,
}

_DIAG_SCHEMA = {
    "alpha": _REQUIRED, "beta": _REQUIRED, "n": _REQUIRED,
    "e_grid": _REQUIRED, "eta_grid": _REQUIRED, "replicas": 30,
    "weights_mode": "unit", "seed": 0, **_SOLVER_KEYS,
}

_SCHEMAS = {"rate": _RATE_SCHEMA, "locallaw": _SCAN_SCHEMA,
            "twoatom": _TWOATOM_SCHEMA, "diag": _DIAG_SCHEMA}


def _resolve_measure(value, key, base_dir):
    if value is None:
        return None
    if isinstance(value, dict) and "path" in value:
        extra = set(value) - {"path"}
        if extra:
            raise ValueError(f"config key '{key}': unknown subkeys {sorted(extra)}")
        path = value["path"]
        if not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        return load_measure(path)
    return measure_from_dict(value)


def _apply_schema(raw, schema, kind):
    unknown = set(raw) - set(schema) - {"kind"}
    if unknown:
        raise ValueError(f"unknown config key {sorted(unknown)[0]!r} for kind "
                         f"{kind!r}")
    filled = {}
    for key, default in schema.items():
        if key in raw:
            filled[key] = raw[key]
        elif default is _REQUIRED:
            raise ValueError(f"config key '{key}' is required for kind {kind!r}")
        else:
            filled[key] = default
    return filled


def parse_config(path, seed_override=None):
    """Load and validate a campaign config file.

    Returns (kind, spec) where spec is the experiment spec object (for
    twoatom: a (TwoAtomSpec, LocalLawScanSpec) pair; for diag: a plain
    dict).  Unknown keys are rejected by name; defaults (replicas=30,
    gamma=0.2, epsilon=0.25, ...) are filled in and echoed with results.
    """
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict) or "kind" not in raw:
        raise ValueError("config must be a JSON object with a 'kind' key")
    kind = raw["kind"]
    if kind not in _SCHEMAS:
        raise ValueError(f"unknown config kind {kind!r} "
                         f"(expected one of {sorted(_SCHEMAS)})")
    base_dir = os.path.dirname(os.path.abspath(path))
    cfg = _apply_schema(raw, _SCHEMAS[kind], kind)
    if seed_override is not None:
        cfg["seed"] = int(seed_override)

    def measure(key):
        return _resolve_measure(cfg[key], key, base_dir)

    try:
        if kind == "rate":
            spec = RateExperimentSpec(
                alpha=measure("alpha"), beta=measure("beta"),
                n_list=tuple(cfg["n_list"]), replicas=int(cfg["replicas"]),
                interval=tuple(cfg["interval"]),
                subinterval_grid=int(cfg["subinterval_grid"]),
                seed=int(cfg["seed"]), b_threshold=float(cfg["b_threshold"]),
                bulk_floor=float(cfg["bulk_floor"]), tol=float(cfg["tol"]),
                max_iter=int(cfg["max_iter"]))
            return kind, spec
        if kind == "locallaw":
            spec = LocalLawScanSpec(
                alpha=measure("alpha"), beta=measure("beta"),
                n_list=tuple(cfg["n_list"]), replicas=int(cfg["replicas"]),
                e_grid=tuple(cfg["e_grid"]), eta_grid=tuple(cfg["eta_grid"]),
                nu_grid=tuple(cfg["nu_grid"]), gamma=float(cfg["gamma"]),
                weights_mode=str(cfg["weights_mode"]),
                epsilon=float(cfg["epsilon"]),
                pass_fraction=float(cfg["pass_fraction"]),
                seed=int(cfg["seed"]), b_threshold=float(cfg["b_threshold"]),
                tol=float(cfg["tol"]), max_iter=int(cfg["max_iter"]))
            return kind, spec
        if kind == "twoatom":
            spec2 = TwoAtomSpec(
                xi=float(cfg["xi"]), zeta=float(cfg["zeta"]),
                theta=float(cfg["theta"]), varsigma=float(cfg["varsigma"]),
                gamma=float(cfg["gamma"]))
            from .experiments import two_atom_measures
            alpha, beta = two_atom_measures(spec2)
            scan = LocalLawScanSpec(
                alpha=alpha, beta=beta, n_list=tuple(cfg["n_list"]),
                replicas=int(cfg["replicas"]), e_grid=tuple(cfg["e_grid"]),
                eta_grid=tuple(cfg["eta_grid"]), nu_grid=tuple(cfg["nu_grid"]),
                gamma=float(cfg["gamma"]),
                weights_mode=str(cfg["weights_mode"]),
                epsilon=float(cfg["epsilon"]),
                pass_fraction=float(cfg["pass_fraction"]),
                seed=int(cfg["seed"]), b_threshold=float(cfg["b_threshold"]),
                tol=float(cfg["tol"]), max_iter=int(cfg["max_iter"]))
            return kind, (spec2, scan)
        # diag
        spec = dict(cfg)
        spec["alpha"] = measure("alpha")
        spec["beta"] = measure("beta")
        spec["n"] = int(cfg["n"])
        spec["replicas"] = int(cfg["replicas"])
        spec["seed"] = int(cfg["seed"])
        return kind, spec
    except (TypeError,) as exc:
        raise ValueError(f"malformed config value: {exc}") from exc


# ---------------------------------------------------------------------------
# subcommand implementations
# ---------------------------------------------------------------------------

def _out(cfg, name):
    os.makedirs(cfg.out_dir, exist_ok=True)
    return os.path.join(cfg.out_dir, name)


def _cmd_convolve(cfg):
    mu1 = load_measure(cfg.inputs[0])
    mu2 = load_measure(cfg.inputs[1])
    grid = cfg.options["grid"]
    sched = cfg.options.get("eta_schedule") or DEFAULT_ETA_SCHEDULE
    dens = convolution_density(mu1, mu2, grid, sched)
    if dens.failed:
        raise SubordinationError(
            f"solver failed at {len(dens.failed)} grid points")
    output.write_density_csv(dens, _out(cfg, "density.csv"))
    return EXIT_OK


def _cmd_density(cfg):
    mu = load_measure(cfg.inputs[0])
    grid = cfg.options["grid"]
    sched = cfg.options.get("eta_schedule") or DEFAULT_ETA_SCHEDULE
    dens = invert_density(lambda z: stieltjes(mu, z), grid, sched)
    output.write_density_csv(dens, _out(cfg, "density.csv"))
    return EXIT_OK


def _cmd_bulk(cfg):
    mu1 = load_measure(cfg.inputs[0])
    mu2 = load_measure(cfg.inputs[1])
    grid = cfg.options["scan"]
    sched = cfg.options.get("eta_schedule") or DEFAULT_ETA_SCHEDULE
    windows = regular_bulk(mu1, mu2, float(grid[0]), float(grid[-1]),
                           resolution=grid.size,
                           density_floor=cfg.options["floor"],
                           density_cap=cfg.options["cap"], eta_schedule=sched)
    payload = {"windows": [{"lo": w.lo, "hi": w.hi,
                            "min_density": w.min_density} for w in windows]}
    output.atomic_write_text(_out(cfg, "bulk.json"),
                             json.dumps(payload, indent=1) + "\n")
    return EXIT_OK


def _cmd_sample(cfg):
    mu1 = load_measure(cfg.inputs[0])
    mu2 = load_measure(cfg.inputs[1])
    n = cfg.options["n"]
    seed = cfg.seed if cfg.seed is not None else 0
    spec = EnsembleSpec(n=n, a_diag=quantile_atoms(mu1, n),
                        b_diag=quantile_atoms(mu2, n), seed=seed)
    u = sample_haar(n, rng_stream(seed, 0x5A, n, 0))
    data = eigen_h(build_h(spec, u))
    output.write_spectrum_csv(data.eigenvalues, _out(cfg, "spectrum.csv"))
    return EXIT_OK


def _cmd_rate(cfg):
    _, spec = parse_config(cfg.config_path, cfg.seed)
    result = run_rate_experiment(spec, threads=_resolve_threads(cfg.threads))
    output.write_result_json(result, _out(cfg, "result.json"))
    output.write_errors_csv(result, _out(cfg, "errors.csv"))
    return EXIT_INTERRUPTED if result.partial else EXIT_OK


def _cmd_locallaw(cfg):
    _, spec = parse_config(cfg.config_path, cfg.seed)
    result = run_local_law_scan(spec, threads=_resolve_threads(cfg.threads))
    output.write_result_json(result, _out(cfg, "result.json"))
    output.write_scan_csv(result, _out(cfg, "scan.csv"))
    return EXIT_INTERRUPTED if result.partial else EXIT_OK


def _cmd_twoatom(cfg):
    _, (spec2, scan) = parse_config(cfg.config_path, cfg.seed)
    result = run_two_atom_case(spec2, scan,
                               threads=_resolve_threads(cfg.threads))
    output.write_result_json(result, _out(cfg, "result.json"))
    output.write_scan_csv(result, _out(cfg, "scan.csv"))
    return EXIT_INTERRUPTED if result.partial else EXIT_OK


def _cmd_diag(cfg):
    _, spec = parse_config(cfg.config_path, cfg.seed)
    n = spec["n"]
    mu_a = make_measure(quantile_atoms(spec["alpha"], n))
    mu_b = make_measure(quantile_atoms(spec["beta"], n))
    es = EnsembleSpec(n=n, a_diag=quantile_atoms(spec["alpha"], n),
                      b_diag=quantile_atoms(spec["beta"], n),
                      seed=spec["seed"])
    weights = np.ones(n, dtype=complex)
    rows = []
    for r in range(spec["replicas"]):
        u = sample_haar(n, rng_stream(spec["seed"], 0xD1A6, n, r))
        h = build_h(es, u)
        for e in spec["e_grid"]:
            for eta in spec["eta_grid"]:
                z = SpectralParam(float(e), float(eta))
                ref = solve_subordination(mu_a, mu_b, z.z, spec["tol"],
                                          spec["max_iter"])
                snap = green(h, es, u, z)
                omega_a, omega_b = omega_slots(ref)
                _, _, z_all = all_row_quantities(snap)
                rows.append((n, spec["seed"], float(e), float(eta),
                             abs(local_law_error(snap, ref, weights)),
                             abs(snap.omega_a_c - omega_a),
                             abs(snap.omega_b_c - omega_b),
                             abs(snap.upsilon),
                             float(np.abs(z_all).max()),
                             abs(complex(z_all.mean())),
                             snap.psi))
    output.write_diag_csv(rows, _out(cfg, "diag.csv"))
    return EXIT_OK


_HANDLERS = {
    "convolve": _cmd_convolve,
    "density": _cmd_density,
    "bulk": _cmd_bulk,
    "sample": _cmd_sample,
    "rate": _cmd_rate,
    "locallaw": _cmd_locallaw,
    "twoatom": _cmd_twoatom,
    "diag": _cmd_diag,
}


def dispatch(cfg):
    """Run one validated CLI invocation; returns the process exit code."""
    try:
        return _HANDLERS[cfg.command](cfg)
    except (ValueError, FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: validation: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (SubordinationError, NumericalBudgetError, np.linalg.LinAlgError) as exc:
        print(f"error: numerical: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return EXIT_IO


def _build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-o", "--out", default=argparse.SUPPRESS,
                        help="output directory (default: current)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="override the config seed")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                        help="worker threads (default: FREECONV_THREADS or CPU count)")
    common.add_argument("-v", "--verbose", action="count",
                        default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(
        prog="freeconv", parents=[common],
        description="Free additive convolution and A + UBU* model diagnostics.",
        epilog="Grid flags use lo:hi:count (write --grid=-2:2:101 for a "
               "negative lower bound); eta schedules are decreasing comma "
               "lists such as 1e-2,5e-3,2.5e-3.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convolve", parents=[common],
                       help="density of mu1 boxplus mu2 on a grid")
    p.add_argument("measure1")
    p.add_argument("measure2")
    p.add_argument("--grid", required=True,
                   help="evaluation grid, lo:hi:count")
    p.add_argument("--eta-schedule", default=None,
                   help="decreasing comma list of probing scales")

    p = sub.add_parser("density", parents=[common],
                       help="eta-smoothed density of one measure")
    p.add_argument("measure1")
    p.add_argument("--grid", required=True)
    p.add_argument("--eta-schedule", default=None)

    p = sub.add_parser("bulk", parents=[common],
                       help="regular-bulk windows of the convolution")
    p.add_argument("measure1")
    p.add_argument("measure2")
    p.add_argument("--scan", required=True, help="scan grid, lo:hi:count")
    p.add_argument("--floor", type=float, default=0.01)
    p.add_argument("--cap", type=float, default=1e3)
    p.add_argument("--eta-schedule", default=None)

    p = sub.add_parser("sample", parents=[common],
                       help="sample one H and export its spectrum")
    p.add_argument("measure1")
    p.add_argument("measure2")
    p.add_argument("--n", type=int, required=True)

    for name in ("rate", "locallaw", "twoatom", "diag"):
        p = sub.add_parser(name, parents=[common],
                           help=f"run the {name} campaign from a config")
        p.add_argument("--config", required=True)
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        options = {}
        inputs = []
        for attr in ("measure1", "measure2"):
            if hasattr(args, attr):
                inputs.append(getattr(args, attr))
        if hasattr(args, "grid"):
            options["grid"] = _parse_grid(args.grid)
        if hasattr(args, "scan"):
            options["scan"] = _parse_grid(args.scan)
        if getattr(args, "eta_schedule", None):
            options["eta_schedule"] = _parse_schedule(args.eta_schedule)
        if hasattr(args, "floor"):
            options["floor"] = args.floor
            options["cap"] = args.cap
        if hasattr(args, "n"):
            options["n"] = args.n
        cfg = CliConfig(
            command=args.command, inputs=tuple(inputs),
            config_path=getattr(args, "config", None),
            out_dir=getattr(args, "out", "."),
            seed=getattr(args, "seed", None),
            threads=getattr(args, "threads", None),
            verbosity=getattr(args, "verbose", 0),
            options=options)
    except ValueError as exc:
        print(f"error: validation: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    code = dispatch(cfg)
    return code


if __name__ == "__main__":
    sys.exit(main())
