"""Atomic emission of the fixed output file formats.

Every file is written to a temporary sibling and renamed into place, so an
interrupted run never leaves a truncated artifact.  Formats:

* ``result.json``   full experiment result (config echo included)
* ``errors.csv``    header ``N,replica,error``
* ``scan.csv``      header ``E,eta,statistic,value,psi,verdict``
* ``density.csv``   header ``E,density``
* ``diag.csv``      header ``N,seed,E,eta,m_err,omega_a_err,omega_b_err,upsilon,max_z_i,avg_z_i,psi``
* ``spectrum.csv``  one eigenvalue per line, no header
"""

import json
import os
import tempfile
from dataclasses import asdict

__all__ = [
    "atomic_write_text",
    "write_result_json",
    "write_errors_csv",
    "write_scan_csv",
    "write_density_csv",
    "write_diag_csv",
    "write_spectrum_csv",
]


def atomic_write_text(path, text):
    """Write text to ``path`` through a same-directory temp file + rename."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if hasattr(obj, "item"):
        return obj.item()
    return obj


def result_to_dict(result):
    d = {
        "per_n_errors": {str(n): list(map(float, v))
                         for n, v in result.per_n_errors.items()},
        "slope": result.slope,
        "slope_ci": list(result.slope_ci) if result.slope_ci else None,
        "domination_verdicts": [
            {k: _jsonable(v) for k, v in asdict(s).items()}
            for s in result.domination_verdicts
        ],
        "runtime_s": result.runtime_s,
        "config_echo": _jsonable(result.config_echo),
        "scan_rows": [list(map(_jsonable, row)) for row in result.scan_rows],
        "stat_samples": [
            {"n": int(n), "e": float(e), "eta": float(eta), "statistic": stat,
             "samples": list(map(float, data))}
            for (n, e, eta, stat), data in result.stat_samples.items()
        ],
        "summary": _jsonable(result.summary),
        "notes": list(result.notes),
        "dropped": result.dropped,
        "partial": result.partial,
    }
    return d


def write_result_json(result, path):
    atomic_write_text(path, json.dumps(result_to_dict(result), indent=1,
                                       sort_keys=True) + "\n")


def write_errors_csv(result, path):
    lines = ["N,replica,error"]
    for n in sorted(result.per_n_errors):
        for r, err in enumerate(result.per_n_errors[n]):
            lines.append(f"{n},{r},{err!r}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_scan_csv(result, path):
    lines = ["E,eta,statistic,value,psi,verdict"]
    for e, eta, stat, value, psi, verdict in result.scan_rows:
        lines.append(f"{float(e)!r},{float(eta)!r},{stat},{float(value)!r},"
                     f"{float(psi)!r},{verdict}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_density_csv(grid_density, path):
    lines = ["E,density"]
    for e, v in zip(grid_density.grid, grid_density.values):
        lines.append(f"{float(e)!r},{float(v)!r}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_diag_csv(rows, path):
    header = ("N,seed,E,eta,m_err,omega_a_err,omega_b_err,upsilon,"
              "max_z_i,avg_z_i,psi")
    lines = [header]
    for row in rows:
        lines.append(",".join(repr(float(x)) if isinstance(x, float) else str(x)
                              for x in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_spectrum_csv(eigenvalues, path):
    atomic_write_text(path, "\n".join(repr(float(x)) for x in eigenvalues) + "\n")
