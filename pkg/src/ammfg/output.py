"""CSV and manifest writers.

Floats are written with 17 significant digits so they round-trip exactly;
files are written to a temporary name and renamed into place.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import OutputError

VALUE_SURFACE_COLUMNS = ("t", "x", "V", "dVdx", "policy")
MFG_FLOW_COLUMNS = ("iter", "t", "qbar", "w_min", "w_zero", "w_max", "residual")
MFG_SUMMARY_COLUMNS = ("iter", "residual", "best_response_gap")
EPSILON_COLUMNS = ("n", "eps_hat", "ci_lo", "ci_hi", "paths")
GAME_SUMMARY_COLUMNS = ("player", "j_hat", "se")


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return f"{float(v):.17g}"


def csv_text(columns, rows) -> str:
    out = [",".join(columns)]
    for row in rows:
        out.append(",".join(fmt(v) for v in row))
    return "\n".join(out) + "\n"


def atomic_write(path: Path, text: str) -> Path:
    path = Path(path)
    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return path


def value_surface_rows(surface):
    t = surface.tgrid.nodes
    x = surface.sgrid.nodes
    for j, tj in enumerate(t):
        for i, xi in enumerate(x):
            yield tj, xi, surface.V[j, i], surface.dVdx[j, i], surface.policy[j, i]


def mfg_flow_rows(solution):
    t = solution.iterate.grid.nodes
    for rec in solution.history:
        for j, tj in enumerate(t):
            w = rec.weights[j]
            yield rec.iteration, tj, rec.qbar[j], w[0], w[1], w[2], rec.residual


def mfg_summary_rows(solution, gap):
    last = len(solution.history) - 1
    for k, rec in enumerate(solution.history):
        yield rec.iteration, rec.residual, gap if k == last else None


def epsilon_rows(rows):
    for r in rows:
        yield r.n, r.eps_hat, r.ci_lo, r.ci_hi, r.paths


def game_summary_rows(result):
    for i, (j, se) in enumerate(zip(result.j_hat, result.se)):
        yield i, j, se


def write_outputs(results: dict, out_dir) -> list[Path]:
    """Write ``{filename: (columns, rows)}`` tables into ``out_dir``.

    Either every file is written or none is left behind.
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create output directory {out_dir}: {exc}") from exc
    written: list[Path] = []
    try:
        for name, (columns, rows) in results.items():
            written.append(atomic_write(out_dir / name, csv_text(columns, rows)))
    except BaseException:
        for p in written:
            p.unlink(missing_ok=True)
        raise
    return written


def write_manifest(path: Path, manifest: dict) -> Path:
    return atomic_write(path, json.dumps(manifest, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")
