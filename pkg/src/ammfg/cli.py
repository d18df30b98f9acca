"""``ammfg`` command line: validate / hjb / mfg / game / nash-sweep."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
import time
from pathlib import Path

from . import __version__, streams
from .config import RunConfig, parse_config
from .errors import AmmfgError
from .game import GameConfig, nash_gap_sweep, simulate_game, MeanFieldFeedback
from .hjb import solve_hjb
from .mfg import solve_mfg, verify_solution
from .output import (EPSILON_COLUMNS, GAME_SUMMARY_COLUMNS, MFG_FLOW_COLUMNS, MFG_SUMMARY_COLUMNS,
                     VALUE_SURFACE_COLUMNS, epsilon_rows, game_summary_rows, mfg_flow_rows, mfg_summary_rows,
                     value_surface_rows, write_manifest, write_outputs)
from .pool import MeanFlow

SUBCOMMANDS = ("validate", "hjb", "mfg", "game", "nash-sweep")

log = logging.getLogger("ammfg")


def with_seed(cfg: RunConfig, seed: int | None) -> RunConfig:
    if seed is None:
        return cfg
    return dataclasses.replace(cfg, mfg=dataclasses.replace(cfg.mfg, seed=seed),
                               game=dataclasses.replace(cfg.game, seed=seed))


def _game_config(cfg: RunConfig) -> GameConfig:
    g = cfg.game
    return GameConfig(g.n, g.n_paths, g.seed, cfg.time, cfg.pool, cfg.control, cfg.cost, cfg.noise, cfg.law0, g.y0)


def _solve(cfg: RunConfig):
    init = MeanFlow.constant(cfg.time, cfg.init_qbar) if cfg.init_qbar else None
    return solve_mfg(cfg.pool, cfg.control, cfg.cost, cfg.noise, cfg.law0, cfg.time, cfg.grid, cfg.mfg, init)


def run_experiment(cfg: RunConfig, subcommand: str, out_dir) -> int:
    """Run one experiment, write its files and manifest, and return the exit status."""
    if subcommand not in SUBCOMMANDS:
        raise ValueError(f"unknown subcommand {subcommand!r}")
    out_dir = Path(out_dir)
    started = time.perf_counter()
    summary: dict = {}
    tables: dict = {}
    status = 0

    if subcommand == "hjb":
        flow = MeanFlow.constant(cfg.time, 0.0)
        surface = solve_hjb(cfg.pool, cfg.control, cfg.cost, cfg.noise, flow, cfg.grid)
        tables["value_surface.csv"] = (VALUE_SURFACE_COLUMNS, value_surface_rows(surface))
        summary["V0_min"] = float(surface.V[0].min())
        summary["V0_max"] = float(surface.V[0].max())
    elif subcommand in ("mfg", "game", "nash-sweep"):
        sol = _solve(cfg)
        summary["iterations"] = len(sol.history)
        summary["final_residual"] = sol.residuals[-1]
        summary["converged"] = sol.converged
        if subcommand == "mfg":
            rep = verify_solution(sol, cfg.pool, cfg.control, cfg.cost, cfg.noise, cfg.law0,
                                  cfg.mfg.seed, cfg.verify_paths)
            summary.update(best_response_gap=rep.gap, gap_se=rep.gap_se, control_w1=rep.control_w1,
                           state_ks=rep.state_ks)
            tables["mfg_flow.csv"] = (MFG_FLOW_COLUMNS, mfg_flow_rows(sol))
            tables["mfg_summary.csv"] = (MFG_SUMMARY_COLUMNS, mfg_summary_rows(sol, rep.gap))
            if not sol.converged:
                status = 5
        elif subcommand == "game":
            gc = _game_config(cfg)
            res = simulate_game(gc, [MeanFieldFeedback(sol.surface)] * gc.n)
            summary.update(pooled=res.pooled, pooled_se=res.pooled_se, min_reserve=res.min_reserve,
                           accounting_error=res.accounting_error)
            tables["game_summary.csv"] = (GAME_SUMMARY_COLUMNS, game_summary_rows(res))
        else:
            rows = nash_gap_sweep(_game_config(cfg), sol.surface, cfg.n_list, cfg.grid, cfg.game.n_c)
            summary["eps_hat"] = {str(r.n): r.eps_hat for r in rows}
            tables["epsilon.csv"] = (EPSILON_COLUMNS, epsilon_rows(rows))

    written = write_outputs(tables, out_dir)
    manifest = {
        "version": __version__,
        "subcommand": subcommand,
        "config": cfg.to_text(),
        "config_sha256": cfg.source_hash,
        "seeds": {"mfg": cfg.mfg.seed, "game": cfg.game.seed},
        "threads": streams.threads(),
        "wall_time_s": time.perf_counter() - started,
        "summary": summary,
        "outputs": [p.name for p in written],
        "status": status,
    }
    try:
        write_manifest(out_dir / "manifest.json", manifest)
    except BaseException:
        for p in written:
            p.unlink(missing_ok=True)
        raise
    return status


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ammfg", description="Mean-field trading game in a constant-product pool.")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", required=True, help="run configuration file")
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--threads", type=int, default=None, help="worker threads (default: $AMMFG_THREADS or 1)")
    ap.add_argument("--seed", type=int, default=None, help="override every seed in the config")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        if args.threads is not None and args.threads < 1:
            raise AmmfgError("--threads must be >= 1")
        streams.set_threads(args.threads)
        if args.seed is not None and args.seed < 0:
            raise AmmfgError("--seed must be >= 0")
        cfg = with_seed(parse_config(args.config), args.seed)
        status = run_experiment(cfg, args.subcommand, args.out)
    except AmmfgError as exc:
        code = exc.exit_code if type(exc) is not AmmfgError else 2
        category = exc.category if type(exc) is not AmmfgError else "usage"
        print(f"ammfg: error category={category}: {exc}", file=sys.stderr)
        return code
    finally:
        streams.set_threads(None)
    if status == 5:
        print("ammfg: error category=convergence: fixed point not reached within max_iter", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
