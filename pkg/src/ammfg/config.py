"""Run configuration: sectioned ``key = value`` text files.

Grammar (``configparser`` dialect, no interpolation)::

    # comment            ; comment
    [section]
    key = value

Numbers are plain decimal/scientific literals, ``n_list`` is a comma
separated list of integers, ``family``/``mode`` are bare words. Unknown
sections or keys are rejected. See README for every key and its default.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import AdmissibilityError, ConfigError
from .hjb import SpatialGrid, default_spatial_grid
from .laws import InitialLaw
from .mfg import FixedPointConfig
from .pool import ControlInterval, PoolConfig, TimeGrid, validate_admissibility
from .rewards import CostModel, NoiseConfig, validate_growth_bound

REQUIRED = object()

# section -> key -> (type, default); REQUIRED marks mandatory keys.
SCHEMA: dict[str, dict[str, tuple]] = {
    "pool": {"k": (float, REQUIRED), "x0": (float, REQUIRED), "eps0": (float, REQUIRED), "sigma0": (float, 0.0)},
    "control": {"a_min": (float, REQUIRED), "a_max": (float, REQUIRED)},
    "cost": {"family": (str, REQUIRED), "phi_h": (float, 0.0), "phi_l": (float, 0.0), "c_l": (float, 0.0),
             "c1": (float, 1.0)},
    "noise": {"sigma": (float, REQUIRED)},
    "time": {"horizon": (float, REQUIRED), "steps": (int, REQUIRED)},
    "grid": {"x_lo": (float, None), "x_hi": (float, None), "n_x": (int, 201)},
    "law0": {"family": (str, "dirac"), "mean": (float, 0.0), "sd": (float, 1.0), "lo": (float, -1.0),
             "hi": (float, 1.0), "c": (float, 0.0)},
    "mfg": {"damping": (float, 0.5), "tol": (float, None), "max_iter": (int, 50), "particles": (int, 20000),
            "mode": (str, "picard_damped"), "seed": (int, 0), "verify_paths": (int, 100000),
            "init_qbar": (float, 0.0)},
    "game": {"n": (int, 8), "n_paths": (int, 10000), "seed": (int, 0), "y0": (float, 0.0), "n_c": (int, 51)},
    "sweep": {"n_list": (tuple, (2, 8, 32, 128))},
}


@dataclass(frozen=True)
class GameSettings:
    n: int = 8
    n_paths: int = 10000
    seed: int = 0
    y0: float = 0.0
    n_c: int = 51


@dataclass(frozen=True)
class RunConfig:
    pool: PoolConfig
    control: ControlInterval
    cost: CostModel
    noise: NoiseConfig
    time: TimeGrid
    grid: SpatialGrid
    law0: InitialLaw
    mfg: FixedPointConfig
    verify_paths: int
    game: GameSettings
    n_list: tuple[int, ...]
    init_qbar: float = 0.0
    source_hash: str = field(default="", compare=False)

    def to_text(self) -> str:
        """Echo with every default resolved; parsing the echo gives back an equal config."""
        f = repr
        lines = [
            "[pool]", f"k = {f(self.pool.k)}", f"x0 = {f(self.pool.x0)}", f"eps0 = {f(self.pool.eps0)}",
            f"sigma0 = {f(self.pool.sigma0)}", "",
            "[control]", f"a_min = {f(self.control.a_min)}", f"a_max = {f(self.control.a_max)}", "",
            "[cost]", f"family = {self.cost.family.value}", f"phi_h = {f(self.cost.phi_h)}",
            f"phi_l = {f(self.cost.phi_l)}", f"c_l = {f(self.cost.c_l)}", f"c1 = {f(self.cost.c1)}", "",
            "[noise]", f"sigma = {f(self.noise.sigma)}", "",
            "[time]", f"horizon = {f(self.time.horizon)}", f"steps = {self.time.steps}", "",
            "[grid]", f"x_lo = {f(float(self.grid.x_lo))}", f"x_hi = {f(float(self.grid.x_hi))}",
            f"n_x = {self.grid.n_x}", "",
            "[law0]", f"family = {self.law0.family.value}", f"mean = {f(self.law0.mean)}", f"sd = {f(self.law0.sd)}",
            f"lo = {f(self.law0.lo)}", f"hi = {f(self.law0.hi)}", f"c = {f(self.law0.c)}", "",
            "[mfg]", f"damping = {f(self.mfg.damping)}", f"tol = {f(self.mfg.tolerance(self.control))}",
            f"max_iter = {self.mfg.max_iter}", f"particles = {self.mfg.particles}",
            f"mode = {self.mfg.mode.value}", f"seed = {self.mfg.seed}", f"verify_paths = {self.verify_paths}",
            f"init_qbar = {f(self.init_qbar)}", "",
            "[game]", f"n = {self.game.n}", f"n_paths = {self.game.n_paths}", f"seed = {self.game.seed}",
            f"y0 = {f(self.game.y0)}", f"n_c = {self.game.n_c}", "",
            "[sweep]", f"n_list = {', '.join(str(n) for n in self.n_list)}", "",
        ]
        return "\n".join(lines)


def _line_of(text: str, section: str, key: str) -> int | None:
    current = None
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[(.+)\]$", s)
        if m:
            current = m.group(1).strip()
        elif current == section and re.match(rf"{re.escape(key)}\s*[=:]", s):
            return no
    return None


def _convert(kind, raw: str, where: str):
    raw = raw.strip()
    if kind is float:
        return float(raw)
    if kind is int:
        v = float(raw)
        if v != int(v):
            raise ValueError(f"not an integer: {raw}")
        return int(v)
    if kind is tuple:
        return tuple(int(tok) for tok in raw.split(",") if tok.strip())
    return raw


def parse_text(text: str, name: str = "<config>") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=name)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"{name}: line {exc.lineno}: expected a [section] header before {exc.line.strip()!r}") from exc
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigError(f"{name}: line {lineno}: cannot parse {line.strip()!r}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"{name}: {exc}") from exc

    values: dict[str, dict] = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{name}: unknown section [{section}]")
        for key in cp[section]:
            if key not in SCHEMA[section]:
                raise ConfigError(f"{name}: line {_line_of(text, section, key)}: unknown key {section}.{key}")
    for section, keys in SCHEMA.items():
        out = values[section] = {}
        for key, (kind, default) in keys.items():
            if cp.has_option(section, key):
                raw = cp.get(section, key)
                try:
                    out[key] = _convert(kind, raw, f"{section}.{key}")
                except ValueError as exc:
                    raise ConfigError(
                        f"{name}: line {_line_of(text, section, key)}: bad value for {section}.{key}: {raw!r}"
                    ) from exc
            elif default is REQUIRED:
                raise ConfigError(f"{name}: missing required key {section}.{key}")
            else:
                out[key] = default
    return build(values, hashlib.sha256(text.encode()).hexdigest())


def build(v: dict[str, dict], source_hash: str = "") -> RunConfig:
    try:
        pool = PoolConfig(**v["pool"])
        ctrl = ControlInterval(**v["control"])
        cost = CostModel(**v["cost"])
        noise = NoiseConfig(**v["noise"])
        tgrid = TimeGrid(**v["time"])
        law0 = InitialLaw(**v["law0"])
        g = v["grid"]
        if g["x_lo"] is None or g["x_hi"] is None:
            d = default_spatial_grid(law0, ctrl, noise, tgrid.horizon, g["n_x"])
            grid = SpatialGrid(float(d.x_lo) if g["x_lo"] is None else g["x_lo"],
                               float(d.x_hi) if g["x_hi"] is None else g["x_hi"], g["n_x"])
        else:
            grid = SpatialGrid(g["x_lo"], g["x_hi"], g["n_x"])
        m = dict(v["mfg"])
        verify_paths = m.pop("verify_paths")
        init_qbar = m.pop("init_qbar")
        fp = FixedPointConfig(**m)
        fp = dataclasses.replace(fp, tol=fp.tolerance(ctrl))
        game = GameSettings(**v["game"])
        n_list = tuple(v["sweep"]["n_list"])
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    if game.n < 1 or game.n_paths < 100 or game.seed < 0 or game.n_c < 2:
        raise ConfigError(f"invalid [game] settings: {game}")
    if verify_paths < 100:
        raise ConfigError(f"mfg.verify_paths must be >= 100, got {verify_paths}")
    if not n_list or any(n < 1 for n in n_list) or any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ConfigError(f"sweep.n_list must be a non-empty ascending list of positive integers, got {n_list}")

    if not ctrl.a_min <= init_qbar <= ctrl.a_max:
        raise ConfigError(f"mfg.init_qbar = {init_qbar} outside [{ctrl.a_min}, {ctrl.a_max}]")

    rep = validate_admissibility(pool, ctrl, tgrid)
    if not rep.passed:
        raise AdmissibilityError(rep.message)
    growth = validate_growth_bound(cost)
    if not growth.passed:
        raise AdmissibilityError(growth.message)
    return RunConfig(pool, ctrl, cost, noise, tgrid, grid, law0, fp, verify_paths, game, n_list, init_qbar,
                     source_hash)


def parse_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_text(text, str(path))
