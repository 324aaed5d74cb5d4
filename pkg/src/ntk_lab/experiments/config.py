"""Experiment configuration and its flat key-value text format.

Grammar, one entry per line::

    # comment                      (also allowed after a value)
    key = value
    key = v1, v2, v3               (list-valued keys)

Keys are case-sensitive and may appear in any order, each at most once.
Omitted keys take the scenario default.  Values are bare: integers, reals
(``9/7`` style fractions and ``pi`` multiples are accepted for reals), paths
and names.  Errors raise :class:`ConfigParse` carrying the 1-based line number.
"""

from __future__ import annotations

import math
import re
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from ..errors import ConfigParse, InvalidConfig, UnknownScenario, UnknownTruth
from .data import TRUTHS

SCENARIOS = (
    "min_eig",
    "edr",
    "sandwich",
    "interp_gap",
    "early_stop",
    "overfit_floor",
    "uniform_kernel",
    "uniform_function",
    "stopping_rules",
)
_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    seed: int = 0
    n_list: tuple[int, ...] = (16,)
    m_list: tuple[int, ...] = (256,)
    sigma: float = 0.0
    alpha_list: tuple[float, ...] = (1.0,)
    t_star_c: float = 1.0
    corruption_p_list: tuple[float, ...] = (0.0,)
    grid_n: int = 2048
    quad_n: int = 4097
    j_max: int = 40
    output_dir: str = "results"
    seeds: int = 1  # independent repetitions per grid cell
    eta: float = 0.0  # 0 selects the scenario's step-size policy
    eta_scale: float = 0.5  # eta = eta_scale * n / lambda_max(NNK) when eta = 0
    max_steps: int = 100_000
    n_test: int = 1024
    eval_every: int = 100
    mc_draws: int = 10_000
    truth: str = "kernel_mix"
    time_budget_s: float = 0.0  # wall-clock cap for training scenarios, 0 = none

    def __post_init__(self):
        validate(self)


_LIST_INT = {"n_list", "m_list"}
_LIST_REAL = {"alpha_list", "corruption_p_list"}
_INT = {"seed", "grid_n", "quad_n", "j_max", "seeds", "max_steps", "n_test", "eval_every", "mc_draws"}
_REAL = {"sigma", "t_star_c", "eta", "eta_scale", "time_budget_s"}
_STR = {"name", "output_dir", "truth"}
KEYS = _LIST_INT | _LIST_REAL | _INT | _REAL | _STR


def validate(cfg: ExperimentConfig) -> None:
    """Raise InvalidConfig describing the first violated invariant."""
    if cfg.name not in SCENARIOS:
        raise UnknownScenario(f"unknown scenario {cfg.name!r}")
    if cfg.truth not in TRUTHS:
        raise UnknownTruth(f"unknown truth {cfg.truth!r}")
    for key in ("n_list", "m_list", "alpha_list", "corruption_p_list"):
        if len(getattr(cfg, key)) == 0:
            raise InvalidConfig(f"{key} must be nonempty")
    for key in ("n_list", "m_list"):
        if any(v < 1 for v in getattr(cfg, key)):
            raise InvalidConfig(f"{key} entries must be >= 1")
    if any(not 0.0 <= p <= 1.0 for p in cfg.corruption_p_list):
        raise InvalidConfig("corruption_p_list entries must lie in [0, 1]")
    if not 0 <= cfg.seed <= _U64:
        raise InvalidConfig("seed must be an unsigned 64-bit integer")
    for key in ("sigma", "eta", "time_budget_s"):
        if getattr(cfg, key) < 0:
            raise InvalidConfig(f"{key} must be >= 0")
    for key in ("t_star_c", "eta_scale"):
        if getattr(cfg, key) <= 0:
            raise InvalidConfig(f"{key} must be > 0")
    for key in ("grid_n", "quad_n", "j_max", "seeds", "max_steps", "n_test", "eval_every", "mc_draws"):
        if getattr(cfg, key) < 1:
            raise InvalidConfig(f"{key} must be >= 1")


# desk-scale defaults per scenario
DEFAULTS: dict[str, dict] = {
    "min_eig": dict(n_list=tuple(2**k for k in range(3, 11))),
    "edr": dict(alpha_list=(1.0, 9.0 / 7.0), j_max=40, grid_n=2000),
    "sandwich": dict(n_list=(32,), seeds=50),
    "interp_gap": dict(n_list=tuple(range(100, 1001, 100))),
    "early_stop": dict(n_list=(128, 256, 512, 1024, 2048), sigma=0.5, seeds=20, t_star_c=1.0),
    "overfit_floor": dict(n_list=(128, 256, 512, 1024, 2048), sigma=0.5, seeds=20),
    "uniform_kernel": dict(n_list=(16,), m_list=(64, 4096), seeds=5, grid_n=64),
    "uniform_function": dict(n_list=(16,), m_list=(256, 4096), seeds=3, grid_n=256, eta=0.01),
    "stopping_rules": dict(
        n_list=(256,),
        m_list=(2048,),
        corruption_p_list=(0.0, 0.3, 0.6),
        seeds=3,
        eta_scale=1.8,
        max_steps=400_000,
        n_test=1024,
        eval_every=100,
    ),
}


def default_config(name: str, **overrides) -> ExperimentConfig:
    if name not in SCENARIOS:
        raise UnknownScenario(f"unknown scenario {name!r}; expected one of {', '.join(SCENARIOS)}")
    return ExperimentConfig(name=name, **{**DEFAULTS[name], **overrides})


_FRACTION = re.compile(r"^\s*([-+]?[0-9.eE+-]+)\s*/\s*([0-9.eE+-]+)\s*$")


def _real(text: str) -> float:
    t = text.strip()
    m = _FRACTION.match(t)
    if m:
        return float(m.group(1)) / float(m.group(2))
    if t.endswith("pi"):
        head = t[:-2].strip().rstrip("*").strip()
        return (float(head) if head else 1.0) * math.pi
    value = float(t)
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {t!r}")
    return value


def _int(text: str) -> int:
    t = text.strip().replace("_", "")
    return int(t, 0)


def _convert(key: str, raw: str):
    if key in _LIST_INT:
        return tuple(_int(v) for v in raw.split(",") if v.strip())
    if key in _LIST_REAL:
        return tuple(_real(v) for v in raw.split(",") if v.strip())
    if key in _INT:
        return _int(raw)
    if key in _REAL:
        return _real(raw)
    return raw.strip()


def parse_config(text: str, *, name: str | None = None) -> ExperimentConfig:
    """Parse config text; ``name`` (e.g. from the command line) fills a missing ``name``."""
    values: dict[str, object] = {}
    lines: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigParse(f"expected 'key = value', got {body!r}", lineno)
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in KEYS:
            raise ConfigParse(f"unknown key {key!r}", lineno)
        if key in values:
            raise ConfigParse(f"duplicate key {key!r} (first on line {lines[key]})", lineno)
        if not raw:
            raise ConfigParse(f"missing value for {key!r}", lineno)
        try:
            values[key] = _convert(key, raw)
        except ValueError as exc:
            raise ConfigParse(f"bad value for {key!r}: {exc}", lineno) from None
        lines[key] = lineno

    scenario = values.pop("name", name)
    if scenario is None:
        raise ConfigParse("missing 'name'")
    if name is not None and scenario != name:
        raise ConfigParse(f"config is for {scenario!r}, not {name!r}", lines.get("name"))
    if scenario not in SCENARIOS:
        raise UnknownScenario(f"unknown scenario {scenario!r}; expected one of {', '.join(SCENARIOS)}")
    try:
        return default_config(scenario, **values)
    except InvalidConfig as exc:
        key = next((k for k in lines if re.match(rf"{k}\b", str(exc))), None)
        raise ConfigParse(str(exc), lines.get(key)) from None


def load_config(path, *, name: str | None = None) -> ExperimentConfig:
    text = Path(path).read_text(encoding="utf-8")
    return parse_config(text, name=name)


def _format(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(cfg: ExperimentConfig) -> str:
    """Text form that :func:`parse_config` reads back to an equal config."""
    return "".join(f"{f.name} = {_format(getattr(cfg, f.name))}\n" for f in fields(cfg))


def config_dict(cfg: ExperimentConfig) -> dict:
    return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(cfg).items()}

