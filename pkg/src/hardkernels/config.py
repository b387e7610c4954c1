"""Experiment configuration.

Configs are flat ``key = value`` text files (``#`` starts a comment)::

    loss = absolute
    regime = norm
    budget = 245
    d = 64
    m = auto
    y = inv_sqrt_d
    learner = subsample
    trials = 500
    seed = 0

Keys prefixed ``learner.`` become learner parameters.  ``sweep`` names the
axis (``budget`` or ``lam``) and ``sweep_values`` lists its points.
Dimension rules resolve per sweep point:

``d``: an integer, ``budget`` (``ceil(sqrt(100 B / 3))``), ``hinge``
(``floor(1 / (2 lam))``) or ``squared`` (``ceil(sqrt(100 / (3 lam^2)))``).
``m``: an integer or ``auto`` (``128 d``).
``y``: a number, ``inv_sqrt_d`` (``1/sqrt(d)``) or ``half_inv_lam_d``
(``1 / (2 lam d)``).
"""

from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass, field

from .learners import LearnerSpec
from .losses import KINDS as LOSS_KINDS
from .solvers import Objective

D_RULES = ("budget", "hinge", "squared")
Y_RULES = ("inv_sqrt_d", "half_inv_lam_d")
SWEEP_AXES = ("budget", "lam")


def d_for_budget(budget: int) -> int:
    return math.ceil(math.sqrt(100.0 * budget / 3.0))


@dataclass(frozen=True)
class Point:
    """One fully resolved experiment setting."""

    loss: str
    regime: str
    norm_bound: float
    lam: float
    d: int
    m: int
    budget: int
    y: float

    @property
    def objective(self) -> Objective:
        if self.regime == "norm":
            return Objective.constrained(self.loss, self.norm_bound)
        return Objective.soft(self.loss, self.lam)


@dataclass(frozen=True)
class ExperimentConfig:
    loss: str = "absolute"
    regime: str = "norm"
    norm_bound: float = 2.0
    lam: float = 0.0
    d: int | str = 16
    m: int | str = "auto"
    budget: int = 16
    y: float | str = "inv_sqrt_d"
    learner: LearnerSpec = field(default_factory=lambda: LearnerSpec("subsample"))
    trials: int = 1000
    seed: int = 0
    sweep: str | None = None
    sweep_values: tuple = ()
    output: str | None = None

    def __post_init__(self):
        if self.loss not in LOSS_KINDS:
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.regime not in ("norm", "soft"):
            raise ValueError("regime must be 'norm' or 'soft'")
        if self.regime == "norm" and self.loss != "absolute":
            raise ValueError("the norm-constrained regime is defined for the absolute loss only")
        if isinstance(self.d, str) and self.d not in D_RULES:
            raise ValueError(f"d must be an integer or one of {D_RULES}")
        if isinstance(self.m, str) and self.m != "auto":
            raise ValueError("m must be an integer or 'auto'")
        if isinstance(self.y, str) and self.y not in Y_RULES:
            raise ValueError(f"y must be a number or one of {Y_RULES}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.sweep is not None:
            if self.sweep not in SWEEP_AXES:
                raise ValueError(f"sweep must be one of {SWEEP_AXES}")
            if not self.sweep_values:
                raise ValueError("sweep_values must be nonempty")

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)

    def points(self) -> list[Point]:
        if self.sweep is None:
            return [self.resolve()]
        return [self.resolve(v) for v in self.sweep_values]

    def resolve(self, sweep_value=None) -> Point:
        budget, lam = self.budget, self.lam
        if self.sweep == "budget" and sweep_value is not None:
            budget = int(sweep_value)
        elif self.sweep == "lam" and sweep_value is not None:
            lam = float(sweep_value)
        if self.regime == "norm":
            lam = 0.0
        elif not lam > 0:
            raise ValueError("soft regime needs lam > 0")

        if self.d == "budget":
            d = d_for_budget(budget)
        elif self.d == "hinge":
            d = math.floor(1.0 / (2.0 * lam))
        elif self.d == "squared":
            d = math.ceil(math.sqrt(100.0 / (3.0 * lam * lam)))
        else:
            d = int(self.d)
        m = 128 * d if self.m == "auto" else int(self.m)

        if self.y == "inv_sqrt_d":
            y = 1.0 / math.sqrt(d)
        elif self.y == "half_inv_lam_d":
            y = 1.0 / (2.0 * lam * d)
        else:
            y = float(self.y)
        if self.loss == "hinge" and abs(y) != 1.0:
            raise ValueError("hinge targets must be +-1")
        return Point(self.loss, self.regime, float(self.norm_bound), float(lam),
                     int(d), int(m), int(budget), float(y))

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["learner"] = self.learner.to_dict()
        out["sweep_values"] = list(self.sweep_values)
        return out


def _coerce(value: str):
    v = value.strip()
    for cast in (int, float):
        try:
            return cast(v)
        except ValueError:
            pass
    return v


_INT_KEYS = {"budget", "trials", "seed"}
_FLOAT_KEYS = {"norm_bound", "lam"}


def config_from_mapping(items: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Build a config from string-valued ``key -> value`` pairs."""
    base = base or ExperimentConfig()
    kw: dict = {}
    learner = base.learner.to_dict()
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    for key, raw in items.items():
        if raw is None:
            continue
        key = key.strip().lower().replace("-", "_")
        raw = str(raw).strip()
        if key.startswith("learner."):
            learner[key.split(".", 1)[1]] = _coerce(raw)
        elif key == "learner":
            learner = {"kind": raw}
        elif key == "sweep_values":
            kw[key] = tuple(_coerce(v) for v in raw.replace(",", " ").split())
        elif key == "sweep":
            kw[key] = None if raw.lower() in ("", "none") else raw
        elif key in _INT_KEYS:
            kw[key] = int(raw)
        elif key in _FLOAT_KEYS:
            kw[key] = float(raw)
        elif key in names:
            kw[key] = _coerce(raw)
        else:
            raise ValueError(f"unknown config key {key!r}")
    kw["learner"] = LearnerSpec.parse(learner)
    return base.replace(**kw)


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    with open(path) as fh:
        parser.read_string("[experiment]\n" + fh.read())
    items = dict(parser["experiment"])
    items.update(overrides or {})
    return config_from_mapping(items)


def dump_config(cfg: ExperimentConfig) -> str:
    lines = []
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if f.name == "learner":
            lines.append(f"learner = {v.kind}")
            lines.extend(f"learner.{k} = {p}" for k, p in v.params.items())
        elif f.name == "sweep_values":
            lines.append("sweep_values = " + ", ".join(str(x) for x in v))
        elif v is not None:
            lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
