"""Run configuration, read from YAML."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from decimal import Decimal
from pathlib import Path

import yaml


class ConfigError(ValueError):
    pass


def canonical_R(value) -> str:
    """Decimal string used as the R key everywhere (no float round trip)."""
    d = Decimal(str(value)).normalize()
    text = format(d, "f")
    return text


@dataclass
class GridSpec:
    start: str = "60"
    stop: str = "150"
    step: str = "6"
    test: list = field(default_factory=list)

    def training(self) -> list:
        start, stop, step = Decimal(self.start), Decimal(self.stop), Decimal(self.step)
        out, r = [], start
        while r <= stop:
            out.append(canonical_R(r))
            r += step
        return out

    def test_points(self) -> list:
        return [canonical_R(r) for r in self.test]


@dataclass
class RunConfig:
    grid: GridSpec = field(default_factory=GridSpec)
    omega_min: int = 7
    omega_max: int = 12
    method: str = "HS"              # HS | RS | both
    formula: str = "volume"         # volume | surface | both
    hs_max_order: int = 150
    rs_max_order: int = 600
    tol_digits: int = 20
    digits: int | None = None       # None: per-R default rule
    output: str = "out"
    cache: bool = True
    jobs: int = 1
    fit_L: int | None = 8           # None: choose from fit_candidates on the test set
    fit_candidates: list = field(default_factory=lambda: [4, 5, 6, 7, 8, 9, 10])
    diagnose_grid: int = 41         # points on the internuclear axis

    def __post_init__(self):
        if isinstance(self.grid, dict):
            self.grid = GridSpec(**{k: (str(v) if k != "test" else list(v)) for k, v in self.grid.items()})
        self.validate()

    def validate(self):
        if self.method not in ("HS", "RS", "both"):
            raise ConfigError(f"method must be HS, RS or both, got {self.method!r}")
        if self.formula not in ("volume", "surface", "both"):
            raise ConfigError(f"formula must be volume, surface or both, got {self.formula!r}")
        if not 0 <= self.omega_min <= self.omega_max:
            raise ConfigError("need 0 <= omega_min <= omega_max")
        if self.digits is not None and self.digits < 16:
            raise ConfigError("digits must be >= 16")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        try:
            pts = self.grid.training() + self.grid.test_points()
        except Exception as exc:
            raise ConfigError(f"bad grid: {exc}") from exc
        if not self.grid.training():
            raise ConfigError("empty training grid")
        if any(Decimal(r) < 5 for r in pts):
            raise ConfigError("supported R starts at 5 bohr")
        if set(self.grid.training()) & set(self.grid.test_points()):
            raise ConfigError("training and test grids overlap")
        if self.fit_L is not None and self.fit_L < 0:
            raise ConfigError("fit_L must be nonnegative")

    @property
    def omegas(self) -> list:
        return list(range(self.omega_min, self.omega_max + 1))

    @property
    def methods(self) -> list:
        return ["HS", "RS"] if self.method == "both" else [self.method]

    @property
    def formulas(self) -> list:
        return ["volume", "surface"] if self.formula == "both" else [self.formula]

    def all_R(self) -> list:
        return self.grid.training() + self.grid.test_points()

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(Path(path)) as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a mapping")
        return cls.from_dict(data)
