"""Deterministic generator of sensor-shaped datasets.

Produces a measures block (single reading per sensor, shared latent factor,
optionally heavy-tailed) and a histogram block (per-sensor binned counts,
non-negative, bins correlated through a per-row intensity), with an extreme
class imbalance and a configurable missingness plan.  The unmasked ground
truth comes back alongside the masked dataset so imputation quality can be
scored exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data_model import LabeledDataset, Table
from .errors import ConfigError


@dataclass
class MissingnessRule:
    """Mask one column group at a given rate.

    mechanism "mcar" masks cells independently; "mar" makes the masking
    probability increase with the rank of a fully observed driver column,
    so missingness is correlated with observed data but never with the
    masked value itself.
    """

    columns: str | list[str]        # "measures" | "histogram" | "all" | names
    mechanism: str = "mcar"
    rate: float = 0.1
    driver: str | None = None       # mar only; defaults to the first untargeted measure

    def __post_init__(self):
        if self.mechanism not in ("mcar", "mar"):
            raise ConfigError(f"unknown missingness mechanism {self.mechanism!r}")
        if not 0.0 <= self.rate <= 1.0:
            raise ConfigError(f"rate must be in [0,1], got {self.rate}")

    def to_dict(self) -> dict:
        return {"columns": self.columns, "mechanism": self.mechanism,
                "rate": self.rate, "driver": self.driver}


@dataclass
class SyntheticSpec:
    n_rows: int = 6000
    n_measures: int = 20
    n_hist_sensors: int = 7
    bins_per_sensor: int = 10
    positive_fraction: float = 0.0167
    n_informative: int = 5          # leading measure columns carry class signal
    n_informative_hist: int = 2     # leading histogram sensors carry class signal
    signal: float = 1.5             # class-1 latent mean shift, in latent std units
    correlation: float = 0.6        # shared-factor loading across measure columns
    marginal: str = "lognormal"     # "lognormal" | "gaussian"
    missingness: list[MissingnessRule] = field(default_factory=list)
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.positive_fraction < 1.0:
            raise ConfigError("positive_fraction must be in (0,1)")
        if self.marginal not in ("lognormal", "gaussian"):
            raise ConfigError(f"unknown marginal {self.marginal!r}")
        if not 0.0 <= self.correlation < 1.0:
            raise ConfigError("correlation must be in [0,1)")
        # informative counts adapt to small blocks rather than erroring
        self.n_informative = min(self.n_informative, self.n_measures)
        self.n_informative_hist = min(self.n_informative_hist,
                                      self.n_hist_sensors)

    def measure_names(self) -> list[str]:
        return [f"sensor{j + 1}_measure" for j in range(self.n_measures)]

    def histogram_names(self) -> list[str]:
        base = self.n_measures
        return [f"sensor{base + s + 1}_histogram_bin{b}"
                for s in range(self.n_hist_sensors)
                for b in range(self.bins_per_sensor)]

    def informative_columns(self) -> list[str]:
        cols = self.measure_names()[:self.n_informative]
        hist = self.histogram_names()
        for s in range(min(self.n_informative_hist, self.n_hist_sensors)):
            cols.extend(hist[s * self.bins_per_sensor:(s + 1) * self.bins_per_sensor])
        return cols

    def manifest(self) -> dict:
        return {
            "n_rows": self.n_rows,
            "n_measures": self.n_measures,
            "n_hist_sensors": self.n_hist_sensors,
            "bins_per_sensor": self.bins_per_sensor,
            "positive_fraction": self.positive_fraction,
            "signal": self.signal,
            "correlation": self.correlation,
            "marginal": self.marginal,
            "informative_columns": self.informative_columns(),
            "missingness": [r.to_dict() for r in self.missingness],
            "seed": self.seed,
        }


def _resolve_group(rule: MissingnessRule, spec: SyntheticSpec) -> list[str]:
    if isinstance(rule.columns, str):
        if rule.columns == "measures":
            return spec.measure_names()
        if rule.columns == "histogram":
            return spec.histogram_names()
        if rule.columns == "all":
            return spec.measure_names() + spec.histogram_names()
        return [rule.columns]
    return list(rule.columns)


def generate(spec: SyntheticSpec) -> tuple[LabeledDataset, Table]:
    """Build (masked dataset, complete ground truth) from a spec.

    Identical specs produce byte-identical outputs.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.n_rows

    n_pos = int(np.floor(n * spec.positive_fraction + 0.5))
    n_pos = min(max(n_pos, 1), n - 1)
    y = np.zeros(n, dtype=np.int64)
    y[rng.permutation(n)[:n_pos]] = 1

    blocks = []
    names = []

    if spec.n_measures:
        factor = rng.normal(size=n)
        rho = spec.correlation
        z = rho * factor[:, None] + np.sqrt(1.0 - rho * rho) * rng.normal(
            size=(n, spec.n_measures))
        z[:, :spec.n_informative] += spec.signal * y[:, None]
        if spec.marginal == "lognormal":
            mu = rng.uniform(0.0, 6.0, size=spec.n_measures)
            sigma = rng.uniform(0.4, 1.2, size=spec.n_measures)
            block = np.exp(mu + sigma * z)
        else:
            mu = rng.uniform(-2.0, 2.0, size=spec.n_measures)
            sigma = rng.uniform(0.5, 2.0, size=spec.n_measures)
            block = mu + sigma * z
        blocks.append(block)
        names.extend(spec.measure_names())

    for s in range(spec.n_hist_sensors):
        g = rng.normal(size=n)
        if s < spec.n_informative_hist:
            g = g + spec.signal * y
        intensity = np.exp(1.0 + 1.2 * g)
        profile = rng.dirichlet(np.full(spec.bins_per_sensor, 2.0))
        jitter = np.abs(1.0 + 0.3 * rng.normal(size=(n, spec.bins_per_sensor)))
        blocks.append(intensity[:, None] * profile[None, :] * jitter)
        names.extend(spec.histogram_names()[s * spec.bins_per_sensor:
                                            (s + 1) * spec.bins_per_sensor])

    values = np.hstack(blocks)
    truth = Table(names, np.arange(n, dtype=np.int64), values,
                  np.zeros_like(values, dtype=bool))

    mask = np.zeros_like(values, dtype=bool)
    col_pos = {name: j for j, name in enumerate(names)}
    fully_masked = {name: False for name in names}
    for rule in spec.missingness:
        targets = [c for c in _resolve_group(rule, spec) if c in col_pos]
        if rule.mechanism == "mar":
            driver = rule.driver
            if driver is None:
                candidates = [c for c in spec.measure_names() if c not in targets]
                if not candidates:
                    raise ConfigError("mar rule leaves no untargeted measure "
                                      "column to act as driver")
                driver = candidates[0]
            if driver in targets:
                raise ConfigError(f"mar driver {driver!r} cannot be masked "
                                  "by its own rule")
            ranks = np.argsort(np.argsort(values[:, col_pos[driver]]))
            # probability grows linearly with driver rank; mean stays = rate
            prob = np.clip(rule.rate * 2.0 * (ranks + 0.5) / n, 0.0, 1.0)
            for c in targets:
                mask[:, col_pos[c]] |= rng.random(n) < prob
        else:
            for c in targets:
                mask[:, col_pos[c]] |= rng.random(n) < rule.rate
        if rule.rate >= 1.0:
            for c in targets:
                fully_masked[c] = True
    if fully_masked and all(fully_masked.values()):
        raise ConfigError("missingness plan masks every column completely")

    dataset = LabeledDataset(Table(names, truth.row_index, values, mask), y)
    return dataset, truth
