"""Least-squares Monte Carlo (Longstaff-Schwartz) price of the early-exercise swaption.

Used as an independent oracle.  Exercise cash flows are measured in state-price
units, ``G(tau, X_tau)^+``, so the price at time 0 is the sample mean divided
by ``1 + x0`` and no further discounting is needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .density import simulate_on_grid
from .errors import ConfigurationError
from .model import swap_rate
from .payoff import PayoffTable, gain


@dataclass(frozen=True)
class LSMConfig:
    n_paths: int = 100_000
    exercise_per_year: float = 52.0
    substeps: int = 8
    degree: int = 3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_paths < 100:
            raise ConfigurationError("need at least 100 paths", path="lsm.n_paths")
        if self.substeps < 1 or self.degree < 1 or self.exercise_per_year <= 0:
            raise ConfigurationError("substeps, degree and frequency must be positive", path="lsm")


@dataclass(frozen=True)
class LSMResult:
    price: float
    stderr: float
    n_paths: int
    exercise_dates: np.ndarray


def exercise_schedule(spec, per_year: float) -> np.ndarray:
    n = max(1, int(round((spec.tn - spec.t0) * per_year)))
    return np.linspace(spec.t0, spec.tn, n + 1)


def lsm_price(table: PayoffTable, config: LSMConfig | None = None, dates=None) -> LSMResult:
    """Price at time 0 of the swaption on ``table.spec.side`` exercisable on ``dates``."""
    config = config or LSMConfig()
    params, spec = table.params, table.spec
    dates = exercise_schedule(spec, config.exercise_per_year) if dates is None else np.asarray(dates, float)
    # fine simulation grid: substeps per exercise interval, a matching step before T_0
    ex_dt = np.diff(dates).min() if len(dates) > 1 else spec.t0
    n_pre = int(np.ceil(dates[0] / ex_dt)) * config.substeps if dates[0] > 0 else 0
    pieces = [np.linspace(0.0, dates[0], n_pre + 1)] if n_pre else [np.array([0.0])]
    for a, b in zip(dates[:-1], dates[1:]):
        pieces.append(np.linspace(a, b, config.substeps + 1)[1:])
    times = np.concatenate(pieces)
    record = np.searchsorted(times, dates)
    xs = simulate_on_grid(params, times, config.n_paths, config.seed, record=record)

    sign = 1.0 if spec.side == "payer" else -1.0
    notional = spec.notional
    cash = np.maximum(sign * gain(table, dates[-1], xs[:, -1]), 0.0)
    for j in range(len(dates) - 2, -1, -1):
        x = xs[:, j]
        ex = sign * gain(table, dates[j], x)
        itm = ex > 0
        if itm.sum() > config.degree + 1:
            # regress price-unit cash flows on powers of the (centred) swap rate
            xi = x[itm]
            rate = swap_rate(params, spec, dates[j], np.maximum(xi, 1e-12))
            r0, rs = rate.mean(), rate.std() or 1.0
            basis = np.vander((rate - r0) / rs, config.degree + 1, increasing=True)
            coef, *_ = np.linalg.lstsq(basis, cash[itm] / (1.0 + xi), rcond=None)
            cont = (basis @ coef) * (1.0 + xi)
            stop = ex[itm] > cont
            idx = np.nonzero(itm)[0][stop]
            cash[idx] = ex[idx]
    vals = notional * cash / (1.0 + params.x0)
    return LSMResult(float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(len(vals))),
                     config.n_paths, dates)
