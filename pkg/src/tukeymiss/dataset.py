"""Observed/missing records for a single variable."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class Dataset:
    """Values with response indicators.

    ``values`` holds NaN wherever ``observed`` is False. When
    ``n_missing_known`` is False only observed records are stored and the
    number of missing values is itself unknown.
    """

    values: np.ndarray
    observed: np.ndarray
    n_missing_known: bool = True

    def __init__(self, values, observed=None, n_missing_known: bool = True):
        values = np.array(values, dtype=float).reshape(-1)
        if observed is None:
            observed = ~np.isnan(values)
        observed = np.array(observed, dtype=bool).reshape(-1)
        if values.shape != observed.shape:
            raise ValueError("values and observed must have equal length")
        if np.any(np.isnan(values[observed])):
            raise ValueError("observed records must carry a value")
        if not np.all(np.isfinite(values[observed])):
            raise ValueError("observed values must be finite")
        if np.any(~np.isnan(values[~observed])):
            raise ValueError("missing records must not carry a value")
        if not n_missing_known and np.any(~observed):
            raise ValueError("unknown missing count but missing records supplied")
        values.setflags(write=False)
        observed.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "observed", observed)
        object.__setattr__(self, "n_missing_known", bool(n_missing_known))

    @classmethod
    def from_observed(cls, y_obs, n_missing: int | None = 0) -> "Dataset":
        y_obs = np.asarray(y_obs, dtype=float).reshape(-1)
        if n_missing is None:
            return cls(y_obs, np.ones(y_obs.size, bool), n_missing_known=False)
        values = np.concatenate([y_obs, np.full(n_missing, np.nan)])
        return cls(values, np.arange(values.size) < y_obs.size)

    def __len__(self):
        return self.values.size

    @property
    def y_obs(self) -> np.ndarray:
        return self.values[self.observed]

    @property
    def n_obs(self) -> int:
        return int(self.observed.sum())

    @property
    def n_missing(self) -> int | None:
        if not self.n_missing_known:
            return None
        return int((~self.observed).sum())

    def equals(self, other: "Dataset") -> bool:
        return (self.n_missing_known == other.n_missing_known
                and np.array_equal(self.observed, other.observed)
                and np.array_equal(self.values, other.values, equal_nan=True))

    def __repr__(self):
        return f"Dataset(n_obs={self.n_obs}, n_missing={self.n_missing})"


@dataclass
class TruthRecord:
    """Generating parameters and true complete-data estimands of a simulation."""

    params: dict
    complete_mean: float
    complete_sd: float
    q: float
    masked_values: list | None = None
