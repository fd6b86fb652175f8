"""Controlled missingness: MCAR/MAR/MNAR induction, mask bookkeeping, recovery.

Schemes:
  MCAR  every eligible cell masked independently with probability = degree.
  MAR   a row's masking probability is a logistic function of its driver
        columns (which are never masked themselves).
  MNAR  a cell's masking probability is a logistic function of its own value.
MAR/MNAR use slope 1.0 on standardized values with the intercept solved by
bisection so the expected masked fraction equals the requested degree.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import bisect
from scipy.special import expit

from ._rng import rng_for
from .data import Dataset, apply_mask, mask_of, save_csv, save_mask_csv, validate_matrix

SCHEMES = ("MCAR", "MAR", "MNAR")


@dataclass(frozen=True)
class MissingnessSpec:
    scheme: str
    degree: float
    protect_target: bool = True
    mar_drivers: tuple = ()

    def __post_init__(self):
        scheme = str(self.scheme).upper()
        if scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        object.__setattr__(self, "scheme", scheme)
        if not 0.0 <= self.degree <= 1.0:
            raise ValueError(f"degree must lie in [0, 1], got {self.degree}")
        object.__setattr__(self, "mar_drivers", tuple(int(j) for j in self.mar_drivers))
        if scheme == "MAR" and not self.mar_drivers:
            raise ValueError("MAR requires at least one driver column")


@dataclass
class InducedDataset:
    """Ground truth, its holed copy, and the exact mask that links them.

    At 10,000+ eligible cells the realized fraction concentrates within
    half a percentage point of spec.degree (binomial tail; checked
    statistically, not asserted per instance).
    """

    truth: np.ndarray
    holed: np.ndarray
    mask: np.ndarray
    spec: MissingnessSpec
    seed: int

    def __post_init__(self):
        self.truth = validate_matrix(self.truth)
        self.holed = validate_matrix(self.holed)
        self.mask = np.asarray(self.mask, dtype=np.uint8)
        if not (self.truth.shape == self.holed.shape == self.mask.shape):
            raise ValueError("truth/holed/mask shapes differ")
        if np.isnan(self.truth).any():
            raise ValueError("truth must be fully observed")
        if not np.array_equal(mask_of(self.holed), self.mask):
            raise ValueError("holed cells disagree with the mask")
        hidden = self.mask.astype(bool)
        if not np.array_equal(self.holed[~hidden], self.truth[~hidden]):
            raise ValueError("holed differs from truth at observed cells")

    @property
    def realized_fraction(self) -> float:
        return float(self.mask.mean())


def _standardize(v: np.ndarray) -> np.ndarray:
    sd = v.std()
    if sd == 0.0:
        return np.zeros_like(v)
    return (v - v.mean()) / sd


def _calibrated_probs(z: np.ndarray, degree: float) -> np.ndarray:
    """expit(z + b) with b solved so the mean probability equals degree."""
    if degree <= 0.0:
        return np.zeros_like(z)
    if degree >= 1.0:
        return np.ones_like(z)
    b = bisect(lambda t: float(np.mean(expit(z + t))) - degree, -60.0, 60.0,
               xtol=1e-12)
    return expit(z + b)


def induce_missingness(truth: np.ndarray, spec: MissingnessSpec, seed: int) -> InducedDataset:
    """Mask cells of a fully observed matrix under the given scheme and degree."""
    x = validate_matrix(truth)
    if np.isnan(x).any():
        raise ValueError("cannot induce missingness: input already has missing cells")
    n, d = x.shape
    rng = rng_for(seed, "induce", spec.scheme, repr(float(spec.degree)))
    draws = rng.random((n, d))

    if spec.scheme == "MCAR":
        mask = (draws < spec.degree).astype(np.uint8)
    elif spec.scheme == "MAR":
        drivers = list(spec.mar_drivers)
        if any(j < 0 or j >= d for j in drivers):
            raise ValueError(f"driver column out of range for {d} columns: {drivers}")
        if len(drivers) >= d:
            raise ValueError("MAR needs at least one non-driver column to mask")
        score = np.mean([_standardize(x[:, j]) for j in drivers], axis=0)
        p_row = _calibrated_probs(score, spec.degree)
        mask = (draws < p_row[:, None]).astype(np.uint8)
        mask[:, drivers] = 0
    else:  # MNAR: self-masking per column
        mask = np.zeros((n, d), dtype=np.uint8)
        for j in range(d):
            p = _calibrated_probs(_standardize(x[:, j]), spec.degree)
            mask[:, j] = draws[:, j] < p

    return InducedDataset(truth=x, holed=apply_mask(x, mask), mask=mask,
                          spec=spec, seed=seed)


def induce_on_dataset(ds: Dataset, spec: MissingnessSpec, seed: int) -> InducedDataset:
    """Induce over a dataset's features; the separate target vector is never
    masked, which realizes protect_target for datasets carrying one."""
    if not spec.protect_target and ds.target is not None:
        raise ValueError(
            "protect_target=False needs the target packed as a feature column; "
            "datasets with a separate target vector always protect it")
    if ds.mask.any():
        raise ValueError("dataset already has missing cells")
    return induce_missingness(ds.features, spec, seed)


def combine_recovered(holed: np.ndarray, model_output: np.ndarray,
                      mask: np.ndarray) -> np.ndarray:
    """Observed cells from holed, masked cells from model_output.

    Cell-wise: recovered = holed where mask = 0, model_output where mask = 1;
    the result is always fully observed.
    """
    holed = validate_matrix(holed)
    model_output = validate_matrix(model_output)
    mask = np.asarray(mask)
    if not (holed.shape == model_output.shape == mask.shape):
        raise ValueError("holed/model_output/mask shapes differ")
    if np.isnan(model_output).any():
        raise ValueError("model_output must be fully observed")
    if not np.array_equal(mask_of(holed), mask.astype(np.uint8)):
        raise ValueError("holed observed cells disagree with the mask")
    hidden = mask.astype(bool)
    out = holed.copy()
    out[hidden] = model_output[hidden]
    return out


def missingness_summary(d) -> dict:
    """Overall and per-column missing fractions of a Dataset or matrix."""
    mask = d.mask if isinstance(d, Dataset) else mask_of(d)
    mask = np.asarray(mask, dtype=np.float64)
    return {
        "overall": float(mask.mean()) if mask.size else 0.0,
        "per_column": mask.mean(axis=0),
    }


def save_induced(stem: str, induced: InducedDataset,
                 names: list[str] | None = None) -> tuple[str, str]:
    """Persist the holed matrix and its mask as `<stem>.holed.csv` / `<stem>.mask.csv`."""
    holed_path = f"{stem}.holed.csv"
    mask_path = f"{stem}.mask.csv"
    save_csv(holed_path, induced.holed, names)
    save_mask_csv(mask_path, induced.mask, names)
    return holed_path, mask_path
