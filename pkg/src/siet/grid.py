"""Functions on a dyadic grid over [0, 1]: representation, sampling, total variation.

Two grid conventions coexist:

* ``point`` grids hold samples at x_i = i/(n-1) and evaluate by linear
  interpolation; measured / "true" harvesting functions live here, by default
  on the fine 2**13-point grid.
* ``cells`` grids hold one value per dyadic cell [i/n, (i+1)/n) and evaluate
  by lookup; Haar reconstructions live here (n must be a power of two).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc

FINE_N = 2 ** 13  # evaluation resolution for truths and L2 quadrature

POINT = "point"
CELLS = "cells"


def rng_from(seed, *context) -> np.random.Generator:
    """Project-wide seeded generator (PCG64).

    Extra integers derive independent per-task streams, e.g.
    ``rng_from(seed, m, trial)`` inside Monte Carlo sweeps.
    """
    if context:
        return np.random.default_rng((int(seed),) + tuple(int(c) for c in context))
    return np.random.default_rng(int(seed))


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridFunction:
    """A real function on [0, 1] represented by values on a dyadic grid."""

    values: np.ndarray
    kind: str = POINT

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.ndim != 1 or len(v) < 2:
            raise ValueError("grid function needs a 1-D array of length >= 2")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid values must be finite")
        if self.kind not in (POINT, CELLS):
            raise ValueError(f"unknown grid kind {self.kind!r}")
        if self.kind == CELLS and not is_power_of_two(len(v)):
            raise ValueError("cell grids must have power-of-two length")

    def __len__(self) -> int:
        return len(self.values)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        n = len(self.values)
        if self.kind == POINT:
            nodes = np.linspace(0.0, 1.0, n)
            return np.interp(x, nodes, self.values)
        idx = np.minimum((x * n).astype(int), n - 1)
        idx = np.maximum(idx, 0)
        return self.values[idx]

    @classmethod
    def from_callable(cls, fn, n: int = FINE_N, kind: str = POINT) -> "GridFunction":
        if kind == POINT:
            x = np.linspace(0.0, 1.0, n)
        else:
            x = (np.arange(n) + 0.5) / n  # cell midpoints
        return cls(np.asarray(fn(x), dtype=float), kind)

    def to_cells(self, n_cells: int) -> "GridFunction":
        """Resample onto a power-of-two cell grid by cell-midpoint evaluation."""
        mid = (np.arange(n_cells) + 0.5) / n_cells
        return GridFunction(self(mid), CELLS)


@dataclass(frozen=True)
class SampleSet:
    """Equispaced samples of a harvesting function, possibly noisy."""

    locations: np.ndarray
    values: np.ndarray
    noise_sigma: float = 0.0

    def __post_init__(self):
        loc = np.asarray(self.locations, dtype=float)
        val = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "values", val)
        if len(loc) != len(val):
            raise ValueError("locations and values must have equal length")
        if len(loc) < 2:
            raise ValueError("need at least two samples")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        if abs(loc[0]) > 1e-12 or abs(loc[-1] - 1.0) > 1e-12:
            raise ValueError("sample locations must start at 0 and end at 1")
        gaps = np.diff(loc)
        if np.any(gaps <= 0):
            raise ValueError("sample locations must be strictly increasing")
        h = 1.0 / (len(loc) - 1)
        if np.max(np.abs(gaps - h)) > 1e-12 * max(1.0, h):
            raise ValueError("sample locations must be equispaced")

    @property
    def m(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class BVBudget:
    """Total-variation budget K for the admissible function class."""

    K: float

    def __post_init__(self):
        if not (self.K > 0):
            raise ValueError("total-variation budget must be positive")


def total_variation(f: GridFunction) -> float:
    """Sum of absolute increments of the grid representative.

    Exact for piecewise-constant / piecewise-linear representatives; a lower
    bound of the continuum total variation otherwise.
    """
    return float(np.sum(np.abs(np.diff(f.values))))


def sample(f: GridFunction, m: int, sigma: float = 0.0, seed: int = 0) -> SampleSet:
    """Sample f at the m-point regular grid {i/(m-1)}, plus N(0, sigma^2) noise."""
    if m < 2:
        raise ValueError("need m >= 2 samples")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    locs = np.linspace(0.0, 1.0, m)
    vals = f(locs)
    if sigma > 0:
        vals = vals + sigma * rng_from(seed).standard_normal(m)
    return SampleSet(locs, vals, noise_sigma=float(sigma))


def q_function(x) -> np.ndarray | float:
    """Standard normal tail probability P[N(0,1) > x]."""
    out = 0.5 * erfc(np.asarray(x, dtype=float) / np.sqrt(2.0))
    return float(out) if np.ndim(x) == 0 else out


def l2_distance_sq(f: GridFunction, g: GridFunction, n: int = FINE_N) -> float:
    """Squared L2([0,1]) distance by midpoint quadrature on the fine grid."""
    x = (np.arange(n) + 0.5) / n
    d = f(x) - g(x)
    return float(np.mean(d * d))


def sine_step(amplitude: float = 0.1, cycles: float = 2.0, jump_at: float = 0.5):
    """The demo harvesting profile: a small sine ripple plus a unit jump.

    With the default jump at 0.5 the discontinuity falls on every dyadic cell
    boundary, so cell-grid reconstructions recover it exactly; pass e.g.
    ``jump_at=1/3`` for the generic (misaligned) behaviour.
    """

    def fn(x):
        x = np.asarray(x, dtype=float)
        return amplitude * np.sin(2.0 * np.pi * cycles * x) + (x >= jump_at)

    return fn


# ---------------------------------------------------------------------------
# CSV sample format: header "x,value", one row per sample, "." decimals.
# Lines starting with "#" (e.g. an embedded config digest) are skipped.
# ---------------------------------------------------------------------------

def write_samples_csv(path, xs, values, header_comment: str | None = None) -> None:
    xs = np.asarray(xs, dtype=float)
    values = np.asarray(values, dtype=float)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh)
        w.writerow(["x", "value"])
        for x, v in zip(xs, values):
            w.writerow([repr(float(x)), repr(float(v))])


def read_samples_csv(path_or_text) -> tuple[np.ndarray, np.ndarray]:
    """Parse an ``x,value`` CSV; returns (x, value) arrays in file order."""
    if isinstance(path_or_text, io.StringIO):
        fh = path_or_text
        close = False
    else:
        fh = open(path_or_text, "r", newline="", encoding="utf-8")
        close = True
    try:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))
                if r]
    finally:
        if close:
            fh.close()
    if not rows or [c.strip().lower() for c in rows[0]] != ["x", "value"]:
        raise ValueError("sample CSV must start with an 'x,value' header")
    try:
        data = np.array([[float(r[0]), float(r[1])] for r in rows[1:]], dtype=float)
    except (ValueError, IndexError) as exc:
        raise ValueError(f"malformed sample CSV row: {exc}") from exc
    if len(data) < 2:
        raise ValueError("sample CSV needs at least two data rows")
    return data[:, 0], data[:, 1]
