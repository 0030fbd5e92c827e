"""Discretized memoryless channels over quantized input/output alphabets."""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .grid import GridFunction

LN2 = np.log(2.0)
ROW_SUM_TOL = 1e-9


@dataclass(frozen=True)
class ChannelModel:
    """Row-stochastic transition matrix between quantized alphabets."""

    input_grid: np.ndarray   # n_x points in [0, 1], strictly increasing
    output_grid: np.ndarray  # n_y points (any real range)
    W: np.ndarray            # n_x by n_y transition probabilities

    def __post_init__(self):
        xg = np.asarray(self.input_grid, dtype=float)
        yg = np.asarray(self.output_grid, dtype=float)
        W = np.asarray(self.W, dtype=float)
        object.__setattr__(self, "input_grid", xg)
        object.__setattr__(self, "output_grid", yg)
        object.__setattr__(self, "W", W)
        if W.shape != (len(xg), len(yg)):
            raise ValueError("W must be n_x by n_y")
        if np.any(W < 0):
            raise ValueError("transition probabilities must be nonnegative")
        if np.max(np.abs(W.sum(axis=1) - 1.0)) > ROW_SUM_TOL:
            raise ValueError("channel rows must sum to 1")
        if np.any(np.diff(xg) <= 0) or xg[0] < -1e-12 or xg[-1] > 1 + 1e-12:
            raise ValueError("input grid must be strictly increasing within [0, 1]")

    @property
    def n_x(self) -> int:
        return len(self.input_grid)

    @property
    def n_y(self) -> int:
        return len(self.output_grid)


@dataclass(frozen=True)
class InputDistribution:
    """Probability masses on the input grid, optionally capped per point."""

    p: np.ndarray
    density_cap: float | None = None  # per-point mass cap (c_max * dx)

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        object.__setattr__(self, "p", p)
        if np.any(p < -1e-15):
            raise ValueError("probabilities must be nonnegative")
        if abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("input distribution must sum to 1")
        if self.density_cap is not None:
            if self.density_cap <= 0:
                raise ValueError("density cap must be positive")
            if np.any(p > self.density_cap + 1e-12):
                raise ValueError("input distribution exceeds the density cap")


def awgn_channel(n_x: int, n_y: int, noise_std: float, tail_width: float = 4.0) -> ChannelModel:
    """Cell-quantized Y = X + N(0, noise_std^2) channel on [0, 1] inputs.

    Output cells cover [-tail_width*sigma, 1 + tail_width*sigma]; each row is
    the Gaussian mass of the cells (differences of normal CDFs), renormalized
    to absorb the tail mass beyond the covered range.
    """
    if n_x < 2 or n_y < 2:
        raise ValueError("need at least two input and output levels")
    if noise_std <= 0:
        raise ValueError("noise_std must be positive")
    if tail_width <= 0:
        raise ValueError("tail_width must be positive")
    x = np.linspace(0.0, 1.0, n_x)
    lo, hi = -tail_width * noise_std, 1.0 + tail_width * noise_std
    y = np.linspace(lo, hi, n_y)
    h = (hi - lo) / (n_y - 1)
    edges = np.concatenate([[y[0] - h / 2], (y[:-1] + y[1:]) / 2, [y[-1] + h / 2]])
    cdf = norm.cdf((edges[None, :] - x[:, None]) / noise_std)
    W = np.diff(cdf, axis=1)
    W /= W.sum(axis=1, keepdims=True)
    return ChannelModel(x, y, W)


def binary_symmetric_channel(crossover: float) -> ChannelModel:
    """BSC on inputs {0, 1} with the given crossover probability."""
    if not (0 <= crossover <= 1):
        raise ValueError("crossover must be in [0, 1]")
    e = float(crossover)
    W = np.array([[1 - e, e], [e, 1 - e]])
    return ChannelModel(np.array([0.0, 1.0]), np.array([0.0, 1.0]), W)


def z_channel(flip_one_to_zero: float) -> ChannelModel:
    """Z-channel: 0 passes clean, 1 flips to 0 with the given probability."""
    if not (0 <= flip_one_to_zero <= 1):
        raise ValueError("flip probability must be in [0, 1]")
    q = float(flip_one_to_zero)
    W = np.array([[1.0, 0.0], [q, 1.0 - q]])
    return ChannelModel(np.array([0.0, 1.0]), np.array([0.0, 1.0]), W)


def mutual_information(p: InputDistribution, ch: ChannelModel) -> float:
    """I(X;Y) in bits under input law p, with 0 log 0 = 0."""
    pv = p.p if isinstance(p, InputDistribution) else np.asarray(p, dtype=float)
    if len(pv) != ch.n_x:
        raise ValueError("input distribution does not match the channel")
    W = ch.W
    q = pv @ W
    logq = np.log(np.maximum(q, 1e-320))
    logW = np.where(W > 0, np.log(np.where(W > 0, W, 1.0)), 0.0)
    per_letter = np.einsum("ij,ij->i", W, logW) - W @ logq
    return float(pv @ per_letter) / LN2


def expected_energy(p: InputDistribution, beta: GridFunction, ch: ChannelModel) -> float:
    """E_p[beta(X)] over the channel's input grid."""
    pv = p.p if isinstance(p, InputDistribution) else np.asarray(p, dtype=float)
    if len(pv) != ch.n_x:
        raise ValueError("input distribution does not match the channel")
    return float(pv @ beta(ch.input_grid))


# ---------------------------------------------------------------------------
# persistence: binary row-major doubles with a small header, plus CSV export
# ---------------------------------------------------------------------------

_MAGIC = b"SIETCHN1"


def save_channel(path, ch: ChannelModel) -> None:
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<QQ", ch.n_x, ch.n_y))
        fh.write(np.ascontiguousarray(ch.input_grid, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(ch.output_grid, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(ch.W, dtype="<f8").tobytes())


def load_channel(path) -> ChannelModel:
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError("not a channel file")
        n_x, n_y = struct.unpack("<QQ", fh.read(16))
        xg = np.frombuffer(fh.read(8 * n_x), dtype="<f8")
        yg = np.frombuffer(fh.read(8 * n_y), dtype="<f8")
        W = np.frombuffer(fh.read(8 * n_x * n_y), dtype="<f8").reshape(n_x, n_y)
    return ChannelModel(xg.copy(), yg.copy(), W.copy())


def export_channel_csv(path, ch: ChannelModel) -> None:
    """Human-inspectable dump: one row per input with its transition row."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["x"] + [repr(float(y)) for y in ch.output_grid])
        for i in range(ch.n_x):
            w.writerow([repr(float(ch.input_grid[i]))] +
                       [repr(float(v)) for v in ch.W[i]])
