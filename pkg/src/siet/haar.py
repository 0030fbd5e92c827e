"""Orthonormal Haar multiresolution analysis on dyadic sample vectors.

Coefficients use the discrete orthonormal normalization: the butterfly
(a+b)/sqrt(2), (a-b)/sqrt(2) applied recursively, so the coefficient vector
has the same Euclidean norm as the input (Parseval). Function-space (L2)
coefficients of the associated piecewise-constant function on [0,1] are the
same numbers scaled by 2**(-J/2); every operation here commutes with that
rescaling.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .grid import is_power_of_two

SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class WaveletCoefficients:
    """Haar coefficient tree for a length-2**J sample vector.

    details[j] holds the 2**j coefficients of scale j; scale 0 is the single
    full-interval wavelet, scale J-1 the finest.
    """

    scaling: float
    details: tuple
    J: int

    def __post_init__(self):
        det = tuple(np.asarray(d, dtype=float) for d in self.details)
        object.__setattr__(self, "details", det)
        if len(det) != self.J:
            raise ValueError("need one detail level per scale j = 0..J-1")
        for j, d in enumerate(det):
            if len(d) != 2 ** j:
                raise ValueError(f"detail level {j} must have {2 ** j} entries")

    @property
    def n(self) -> int:
        return 2 ** self.J

    def copy_with_details(self, details) -> "WaveletCoefficients":
        return WaveletCoefficients(self.scaling, tuple(details), self.J)

    def flat(self) -> np.ndarray:
        """Concatenated [scaling, scale-0, scale-1, ...] coefficient vector."""
        out = np.empty(self.n)
        out[0] = self.scaling
        pos = 1
        for d in self.details:
            out[pos:pos + len(d)] = d
            pos += len(d)
        return out

    def scale_and_location(self) -> tuple[np.ndarray, np.ndarray]:
        """(j, k) labels aligned with flat()[1:]."""
        js = np.concatenate([np.full(2 ** j, j, dtype=int) for j in range(self.J)]) \
            if self.J else np.empty(0, dtype=int)
        ks = np.concatenate([np.arange(2 ** j, dtype=int) for j in range(self.J)]) \
            if self.J else np.empty(0, dtype=int)
        return js, ks


def _split_flat(flat: np.ndarray, J: int) -> WaveletCoefficients:
    details = []
    pos = 1
    for j in range(J):
        details.append(flat[pos:pos + 2 ** j].copy())
        pos += 2 ** j
    return WaveletCoefficients(float(flat[0]), tuple(details), J)


def haar_forward(samples) -> WaveletCoefficients:
    """Orthonormal Haar analysis of a power-of-two sample vector."""
    v = np.asarray(samples, dtype=float)
    if v.ndim != 1 or not is_power_of_two(len(v)):
        raise ValueError("haar_forward needs a 1-D power-of-two length vector")
    n = len(v)
    J = int(round(np.log2(n)))
    flat = np.empty(n)
    cur = v.copy()
    pos = n
    while len(cur) > 1:
        a, b = cur[0::2], cur[1::2]
        d = (a - b) / SQRT2
        cur = (a + b) / SQRT2
        pos -= len(d)
        flat[pos:pos + len(d)] = d
    flat[0] = cur[0]
    return _split_flat(flat, J)


def haar_inverse(c: WaveletCoefficients) -> np.ndarray:
    """Inverse of haar_forward; exact up to roundoff."""
    cur = np.array([c.scaling])
    for j in range(c.J):
        d = c.details[j]
        nxt = np.empty(2 * len(cur))
        nxt[0::2] = (cur + d) / SQRT2
        nxt[1::2] = (cur - d) / SQRT2
        cur = nxt
    return cur


def project_to_scale(c: WaveletCoefficients, J0: int) -> WaveletCoefficients:
    """Zero all detail scales j >= J0 (projection onto the scale-J0 space)."""
    if not (0 <= J0 <= c.J):
        raise ValueError("projection scale out of range")
    details = [d.copy() if j < J0 else np.zeros_like(d)
               for j, d in enumerate(c.details)]
    return c.copy_with_details(details)


def keep_largest_t(c: WaveletCoefficients, t: int) -> WaveletCoefficients:
    """Keep the t detail coefficients of largest magnitude, zero the rest.

    The scaling coefficient is always kept and does not count toward t.
    Ties break deterministically: coarser scale first, then lower location.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    flat = c.flat()
    det = flat[1:]
    if t >= len(det):
        return c.copy_with_details([d.copy() for d in c.details])
    js, ks = c.scale_and_location()
    order = np.lexsort((ks, js, -np.abs(det)))
    keep = np.zeros(len(det), dtype=bool)
    keep[order[:t]] = True
    out = flat.copy()
    out[1:] = np.where(keep, det, 0.0)
    return _split_flat(out, c.J)


def soft_threshold(c: WaveletCoefficients, lam: float) -> WaveletCoefficients:
    """Shrink every detail toward zero by lam; the scaling coefficient is untouched."""
    if lam < 0:
        raise ValueError("threshold must be nonnegative")
    details = [np.sign(d) * np.maximum(np.abs(d) - lam, 0.0) for d in c.details]
    return c.copy_with_details(details)


def universal_threshold(sigma_eff: float, p: int) -> float:
    """sqrt(2 * sigma_eff**2 * ln p): controls the max of p Gaussian noises."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if sigma_eff < 0:
        raise ValueError("sigma_eff must be nonnegative")
    return float(sigma_eff * np.sqrt(2.0 * np.log(p)))


def write_coefficients_csv(path, c: WaveletCoefficients) -> None:
    """Debug dump: rows j,k,value with j = -1 for the scaling coefficient."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["j", "k", "value"])
        w.writerow([-1, 0, repr(float(c.scaling))])
        for j, d in enumerate(c.details):
            for k, v in enumerate(d):
                w.writerow([j, k, repr(float(v))])
