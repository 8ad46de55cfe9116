"""Deterministic path algebra: extrema scans, recentering, rescaling, and
log-domain exponential integrals.

Exponential weights of the environment span hundreds of orders of
magnitude at the horizons of interest, so every integral of exp(+-V) is
carried in log domain via log-sum-exp and the left-endpoint Riemann rule
matching the cadlag step interpolation.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import ParameterError, RangeError
from .stable_env import GridPath, PathLike, as_grid

__all__ = [
    "running_infimum",
    "running_supremum",
    "future_infimum",
    "recenter",
    "rescale",
    "exp_integral",
    "ProfileWeights",
    "normalize_profile",
    "laplace_ratio",
]


def running_infimum(path: GridPath) -> GridPath:
    """Prefix minimum: output[i] = min(values[0..i])."""
    return path.with_values(np.minimum.accumulate(path.values))


def running_supremum(path: GridPath) -> GridPath:
    """Prefix maximum: output[i] = max(values[0..i])."""
    return path.with_values(np.maximum.accumulate(path.values))


def future_infimum(path: GridPath) -> GridPath:
    """Suffix minimum over the stored window: output[i] = min(values[i..])."""
    v = path.values
    return path.with_values(np.minimum.accumulate(v[::-1])[::-1])


def recenter(path: PathLike, x0: float) -> GridPath:
    """Recentered path y -> path(x0 + y) - path(x0); x0 must be on the grid."""
    gp = as_grid(path)
    i0 = gp.origin_index + int(round(x0 / gp.step_h))
    if not (0 <= i0 < len(gp.values)):
        raise RangeError(f"x0 = {x0} outside stored window")
    if abs(x0 - (i0 - gp.origin_index) * gp.step_h) > 1e-9 * max(1.0, abs(x0)):
        raise RangeError(f"x0 = {x0} is not a grid point")
    return GridPath(i0, gp.step_h, gp.values - gp.values[i0])


def rescale(path: PathLike, c: float, alpha: float) -> GridPath:
    """Stable rescaling x -> c^{-1} path(c^alpha x) on the induced grid.

    The output grid is the input grid shrunk by c^alpha, so the sampling
    of path(c^alpha x) at output grid points is exact.
    """
    if not (c > 0.0):
        raise ParameterError(f"c must be > 0, got {c}")
    gp = as_grid(path)
    new_h = gp.step_h / c**alpha
    return GridPath(gp.origin_index, new_h, gp.values / c)


def _interval_indices(gp: GridPath, a: float, b: float) -> tuple[int, int]:
    """Grid index range covering the grid points inside [a, b)."""
    if a > b:
        raise ParameterError(f"need a <= b, got a={a}, b={b}")
    h = gp.step_h
    ia = gp.origin_index + int(np.ceil(a / h - 1e-9))
    ib = gp.origin_index + int(np.ceil(b / h - 1e-9))
    if ia < 0 or ib > len(gp.values):
        raise RangeError(f"[{a}, {b}) exceeds stored window "
                         f"[{gp.x_lo}, {gp.x_hi}]")
    return ia, ib


def exp_integral(path: PathLike, a: float, b: float, sign: int) -> float:
    """log of sum_{x_i in [a,b)} exp(sign * path(x_i)) * h, overflow-free."""
    if sign not in (-1, 1):
        raise ParameterError("sign must be +1 or -1")
    gp = as_grid(path)
    ia, ib = _interval_indices(gp, a, b)
    if ib <= ia:
        return -np.inf
    return float(logsumexp(sign * gp.values[ia:ib]) + np.log(gp.step_h))


@dataclass(frozen=True)
class ProfileWeights:
    """Normalized exponential profile exp(-V)/integral(exp(-V)) on [a, b)."""

    x: np.ndarray
    step_h: float
    log_weights: np.ndarray     # -V(x_i)
    log_normalizer: float       # log integral of exp(-V) over [a, b)

    def density(self) -> np.ndarray:
        return np.exp(self.log_weights - self.log_normalizer)

    def write_csv(self, fh: io.TextIOBase) -> None:
        fh.write("x,density\n")
        for x, d in zip(self.x, self.density()):
            fh.write(f"{float(x)!r},{float(d)!r}\n")


def normalize_profile(path: PathLike, a: float, b: float) -> ProfileWeights:
    """Weights of the normalized profile exp(-V)/integral over [a, b)."""
    if not (a < b):
        raise ParameterError(f"need a < b, got a={a}, b={b}")
    gp = as_grid(path)
    ia, ib = _interval_indices(gp, a, b)
    if ib <= ia:
        raise ParameterError("interval contains no grid point")
    log_w = -gp.values[ia:ib]
    log_z = float(logsumexp(log_w) + np.log(gp.step_h))
    x = (np.arange(ia, ib) - gp.origin_index) * gp.step_h
    return ProfileWeights(x, gp.step_h, log_w, log_z)


def laplace_ratio(path: PathLike, c: float, a: float, b: float,
                  alpha_in: float, beta_in: float) -> float:
    """Ratio of exp(-c V) integrals over [a, b) and [alpha_in, beta_in).

    Requires a nonnegative well with its unique zero at the origin and
    a <= alpha_in < 0 < beta_in <= b; the ratio decreases to 1 as c grows.
    """
    if not (a <= alpha_in < 0.0 < beta_in <= b):
        raise ParameterError("need a <= alpha_in < 0 < beta_in <= b")
    if c < 0.0:
        raise ParameterError("c must be >= 0")
    gp = as_grid(path)
    ia, ib = _interval_indices(gp, a, b)
    seg = gp.values[ia:ib]
    if seg.min() < 0.0:
        raise ParameterError("path must be >= 0 on [a, b)")
    if gp.values[gp.origin_index] != 0.0:
        raise ParameterError("path(0) must equal 0")
    if np.count_nonzero(seg == 0.0) != 1:
        raise ParameterError("origin must be the unique minimum on [a, b)")
    ja, jb = _interval_indices(gp, alpha_in, beta_in)
    log_outer = logsumexp(-c * seg)
    log_inner = logsumexp(-c * gp.values[ja:jb])
    return float(np.exp(log_outer - log_inner))
