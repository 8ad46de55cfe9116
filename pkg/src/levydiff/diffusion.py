"""Diffusion in a frozen environment and its local time profile.

Two engines produce site-occupation measures of the diffusion whose
generator is ``(1/2) exp(V) d/dx (exp(-V) d/dx)``:

* CHAIN: a continuous-time nearest-neighbor chain on the environment
  grid with conductances ``exp(-(V_i + V_j)/2)/h`` and site weights
  ``h exp(-V_i)``, giving jump rates ``exp((V_i - V_j)/2) / (2 h^2)``.
  Holding times are exact exponentials, so there is no time-step bias
  and the event count scales with jump activity rather than horizon.
  This is the default engine for long-horizon experiments.

* BROX: the scale/time-change representation.  A Brownian motion is
  simulated on steps ``dt``, real time accumulates by the left-endpoint
  rule as ``dt * exp(-2 V(X))`` and positions are read through the
  inverse scale function.  Used to validate CHAIN on short horizons.

Both engines accumulate occupation time per grid cell until the total
equals the horizon exactly (the final holding is truncated), so the
occupation identity holds to float precision by construction.  Rates and
weights are handled in log domain; environments whose exponentials
overflow double precision act as impenetrable barriers, which is the
physically correct limit.  All randomness is consumed in fixed-size
blocks from a named substream, so results are reproducible and
independent of when window extensions happen.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ParameterError, RangeError, ReplicationAborted, WindowTooSmallError
from .path_core import exp_integral
from .rng import substream
from .stable_env import GridPath, PathLike, as_grid
from .valley import PLUS, MINUS, EnvironmentStream

__all__ = [
    "BROX", "CHAIN",
    "GENERATOR_HALF",
    "scale_function",
    "DiffusionRun",
    "LocalTimeProfile",
    "brox_simulate",
    "chain_simulate",
    "local_time_profile",
    "favorite_point",
]

BROX = "BROX"
CHAIN = "CHAIN"

# the 1/2 of the generator; selftest perturbs this to prove the Brownian
# null check can detect a wrong constant
GENERATOR_HALF = 0.5

ROLE_DIFFUSION = 4

_BLOCK_MIN = 1 << 12
_BLOCK_MAX = 1 << 21

_DONE = 0
_NEED_LEFT = 1
_NEED_RIGHT = 2
_NEED_BLOCK = 3
_STALLED = 4


def scale_function(env: PathLike, x: float) -> tuple[float, float]:
    """Natural scale S(x) = integral_0^x exp(V), as (sign, log|S|)."""
    if x == 0.0:
        return (0.0, -np.inf)
    if x > 0.0:
        return (1.0, exp_integral(env, 0.0, x, +1))
    return (-1.0, exp_integral(env, x, 0.0, +1))


@dataclass(frozen=True)
class DiffusionRun:
    """Occupation summary of one simulated trajectory."""

    grid: GridPath            # environment window the run ended with
    horizon_t: float
    engine: str
    occupation: np.ndarray    # real time spent per grid cell [x_i, x_i + h)
    final_position: float
    events: int               # chain jumps or Brownian steps
    window_extensions: int
    rng_stream: int

    def summary_json(self) -> str:
        return json.dumps({
            "engine": self.engine,
            "t": self.horizon_t,
            "steps_or_jumps": int(self.events),
            "window_extensions": int(self.window_extensions),
        }, sort_keys=True)


@dataclass(frozen=True)
class LocalTimeProfile:
    """Estimated local time x -> L(t, x) on the grid."""

    origin_index: int
    step_h: float
    values: np.ndarray
    horizon_t: float

    @property
    def x(self) -> np.ndarray:
        return (np.arange(len(self.values)) - self.origin_index) * self.step_h

    def occupation_defect(self) -> float:
        """Relative error of the occupation identity h * sum(L) = t."""
        return abs(self.step_h * float(np.sum(self.values)) - self.horizon_t) \
            / self.horizon_t

    def write_csv(self, fh: io.TextIOBase) -> None:
        fh.write("x,local_time\n")
        for x, v in zip(self.x, self.values):
            fh.write(f"{float(x)!r},{float(v)!r}\n")


def local_time_profile(run: DiffusionRun) -> LocalTimeProfile:
    """Occupation estimator of the local time: cell time over cell width."""
    return LocalTimeProfile(run.grid.origin_index, run.grid.step_h,
                            run.occupation / run.grid.step_h, run.horizon_t)


def favorite_point(profile: LocalTimeProfile) -> float:
    """Leftmost maximizer of the local time profile."""
    if len(profile.values) == 0:
        raise ParameterError("empty profile")
    i = int(np.argmax(profile.values))
    return float((i - profile.origin_index) * profile.step_h)


# --------------------------------------------------------------------------
# CHAIN engine
# --------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _chain_blocks(log_left, log_right, site, total, horizon, occ,
                  exp_block, uni_block, events, max_events):
    n = occ.shape[0]
    k = 0
    blen = exp_block.shape[0]
    while True:
        if site <= 0:
            return site, total, events, _NEED_LEFT, k
        if site >= n - 1:
            return site, total, events, _NEED_RIGHT, k
        if k >= blen:
            return site, total, events, _NEED_BLOCK, k
        lr = log_right[site]
        ll = log_left[site]
        log_tot = np.logaddexp(ll, lr)
        rem = horizon - total
        log_hold = np.log(exp_block[k]) - log_tot
        if log_hold >= np.log(rem):
            occ[site] += rem
            return site, horizon, events, _DONE, k + 1
        hold = np.exp(log_hold)
        occ[site] += hold
        total += hold
        if uni_block[k] < np.exp(lr - log_tot):
            site += 1
        else:
            site -= 1
        k += 1
        events += 1
        if events >= max_events:
            return site, total, events, _STALLED, k


def _log_rates(values: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    lc = np.log(GENERATOR_HALF) - 2.0 * np.log(h)
    log_right = np.full(len(values), -np.inf)
    log_left = np.full(len(values), -np.inf)
    log_right[:-1] = 0.5 * (values[:-1] - values[1:]) + lc
    log_left[1:] = 0.5 * (values[1:] - values[:-1]) + lc
    return log_left, log_right


def _resolve_env(env) -> tuple[GridPath, EnvironmentStream | None]:
    if isinstance(env, EnvironmentStream):
        return env.combined(), env
    return as_grid(env), None


def chain_simulate(env, horizon_t: float, stream: int = 0,
                   master_seed: int | None = None,
                   max_events: int = 1 << 33) -> DiffusionRun:
    """Simulate the conductance chain until total occupation equals the horizon.

    ``env`` is a GridPath, TwoSidedPath, or EnvironmentStream; only a
    stream can grow when the walker reaches the window edge.
    """
    if not (horizon_t > 0.0):
        raise ParameterError("horizon_t must be > 0")
    gp, estream = _resolve_env(env)
    seed = master_seed
    if seed is None:
        seed = estream.spec.seed if estream is not None else 0
    rng = substream(seed, stream, ROLE_DIFFUSION)

    values = gp.values
    occ = np.zeros(len(values))
    log_left, log_right = _log_rates(values, gp.step_h)
    site = gp.origin_index
    total = 0.0
    events = 0
    extensions = 0
    block = _BLOCK_MIN
    exp_block = rng.standard_exponential(block)
    uni_block = rng.random(block)
    offset = 0
    while True:
        site, total, events, status, used = _chain_blocks(
            log_left, log_right, site, total, horizon_t, occ,
            exp_block[offset:], uni_block[offset:], events, max_events)
        offset += used
        if status == _DONE:
            break
        if status == _NEED_BLOCK:
            block = min(2 * block, _BLOCK_MAX)
            exp_block = rng.standard_exponential(block)
            uni_block = rng.random(block)
            offset = 0
            continue
        if status == _STALLED:
            raise ReplicationAborted(
                f"chain exceeded {max_events} events at t = {total:.3g} "
                f"of {horizon_t:.3g}")
        if estream is None:
            raise WindowTooSmallError("walker reached the fixed window edge")
        old_origin = gp.origin_index
        old_len = len(values)
        estream.grow(PLUS if status == _NEED_RIGHT else MINUS)
        gp = estream.combined()
        values = gp.values
        shift = gp.origin_index - old_origin
        new_occ = np.zeros(len(values))
        new_occ[shift:shift + old_len] = occ
        occ = new_occ
        site += shift
        log_left, log_right = _log_rates(values, gp.step_h)
        extensions += 1

    return DiffusionRun(gp, horizon_t, CHAIN, occ,
                        float((site - gp.origin_index) * gp.step_h),
                        events, extensions, stream)


# --------------------------------------------------------------------------
# BROX engine
# --------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _brox_blocks(s, wneg2, cell, b, total, horizon, occ, dt, sqrt_dt,
                 norm_block, events, max_events):
    n_cells = occ.shape[0]
    k = 0
    blen = norm_block.shape[0]
    while True:
        if b < s[0]:
            return cell, b, total, events, _NEED_LEFT, k
        if b >= s[n_cells]:
            return cell, b, total, events, _NEED_RIGHT, k
        while b >= s[cell + 1]:
            cell += 1
        while b < s[cell]:
            cell -= 1
        if k >= blen:
            return cell, b, total, events, _NEED_BLOCK, k
        tinc = dt * wneg2[cell]
        rem = horizon - total
        if tinc >= rem:
            occ[cell] += rem
            return cell, b, horizon, events, _DONE, k
        occ[cell] += tinc
        total += tinc
        b += sqrt_dt * norm_block[k]
        k += 1
        events += 1
        if events >= max_events:
            return cell, b, total, events, _STALLED, k


def _scale_grid(values: np.ndarray, h: float, origin: int) -> np.ndarray:
    """S at grid points; overflowing cells become infinite barriers."""
    with np.errstate(over="ignore"):
        widths = h * np.exp(values[:-1])
    s = np.empty(len(values))
    s[origin] = 0.0
    if origin < len(values) - 1:
        s[origin + 1:] = np.cumsum(widths[origin:])
    if origin > 0:
        s[:origin] = -np.cumsum(widths[:origin][::-1])[::-1]
    return s


def brox_simulate(env, horizon_t: float, dt: float | None = None,
                  bin_h: float | None = None, stream: int = 0,
                  master_seed: int | None = None,
                  max_events: int = 1 << 33) -> DiffusionRun:
    """Scale/time-change engine on Brownian steps ``dt``.

    ``bin_h`` other than the grid step is not supported; occupation is
    accumulated per environment cell (the natural bins of the piecewise
    constant scale).
    """
    if not (horizon_t > 0.0):
        raise ParameterError("horizon_t must be > 0")
    gp, estream = _resolve_env(env)
    h = gp.step_h
    if dt is None:
        dt = h * h / 4.0
    if not (dt > 0.0):
        raise ParameterError("dt must be > 0")
    if bin_h is not None and abs(bin_h - h) > 1e-12:
        raise ParameterError("bin_h must equal the environment grid step")
    seed = master_seed
    if seed is None:
        seed = estream.spec.seed if estream is not None else 0
    rng = substream(seed, stream, ROLE_DIFFUSION)

    values = gp.values
    with np.errstate(over="ignore", under="ignore"):
        wneg2 = np.exp(-2.0 * values[:-1])
    s = _scale_grid(values, h, gp.origin_index)
    occ = np.zeros(len(values) - 1)
    cell = gp.origin_index
    b = 0.0
    total = 0.0
    events = 0
    extensions = 0
    sqrt_dt = float(np.sqrt(dt))
    block = _BLOCK_MIN
    norm_block = rng.standard_normal(block)
    offset = 0
    while True:
        cell, b, total, events, status, used = _brox_blocks(
            s, wneg2, cell, b, total, horizon_t, occ, dt, sqrt_dt,
            norm_block[offset:], events, max_events)
        offset += used
        if status == _DONE:
            break
        if status == _NEED_BLOCK:
            block = min(2 * block, _BLOCK_MAX)
            norm_block = rng.standard_normal(block)
            offset = 0
            continue
        if status == _STALLED:
            raise ReplicationAborted(
                f"time change stalled after {events} steps at t = {total:.3g} "
                f"of {horizon_t:.3g}")
        if estream is None:
            raise WindowTooSmallError("Brownian path left the fixed window")
        old_origin = gp.origin_index
        old_cells = len(values) - 1
        estream.grow(PLUS if status == _NEED_RIGHT else MINUS)
        gp = estream.combined()
        values = gp.values
        shift = gp.origin_index - old_origin
        with np.errstate(over="ignore", under="ignore"):
            wneg2 = np.exp(-2.0 * values[:-1])
        s = _scale_grid(values, h, gp.origin_index)
        new_occ = np.zeros(len(values) - 1)
        new_occ[shift:shift + old_cells] = occ
        occ = new_occ
        cell += shift
        extensions += 1

    # final X through the piecewise linear inverse scale
    width = s[cell + 1] - s[cell]
    frac = (b - s[cell]) / width if np.isfinite(width) and width > 0 else 0.0
    x_final = (cell - gp.origin_index + frac) * h
    occ_sites = np.concatenate([occ, [0.0]])
    return DiffusionRun(gp, horizon_t, BROX, occ_sites, float(x_final),
                        events, extensions, stream)
