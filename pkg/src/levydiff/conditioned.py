"""Levy processes conditioned to stay positive, valley slope laws, and the
two-sided limit environment.

Two independent constructions of the conditioned law are implemented and
cross-checked: the concatenation formula driven by the time spent above
zero (Bertoin), and the excursion-reversal of the path reflected at its
running maximum (Tanaka).  At stability index 2 the conditioned process
is a 3-dimensional Bessel process, sampled directly as the norm of three
Gaussian coordinates; this is the only closed-form anchor and bypasses
both transforms.

The post-infimum slope of a valley is absolutely continuous with respect
to the conditioned law; the density depends on the path only through its
value at the first passage above the valley height and is proportional
to that value to the power -alpha*rho.  The unknowable normalizing
constant is absorbed empirically so the weights have mean one on a
calibration set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ParameterError, ReplicationAborted, WindowTooSmallError
from .path_core import exp_integral, future_infimum
from .rng import substream
from .stable_env import (GridPath, StableLawSpec, TwoSidedPath,
                         stable_increments)
from .valley import one_sided_stats

__all__ = [
    "UP", "UP_HAT", "BESSEL3", "BERTOIN", "TANAKA",
    "ConditionedPath",
    "time_above_zero",
    "bertoin_transform",
    "tanaka_transform",
    "ConditionedSampler",
    "sample_conditioned",
    "pre_post_split",
    "regeneration_time",
    "first_passage_value",
    "overshoot_weight",
    "overshoot_weights",
    "LimitEnvironment",
    "sample_tilde",
]

UP = "UP"
UP_HAT = "UP_HAT"
BESSEL3 = "BESSEL3"
BERTOIN = "BERTOIN"
TANAKA = "TANAKA"

ROLE_COND_PLUS = 2
ROLE_COND_MINUS = 3


@dataclass(frozen=True)
class ConditionedPath:
    """A path with the law of the environment conditioned to stay positive."""

    path: GridPath
    law_tag: str        # UP or UP_HAT
    construction: str   # BESSEL3, BERTOIN or TANAKA

    def __post_init__(self):
        v = self.path.values
        if len(v) > 1 and np.min(v[1:]) <= 0.0:
            raise ParameterError("conditioned path touches <= 0 after the first step")
        if v[0] != 0.0:
            raise ParameterError("conditioned path must start at 0")


def time_above_zero(path: GridPath) -> tuple[GridPath, np.ndarray]:
    """Occupation time of (0, inf) and the grid realization of its inverse.

    Returns ``(A, idx)`` where ``A[i] = h * #{j <= i : values[j] > 0}``
    and ``idx[k]`` is the input index of the k-th strictly positive value,
    so ``idx`` maps output steps of the concatenation to input steps.
    """
    v = path.values
    pos = v > 0.0
    a_vals = path.step_h * np.cumsum(pos)
    return path.with_values(a_vals.astype(float), origin_index=0), np.flatnonzero(pos)


def _bertoin_values(v: np.ndarray) -> np.ndarray:
    """Concatenation of the positive excursions with accumulated level shifts."""
    prev = v[:-1]
    cur = v[1:]
    corr = np.where(cur <= 0.0, np.maximum(prev, 0.0), -np.minimum(prev, 0.0))
    shift = np.concatenate([[0.0], np.cumsum(corr)])
    out = (v + shift)[v > 0.0]
    return np.concatenate([[0.0], out])


def bertoin_transform(path: GridPath) -> ConditionedPath:
    """Conditioned path via time spent above zero plus jump corrections.

    Valid when the driving process has no Brownian part (stability index
    below 2), where the semimartingale local time term vanishes.
    """
    out = _bertoin_values(np.asarray(path.values, dtype=float))
    return ConditionedPath(GridPath(0, path.step_h, out), UP, BERTOIN)


def _tanaka_values(v: np.ndarray) -> np.ndarray:
    """Reverse each excursion of the running-max reflection in place.

    Output value at a reflection zero is the path value itself; inside an
    excursion spanning grid indices [a, b] the output is the reversed
    reflection run shifted by the path value at the closing zero.  An
    unfinished final excursion is dropped (output is shortened).
    """
    d = np.maximum.accumulate(v) - v
    zeros = np.flatnonzero(d == 0.0)
    last = int(zeros[-1])
    out = np.empty(last + 1)
    out[zeros] = v[zeros]
    for za, zb in zip(zeros[:-1], zeros[1:]):
        if zb - za > 1:
            a, b = za + 1, zb - 1
            out[a:b + 1] = d[a:b + 1][::-1] + v[zb]
    return out


def tanaka_transform(path: GridPath, law_tag: str = UP) -> ConditionedPath:
    """Conditioned path via excursion reversal of the reflected path.

    ``law_tag=UP`` transforms the path itself; ``UP_HAT`` transforms its
    negative, giving the dual process conditioned to stay positive.
    """
    if law_tag not in (UP, UP_HAT):
        raise ParameterError(f"unknown law tag {law_tag}")
    v = np.asarray(path.values, dtype=float)
    if law_tag == UP_HAT:
        v = -v
    out = _tanaka_values(v)
    return ConditionedPath(GridPath(0, path.step_h, out), law_tag, TANAKA)


class ConditionedSampler:
    """Incremental sampler of a conditioned path on a growing window.

    Extending the window continues the underlying streams, so previously
    returned prefixes never change; this is what makes window-doubling
    stabilization checks meaningful.
    """

    def __init__(self, spec: StableLawSpec, law_tag: str, step_h: float,
                 rng: np.random.Generator, construction: str | None = None):
        if law_tag not in (UP, UP_HAT):
            raise ParameterError(f"unknown law tag {law_tag}")
        if construction is None:
            construction = BESSEL3 if spec.is_gaussian else TANAKA
        if construction == BESSEL3 and not spec.is_gaussian:
            raise ParameterError("direct Bessel sampling needs alpha = 2")
        if construction == BERTOIN and spec.is_gaussian:
            raise ParameterError("the concatenation formula needs alpha < 2 "
                                 "(no Brownian part)")
        self.spec = spec
        self.law_tag = law_tag
        self.step_h = float(step_h)
        self.construction = construction
        self._rng = rng
        if construction == BESSEL3:
            self._coords = np.zeros((3, 1))
        else:
            self._raw = np.zeros(1)

    def _extend_raw(self, extra: int) -> None:
        if self.construction == BESSEL3:
            inc = self._rng.normal(0.0, np.sqrt(2.0 * self.spec.scale_k * self.step_h),
                                   size=(3, extra))
            tail = self._coords[:, -1:] + np.cumsum(inc, axis=1)
            self._coords = np.concatenate([self._coords, tail], axis=1)
        else:
            inc = stable_increments(self._rng, self.spec, extra, self.step_h)
            tail = self._raw[-1] + np.cumsum(inc)
            self._raw = np.concatenate([self._raw, tail])

    def _transformed(self) -> np.ndarray:
        if self.construction == BESSEL3:
            return np.sqrt(np.sum(self._coords**2, axis=0))
        v = self._raw if self.law_tag == UP else -self._raw
        if self.construction == TANAKA:
            return _tanaka_values(v)
        return _bertoin_values(v)

    def values(self, n_steps: int, max_points: int = 2**22) -> np.ndarray:
        """First ``n_steps + 1`` values of the conditioned path.

        The transforms can only emit output up to the last closed
        excursion of the driving walk, and the wait for an excursion to
        close is heavy tailed (infinite mean).  Growth is therefore
        capped: a sample that exceeds ``max_points`` driving steps raises
        ReplicationAborted and must be counted by the caller, never
        silently retried.
        """
        if n_steps < 1:
            raise ParameterError("n_steps must be >= 1")
        out = self._transformed()
        while len(out) < n_steps + 1:
            cur = max(len(self._raw) if self.construction != BESSEL3
                      else self._coords.shape[1], n_steps + 1)
            if 2 * cur > max_points:
                raise ReplicationAborted("conditioned sample exceeded the point cap")
            self._extend_raw(cur)
            out = self._transformed()
        return out[:n_steps + 1]

    def conditioned(self, n_steps: int) -> ConditionedPath:
        return ConditionedPath(GridPath(0, self.step_h, self.values(n_steps)),
                               self.law_tag, self.construction)


def sample_conditioned(spec: StableLawSpec, law_tag: str, horizon: float,
                       step_h: float, stream_id: int = 0,
                       construction: str | None = None) -> ConditionedPath:
    """Sample a conditioned path covering [0, horizon]."""
    if not (horizon > 0.0):
        raise ParameterError("horizon must be > 0")
    role = ROLE_COND_PLUS if law_tag == UP else ROLE_COND_MINUS
    rng = substream(spec.seed, stream_id, role)
    sampler = ConditionedSampler(spec, law_tag, step_h, rng, construction)
    n = int(np.ceil(horizon / step_h))
    return sampler.conditioned(n)


# --------------------------------------------------------------------------
# Streaming construction: fixed output target, O(n) memory
# --------------------------------------------------------------------------
#
# The array transforms above keep the whole driving walk, so a long wait
# for an excursion to close costs memory as well as time.  The streamers
# exploit that the excursion reversal only ever reads the last n
# reflection values of the open excursion (a ring buffer) and that the
# concatenation construction is causal in its output; both then run under
# a step cap in the billions at constant memory, which shrinks the
# abort-censoring of heavy excursion waits by orders of magnitude.

_ST_DONE = 0
_ST_NEED_BLOCK = 3
_ST_ABORT = 4


@njit(nogil=True)
def _tanaka_stream_gauss(rng, sigma, out, ring, step_cap):
    """Fused Gaussian variant: draws inside the kernel, one-shot."""
    n = out.shape[0] - 1
    ring_len = ring.shape[0]
    i = 1
    a = 0
    m = 0.0
    vcur = 0.0
    steps = 0
    while True:
        if steps >= step_cap:
            return _ST_ABORT
        vnext = vcur + sigma * rng.standard_normal()
        steps += 1
        if vnext >= m:
            b = i
            t_hi = min(b - 1, n)
            for t in range(a + 1, t_hi + 1):
                out[t] = ring[(a + b - t) % ring_len] + vnext
            if b <= n:
                out[b] = vnext
            a = b
            m = vnext
            if a >= n:
                return _ST_DONE
        else:
            ring[i % ring_len] = m - vnext
        vcur = vnext
        i += 1


@njit(cache=True, nogil=True)
def _tanaka_stream_kernel(inc, i, a, m, vcur, out, ring, steps, step_cap):
    n = out.shape[0] - 1
    ring_len = ring.shape[0]
    k = 0
    blen = inc.shape[0]
    while True:
        if k >= blen:
            return i, a, m, vcur, steps, _ST_NEED_BLOCK, k
        if steps >= step_cap:
            return i, a, m, vcur, steps, _ST_ABORT, k
        vnext = vcur + inc[k]
        k += 1
        steps += 1
        if vnext >= m:
            # the reflection returns to zero at index i: close [a, i];
            # the anchor is the walk value at the close (the new max)
            b = i
            t_hi = min(b - 1, n)
            for t in range(a + 1, t_hi + 1):
                out[t] = ring[(a + b - t) % ring_len] + vnext
            if b <= n:
                out[b] = vnext
            a = b
            m = vnext
            if a >= n:
                return i, a, m, vnext, steps, _ST_DONE, k
        else:
            ring[i % ring_len] = m - vnext
        vcur = vnext
        i += 1


@njit(cache=True, nogil=True)
def _bertoin_stream_kernel(inc, vprev, corr, count, out, steps, step_cap):
    n = out.shape[0] - 1
    k = 0
    blen = inc.shape[0]
    while True:
        if k >= blen:
            return vprev, corr, count, steps, _ST_NEED_BLOCK, k
        if steps >= step_cap:
            return vprev, corr, count, steps, _ST_ABORT, k
        v = vprev + inc[k]
        k += 1
        steps += 1
        if v <= 0.0:
            if vprev > 0.0:
                corr += vprev
        else:
            if vprev < 0.0:
                corr -= vprev
            count += 1
            if count <= n:
                out[count] = v + corr
            if count >= n:
                return vprev, corr, count, steps, _ST_DONE, k
        vprev = v


def stream_conditioned_values(spec: StableLawSpec, law_tag: str, n_steps: int,
                              step_h: float, rng: np.random.Generator,
                              construction: str | None = None,
                              step_cap: int = 1 << 30) -> np.ndarray:
    """First ``n_steps + 1`` conditioned values at O(n_steps) memory.

    Same law as :class:`ConditionedSampler` but with a step cap instead
    of a point cap; raises ReplicationAborted beyond it.  The output
    window is fixed up front, so there is no extension semantics.
    """
    if law_tag not in (UP, UP_HAT):
        raise ParameterError(f"unknown law tag {law_tag}")
    if n_steps < 1:
        raise ParameterError("n_steps must be >= 1")
    if construction is None:
        construction = BESSEL3 if spec.is_gaussian else TANAKA
    if construction == BESSEL3:
        return ConditionedSampler(spec, law_tag, step_h, rng,
                                  BESSEL3).values(n_steps)
    if construction == BERTOIN and spec.is_gaussian:
        raise ParameterError("the concatenation formula needs alpha < 2")
    sign = -1.0 if law_tag == UP_HAT else 1.0
    out = np.zeros(n_steps + 1)
    steps = 0
    block = 1 << 14
    if construction == TANAKA:
        ring = np.zeros(n_steps + 2)
        if spec.is_gaussian:
            # the dual of a symmetric law is itself, so the sign is moot
            sigma = float(np.sqrt(2.0 * spec.scale_k * step_h))
            status = _tanaka_stream_gauss(rng, sigma, out, ring, step_cap)
            if status == _ST_ABORT:
                raise ReplicationAborted(
                    f"open excursion exceeded {step_cap} driving steps")
            return out
        i, a, m, vcur = 1, 0, 0.0, 0.0
        while True:
            inc = sign * stable_increments(rng, spec, block, step_h)
            i, a, m, vcur, steps, status, _ = _tanaka_stream_kernel(
                inc, i, a, m, vcur, out, ring, steps, step_cap)
            if status == _ST_DONE:
                return out
            if status == _ST_ABORT:
                raise ReplicationAborted(
                    f"open excursion exceeded {step_cap} driving steps")
            block = min(2 * block, 1 << 20)
    if construction == BERTOIN:
        vprev, corr, count = 0.0, 0.0, 0
        while True:
            inc = sign * stable_increments(rng, spec, block, step_h)
            vprev, corr, count, steps, status, _ = _bertoin_stream_kernel(
                inc, vprev, corr, count, out, steps, step_cap)
            if status == _ST_DONE:
                return out
            if status == _ST_ABORT:
                raise ReplicationAborted(
                    f"positive time exceeded {step_cap} driving steps")
            block = min(2 * block, 1 << 20)
    raise ParameterError(f"unknown construction {construction}")


# --------------------------------------------------------------------------
# Valley slopes
# --------------------------------------------------------------------------

def pre_post_split(path: GridPath, c: float) -> tuple[GridPath, GridPath]:
    """Time-reversed pre-bottom slope and recentered post-bottom slope.

    The pre slope reads the path leftward from the bottom through left
    limits (the value just before the window start counts as 0); the post
    slope runs from the bottom to the first passage ``c`` above it.  Both
    start at 0 and are nonnegative on the grid.
    """
    stats = one_sided_stats(path, c)
    v = np.asarray(path.values, dtype=float)
    m, tau = stats.bottom_index, stats.tau_index
    if m >= 1:
        core = v[:m - 1][::-1]
        pre_vals = np.concatenate([[v[m]], core, [0.0]]) - v[m]
    else:
        pre_vals = np.zeros(1)
    post_vals = v[m:tau + 1] - v[m]
    return (GridPath(0, path.step_h, pre_vals),
            GridPath(0, path.step_h, post_vals))


def regeneration_time(path: GridPath, eps: float) -> int:
    """Grid index ending the first excursion of height > eps above the
    future infimum.

    The future infimum is taken over the stored window, so an index at the
    window edge is unreliable and raises WindowTooSmallError; callers
    should extend the path until the answer is stable under doubling.
    """
    if not (eps > 0.0):
        raise ParameterError("eps must be > 0")
    v = path.values
    gap = v - future_infimum(path).values
    above = np.flatnonzero(gap > eps)
    if len(above) == 0:
        raise WindowTooSmallError(f"no excursion above {eps} in window")
    first = int(above[0])
    zeros = np.flatnonzero(gap[first + 1:] == 0.0)
    if len(zeros) == 0:
        raise WindowTooSmallError("excursion does not close inside the window")
    sigma = first + 1 + int(zeros[0])
    if sigma == len(v) - 1:
        raise WindowTooSmallError("regeneration only at the window edge")
    return sigma


def first_passage_value(path: GridPath | np.ndarray, level: float = 1.0) -> float:
    """Path value at its first passage at or above ``level``."""
    v = path.values if isinstance(path, GridPath) else np.asarray(path, dtype=float)
    hit = np.flatnonzero(v >= level)
    if len(hit) == 0:
        raise WindowTooSmallError(f"level {level} not reached in window")
    return float(v[hit[0]])


def overshoot_weights(passage_values: np.ndarray, alpha_rho: float) -> np.ndarray:
    """Mean-one weights proportional to passage_value ** (-alpha_rho)."""
    x = np.asarray(passage_values, dtype=float)
    if np.any(x <= 0.0):
        raise ParameterError("passage values must be positive")
    raw = x ** (-alpha_rho)
    return raw / np.mean(raw)


def overshoot_weight(post_path: GridPath, spec: StableLawSpec, rho: float,
                     calibration: list[GridPath] | np.ndarray) -> float:
    """Density weight of the post-bottom slope against the conditioned law.

    ``calibration`` supplies conditioned (UP) samples, as paths or as
    their first-passage values; the empirical mean absorbs the unknown
    excursion-measure constant so the weights average one on it.
    """
    if spec.is_gaussian:
        raise ParameterError("reweighting applies to alpha < 2")
    if not (0.0 < rho < 1.0):
        raise ParameterError("rho must be in (0, 1)")
    ar = spec.alpha * rho
    if isinstance(calibration, np.ndarray):
        cal_vals = calibration.astype(float)
    else:
        cal_vals = np.array([first_passage_value(p, 1.0) for p in calibration])
    if len(cal_vals) == 0:
        raise ParameterError("calibration set is empty")
    zhat = float(np.mean(cal_vals ** (-ar)))
    x = first_passage_value(post_path, 1.0)
    return float(x ** (-ar) / zhat)


# --------------------------------------------------------------------------
# Limit environment
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LimitEnvironment:
    """Two-sided environment of the limit profile, integrability certified.

    The two conditioned sides are glued point-wise (the value at -j h is
    the dual side's value at j h), giving a single zero at the origin;
    the cadlag left-limit reading would duplicate the zero one grid step
    to the left, a pure discretization artifact at coarse steps.
    ``log_integral`` is log of the exponential integral of -V over the
    stored window, stable under window doubling within the tolerance used
    at construction.  The profile peaks at the origin where V vanishes,
    so its supremum equals exp(-log_integral).
    """

    plus: GridPath
    minus: GridPath
    log_integral: float

    def combined(self) -> GridPath:
        neg = self.minus.values[1:][::-1]
        vals = np.concatenate([neg, self.plus.values])
        return GridPath(len(neg), self.plus.step_h, vals)

    def value_at(self, x: float) -> float:
        if x >= 0.0:
            return self.plus.value_at(x)
        j = int(np.ceil(-x / self.minus.step_h - 1e-12))
        return float(self.minus.values[min(j, len(self.minus.values) - 1)])

    def density_at(self, x: float) -> float:
        return float(np.exp(-self.value_at(x) - self.log_integral))

    def sup_density(self) -> float:
        return float(np.exp(-self.log_integral))

    def grid_profile(self, coarse_h: float, phase: float,
                     probe_offsets: list[float]) -> dict[str, float]:
        """Profile functionals as a coarse grid estimator would see them.

        A grid never lands on the continuum valley bottom: its argmin
        sits a random deficit above it, set by the grid phase.  This
        reads the stored fine environment at positions (k + phase) * h,
        recenters at the coarse argmin, and returns the normalized
        profile's supremum and its values at the probe offsets, which is
        exactly the functional the occupation estimator measures on its
        own grid.  ``phase`` must lie in (0, 1).
        """
        if not (0.0 < phase < 1.0):
            raise ParameterError("phase must be in (0, 1)")
        if not (coarse_h > 0.0):
            raise ParameterError("coarse_h must be > 0")
        half = min(self.plus.x_hi, self.minus.x_hi)
        k_max = int(np.floor(half / coarse_h)) - 1
        ks = np.arange(-k_max, k_max)
        xs = (ks + phase) * coarse_h
        vals = np.array([self.value_at(x) for x in xs])
        m_idx = int(np.argmin(vals))
        heights = vals - vals[m_idx]
        log_z = float(np.log(coarse_h) +
                      np.logaddexp.reduce(-heights))
        out = {"sup": float(np.exp(-log_z))}
        for x in probe_offsets:
            j = m_idx + int(round(x / coarse_h))
            if not (0 <= j < len(heights)):
                raise WindowTooSmallError("probe outside stored window")
            out[f"x{x:g}"] = float(np.exp(-heights[j] - log_z))
        return out


def sample_tilde(spec: StableLawSpec, half_window: float, step_h: float,
                 stream_id: int = 0, tol: float = 1e-6,
                 max_half_window: float = 1e6) -> LimitEnvironment:
    """Sample the limit environment and stabilize its exponential integral.

    Both sides are conditioned paths from independent streams; the window
    doubles (same realization, fresh tail increments) until the
    log-integral moves less than ``tol``, else the replication aborts.
    """
    if not (half_window > 0.0):
        raise ParameterError("half_window must be > 0")
    rng_p = substream(spec.seed, stream_id, ROLE_COND_PLUS)
    rng_m = substream(spec.seed, stream_id, ROLE_COND_MINUS)
    sp = ConditionedSampler(spec, UP, step_h, rng_p)
    sm = ConditionedSampler(spec, UP_HAT, step_h, rng_m)
    w = half_window
    log_i = None
    while True:
        n = int(np.ceil(w / step_h))
        plus = GridPath(0, step_h, sp.values(n))
        minus = GridPath(0, step_h, sm.values(n))
        env = LimitEnvironment(plus, minus, 0.0)
        gp = env.combined()
        new_log_i = exp_integral(gp, gp.x_lo, gp.x_hi + step_h / 2, -1)
        if log_i is not None and abs(new_log_i - log_i) < tol:
            return LimitEnvironment(plus, minus, float(new_log_i))
        if 2 * w > max_half_window:
            raise ReplicationAborted(
                f"exponential integral not stable at half window {w}")
        log_i = new_log_i
        w *= 2.0
