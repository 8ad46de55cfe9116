"""Standard-valley detection for two-sided grid environments.

A grid point is a c-minimum when some point on each side rises at least
``c`` above it before anything dips back to its level; c-maxima are the
mirror notion.  Certified extrema need both witnesses inside the stored
window, so a window can show the valley bottom long before it shows the
flanking maxima.  The bottom itself is located through the one-sided
first-passage route: reflect each side at its running infimum, record
the first passage above ``c``, the last zero before it, and the barrier
score; the side with the smaller barrier wins (ties go to the plus
side).  When the window certifies the flanking maxima the two routes
must agree and this is asserted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, RangeError, ReplicationAborted, WindowTooSmallError
from .rng import substream
from .stable_env import (GridPath, PathLike, StableLawSpec, TwoSidedPath,
                         as_grid, negate_law, stable_increments)

__all__ = [
    "MIN", "MAX", "PLUS", "MINUS",
    "Extremum",
    "find_c_extrema",
    "certify_extremum",
    "OneSidedStats",
    "one_sided_stats",
    "Valley",
    "standard_valley",
    "ab_window",
    "EnvironmentStream",
    "sample_valley_environment",
]

MIN = "MIN"
MAX = "MAX"
PLUS = "PLUS"
MINUS = "MINUS"

DEFAULT_MAX_POINTS = 2**24


@dataclass(frozen=True)
class Extremum:
    index: int          # index into the combined values array
    x: float            # grid coordinate
    kind: str           # MIN or MAX


def find_c_extrema(path: PathLike, c: float) -> list[Extremum]:
    """All interior grid points certified as c-extrema, sorted, alternating.

    Quantifiers of the defining property run over grid points of the
    stored window; equal extremal values (float ties) resolve to the
    leftmost point.  Single pass, O(n).
    """
    if not (c > 0.0):
        raise ParameterError(f"c must be > 0, got {c}")
    gp = as_grid(path)
    v = gp.values
    n = len(v)
    out: list[tuple[int, str]] = []
    if n < 3:
        return []

    # Opening sweep: no extremum certified yet.  Track running extrema
    # with the best outer witness recorded when the candidate moved.
    rmin = rmax = v[0]
    imin = imax = 0
    wmax_at_imin = -np.inf   # max over [0, imin-1]
    wmin_at_imax = np.inf    # min over [0, imax-1]
    seek = None              # opposite kind we are looking for after the opening
    cand_val = 0.0
    cand_idx = -1
    i = 1
    while i < n:
        x = v[i]
        if x < rmin:
            wmax_at_imin = rmax
            rmin, imin = x, i
        elif x > rmax:
            wmin_at_imax = rmin
            rmax, imax = x, i
        rise = x >= rmin + c
        drop = x <= rmax - c
        if rise or drop:
            min_ok = wmax_at_imin >= rmin + c
            max_ok = wmin_at_imax <= rmax - c
            if rise and drop:
                # a swing of at least 2c inside the opening stretch; the
                # later-positioned candidate's opposite is always certified
                if imin < imax:
                    if min_ok:
                        out.append((imin, MIN))
                    out.append((imax, MAX))
                    seek = MIN
                else:
                    if max_ok:
                        out.append((imax, MAX))
                    out.append((imin, MIN))
                    seek = MAX
            elif rise:
                if min_ok:
                    out.append((imin, MIN))
                seek = MAX
            else:
                if max_ok:
                    out.append((imax, MAX))
                seek = MIN
            # between the surviving candidate and i nothing crossed the
            # confirmation level, so i restarts the opposite tracker
            cand_val, cand_idx = x, i
            i += 1
            break
        i += 1

    # Alternating sweep: confirm the tracked candidate as soon as the
    # path moves c away from it, then restart at the confirmation point.
    while i < n:
        x = v[i]
        if seek == MAX:
            if x > cand_val:
                cand_val, cand_idx = x, i
            elif cand_val - x >= c:
                out.append((cand_idx, MAX))
                seek = MIN
                cand_val, cand_idx = x, i
        else:
            if x < cand_val:
                cand_val, cand_idx = x, i
            elif x - cand_val >= c:
                out.append((cand_idx, MIN))
                seek = MAX
                cand_val, cand_idx = x, i
        i += 1

    h = gp.step_h
    o = gp.origin_index
    return [Extremum(j, (j - o) * h, kind) for j, kind in out]


def certify_extremum(values: np.ndarray, i0: int, kind: str, c: float) -> bool:
    """Check the defining witnesses of a c-extremum at grid index ``i0``.

    Witnesses reach the level plus c on each side before anything returns
    to the level; exact ties block only on the left side, implementing
    the leftmost tie convention.
    """
    v = np.asarray(values, dtype=float)
    s = 1.0 if kind == MIN else -1.0
    w = s * v
    lvl = w[i0]
    ok_left = False
    for y in w[i0 - 1::-1]:
        if y >= lvl + c:
            ok_left = True
            break
        if y <= lvl:
            break
    ok_right = False
    for y in w[i0 + 1:]:
        if y >= lvl + c:
            ok_right = True
            break
        if y < lvl:
            break
    return ok_left and ok_right


# --------------------------------------------------------------------------
# One-sided statistics
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class OneSidedStats:
    """First-passage data of a one-sided path reflected at its infimum."""

    tau_index: int     # first grid index where path - running_inf >= c
    bottom_index: int  # last index <= tau_index where the gap is zero
    barrier: float     # (path(bottom) + c) or the running max at bottom, whichever larger


def _one_sided_stats(v: np.ndarray, c: float) -> OneSidedStats:
    if len(v) == 0:
        raise WindowTooSmallError("empty side")
    gap = v - np.minimum.accumulate(v)
    hit = np.nonzero(gap >= c)[0]
    if len(hit) == 0:
        raise WindowTooSmallError(f"path never rises {c} above its running infimum "
                                  f"within {len(v)} points")
    tau = int(hit[0])
    zeros = np.nonzero(gap[:tau + 1] == 0.0)[0]
    bottom = int(zeros[-1])
    barrier = max(v[bottom] + c, float(np.max(v[:bottom + 1])))
    return OneSidedStats(tau, bottom, barrier)


def one_sided_stats(path: GridPath, c: float) -> OneSidedStats:
    """tau_c, the last reflected zero before it, and the barrier score."""
    if not (c > 0.0):
        raise ParameterError(f"c must be > 0, got {c}")
    return _one_sided_stats(np.asarray(path.values, dtype=float), c)


# --------------------------------------------------------------------------
# Standard valley
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Valley:
    """Valley triplet around the origin with one-sided barrier scores.

    Positions are grid coordinates of the combined window.  ``left_top``
    and ``right_top`` are the adjacent certified c-maxima when the
    window shows them (``flanks_certified``), else the barrier-attaining
    points of the one-sided construction, which satisfy the same height
    and bracketing inequalities.
    """

    height: float
    left_top: float
    bottom: float
    right_top: float
    side: str
    barrier_plus: float
    barrier_minus: float
    boundary_extended: bool = False
    flanks_certified: bool = True
    left_index: int = 0
    bottom_index: int = 0
    right_index: int = 0

    def to_json(self) -> str:
        return json.dumps({
            "c": self.height,
            "p": self.left_top,
            "m": self.bottom,
            "q": self.right_top,
            "side": self.side,
            "J_plus": self.barrier_plus,
            "J_minus": self.barrier_minus,
            "boundary_extended": self.boundary_extended,
        }, sort_keys=True)


def _sides_of(gp: GridPath) -> tuple[np.ndarray, np.ndarray]:
    """Plus side values and the left-limit reflection of the minus side."""
    o = gp.origin_index
    plus = gp.values[o:]
    minus = gp.values[o - 1::-1] if o > 0 else np.empty(0)
    return plus, minus


def standard_valley(env: PathLike, c: float, *, boundary_extended: bool = False) -> Valley:
    """Locate the height-c valley around the origin.

    Raises WindowTooSmallError when either side fails to rise ``c`` above
    its running infimum inside the window; the caller should extend the
    environment with fresh increments from the same streams and retry.
    """
    if not (c > 0.0):
        raise ParameterError(f"c must be > 0, got {c}")
    gp = as_grid(env)
    o = gp.origin_index
    plus, minus = _sides_of(gp)
    sp = _one_sided_stats(plus, c)
    sm = _one_sided_stats(minus, c)
    side = PLUS if sp.barrier <= sm.barrier else MINUS
    if side == PLUS:
        m_idx = o + sp.bottom_index
    else:
        m_idx = o - 1 - sm.bottom_index
    # exact value ties resolve to the leftmost point everywhere; the only
    # systematic tie is V(-h) = V(0) = 0 from the left-limit reflection
    while m_idx > 0 and gp.values[m_idx - 1] == gp.values[m_idx]:
        m_idx -= 1
    v_m = gp.values[m_idx]

    ext = find_c_extrema(gp, c)
    max_left = [e.index for e in ext if e.kind == MAX and e.index < m_idx]
    max_right = [e.index for e in ext if e.kind == MAX and e.index > m_idx]
    p_idx = max_left[-1] if max_left else None
    q_idx = max_right[0] if max_right else None
    mins = [e.index for e in ext if e.kind == MIN]
    if mins and sp.barrier != sm.barrier and m_idx not in mins:
        # once both first passages are inside the window the bottom is a
        # certified c-minimum, so the two routes must agree
        raise AssertionError(
            f"extrema scan and first-passage route disagree: "
            f"bottom {m_idx} not among certified minima {mins}")

    certified = p_idx is not None and q_idx is not None
    if not certified:
        # barrier-attaining flanks: same heights, same bracketing
        if side == PLUS:
            if q_idx is None:
                rel = sp.bottom_index + int(np.argmax(plus[sp.bottom_index:sp.tau_index + 1]))
                q_idx = o + rel
            if p_idx is None:
                pre = minus[:sm.bottom_index + 1]
                j = int(np.argmax(pre))
                if minus[j] < v_m + c:
                    j = int(np.argmax(minus[:sm.tau_index + 1]))
                p_idx = o - 1 - j
        else:
            if p_idx is None:
                rel = sm.bottom_index + int(np.argmax(minus[sm.bottom_index:sm.tau_index + 1]))
                p_idx = o - 1 - rel
            if q_idx is None:
                pre = plus[:sp.bottom_index + 1]
                j = int(np.argmax(pre))
                if plus[j] < v_m + c:
                    j = int(np.argmax(plus[:sp.tau_index + 1]))
                q_idx = o + j

    if not (p_idx < m_idx < q_idx):
        raise AssertionError(f"valley ordering violated: {p_idx}, {m_idx}, {q_idx}")
    h = gp.step_h
    return Valley(
        height=c,
        left_top=(p_idx - o) * h,
        bottom=(m_idx - o) * h,
        right_top=(q_idx - o) * h,
        side=side,
        barrier_plus=sp.barrier,
        barrier_minus=sm.barrier,
        boundary_extended=boundary_extended,
        flanks_certified=certified,
        left_index=p_idx,
        bottom_index=m_idx,
        right_index=q_idx,
    )


def ab_window(env_recentered: PathLike, c: float, r: float) -> tuple[float, float]:
    """Crossing window of level c*r around a recentered valley bottom.

    Returns (a, b): the largest grid x <= 0 and the smallest grid x >= 0
    whose value strictly exceeds c*r.
    """
    if not (0.0 < r < 1.0):
        raise ParameterError(f"r must be in (0, 1), got {r}")
    gp = as_grid(env_recentered)
    if gp.values[gp.origin_index] != 0.0:
        raise ParameterError("environment must be recentered at its bottom")
    lvl = c * r
    o = gp.origin_index
    left = np.nonzero(gp.values[:o + 1] > lvl)[0]
    right = np.nonzero(gp.values[o:] > lvl)[0]
    if len(left) == 0 or len(right) == 0:
        raise WindowTooSmallError(f"level {lvl} not exceeded on both sides")
    a = (int(left[-1]) - o) * gp.step_h
    b = int(right[0]) * gp.step_h
    return a, b


# --------------------------------------------------------------------------
# Growable environments
# --------------------------------------------------------------------------

class EnvironmentStream:
    """Two-sided environment whose window can grow with fresh increments.

    Growth continues the per-side RNG streams, so an extended window has
    exactly the law of a longer sample and previously returned values
    never change.
    """

    def __init__(self, spec: StableLawSpec, step_h: float, n_steps_each: int,
                 stream_id: int = 0, max_points: int = DEFAULT_MAX_POINTS,
                 label_step_h: float | None = None):
        if n_steps_each < 1:
            raise ParameterError("n_steps_each must be >= 1")
        self.spec = spec
        self.step_h = float(step_h)
        # increments follow the law at step_h; the grid may carry a
        # different label, which is how rescaled pipelines are built
        self.label_step_h = float(label_step_h) if label_step_h else float(step_h)
        self.stream_id = int(stream_id)
        self.max_points = int(max_points)
        self._rng_plus = substream(spec.seed, stream_id, 0)
        self._rng_minus = substream(spec.seed, stream_id, 1)
        self._plus = np.concatenate([[0.0], np.cumsum(
            stable_increments(self._rng_plus, spec, n_steps_each, self.step_h))])
        self._minus = np.concatenate([[0.0], np.cumsum(
            stable_increments(self._rng_minus, negate_law(spec), n_steps_each, self.step_h))])
        self.extensions = 0
        self._cache: TwoSidedPath | None = None

    @property
    def n_steps_each(self) -> int:
        return max(len(self._plus), len(self._minus)) - 1

    def grow(self, side: str | None = None, factor: float = 2.0) -> None:
        """Double one or both sides; raises ReplicationAborted at the cap."""
        for tag in ([side] if side else [PLUS, MINUS]):
            cur = self._plus if tag == PLUS else self._minus
            extra = max(1, int((factor - 1.0) * (len(cur) - 1)))
            if len(cur) + extra > self.max_points:
                raise ReplicationAborted(
                    f"window cap {self.max_points} points reached on {tag} side")
            rng = self._rng_plus if tag == PLUS else self._rng_minus
            spec = self.spec if tag == PLUS else negate_law(self.spec)
            inc = stable_increments(rng, spec, extra, self.step_h)
            ext = np.concatenate([cur, cur[-1] + np.cumsum(inc)])
            if tag == PLUS:
                self._plus = ext
            else:
                self._minus = ext
        self.extensions += 1
        self._cache = None

    def two_sided(self) -> TwoSidedPath:
        if self._cache is None:
            self._cache = TwoSidedPath(GridPath(0, self.label_step_h, self._plus),
                                       GridPath(0, self.label_step_h, self._minus))
        return self._cache

    def combined(self) -> GridPath:
        return self.two_sided().combined()


def sample_valley_environment(spec: StableLawSpec, c: float, step_h: float,
                              stream_id: int = 0, n_steps_each: int | None = None,
                              max_points: int = DEFAULT_MAX_POINTS,
                              ) -> tuple[EnvironmentStream, Valley]:
    """Sample an environment wide enough to hold its height-c valley.

    The initial window scales like c**alpha; on WindowTooSmallError both
    sides are doubled with fresh increments until the valley fits or the
    point cap aborts the replication.
    """
    if n_steps_each is None:
        n_steps_each = max(64, int(8 * c**spec.alpha / step_h))
    stream = EnvironmentStream(spec, step_h, n_steps_each, stream_id, max_points)
    while True:
        try:
            valley = standard_valley(stream.two_sided(), c,
                                     boundary_extended=stream.extensions > 0)
            return stream, valley
        except WindowTooSmallError:
            stream.grow()
