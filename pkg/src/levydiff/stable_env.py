"""Alpha-stable Levy environments on a uniform spatial grid.

The environment is a two-sided cadlag process built from two independent
one-sided paths, evaluated as ``V(t) = plus(t)`` for ``t >= 0`` and as the
left limit ``minus((-t)-)`` for ``t < 0``.  Increments are generated
exactly (Chambers-Mallows-Stuck family) so that each step of width ``h``
has characteristic function ``exp(-h * psi(lam))`` with

    psi(lam) = k |lam|^alpha (1 - i beta sgn(lam) tan(pi alpha / 2))   alpha in (1, 2)
    psi(lam) = k lam^2                                                 alpha = 2
    psi(lam) = k |lam| - i d lam                                       alpha = 1

where ``d`` is the physical drift of the path (``drift_d`` below), so a
step adds a deterministic ``drift_d * h``.  Stability index is restricted
to [1, 2]: recurrent environments that are not a pure drift.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

from .errors import ParameterError, RangeError
from .rng import substream

__all__ = [
    "StableLawSpec",
    "GridPath",
    "TwoSidedPath",
    "PathLike",
    "as_grid",
    "negate_law",
    "psi",
    "sample_one_sided",
    "sample_two_sided",
    "extend_one_sided",
    "charfn_check",
    "rho_estimate",
    "write_path_csv",
    "read_path_csv",
]


# --------------------------------------------------------------------------
# Law specification
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class StableLawSpec:
    """Parameters of the environment's stable law.

    alpha:    stability index in [1, 2].
    beta:     skewness in [-1, 1]; ignored at alpha = 2, must be 0 at alpha = 1.
    scale_k:  positive scale constant of the characteristic exponent.
    drift_d:  physical drift per unit length, used only at alpha = 1.
    seed:     64-bit seed anchoring every stream drawn from this spec.
    """

    alpha: float
    beta: float = 0.0
    scale_k: float = 1.0
    drift_d: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not (1.0 <= self.alpha <= 2.0):
            raise ParameterError(f"alpha must be in [1, 2], got {self.alpha}")
        if not (-1.0 <= self.beta <= 1.0):
            raise ParameterError(f"beta must be in [-1, 1], got {self.beta}")
        if not (self.scale_k > 0.0):
            # scale_k > 0 also rules out the pure-drift degenerate case
            raise ParameterError(f"scale_k must be > 0, got {self.scale_k}")
        if self.alpha == 1.0 and self.beta != 0.0:
            raise ParameterError("alpha = 1 supports only the symmetric (beta = 0) case")

    @property
    def is_gaussian(self) -> bool:
        return self.alpha == 2.0


def negate_law(spec: StableLawSpec) -> StableLawSpec:
    """Spec of ``-V`` for ``V ~ spec``: skewness and drift change sign."""
    return replace(spec, beta=-spec.beta, drift_d=-spec.drift_d)


def psi(spec: StableLawSpec, lam: np.ndarray) -> np.ndarray:
    """Characteristic exponent: E[exp(i lam V(t))] = exp(-t psi(lam))."""
    lam = np.asarray(lam, dtype=float)
    a = spec.alpha
    if a == 2.0:
        return spec.scale_k * lam**2 + 0j
    mod = spec.scale_k * np.abs(lam) ** a
    if a == 1.0:
        return mod - 1j * spec.drift_d * lam
    skew = spec.beta * np.tan(np.pi * a / 2.0) * np.sign(lam)
    return mod * (1.0 - 1j * skew)


# --------------------------------------------------------------------------
# Grid paths
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GridPath:
    """Cadlag step path on a uniform grid.

    ``values[i]`` is the path value at ``x = (i - origin_index) * step_h``;
    between grid points the path is constant (right continuous), so the
    left limit at grid point ``i`` is ``values[i - 1]``.
    """

    origin_index: int
    step_h: float
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        if not (self.step_h > 0.0):
            raise ParameterError(f"step_h must be > 0, got {self.step_h}")
        if not (0 <= self.origin_index < len(v)):
            raise ParameterError("origin_index outside values array")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def x(self) -> np.ndarray:
        """Grid coordinates, ascending."""
        return (np.arange(len(self.values)) - self.origin_index) * self.step_h

    @property
    def x_lo(self) -> float:
        return -self.origin_index * self.step_h

    @property
    def x_hi(self) -> float:
        return (len(self.values) - 1 - self.origin_index) * self.step_h

    def index_of(self, x: float) -> int:
        """Index of the nearest grid point to ``x`` (must lie in the window)."""
        i = self.origin_index + int(round(x / self.step_h))
        if not (0 <= i < len(self.values)):
            raise RangeError(f"x = {x} outside stored window "
                             f"[{self.x_lo}, {self.x_hi}]")
        return i

    def floor_index(self, x: float) -> int:
        """Index of the grid cell containing ``x`` under cadlag semantics."""
        i = self.origin_index + int(np.floor(x / self.step_h + 1e-12))
        if not (0 <= i < len(self.values)):
            raise RangeError(f"x = {x} outside stored window "
                             f"[{self.x_lo}, {self.x_hi}]")
        return i

    def value_at(self, x: float) -> float:
        return float(self.values[self.floor_index(x)])

    def with_values(self, values: np.ndarray, origin_index: int | None = None) -> "GridPath":
        return GridPath(self.origin_index if origin_index is None else origin_index,
                        self.step_h, values)


@dataclass(frozen=True)
class TwoSidedPath:
    """Two-sided environment assembled from independent one-sided paths.

    ``plus`` holds the ``x >= 0`` side; ``minus`` is an independent path
    with the law of ``-V_plus`` parameterized by ``x >= 0`` and read
    through its left limits on the negative axis.
    """

    plus: GridPath
    minus: GridPath
    _combined: GridPath = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.plus.step_h != self.minus.step_h:
            raise ParameterError("plus and minus sides must share step_h")
        if self.plus.origin_index != 0 or self.minus.origin_index != 0:
            raise ParameterError("one-sided components must have origin_index 0")
        if self.plus.values[0] != 0.0 or self.minus.values[0] != 0.0:
            raise ParameterError("environment sides must start at 0")
        m = len(self.minus.values) - 1
        # V(-j h) = minus((j h)-) = minus.values[j - 1]; the final minus
        # value only ever appears as a left limit beyond the window.
        neg = self.minus.values[:m][::-1] if m > 0 else np.empty(0)
        vals = np.concatenate([neg, self.plus.values])
        object.__setattr__(self, "_combined",
                           GridPath(m, self.plus.step_h, vals))

    def combined(self) -> GridPath:
        """The assembled two-sided path as one grid array."""
        return self._combined

    def value_at(self, t: float) -> float:
        return self._combined.value_at(t)


PathLike = Union[GridPath, TwoSidedPath]


def as_grid(path: PathLike) -> GridPath:
    """Accept either a GridPath or a TwoSidedPath and return the grid view."""
    if isinstance(path, TwoSidedPath):
        return path.combined()
    return path


# --------------------------------------------------------------------------
# Exact stable increments (Chambers-Mallows-Stuck)
# --------------------------------------------------------------------------

def stable_increments(rng: np.random.Generator, spec: StableLawSpec,
                      n: int, step_h: float) -> np.ndarray:
    """Draw ``n`` i.i.d. increments with char. function exp(-h psi)."""
    if n < 0:
        raise ParameterError("negative increment count")
    if not (step_h > 0.0):
        raise ParameterError(f"step_h must be > 0, got {step_h}")
    a, b, k = spec.alpha, spec.beta, spec.scale_k
    if a == 2.0:
        # exp(-h k lam^2) is the Gaussian char. fn. with variance 2 k h
        return rng.normal(0.0, np.sqrt(2.0 * k * step_h), size=n)
    u = (rng.random(n) - 0.5) * np.pi
    if a == 1.0:
        # symmetric Cauchy with scale k h, plus deterministic drift
        return k * step_h * np.tan(u) + spec.drift_d * step_h
    w = rng.standard_exponential(n)
    tb = b * np.tan(np.pi * a / 2.0)
    b0 = np.arctan(tb) / a
    s0 = (1.0 + tb * tb) ** (1.0 / (2.0 * a))
    x = (s0 * np.sin(a * (u + b0)) / np.cos(u) ** (1.0 / a)
         * (np.cos(u - a * (u + b0)) / w) ** ((1.0 - a) / a))
    return (k * step_h) ** (1.0 / a) * x


def sample_one_sided(spec: StableLawSpec, n_steps: int, step_h: float,
                     stream_id: int = 0) -> GridPath:
    """Sample ``V`` on ``{0, h, ..., n h}``; deterministic in (seed, stream_id)."""
    if n_steps < 1:
        raise ParameterError("n_steps must be >= 1")
    rng = substream(spec.seed, stream_id)
    inc = stable_increments(rng, spec, n_steps, step_h)
    vals = np.concatenate([[0.0], np.cumsum(inc)])
    return GridPath(0, step_h, vals)


def extend_one_sided(path: GridPath, spec: StableLawSpec,
                     rng: np.random.Generator, extra_steps: int) -> GridPath:
    """Append fresh increments from ``rng``; the extended path keeps its law."""
    inc = stable_increments(rng, spec, extra_steps, path.step_h)
    vals = np.concatenate([path.values, path.values[-1] + np.cumsum(inc)])
    return GridPath(path.origin_index, path.step_h, vals)


def sample_two_sided(spec: StableLawSpec, n_steps_each: int, step_h: float,
                     stream_id: int = 0) -> TwoSidedPath:
    """Sample a two-sided environment; sides use independent substreams."""
    if n_steps_each < 1:
        raise ParameterError("n_steps_each must be >= 1")
    rng_p = substream(spec.seed, stream_id, 0)
    rng_m = substream(spec.seed, stream_id, 1)
    inc_p = stable_increments(rng_p, spec, n_steps_each, step_h)
    inc_m = stable_increments(rng_m, negate_law(spec), n_steps_each, step_h)
    plus = GridPath(0, step_h, np.concatenate([[0.0], np.cumsum(inc_p)]))
    minus = GridPath(0, step_h, np.concatenate([[0.0], np.cumsum(inc_m)]))
    return TwoSidedPath(plus, minus)


# --------------------------------------------------------------------------
# Validation helpers
# --------------------------------------------------------------------------

def charfn_check(path_increments: np.ndarray, spec: StableLawSpec,
                 step_h: float, lambdas: np.ndarray) -> list[tuple[float, float]]:
    """Empirical vs theoretical characteristic-function modulus per lambda."""
    inc = np.asarray(path_increments, dtype=float)
    if inc.size == 0:
        raise ParameterError("empty increment array")
    out = []
    for lam in np.atleast_1d(lambdas):
        emp = np.abs(np.mean(np.exp(1j * lam * inc)))
        theo = np.abs(np.exp(-step_h * psi(spec, lam)))
        out.append((float(emp), float(theo)))
    return out


def rho_estimate(spec: StableLawSpec, n_samples: int, stream_id: int = 7001) -> float:
    """Monte Carlo estimate of rho = P(V(1) >= 0).

    For stable laws this probability does not depend on the time at which
    it is evaluated; one unit-step increment per sample suffices.
    """
    if n_samples < 1000:
        raise ParameterError("need at least 1e3 samples for rho")
    rng = substream(spec.seed, stream_id)
    inc = stable_increments(rng, spec, n_samples, 1.0)
    return float(np.mean(inc >= 0.0))


# --------------------------------------------------------------------------
# Serialization
# --------------------------------------------------------------------------

def write_path_csv(path: PathLike, fh: io.TextIOBase) -> None:
    """CSV with header ``x,value``, ascending x, full double precision."""
    gp = as_grid(path)
    fh.write("x,value\n")
    for x, v in zip(gp.x, gp.values):
        fh.write(f"{float(x)!r},{float(v)!r}\n")


def read_path_csv(fh: io.TextIOBase) -> GridPath:
    header = fh.readline().strip()
    if header != "x,value":
        raise ParameterError(f"unexpected CSV header: {header}")
    xs, vs = [], []
    for line in fh:
        line = line.strip()
        if not line:
            continue
        sx, sv = line.split(",")
        xs.append(float(sx))
        vs.append(float(sv))
    x = np.asarray(xs)
    v = np.asarray(vs)
    if len(x) < 2:
        raise ParameterError("path CSV needs at least two rows")
    h = float(x[1] - x[0])
    origin = int(round(-x[0] / h))
    return GridPath(origin, h, v)
