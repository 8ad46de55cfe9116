"""Environment sampling: exact increments, two-sided assembly, validation."""

import io

import numpy as np
import pytest

from levydiff.errors import ParameterError
from levydiff.rng import substream
from levydiff.stable_env import (GridPath, StableLawSpec, TwoSidedPath,
                                 charfn_check, negate_law, psi,
                                 read_path_csv, rho_estimate,
                                 sample_one_sided, sample_two_sided,
                                 stable_increments, write_path_csv)
from levydiff.verify import ks_two_sample


def test_spec_validation():
    with pytest.raises(ParameterError):
        StableLawSpec(2.5)
    with pytest.raises(ParameterError):
        StableLawSpec(0.9)
    with pytest.raises(ParameterError):
        StableLawSpec(1.5, beta=1.5)
    with pytest.raises(ParameterError):
        StableLawSpec(1.5, scale_k=0.0)
    with pytest.raises(ParameterError):
        StableLawSpec(1.0, beta=0.5)


def test_gaussian_increments_are_standard_normal():
    # alpha=2, k=0.5, h=1 has char. fn. exp(-lam^2/2), the standard normal
    spec = StableLawSpec(2.0, 0.0, 0.5, seed=1)
    path = sample_one_sided(spec, 100_000, 1.0, 0)
    inc = np.diff(path.values)
    assert abs(np.mean(inc)) < 3.0 / np.sqrt(len(inc))
    assert abs(np.var(inc) - 1.0) < 0.02
    emp, theo = charfn_check(inc, spec, 1.0, np.array([1.0]))[0]
    assert theo == pytest.approx(np.exp(-0.5), abs=1e-12)
    assert abs(emp - theo) < 3.0 / np.sqrt(len(inc))


def test_cauchy_charfn_matches():
    # oracle: empirical characteristic function vs exp(-h psi)
    spec = StableLawSpec(1.0, 0.0, 1.0, seed=2)
    path = sample_one_sided(spec, 100_000, 1.0, 0)
    inc = np.diff(path.values)
    emp, theo = charfn_check(inc, spec, 1.0, np.array([1.0]))[0]
    assert theo == pytest.approx(np.exp(-1.0), abs=1e-12)
    assert abs(emp - theo) < 3.0 / np.sqrt(len(inc))


def test_complex_charfn_all_regimes():
    # full complex match, not only the modulus; includes skew and drift
    for a, b, k, d in [(1.5, 0.5, 1.0, 0.0), (1.5, -1.0, 2.0, 0.0),
                       (1.0, 0.0, 1.0, 0.7), (2.0, 0.0, 0.5, 0.0)]:
        spec = StableLawSpec(a, b, k, d, seed=3)
        rng = substream(99, a * 10)
        h = 0.37
        n = 200_000
        inc = stable_increments(rng, spec, n, h)
        for lam in (0.6, 1.7):
            emp = np.mean(np.exp(1j * lam * inc))
            theo = np.exp(-h * psi(spec, lam))
            assert abs(emp - theo) < 4.0 / np.sqrt(n), (a, b, lam)


def test_charfn_check_theoretical_modulus():
    spec = StableLawSpec(1.5, 0.5, 1.0, seed=4)
    inc = stable_increments(substream(1, 1), spec, 30_000, 0.2)
    emp, theo = charfn_check(inc, spec, 0.2, np.array([2.0]))[0]
    assert theo == pytest.approx(np.exp(-0.2 * 1.0 * 2.0**1.5), rel=1e-12)
    assert abs(emp - theo) < 3.0 / np.sqrt(30_000)
    both = charfn_check(inc, spec, 0.2, np.array([0.0]))[0]
    assert both == (1.0, 1.0)
    with pytest.raises(ParameterError):
        charfn_check(np.array([]), spec, 0.2, np.array([1.0]))


def test_determinism_bit_identical():
    spec = StableLawSpec(1.5, 0.3, 1.0, seed=5)
    a = sample_one_sided(spec, 1000, 0.01, 7)
    b = sample_one_sided(spec, 1000, 0.01, 7)
    assert np.array_equal(a.values, b.values)
    c = sample_one_sided(spec, 1000, 0.01, 8)
    assert not np.array_equal(a.values, c.values)


def test_two_sided_evaluation_and_symmetry():
    spec = StableLawSpec(2.0, 0.0, 0.5, seed=6)
    env = sample_two_sided(spec, 100, 0.1)
    assert env.value_at(0.0) == 0.0
    # left limit convention: V(-h) is the minus side's value at 0
    assert env.value_at(-0.1) == env.minus.values[0]
    # symmetric case: the two sides have the same one-dimensional law
    plus_vals = np.array([sample_two_sided(spec, 10, 0.1, stream_id=i).plus.values[-1]
                          for i in range(4000)])
    minus_vals = np.array([sample_two_sided(spec, 10, 0.1, stream_id=i).minus.values[-1]
                           for i in range(4000)])
    _, p = ks_two_sample(plus_vals, minus_vals)
    assert p > 0.01


def test_two_sided_independence():
    spec = StableLawSpec(1.5, 0.0, 1.0, seed=7)
    n = 4000
    pv = np.empty(n)
    mv = np.empty(n)
    for i in range(n):
        env = sample_two_sided(spec, 10, 0.1, stream_id=i)
        pv[i] = env.plus.values[-1]
        mv[i] = env.minus.values[-1]
    # heavy tails: correlate ranks instead of raw values
    rp = np.argsort(np.argsort(pv)) / n
    rm = np.argsort(np.argsort(mv)) / n
    corr = np.corrcoef(rp, rm)[0, 1]
    assert abs(corr) < 3.0 / np.sqrt(n)


def test_spectrally_positive_jump_census():
    # beta = +1: no negative jumps, so large moves are all upward; the
    # minus side carries the negated law and mirrors this
    spec = StableLawSpec(1.5, 1.0, 1.0, seed=8)
    h = 0.01
    env = sample_two_sided(spec, 10_000, h)
    thr = 5.0 * (spec.scale_k * h) ** (1.0 / spec.alpha)
    inc_p = np.diff(env.plus.values)
    inc_m = np.diff(env.minus.values)
    assert np.sum(inc_p > thr) > 100         # big positive jumps happen
    assert np.sum(inc_p < -thr) == 0         # big negative ones do not
    assert np.sum(inc_m < -thr) > 100
    assert np.sum(inc_m > thr) == 0


def test_negate_law():
    spec = StableLawSpec(1.5, 0.7, 1.0, seed=9)
    neg = negate_law(spec)
    assert neg.beta == -0.7
    lam = 1.3
    # psi_neg(lam) = psi(-lam)
    assert psi(neg, lam) == pytest.approx(psi(spec, -lam), rel=1e-12)


def test_stability_rescaling_marginal():
    # c^{-1} V(c^alpha x) at x=1 has the law of V(1)
    from levydiff.path_core import rescale
    spec = StableLawSpec(1.5, 0.0, 1.0, seed=10)
    n = 4000
    c = 2.0
    h = 0.05
    steps = int(np.ceil(c**spec.alpha / h)) + 1
    direct = np.empty(n)
    scaled = np.empty(n)
    for i in range(n):
        path = sample_one_sided(spec, steps, h, stream_id=i)
        direct[i] = path.value_at(1.0)
        rs = rescale(path, c, spec.alpha)
        scaled[i] = rs.value_at(1.0)
    _, p = ks_two_sample(direct, scaled)
    assert p > 0.01


def test_rho_estimates():
    assert abs(rho_estimate(StableLawSpec(2.0, 0.0, 0.5, seed=11), 100_000) - 0.5) \
        < 3.0 / (2 * np.sqrt(100_000))
    assert abs(rho_estimate(StableLawSpec(1.5, 0.0, 1.0, seed=12), 100_000) - 0.5) \
        < 3.0 / (2 * np.sqrt(100_000))
    # spectrally negative: only negative jumps, positive compensation
    spec = StableLawSpec(1.5, -1.0, 1.0, seed=13)
    rho = rho_estimate(spec, 100_000)
    assert 0.5 < rho < 1.0
    # oracle: the positivity probability does not depend on the horizon
    rng = substream(spec.seed, 555)
    rho2 = float(np.mean(stable_increments(rng, spec, 100_000, 2.0) >= 0.0))
    se = np.sqrt(2 * 0.25 / 100_000)
    assert abs(rho - rho2) < 3 * se
    with pytest.raises(ParameterError):
        rho_estimate(spec, 100)


def test_grid_path_contracts():
    with pytest.raises(ParameterError):
        GridPath(5, 1.0, np.array([1.0, 2.0]))   # origin outside array
    gp = GridPath(1, 0.5, np.array([3.0, 0.0, -1.0]))
    assert gp.x_lo == -0.5 and gp.x_hi == 0.5
    assert gp.value_at(0.3) == 0.0      # cadlag: constant until next point
    assert gp.value_at(-0.5) == 3.0
    with pytest.raises(Exception):
        gp.value_at(5.0)
    with pytest.raises(ParameterError):
        TwoSidedPath(gp, gp)  # origin_index must be 0 on both sides
    side = GridPath(0, 0.5, np.array([1.0, 2.0]))
    with pytest.raises(ParameterError):
        TwoSidedPath(side, side)  # environment sides must start at 0


def test_csv_round_trip():
    spec = StableLawSpec(1.5, 0.2, 1.0, seed=14)
    env = sample_two_sided(spec, 25, 0.2)
    buf = io.StringIO()
    write_path_csv(env, buf)
    buf.seek(0)
    back = read_path_csv(buf)
    gp = env.combined()
    assert np.array_equal(back.values, gp.values)
    assert back.origin_index == gp.origin_index
    assert back.step_h == pytest.approx(gp.step_h)
