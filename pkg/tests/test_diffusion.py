"""Diffusion engines: occupation identity, Brownian null, cross-checks."""

import json

import numpy as np
import pytest
from scipy.stats import norm

from levydiff import diffusion
from levydiff.diffusion import (BROX, CHAIN, brox_simulate, chain_simulate,
                                favorite_point, local_time_profile,
                                scale_function)
from levydiff.errors import ParameterError, WindowTooSmallError
from levydiff.rng import substream
from levydiff.stable_env import GridPath, StableLawSpec
from levydiff.valley import EnvironmentStream
from levydiff.verify import ks_one_sample, ks_two_sample


def flat_env(half=8.0, h=0.05):
    n = int(half / h)
    return GridPath(n, h, np.zeros(2 * n + 1))


def test_scale_function():
    env = flat_env()
    s, logabs = scale_function(env, 1.0)
    assert s == 1.0 and logabs == pytest.approx(0.0, abs=1e-12)
    s, logabs = scale_function(env, -2.0)
    assert s == -1.0 and logabs == pytest.approx(np.log(2.0), abs=1e-12)
    assert scale_function(env, 0.0) == (0.0, -np.inf)
    # constant environment: S(x) = exp(a) x
    n = 20
    vals = np.full(2 * n + 1, 1.7)
    vals[n] = 0.0
    # piecewise constant five-segment environment vs a direct segment sum
    rng = substream(0, 90)
    seg_vals = np.repeat(rng.normal(size=5), 8)
    env2 = GridPath(0, 0.25, np.concatenate([[0.0], seg_vals]))
    x = 0.25 * 33
    _, got = scale_function(env2, x)
    direct = 0.25 * (1.0 + np.sum(np.exp(seg_vals[:32])))
    assert got == pytest.approx(np.log(direct), rel=1e-12)


def test_occupation_identity_both_engines():
    env = flat_env()
    for engine, fn in ((CHAIN, chain_simulate), (BROX, brox_simulate)):
        run = fn(env, 2.0, stream=1, master_seed=5)
        prof = local_time_profile(run)
        assert prof.occupation_defect() < 1e-9
        assert run.engine == engine
        assert np.all(prof.values >= 0.0)


def test_chain_brownian_null():
    env = flat_env()
    xs = np.array([chain_simulate(env, 1.0, stream=i, master_seed=11).final_position
                   for i in range(4000)])
    d, p = ks_one_sample(xs, norm.cdf)
    assert p > 0.01, f"chain null: d={d}, p={p}"


def test_brox_brownian_null():
    env = flat_env()
    xs = np.array([brox_simulate(env, 1.0, stream=i, master_seed=12).final_position
                   for i in range(4000)])
    d, p = ks_one_sample(xs, norm.cdf)
    assert p > 0.01, f"brox null: d={d}, p={p}"


def test_chain_reversibility_stationary_well():
    # deep 9-site well: occupation fractions approach exp(-V)/Z
    vals = np.array([60.0, 30.0, 6.0, 1.0, 0.0, 1.0, 6.0, 30.0, 60.0])
    env = GridPath(4, 1.0, vals)
    run = chain_simulate(env, 1000.0, stream=3, master_seed=13)
    frac = run.occupation / run.occupation.sum()
    target = np.exp(-vals)
    target /= target.sum()
    # compare the three dominant sites
    for j in (3, 4, 5):
        assert abs(frac[j] - target[j]) < 0.05


def test_profile_stationary_shape():
    vals = np.array([60.0, 30.0, 6.0, 1.0, 0.0, 1.0, 6.0, 30.0, 60.0])
    env = GridPath(4, 1.0, vals)
    run = chain_simulate(env, 1000.0, stream=4, master_seed=14)
    prof = local_time_profile(run)
    dens = prof.values / (prof.values.sum() * prof.step_h)
    target = np.exp(-vals)
    target /= target.sum() * 1.0
    assert np.max(np.abs(dens - target)[2:7]) < 0.05
    # bins never visited stay exactly zero
    assert prof.values[0] == 0.0 and prof.values[-1] == 0.0


def test_cross_engine_constant_env():
    # the generator is invariant to constant shifts of V; both engines
    # must reproduce the same Brownian law
    n = int(8.0 / 0.05)
    env = GridPath(n, 0.05, np.full(2 * n + 1, -0.7))
    a = np.array([chain_simulate(env, 1.0, stream=i, master_seed=15).final_position
                  for i in range(1500)])
    b = np.array([brox_simulate(env, 1.0, stream=i, master_seed=16).final_position
                  for i in range(1500)])
    d, p = ks_two_sample(a, b)
    assert p > 0.01, f"cross-engine: d={d}, p={p}"


def test_cross_engine_random_valley_local_time():
    # normalized local time at the bottom: BROX vs CHAIN in distribution
    from levydiff.valley import sample_valley_environment
    spec = StableLawSpec(2.0, 0.0, 0.5, seed=17)
    c = 2.0
    t = float(np.exp(c))
    n = 400
    a = np.empty(n)
    b = np.empty(n)
    for i in range(n):
        stream, v = sample_valley_environment(spec, c, 0.1, stream_id=i)
        run_c = chain_simulate(stream, t, stream=2 * i)
        prof_c = local_time_profile(run_c)
        jc = prof_c.origin_index + int(round(v.bottom / 0.1))
        a[i] = prof_c.values[jc] / t
        stream2, v2 = sample_valley_environment(spec, c, 0.1, stream_id=10_000 + i)
        run_b = brox_simulate(stream2, t, stream=2 * i + 1)
        prof_b = local_time_profile(run_b)
        jb = prof_b.origin_index + int(round(v2.bottom / 0.1))
        b[i] = prof_b.values[jb] / t
    d, p = ks_two_sample(a, b)
    assert p > 0.01, f"cross-engine local time: d={d}, p={p}"


def test_window_extension_during_run():
    spec = StableLawSpec(2.0, 0.0, 0.5, seed=18)
    stream = EnvironmentStream(spec, 0.1, 16, stream_id=1)
    run = chain_simulate(stream, 50.0, stream=1)
    assert run.window_extensions > 0
    prof = local_time_profile(run)
    assert prof.occupation_defect() < 1e-9
    # fixed narrow window raises instead
    with pytest.raises(WindowTooSmallError):
        chain_simulate(flat_env(half=0.5, h=0.1), 50.0, stream=1, master_seed=19)


def test_favorite_point():
    prof = diffusion.LocalTimeProfile(2, 0.5, np.array([0.0, 1.0, 3.0, 1.0]), 1.0)
    assert favorite_point(prof) == 0.0
    # exact tie resolves to the leftmost point
    prof2 = diffusion.LocalTimeProfile(2, 0.5, np.array([0.0, 3.0, 1.0, 3.0]), 1.0)
    assert favorite_point(prof2) == -0.5
    # argmax invariant under positive scaling
    prof3 = diffusion.LocalTimeProfile(2, 0.5, 7.25 * prof.values, 1.0)
    assert favorite_point(prof3) == favorite_point(prof)
    rng = substream(0, 91)
    vals = rng.random(50)
    prof4 = diffusion.LocalTimeProfile(25, 0.1, vals, 1.0)
    assert favorite_point(prof4) == (int(np.argmax(vals)) - 25) * 0.1


def test_run_summary_json():
    run = chain_simulate(flat_env(), 1.0, stream=5, master_seed=20)
    doc = json.loads(run.summary_json())
    assert set(doc) == {"engine", "t", "steps_or_jumps", "window_extensions"}
    assert doc["engine"] == CHAIN and doc["t"] == 1.0


def test_engine_determinism():
    env = flat_env()
    r1 = chain_simulate(env, 1.0, stream=9, master_seed=21)
    r2 = chain_simulate(env, 1.0, stream=9, master_seed=21)
    assert np.array_equal(r1.occupation, r2.occupation)
    assert r1.final_position == r2.final_position
    b1 = brox_simulate(env, 1.0, stream=9, master_seed=21)
    b2 = brox_simulate(env, 1.0, stream=9, master_seed=21)
    assert np.array_equal(b1.occupation, b2.occupation)


def test_parameter_errors():
    env = flat_env()
    with pytest.raises(ParameterError):
        chain_simulate(env, -1.0)
    with pytest.raises(ParameterError):
        brox_simulate(env, 1.0, dt=-0.1)
    with pytest.raises(ParameterError):
        brox_simulate(env, 1.0, bin_h=0.07)
