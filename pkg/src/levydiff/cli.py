"""Command line entry point: config wiring, subcommands, exit codes.

Exit codes: 0 success, 2 parameter error, 3 experiment fail (verdict
false or selftest failure), 4 replication-abort overflow.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import conditioned, diffusion, path_core, stable_env, valley, verify
from .errors import ParameterError, RangeError, ReplicationAborted, WindowTooSmallError
from .stable_env import StableLawSpec

EXIT_OK = 0
EXIT_PARAM = 2
EXIT_FAIL = 3
EXIT_ABORT = 4


def _log(level: str, msg: str) -> None:
    print(f"level={level} msg={msg}", file=sys.stderr)


@dataclass
class RunConfig:
    """Flat experiment configuration; round-trips through JSON losslessly."""

    alpha: float = 2.0
    beta: float = 0.0
    scale_k: float = 0.5
    drift_d: float = 0.0
    step_h: float = 0.1
    initial_window: float = 64.0
    experiment_id: str = "scaling"
    c_values: list[float] = field(default_factory=lambda: [4.0, 8.0, 12.0])
    probes: list[float] = field(default_factory=lambda: [-1.0, 0.0, 1.0])
    delta: float = 1.0
    r: float = 0.5
    n_replications: int = 100
    output_dir: str = "out"
    master_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if not (0.0 < self.r < 1.0):
            raise ParameterError(f"r must be in (0, 1), got {self.r}")
        if self.delta < 0.0:
            raise ParameterError("delta must be >= 0")

    def law(self) -> StableLawSpec:
        return StableLawSpec(self.alpha, self.beta, self.scale_k,
                             self.drift_d, self.master_seed)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(d) - known
        if extra:
            raise ParameterError(f"unknown config keys: {sorted(extra)}")
        return cls(**d)


def load_config(args) -> RunConfig:
    base: dict = {}
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ParameterError(f"config file not found: {args.config}")
        base = json.loads(path.read_text())
    cfg = RunConfig.from_dict(base)
    overrides = {
        "alpha": args.alpha, "beta": args.beta, "scale_k": args.k,
        "drift_d": args.drift, "step_h": args.h, "master_seed": args.seed,
        "output_dir": args.output_dir, "n_replications": args.n,
        "delta": args.delta, "r": args.r, "workers": args.workers,
        "initial_window": args.window,
    }
    d = cfg.to_dict()
    for k, v in overrides.items():
        if v is not None:
            d[k] = v
    if getattr(args, "c", None) is not None:
        d["c_values"] = [float(x) for x in args.c]
    if getattr(args, "probes", None) is not None:
        d["probes"] = [float(x) for x in args.probes]
    return RunConfig.from_dict(d)


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------

def cmd_sample_env(cfg: RunConfig) -> int:
    spec = cfg.law()
    n = max(2, int(cfg.initial_window / cfg.step_h))
    env = stable_env.sample_two_sided(spec, n, cfg.step_h)
    out = _outdir(cfg)
    with open(out / "env.csv", "w") as fh:
        stable_env.write_path_csv(env, fh)
    _log("info", f"wrote {out / 'env.csv'} with {2 * n + 1} points")
    return EXIT_OK


def cmd_find_valley(cfg: RunConfig) -> int:
    spec = cfg.law()
    c = cfg.c_values[-1]
    stream, vly = valley.sample_valley_environment(spec, c, cfg.step_h)
    out = _outdir(cfg)
    with open(out / "env.csv", "w") as fh:
        stable_env.write_path_csv(stream.combined(), fh)
    (out / "valley.json").write_text(vly.to_json())
    _log("info", f"valley at c={c}: bottom {vly.bottom:.4g} side {vly.side}")
    return EXIT_OK


def _simulate(cfg: RunConfig, engine: str):
    spec = cfg.law()
    c = cfg.c_values[-1]
    stream, vly = valley.sample_valley_environment(spec, c, cfg.step_h)
    horizon = float(np.exp(c))
    if engine == diffusion.CHAIN:
        run = diffusion.chain_simulate(stream, horizon, stream=1)
    else:
        run = diffusion.brox_simulate(stream, horizon, stream=1)
    return run, vly


def cmd_simulate(cfg: RunConfig, engine: str) -> int:
    run, _ = _simulate(cfg, engine)
    out = _outdir(cfg)
    (out / "run.json").write_text(run.summary_json())
    _log("info", f"simulated {engine} to t={run.horizon_t:.4g}, "
                 f"{run.events} events")
    return EXIT_OK


def cmd_local_time(cfg: RunConfig, engine: str) -> int:
    run, _ = _simulate(cfg, engine)
    prof = diffusion.local_time_profile(run)
    out = _outdir(cfg)
    (out / "run.json").write_text(run.summary_json())
    with open(out / "local_time.csv", "w") as fh:
        prof.write_csv(fh)
    _log("info", f"occupation defect {prof.occupation_defect():.3g}")
    return EXIT_OK


def cmd_limit_sample(cfg: RunConfig) -> int:
    spec = cfg.law()
    tilde = conditioned.sample_tilde(spec, half_window=16.0, step_h=cfg.step_h)
    gp = tilde.combined()
    prof = path_core.normalize_profile(gp, gp.x_lo, gp.x_hi + cfg.step_h / 2)
    out = _outdir(cfg)
    with open(out / "limit_profile.csv", "w") as fh:
        prof.write_csv(fh)
    (out / "limit.json").write_text(json.dumps({
        "log_integral": tilde.log_integral,
        "sup_density": tilde.sup_density(),
    }, sort_keys=True))
    _log("info", f"limit environment window [{gp.x_lo:.3g}, {gp.x_hi:.3g}]")
    return EXIT_OK


def cmd_verify(cfg: RunConfig, experiment_id: str) -> int:
    spec = cfg.law()
    report, rows = verify.run_experiment(
        experiment_id, spec, c_values=cfg.c_values, probes=cfg.probes,
        delta=cfg.delta, r=cfg.r, n_replications=cfg.n_replications,
        step_h=cfg.step_h, workers=cfg.workers)
    out = _outdir(cfg)
    (out / "report.json").write_text(report.to_json())
    with open(out / "observables.csv", "w") as fh:
        verify.write_observables_csv(rows, fh)
    _log("info", f"experiment {experiment_id}: verdict "
                 f"{'pass' if report.verdict else 'fail'}, "
                 f"{report.failures} aborted replications")
    budget = verify.MAX_ABORT_FRACTION * max(1, report.n_replications)
    if report.failures > budget * max(1, len(cfg.c_values) + 1):
        return EXIT_ABORT
    return EXIT_OK if report.verdict else EXIT_FAIL


# --------------------------------------------------------------------------
# Selftest
# --------------------------------------------------------------------------

def _selftest_checks():
    from scipy.stats import norm

    checks = []

    def check(name, fn):
        checks.append((name, fn))

    # stable_env
    def c_charfn():
        spec = StableLawSpec(2.0, 0.0, 0.5, seed=11)
        path = stable_env.sample_one_sided(spec, 10_000, 1.0, 1)
        inc = np.diff(path.values)
        pairs = stable_env.charfn_check(inc, spec, 1.0, np.array([0.0, 1.0]))
        assert abs(pairs[0][0] - 1.0) < 1e-12 and abs(pairs[0][1] - 1.0) < 1e-12
        assert abs(pairs[1][1] - np.exp(-0.5)) < 1e-12
        assert abs(pairs[1][0] - pairs[1][1]) < 3.0 / np.sqrt(len(inc))
    check("charfn gaussian", c_charfn)

    def c_cauchy():
        spec = StableLawSpec(1.0, 0.0, 1.0, seed=12)
        path = stable_env.sample_one_sided(spec, 10_000, 1.0, 1)
        inc = np.diff(path.values)
        emp, theo = stable_env.charfn_check(inc, spec, 1.0, np.array([1.0]))[0]
        assert abs(theo - np.exp(-1.0)) < 1e-12
        assert abs(emp - theo) < 3.0 / np.sqrt(len(inc))
    check("charfn cauchy", c_cauchy)

    def c_determinism():
        spec = StableLawSpec(1.5, 0.3, 1.0, seed=5)
        a = stable_env.sample_one_sided(spec, 500, 0.1, 3)
        b = stable_env.sample_one_sided(spec, 500, 0.1, 3)
        assert np.array_equal(a.values, b.values)
        env = stable_env.sample_two_sided(spec, 50, 0.1)
        assert env.value_at(0.0) == 0.0
    check("determinism and origin", c_determinism)

    def c_rho():
        spec = StableLawSpec(2.0, 0.0, 0.5, seed=6)
        rho = stable_env.rho_estimate(spec, 10_000)
        assert abs(rho - 0.5) < 3.0 / np.sqrt(10_000) + 0.5 / np.sqrt(10_000)
    check("rho gaussian", c_rho)

    # path_core
    def c_scans():
        gp = stable_env.GridPath(0, 1.0, np.array([0.0, 1.0, -1.0, 2.0]))
        assert np.array_equal(path_core.running_infimum(gp).values,
                              [0.0, 0.0, -1.0, -1.0])
        assert np.array_equal(path_core.running_supremum(gp).values,
                              [0.0, 1.0, 1.0, 2.0])
        assert np.array_equal(path_core.future_infimum(gp).values,
                              [-1.0, -1.0, -1.0, 2.0])
    check("path scans", c_scans)

    def c_expint():
        gp = stable_env.GridPath(0, 0.25, np.zeros(9))
        assert abs(path_core.exp_integral(gp, 0.0, 1.0, 1)) < 1e-12
        vals = np.full(9, 5.0)
        vals[0] = 0.0
        gp2 = stable_env.GridPath(0, 0.25, vals)
        got = path_core.exp_integral(gp2, 0.25, 2.25, -1)
        assert abs(got - (-5.0 + np.log(2.0))) < 1e-12
    check("exp integral", c_expint)

    def c_laplace():
        h = 0.01
        n = int(2.0 / h)
        xs = (np.arange(2 * n + 1) - n) * h
        gp = stable_env.GridPath(n, h, np.abs(xs))
        r0 = path_core.laplace_ratio(gp, 0.0, -2.0, 2.0, -1.0, 1.0)
        assert abs(r0 - 2.0) < 0.02
        r100 = path_core.laplace_ratio(gp, 100.0, -2.0, 2.0, -1.0, 1.0)
        assert 1.0 <= r100 <= 1.0 + 1e-40
    check("laplace ratio", c_laplace)

    # valley
    def c_extrema():
        h = 1.0
        inc_vals = np.arange(11.0)
        inc_vals -= inc_vals[0]
        gp = stable_env.GridPath(0, h, inc_vals)
        assert valley.find_c_extrema(gp, 1.0) == []
        vals = np.array([3.0, 1.0, 2.0, 0.0, 1.5, 0.5, 3.0])
        gp2 = stable_env.GridPath(3, h, vals)
        ext = valley.find_c_extrema(gp2, 2.0)
        assert [(e.x, e.kind) for e in ext] == [(0.0, valley.MIN)]
    check("c-extrema examples", c_extrema)

    def c_valley():
        h = 0.5
        n = 10
        xs = (np.arange(2 * n + 1) - n) * h
        gp = stable_env.GridPath(n, h, np.abs(xs))
        v = valley.standard_valley(gp, 1.0)
        assert v.bottom == 0.0 and v.side == valley.PLUS
        a, b = valley.ab_window(gp, 2.0, 0.5)
        assert a == -1.5 and b == 1.5
    check("standard valley well", c_valley)

    def c_stats():
        gp = stable_env.GridPath(0, 1.0, np.array([0.0, -1.0, 1.0, -2.0, 3.0]))
        st = valley.one_sided_stats(gp, 2.0)
        assert (st.tau_index, st.bottom_index, st.barrier) == (2, 1, 1.0)
        gp2 = stable_env.GridPath(0, 1.0, np.array([0.0, -2.0, -4.0, -2.0, 0.0]))
        st2 = valley.one_sided_stats(gp2, 2.0)
        assert (st2.tau_index, st2.bottom_index, st2.barrier) == (3, 2, 0.0)
        ramp = stable_env.GridPath(0, 1.0, -np.arange(5.0))
        try:
            valley.one_sided_stats(ramp, 1.0)
            raise AssertionError("decreasing ramp must raise")
        except WindowTooSmallError:
            pass
    check("one-sided stats", c_stats)

    # conditioned
    def c_tanaka():
        gp = stable_env.GridPath(0, 1.0, np.array([0.0, 1.0, 0.0, 2.0, 1.0, 3.0]))
        out = conditioned.tanaka_transform(gp)
        assert np.array_equal(out.path.values, [0.0, 1.0, 3.0, 2.0, 4.0, 3.0])
        ramp = stable_env.GridPath(0, 1.0, np.arange(6.0))
        assert np.array_equal(conditioned.tanaka_transform(ramp).path.values,
                              np.arange(6.0))
    check("tanaka transform", c_tanaka)

    def c_regen():
        gp = stable_env.GridPath(0, 1.0, np.array([0.0, 3.0, 1.0, 4.0, 5.0, 6.0]))
        assert conditioned.regeneration_time(gp, 1.0) == 2
        ramp = stable_env.GridPath(0, 1.0, np.arange(6.0))
        try:
            conditioned.regeneration_time(ramp, 0.5)
            raise AssertionError("ramp must raise")
        except WindowTooSmallError:
            pass
    check("regeneration time", c_regen)

    # diffusion
    def c_chain_normal():
        h = 0.05
        n = int(8.0 / h)
        flat = stable_env.GridPath(n, h, np.zeros(2 * n + 1))
        xs = []
        for i in range(2000):
            run = diffusion.chain_simulate(flat, 1.0, stream=i, master_seed=77)
            assert run.occupation.sum() * 0 + abs(
                run.occupation.sum() - 1.0) < 1e-9
            xs.append(run.final_position)
        _, p = verify.ks_one_sample(np.array(xs), norm.cdf)
        assert p > 0.001, f"chain Brownian null p={p}"
    check("chain brownian null", c_chain_normal)

    def c_mutation():
        h = 0.05
        n = int(8.0 / h)
        flat = stable_env.GridPath(n, h, np.zeros(2 * n + 1))
        old = diffusion.GENERATOR_HALF
        diffusion.GENERATOR_HALF = 1.0
        try:
            xs = [diffusion.chain_simulate(flat, 1.0, stream=i,
                                           master_seed=78).final_position
                  for i in range(2000)]
        finally:
            diffusion.GENERATOR_HALF = old
        _, p = verify.ks_one_sample(np.array(xs), norm.cdf)
        assert p < 0.01, f"corrupted rate constant went undetected, p={p}"
    check("rate mutation detected", c_mutation)

    def c_favorite():
        prof = diffusion.LocalTimeProfile(2, 1.0, np.array([0.0, 2.0, 1.0, 2.0]), 1.0)
        assert diffusion.favorite_point(prof) == -1.0
    check("favorite point leftmost", c_favorite)

    # verify
    def c_ks():
        a = np.arange(100.0)
        d, p = verify.ks_two_sample(a, a)
        assert d == 0.0 and p == 1.0
        d2, _ = verify.ks_two_sample(a, a + 1000.0)
        assert d2 == 1.0
    check("ks basics", c_ks)

    return checks


def cmd_selftest() -> int:
    checks = _selftest_checks()
    failed = 0
    for name, fn in checks:
        try:
            fn()
            print(f"selftest {name}: PASS")
        except AssertionError as exc:
            failed += 1
            print(f"selftest {name}: FAIL ({exc})")
        except Exception as exc:  # noqa: BLE001 - report and continue
            failed += 1
            print(f"selftest {name}: ERROR ({type(exc).__name__}: {exc})")
    if failed:
        _log("error", f"{failed} selftest checks failed")
        return EXIT_FAIL
    return EXIT_OK


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--k", type=float, default=None)
    p.add_argument("--drift", type=float, default=None)
    p.add_argument("--h", type=float, default=None)
    p.add_argument("--window", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--r", type=float, default=None)
    p.add_argument("--c", type=float, nargs="+", default=None)
    p.add_argument("--probes", type=float, nargs="+", default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--output-dir", default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="levydiff")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("sample-env", "find-valley", "limit-sample", "selftest"):
        _add_common(sub.add_parser(name))
    for name in ("simulate", "local-time"):
        p = sub.add_parser(name)
        p.add_argument("--engine", choices=["chain", "brox"], default="chain")
        _add_common(p)
    pv = sub.add_parser("verify")
    pv.add_argument("experiment", choices=sorted(verify.EXPERIMENTS))
    _add_common(pv)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "selftest":
            return cmd_selftest()
        cfg = load_config(args)
        if args.command == "sample-env":
            return cmd_sample_env(cfg)
        if args.command == "find-valley":
            return cmd_find_valley(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.engine.upper())
        if args.command == "local-time":
            return cmd_local_time(cfg, args.engine.upper())
        if args.command == "limit-sample":
            return cmd_limit_sample(cfg)
        if args.command == "verify":
            return cmd_verify(cfg, args.experiment)
        raise ParameterError(f"unknown command {args.command}")
    except (ParameterError, RangeError, FileNotFoundError, TypeError) as exc:
        _log("error", f"parameter error: {exc}")
        return EXIT_PARAM
    except ReplicationAborted as exc:
        _log("error", f"replication abort overflow: {exc}")
        return EXIT_ABORT
    except WindowTooSmallError as exc:
        _log("error", f"window too small: {exc}")
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
