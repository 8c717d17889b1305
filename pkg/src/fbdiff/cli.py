"""Command line: ``fbdiff denoise | analyze-flux | rothe-verify``.

Every subcommand also takes ``--config FILE`` holding ``key = value`` lines
(keys are flag names without the leading dashes, ``#`` starts a comment).
Flags given on the command line win over the file.
"""
import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import rothe
from .experiment import ExperimentConfig, run_experiment
from .flux import (FluxParams, convexify, forward_backward_threshold, radial_profile,
                   scalar_flux_min_slope, verify_structure, write_envelope_tables)
from .indicator import IndicatorParams
from .noise import NoiseSpec, add_gamma_noise
from .solver import STOP_MODES, SolverConfig
from .synthetic import KINDS, SyntheticSpec


def _floats(text):
    return tuple(float(v) for v in text.split(","))


def _ints(text):
    return tuple(int(v) for v in text.split(","))


def read_config_file(path) -> dict:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _apply_config(parser, argv):
    """Parse once to find ``--config``, load it as defaults, then parse again."""
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv)
    if known.config is None:
        return parser.parse_args(argv)
    values = read_config_file(known.config)
    dests = {a.dest: a for a in parser._actions}
    for key, value in values.items():
        action = dests.get(key)
        if action is None or key in ("help", "config"):
            parser.error(f"unknown key {key!r} in {known.config}")
        if action.nargs == 0:  # store_true style switch
            values[key] = value.lower() in ("1", "true", "yes", "on")
    # argparse runs string defaults through each argument's type
    parser.set_defaults(**values)
    return parser.parse_args(argv)


def _add_denoise(sub):
    p = sub.add_parser("denoise", help="add Gamma noise to an image and denoise it")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--input", help="clean PGM image (P2 or P5, maxval 255)")
    src.add_argument("--synthetic", choices=KINDS, help="generate a clean test image instead")
    p.add_argument("--size", type=_ints, default=(128, 128), help="rows,cols of the synthetic image")
    p.add_argument("--levels", type=_floats, default=(60.0, 140.0, 220.0))
    p.add_argument("--looks", type=float, default=4.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tau", type=float, default=0.05)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--p", type=float, default=1.5)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=1e-8)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--radius", type=int, default=None)
    p.add_argument("--stop", choices=STOP_MODES, default="max_psnr")
    p.add_argument("--max-iters", type=int, default=2000)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--out", default="out")
    p.add_argument("--no-history", action="store_true", help="skip history.csv")
    p.add_argument("--config")
    p.set_defaults(handler=cmd_denoise)
    return p


def _add_analyze(sub):
    p = sub.add_parser("analyze-flux", help="monotonicity and convex envelope of the flux")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--s-max", type=float, default=50.0)
    p.add_argument("--samples", type=int, default=50_001)
    p.add_argument("--stride", type=int, default=10, help="row stride of the written tables")
    p.add_argument("--out", default=None, help="directory for envelope.csv and slopes.csv")
    p.add_argument("--config")
    p.set_defaults(handler=cmd_analyze)
    return p


def _add_rothe(sub):
    p = sub.add_parser("rothe-verify", help="small-grid checks of the time-sliced relaxed problem")
    p.add_argument("--cells", type=int, default=128)
    p.add_argument("--levels", type=_floats, default=(60.0, 140.0))
    p.add_argument("--looks", type=float, default=4.0)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--m", type=_ints, default=(4, 8, 16), help="comma separated slice counts")
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--trials", type=int, default=100, help="random truncation instances")
    p.add_argument("--outer-tol", type=float, default=1e-6)
    p.add_argument("--outer-max", type=int, default=50)
    p.add_argument("--out", default=None, help="directory for per-slice energy CSVs")
    p.add_argument("--config")
    p.set_defaults(handler=cmd_rothe)
    return p


def build_parser():
    parser = argparse.ArgumentParser(prog="fbdiff", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    subs = (_add_denoise(sub), _add_analyze(sub), _add_rothe(sub))
    parser.subcommands = {p.prog.split()[-1]: p for p in subs}
    return parser


def experiment_config(args) -> ExperimentConfig:
    synthetic = None
    if args.input is None:
        synthetic = SyntheticSpec(args.synthetic or "shapes", tuple(args.size), tuple(args.levels))
    return ExperimentConfig(
        input_path=args.input,
        synthetic=synthetic,
        noise=NoiseSpec(args.looks, args.seed),
        solver=SolverConfig(tau=args.tau, lam=args.lam, p=args.p, delta=args.delta,
                            epsilon=args.epsilon, max_iters=args.max_iters, stop=args.stop,
                            tol=args.tol, patience=args.patience),
        indicator=IndicatorParams(args.sigma, args.beta, args.radius),
        out_dir=args.out,
        emit_history=not args.no_history,
    )


def cmd_denoise(args) -> int:
    if args.input is not None and args.synthetic is not None:
        raise ValueError("give either --input or --synthetic, not both")
    return run_experiment(experiment_config(args))


def cmd_analyze(args) -> int:
    params = FluxParams(args.p, args.delta)
    slope, at = scalar_flux_min_slope(params)
    print(f"flux p={params.p} delta={params.delta}")
    print(f"min slope of s/(1+s^2)+delta*s^(p-1) on [0,10]: {slope:.8g} at s={at:.6g}")
    print("monotone" if slope >= 0 else "forward-backward (non-monotone)")
    if params.p == 2.0:
        print(f"monotonicity threshold in delta for p=2: {forward_backward_threshold():.8f}")
    profile = radial_profile(params, args.s_max, args.samples)
    env = convexify(profile)
    print(f"affine segments of the envelope: {len(env.segments)}")
    for seg in env.segments:
        print(f"  [{seg.start:.6f}, {seg.stop:.6f}] slope={seg.slope:.8f}")
    rep = verify_structure(profile, env, params)
    print(f"structure: gamma1={rep.gamma1:.6g} gamma2={rep.gamma2:.6g} holds={rep.holds} "
          f"worst s={rep.worst_point:.6g}")
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(exist_ok=True)
        write_envelope_tables(env, out / "envelope.csv", out / "slopes.csv", args.stride)
        print(f"tables written to {out}")
    return 0


@dataclass(frozen=True)
class Check:
    name: str
    ok: bool
    detail: str = ""

    def line(self):
        return f"[{'PASS' if self.ok else 'FAIL'}] {self.name}" + (f": {self.detail}" if self.detail else "")


def noisy_step_1d(cells, levels, looks, seed):
    clean = np.where(np.arange(cells) < cells // 2, levels[0], levels[1]).astype(float)
    return clean, add_gamma_noise(clean, NoiseSpec(looks, seed))


def rothe_suite(cells=128, levels=(60.0, 140.0), looks=4.0, seed=7, p=2.0, delta=0.05,
                ms=(4, 8, 16), T=1.0, trials=100, outer_tol=1e-6, outer_max=50, out=None):
    """Checks on a 1D noisy step with ``alpha = 1``; returns a list of ``Check``."""
    _, f = noisy_step_1d(cells, levels, looks, seed)
    low, high = float(f.min()), float(f.max())
    alpha = np.ones_like(f)
    spread = high - low
    # wide enough for the out-of-range fields of the truncation check
    env = rothe.envelope_for_range(FluxParams(p, delta), low - spread, high + spread)
    checks = []

    sums = {}
    for m in ms:
        cfg = rothe.RotheConfig(m=m, T=T)
        traj = rothe.rothe_sweep(f, f, alpha, env, cfg)
        worst = max(e.total - s.total for s, e in zip(traj.start_energies, traj.end_energies))
        checks.append(Check(f"slice energy never increases (m={m})", worst <= 0.0,
                            f"max increase {worst:.3e}"))
        inside = bool(np.all(traj.slices >= low) and np.all(traj.slices <= high))
        checks.append(Check(f"slices stay in [l, d] (m={m})", inside))
        c0 = rothe.measured_c0(traj)
        bound = rothe.apriori_bound(traj.gradient_energies[0], c0)
        checks.append(Check(f"a priori estimate (m={m})", traj.apriori_sum / 4 <= bound,
                            f"(m/4T) sum |du|^2 = {traj.apriori_sum / 4:.6g} <= {bound:.6g}, C0 = {c0:.3g}"))
        sums[m] = traj.apriori_sum
        if out is not None:
            rothe.write_energy_csv(traj, Path(out) / f"energies_m{m}.csv")
    ratio = max(sums.values()) / min(sums.values())
    checks.append(Check("a priori sum stable across m", ratio <= 3.0, f"max/min = {ratio:.4f}"))

    rng = np.random.default_rng(seed)
    cfg = rothe.RotheConfig(m=ms[0], T=T)
    worst = -np.inf
    for _ in range(trials):
        v = rng.uniform(low - 0.5 * spread, high + 0.5 * spread, f.shape)
        u_prev = rng.uniform(low, high, f.shape)
        w = rng.uniform(low, high, f.shape)
        before = rothe.energy(v, u_prev, w, f, alpha, env, cfg, low).total
        after = rothe.energy(rothe.truncate(v, low, high), u_prev, w, f, alpha, env, cfg, low).total
        worst = max(worst, after - before)
    checks.append(Check(f"truncation lowers energy ({trials} instances)", worst <= 0.0,
                        f"max change {worst:.3e}"))

    cfg = rothe.RotheConfig(m=8 if 8 in ms else ms[0], T=T)
    fp = rothe.fixed_point(f, alpha, env, cfg, outer_tol, outer_max)
    tail = fp.distances[-3:]
    monotone = all(a > b for a, b in zip(tail, tail[1:]))
    checks.append(Check("fixed point converges", fp.converged and monotone,
                        f"{fp.iterations} iterations, distances "
                        + ", ".join(f"{d:.3e}" for d in fp.distances)))
    return checks


def cmd_rothe(args) -> int:
    if args.out is not None:
        Path(args.out).mkdir(exist_ok=True)
    checks = rothe_suite(args.cells, args.levels, args.looks, args.seed, args.p, args.delta,
                         args.m, args.T, args.trials, args.outer_tol, args.outer_max, args.out)
    for c in checks:
        print(c.line())
    failed = sum(not c.ok for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return 1 if failed else 0


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    if argv and argv[0] in parser.subcommands:
        args = _apply_config(parser.subcommands[argv[0]], argv[1:])
        args.command = argv[0]
    else:
        args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (OSError, ValueError, FloatingPointError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
