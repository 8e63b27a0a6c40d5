"""``erps`` command line: build states, sample, measure, reconstruct and verify.

Exit codes are 0 on success, 1 when a verification or tolerance check
fails and 2 on usage or validation errors.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import io
from .errors import DisconnectedDomain, ErpsError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Invalid command-line input; the message names the offending flag."""


# argparse value types


def _finite(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not np.isfinite(value):
        raise argparse.ArgumentTypeError(f"expected a finite number, got {text!r}")
    return value


def _positive(text):
    value = _finite(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _non_negative(text):
    value = _finite(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {text}")
    return value


def _count(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {text}")
    return value


def _seed(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"must be a 64-bit unsigned integer, got {text}")
    return value


def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _complexes(text):
    try:
        return [complex(x.strip().replace(" ", "")) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated complex numbers, got {text!r}")


def _pair(text):
    vals = _floats(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}")
    return tuple(vals)


# parser


def _common(p, hbar=True):
    if hbar:
        p.add_argument("--hbar", type=_positive, default=1.0, help="reduced Planck constant (default 1)")
    p.add_argument("--threads", type=_count, default=1, help="worker cap; results do not depend on it")
    p.add_argument("--plot", action="store_true", help="also render a PNG next to the output file")


def _grid_flags(p, n_default=2048):
    p.add_argument("--q-min", type=_finite, default=-10.0)
    p.add_argument("--q-max", type=_finite, default=10.0)
    p.add_argument("--n-points", type=_count, default=n_default)


def build_parser():
    parser = argparse.ArgumentParser(prog="erps", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    st = sub.add_parser("state", help="build a state file")
    kinds = st.add_subparsers(dest="kind", required=True)
    g = kinds.add_parser("gaussian", help="Gaussian wave packet")
    g.add_argument("--q0", type=_finite, default=0.0)
    g.add_argument("--p0", type=_finite, default=0.0)
    g.add_argument("--sigma", type=_positive, default=1.0)
    s = kinds.add_parser("superpose", help="superposition of harmonic-oscillator eigenstates")
    s.add_argument("--coeffs", type=_complexes, required=True, help="e.g. 1,0.5+0.2j,0.1j")
    s.add_argument("--levels", type=lambda t: [int(x) for x in t.split(",")], default=None)
    s.add_argument("--mass", type=_positive, default=1.0)
    s.add_argument("--omega", type=_positive, default=1.0)
    t = kinds.add_parser("two-gaussian", help="equal-weight Gaussians centred at -offset and +offset")
    t.add_argument("--offset", type=_positive, required=True)
    t.add_argument("--sigma", type=_positive, default=1.0)
    t.add_argument("--p0", type=_finite, default=0.0)
    t.add_argument("--relative-phase", type=_finite, default=0.0)
    c = kinds.add_parser("correlated-gaussian", help="2D Gaussian with a position covariance")
    c.add_argument("--mean", type=_pair, default=(0.0, 0.0))
    c.add_argument("--cov", type=_floats, default=[1.0, 0.0, 1.0], help="s11,s12,s22")
    c.add_argument("--p0", type=_pair, default=(0.0, 0.0))
    for k, n_default in ((g, 2048), (s, 2048), (t, 2048), (c, 128)):
        _grid_flags(k, n_default)
        _common(k)
        k.add_argument("--out", type=Path, default=Path("state.json"))

    p = sub.add_parser("sample", help="draw (q, p, xi) samples")
    p.add_argument("--state", type=Path, required=True)
    p.add_argument("--shots", type=_count, default=100000)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--chi", default="two_point", help="two_point, gaussian[:n] or custom:v/w,...")
    p.add_argument("--independent-xi", action="store_true", help="one xi per degree of freedom (comparison only)")
    p.add_argument("--out", type=Path, default=Path("samples.csv"))
    _common(p, hbar=False)

    w = sub.add_parser("weakvalue", help="weak momentum value field")
    w.add_argument("--state", type=Path, required=True)
    w.add_argument("--out", type=Path, default=Path("weak.csv"))
    _common(w, hbar=False)

    m = sub.add_parser("marginal", help="ERPS momentum marginal on a p grid")
    m.add_argument("--state", type=Path, required=True)
    m.add_argument("--chi", default="two_point")
    m.add_argument("--p-min", type=_finite, default=-8.0)
    m.add_argument("--p-max", type=_finite, default=8.0)
    m.add_argument("--n-p", type=_count, default=801)
    m.add_argument("--out", type=Path, default=Path("marginal.csv"))
    _common(m, hbar=False)

    e = sub.add_parser("expect", help="quantum vs phase-space expectation of a quadratic observable")
    e.add_argument("--state", type=Path, required=True)
    e.add_argument("--observable", type=Path, help="JSON with A, B, C (and optional D) sampled on the grid")
    e.add_argument("--poly-a", type=_floats, default=None, help="A(q) polynomial coefficients, lowest first")
    e.add_argument("--poly-b", type=_floats, default=None)
    e.add_argument("--poly-c", type=_floats, default=None)
    e.add_argument("--chi", default="two_point")
    e.add_argument("--xi-mode", choices=("global", "independent"), default="global")
    e.add_argument("--tol", type=_positive, default=1e-6)
    _common(e, hbar=False)

    sm = sub.add_parser("simulate", help="simulated weak measurement with position post-selection")
    sm.add_argument("--state", type=Path, required=True)
    sm.add_argument("--sigma-ptr", type=_positive, default=0.2)
    sm.add_argument("--g", type=_non_negative, default=0.02)
    sm.add_argument("--pointer-points", type=_count, default=256)
    sm.add_argument("--bins", type=_count, default=64)
    sm.add_argument("--bin-min", type=_finite, default=None,
                    help="lower edge of the binned q range (default: where rho >= 1e-3 max rho)")
    sm.add_argument("--bin-max", type=_finite, default=None, help="upper edge of the binned q range")
    sm.add_argument("--shots", type=_count, default=1000000)
    sm.add_argument("--seed", type=_seed, default=0)
    sm.add_argument("--out", type=Path, default=Path("weak_estimates.csv"))
    _common(sm, hbar=False)

    r = sub.add_parser("reconstruct", help="rebuild a state from a weak-value CSV")
    r.add_argument("--weak", type=Path, required=True)
    r.add_argument("--truth", type=Path, default=None)
    r.add_argument("--method", choices=("collocation", "simpson", "trapezoid"), default=None,
                   help="default: collocation for exact fields, simpson for fields with standard errors")
    r.add_argument("--out", type=Path, default=Path("reconstructed.json"))
    r.add_argument("--report", type=Path, default=Path("report.json"))
    _common(r)

    v = sub.add_parser("verify", help="run the invariant suite on a state")
    v.add_argument("--state", type=Path, required=True)
    v.add_argument("--chi", default="two_point")
    v.add_argument("--out", type=Path, default=None, help="optional CSV copy of the table")
    _common(v, hbar=False)

    tr = sub.add_parser("trajectories", help="Wiseman average-momentum trajectories")
    tr.add_argument("--state", type=Path, required=True)
    tr.add_argument("--potential", choices=("free", "harmonic"), default="free")
    tr.add_argument("--mass", type=_positive, default=1.0)
    tr.add_argument("--omega", type=_positive, default=1.0)
    tr.add_argument("--dt", type=_positive, default=1e-3)
    tr.add_argument("--steps", type=_count, default=1000)
    tr.add_argument("--count", type=_count, default=21, help="starting points at density quantiles")
    tr.add_argument("--out", type=Path, default=Path("trajectories.csv"))
    _common(tr, hbar=False)
    return parser


# commands


def _grid(args):
    from .state import Grid

    if not args.q_max > args.q_min:
        raise UsageError(f"--q-max ({args.q_max}) must exceed --q-min ({args.q_min})")
    if args.n_points < 8:
        raise UsageError(f"--n-points must be at least 8, got {args.n_points}")
    return Grid.line(args.q_min, args.q_max, args.n_points)


def _chi(spec, hbar):
    from .xi import XiDistribution

    try:
        return XiDistribution.from_spec(spec, hbar)
    except (ValueError, ErpsError) as exc:
        raise UsageError(f"--chi: {exc}") from exc


def _plot_path(out):
    return Path(out).with_suffix(".png")


def cmd_state(args):
    from . import state as st

    grid = _grid(args)
    if args.kind == "gaussian":
        state = st.build_gaussian(grid, args.hbar, args.q0, args.p0, args.sigma)
    elif args.kind == "superpose":
        levels = args.levels
        if levels is not None and len(levels) != len(args.coeffs):
            raise UsageError("--levels must list one level per entry of --coeffs")
        if levels is not None and min(levels) < 0:
            raise UsageError("--levels must be non-negative")
        total = float(np.sum(np.abs(args.coeffs) ** 2))
        if total == 0:
            raise UsageError("--coeffs must not all vanish")
        state = st.eigen_superposition(grid, args.hbar, args.coeffs, levels, args.mass, args.omega)
    elif args.kind == "two-gaussian":
        state = st.two_gaussian(grid, args.hbar, args.offset, args.sigma, args.p0, args.relative_phase)
    else:
        cov = args.cov
        if len(cov) != 3:
            raise UsageError("--cov takes s11,s12,s22")
        grid = st.Grid.square(args.q_min, args.q_max, args.n_points)
        try:
            state = st.build_correlated_gaussian(grid, args.hbar, args.mean,
                                                 [[cov[0], cov[1]], [cov[1], cov[2]]], args.p0)
        except np.linalg.LinAlgError as exc:
            raise UsageError(f"--cov is not positive definite: {exc}") from exc
    io.write_state(args.out, state)
    if args.plot:
        from .plotting import plot_state

        plot_state(state, _plot_path(args.out))
    return EXIT_OK


def cmd_sample(args):
    from .phase_space import sample_erps

    state = io.read_state(args.state)
    chi = _chi(args.chi, state.hbar)
    samples = sample_erps(state, chi, args.shots, args.seed, args.threads, args.independent_xi)
    io.write_samples(args.out, samples)
    if args.plot:
        from .plotting import plot_samples

        plot_samples(samples, _plot_path(args.out))
    return EXIT_OK


def cmd_weakvalue(args):
    from .weak import weak_momentum_value

    wv = weak_momentum_value(io.read_state(args.state))
    io.write_weak_values(args.out, wv)
    if args.plot:
        from .plotting import plot_weak_values

        plot_weak_values(wv, _plot_path(args.out))
    return EXIT_OK


def cmd_marginal(args):
    from .phase_space import marginal_momentum

    if not args.p_max > args.p_min:
        raise UsageError(f"--p-max ({args.p_max}) must exceed --p-min ({args.p_min})")
    state = io.read_state(args.state)
    p_grid = np.linspace(args.p_min, args.p_max, args.n_p)
    density = marginal_momentum(state, _chi(args.chi, state.hbar), p_grid)
    io.write_marginal(args.out, p_grid, density)
    if args.plot:
        from .plotting import plot_marginal

        plot_marginal(p_grid, density, _plot_path(args.out))
    return EXIT_OK


def cmd_expect(args):
    from .observables import QuadraticObservable, equivalence_check, polynomial_observable

    state = io.read_state(args.state)
    if args.observable is not None:
        obs = QuadraticObservable.from_json(args.observable.read_text(), state.grid)
    elif state.dims == 1 and any(x is not None for x in (args.poly_a, args.poly_b, args.poly_c)):
        obs = polynomial_observable(state.grid, args.poly_a or (), args.poly_b or (), args.poly_c or ())
    else:
        raise UsageError("give --observable, or --poly-a/--poly-b/--poly-c for a 1D state")
    rep = equivalence_check(state, obs, _chi(args.chi, state.hbar), tol=args.tol, xi_mode=args.xi_mode)
    print("quantum,phase_space,deviation,passed")
    print(f"{rep.quantum:.17g},{rep.phase_space:.17g},{rep.deviation:.17g},{int(rep.passed)}")
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_simulate(args):
    from .measurement import PointerConfig, estimates_to_field, simulate_weak_measurement

    state = io.read_state(args.state)
    cfg = PointerConfig(args.sigma_ptr, args.g, args.pointer_points)
    q = state.grid.axes[0]
    # by default bin only where the density is appreciable, so tail bins are not empty
    support = q[state.density.reshape(-1) >= 1e-3 * state.density.max()]
    lo = support[0] if args.bin_min is None else args.bin_min
    hi = support[-1] if args.bin_max is None else args.bin_max
    if not hi > lo:
        raise UsageError(f"--bin-max ({hi}) must exceed --bin-min ({lo})")
    est = simulate_weak_measurement(state, cfg, args.bins, args.shots, args.seed, args.threads, (lo, hi))
    wv, se_re, se_im = estimates_to_field(est, state.hbar)
    io.write_weak_values(args.out, wv, se_re, se_im, np.array([e.count for e in est]))
    if args.plot:
        from .plotting import plot_weak_values

        plot_weak_values(wv, _plot_path(args.out), se_re, se_im)
    return EXIT_OK


def cmd_reconstruct(args):
    from .tomography import reconstruct, reconstruct_from_noisy

    truth = io.read_state(args.truth) if args.truth is not None else None
    try:
        # reuse the truth grid when the field was written on it
        wv, errs = io.read_weak_values(args.weak, args.hbar, None if truth is None else truth.grid)
    except ErpsError:
        if truth is None:
            raise
        wv, errs = io.read_weak_values(args.weak, args.hbar)
    try:
        if errs is None:
            res = reconstruct(wv, args.hbar, truth, args.method or "collocation")
        else:
            res = reconstruct_from_noisy(wv, errs[0], errs[1], args.hbar, truth, args.method or "simpson")
    except DisconnectedDomain as exc:
        report = {"fidelity": None, "n_masked": int(np.sum(wv.node_mask)),
                  "regions": [[int(r.start), int(r.stop)] for r in exc.regions], "noise_band": None,
                  "error": str(exc)}
        io.write_json(args.report, report)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    io.write_state(args.out, res.state)
    io.write_json(args.report, res.report())
    if args.plot:
        from .plotting import plot_reconstruction

        plot_reconstruction(res.state, _plot_path(args.out), truth)
    return EXIT_OK


def cmd_verify(args):
    from .verification import format_table, verify_state

    state = io.read_state(args.state)
    rows = verify_state(state, _chi(args.chi, state.hbar))
    print(format_table(rows))
    if args.out is not None:
        with open(args.out, "w") as fh:
            fh.write("check,value,tolerance,status\n")
            for r in rows:
                fh.write(f"{r.name},{r.value:.17g},{r.tolerance},{r.status}\n")
    return EXIT_OK if all(r.ok for r in rows) else EXIT_FAIL


def cmd_trajectories(args):
    from .dynamics import Hamiltonian, wiseman_trajectories

    state = io.read_state(args.state)
    if state.dims != 1:
        raise UsageError("--state must be 1D for trajectories")
    if args.potential == "free":
        H = Hamiltonian.free(state.grid, args.mass)
    else:
        H = Hamiltonian.harmonic(state.grid, args.mass, args.omega)
    cdf = np.cumsum(state.density)
    cdf /= cdf[-1]
    levels = (np.arange(args.count) + 0.5) / args.count
    starts = np.interp(levels, cdf, state.grid.q)
    trajs = wiseman_trajectories(starts, state, H, args.dt, args.steps)
    io.write_trajectories(args.out, trajs)
    if args.plot:
        from .plotting import plot_trajectories

        plot_trajectories(trajs, _plot_path(args.out))
    return EXIT_OK


COMMANDS = {
    "state": cmd_state,
    "sample": cmd_sample,
    "weakvalue": cmd_weakvalue,
    "marginal": cmd_marginal,
    "expect": cmd_expect,
    "simulate": cmd_simulate,
    "reconstruct": cmd_reconstruct,
    "verify": cmd_verify,
    "trajectories": cmd_trajectories,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help and 2 for bad usage
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    with warnings.catch_warnings():
        warnings.simplefilter("default")
        warnings.showwarning = lambda msg, cat, *a, **k: print(f"warning: {msg}", file=sys.stderr)
        try:
            return COMMANDS[args.command](args)
        except UsageError as exc:
            print(f"error: {exc}", file=sys.stderr)
        except (ErpsError, ValueError, OSError, json.JSONDecodeError, KeyError) as exc:
            print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
