"""Single entry point exposing the solver and experiments as subcommands.

Conventions: diagnostics go to stderr, data to the requested file or stdout;
exit code 0 on success, 1 on usage errors, 2 on numeric or solver failures.
All randomness derives from one master seed expanded into per-purpose
streams, so identical invocations write byte-identical outputs.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import __version__
from .margins import Margin, barvinok, clone, l1_margin_distance, load_margin, save_margin
from .measures import (
    BaseMeasure,
    TiltBridgeError,
    mean_inverse,
    parse_measure_spec,
    realized_delta,
    tameness_band,
)
from .sampling import (
    cut_concentration_experiment,
    mixture_tv_experiment,
    sample_model,
)
from .sinkhorn import SolverConfig, dual_objective, entropy_of_table, solve
from .spectral import dyson_density, esd, quarter_circle_distance
from .tameness import classify_bounded, classify_logconvex, critical_ratio, erdos_gallai_deep
from .util import spawn_rng

SCHEMA_VERSION = 1


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors; the contract here is 1
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _write_json(payload: dict, out: str | None) -> None:
    payload = {"schema": SCHEMA_VERSION, **payload}
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _write_csv(header, rows, out: str | None) -> None:
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    finally:
        if out:
            fh.close()


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def read_solution(path: str) -> dict:
    with open(path) as fh:
        data = json.load(fh)
    data["z"] = np.asarray(data["z"], dtype=float)
    data["alpha"] = np.asarray(data["alpha"], dtype=float)
    data["beta"] = np.asarray(data["beta"], dtype=float)
    return data


def read_csv_rows(path: str):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]


def _measure(spec: str) -> BaseMeasure:
    return parse_measure_spec(spec)


def _alpha0(raw: str, m: int):
    if raw == "zero":
        return None
    if raw.startswith("random:"):
        rng = spawn_rng(int(raw.split(":", 1)[1]), stream=7)
        return rng.uniform(-1.0, 1.0, size=m)
    raise TiltBridgeError(f"bad --alpha0 value {raw!r} (use zero or random:<seed>)")


# ---------------------------------------------------------------------------
# subcommand implementations
# ---------------------------------------------------------------------------


def _cmd_solve(args) -> int:
    measure = _measure(args.measure)
    margin = load_margin(args.margin)
    cfg = SolverConfig(
        alpha0=_alpha0(args.alpha0, margin.m),
        max_iters=args.max_iters,
        tol=args.tol,
    )
    pots, table, report = solve(measure, margin, cfg)
    dual = dual_objective(measure, margin, pots)
    _write_json(
        {
            "measure": measure.spec_string(),
            "alpha": pots.alpha.tolist(),
            "beta": pots.beta.tolist(),
            "z": table.table.tolist(),
            "dual_value": dual,
            "entropy": entropy_of_table(measure, table.table),
            "report": {
                "iterations": report.iterations,
                "converged": report.converged,
                "dual_values": report.dual_values,
                "residuals": report.residuals,
                "potential_gaps": report.potential_gaps,
                "rate_estimate": report.rate_estimate,
                "approaching_boundary": report.approaching_boundary,
            },
        },
        args.out,
    )
    print(
        f"solve: {report.iterations} iterations, residual {report.residuals[-1]:.3e}",
        file=sys.stderr,
    )
    return 0


def _cmd_phase(args) -> int:
    measure = _measure(args.measure)
    points = []
    if args.grid:
        s_part, t_part = args.grid.split(",")
        s0, s1, ks = s_part.split(":")
        t0, t1, kt = t_part.split(":")
        for s in np.linspace(float(s0), float(s1), int(ks)):
            for t in np.linspace(float(t0), float(t1), int(kt)):
                if s <= t:
                    points.append((float(s), float(t)))
    else:
        points.append((args.s, args.t))
    rows = []
    for s, t in points:
        if np.isfinite(measure.support_lo) and np.isfinite(measure.support_hi):
            verdict = classify_bounded(measure, s, t)
            witness = verdict.witness
        else:
            verdict = classify_logconvex(measure, s, t)
            witness = critical_ratio(measure, s)
        rows.append((s, t, verdict.region, witness))
    _write_csv(["s", "t", "verdict", "witness"], rows, args.out)
    return 0


def _cmd_eg_check(args) -> int:
    margin = load_margin(args.margin)
    report = erdos_gallai_deep(margin, args.B, args.c1, args.c3, c2=args.c2)
    _write_json(
        {
            "satisfied": report.satisfied,
            "min_value": report.min_value,
            "argmin_size": report.argmin_size,
            "bounds_ok": report.bounds_ok,
        },
        args.out,
    )
    return 0


def _cmd_sample(args) -> int:
    measure = _measure(args.measure)
    margin = load_margin(args.margin)
    pots, _, _ = solve(measure, margin)
    rng = spawn_rng(args.seed, stream=0)
    ens = sample_model(measure, pots, args.count, rng)
    rows = [sample.ravel().tolist() for sample in ens.samples]
    _write_csv(
        [f"x{i}{j}" for i in range(margin.m) for j in range(margin.n)], rows, args.out
    )
    print(f"sample: wrote {args.count} tables of shape {margin.m}x{margin.n}", file=sys.stderr)
    return 0


def _cmd_verify_mixture(args) -> int:
    measure = _measure(args.measure)
    margin = load_margin(args.margin)
    i0, i1 = (int(v) for v in args.block.split(",")[0].split(":"))
    j0, j1 = (int(v) for v in args.block.split(",")[1].split(":"))
    rng = spawn_rng(args.seed, stream=1)
    report = mixture_tv_experiment(
        measure, margin, range(i0, i1), range(j0, j1), samples=args.samples, rng=rng
    )
    _write_csv(
        ["block", "cells", "tv_distance", "method", "samples"],
        [(args.block, report.block_cells, report.tv_distance, report.method, args.samples)],
        args.out,
    )
    return 0


def _cmd_verify_cut(args) -> int:
    measure = _measure(args.measure)
    margin = load_margin(args.margin)
    rng = spawn_rng(args.seed, stream=2)
    points = cut_concentration_experiment(
        measure, margin, range(1, args.clone_max + 1), args.samples, rng
    )
    _write_csv(
        ["k", "m", "n", "mean_cut_distance", "std", "sem", "exact"],
        [(p.k, p.m, p.n, p.mean, p.std, p.sem, p.exact) for p in points],
        args.out,
    )
    return 0


def _cmd_esd(args) -> int:
    measure = _measure(args.measure)
    margin = load_margin(args.margin)
    pots, table, _ = solve(measure, margin)
    rng = spawn_rng(args.seed, stream=3)
    ens = sample_model(measure, pots, args.samples, rng)
    variance_profile = np.asarray(measure.variance(pots.tilt_matrix()), dtype=float)
    s_star = float(variance_profile.max())
    all_vals = []
    for y in ens.samples:
        result = esd(y, table.table, s_star, convention=args.convention)
        all_vals.append(result.singular_values)
    vals = np.concatenate(all_vals)
    hi = max(float(vals.max()), 1e-12)
    density, edges = np.histogram(vals, bins=args.bins, range=(0.0, hi), density=True)
    rows = [(edges[i], edges[i + 1], density[i]) for i in range(density.size)]
    _write_csv(["bin_lo", "bin_hi", "density"], rows, args.out)
    if margin.m == margin.n:
        ks = quarter_circle_distance(esd(ens.samples[0], table.table, s_star, args.convention))
        print(f"esd: KS distance to quarter-circle {ks:.4f}", file=sys.stderr)
    return 0


def _cmd_dyson(args) -> int:
    measure = _measure(args.measure)
    margin = load_margin(args.margin)
    pots, _, _ = solve(measure, margin)
    profile = np.asarray(measure.variance(pots.tilt_matrix()), dtype=float)
    s_star = float(profile.max())
    m, n = profile.shape
    nu = 0.5 * (m + n) * s_star
    g0, g1, k = args.grid.split(":")
    grid = np.linspace(float(g0), float(g1), int(k))
    curve = dyson_density(profile, nu, grid, eta=args.eta)
    _write_csv(
        ["x", "density"],
        list(zip(curve.grid.tolist(), curve.density.tolist())),
        args.out,
    )
    print(f"dyson: mass {curve.mass():.4f} at eta {args.eta}", file=sys.stderr)
    return 0


def _cmd_stability(args) -> int:
    measure = _measure(args.measure)
    ma = load_margin(args.margin_a)
    mb = load_margin(args.margin_b)
    _, ta, _ = solve(measure, ma)
    _, tb, _ = solve(measure, mb)
    lhs = float(np.sum((ta.table - tb.table) ** 2))
    z_min = min(ta.min_entry, tb.min_entry)
    z_max = max(ta.max_entry, tb.max_entry)
    delta = realized_delta(measure, z_min, z_max)
    band = tameness_band(measure, delta)
    t_lo = float(mean_inverse(measure, band.lo))
    t_hi = float(mean_inverse(measure, band.hi))
    c_delta = max(abs(t_lo), abs(t_hi))
    sup_var = float(np.asarray(measure.variance(np.linspace(t_lo, t_hi, 512))).max())
    l1 = l1_margin_distance(ma, mb)
    rhs = 4.0 * c_delta * sup_var * l1
    ratio = 0.0 if lhs == 0.0 else (lhs / rhs if rhs > 0 else float("inf"))
    _write_json(
        {
            "lhs_frobenius_sq": lhs,
            "rhs_bound": rhs,
            "ratio": ratio,
            "delta": delta,
            "c_delta": c_delta,
            "sup_variance": sup_var,
            "margin_l1_distance": l1,
        },
        args.out,
    )
    return 0


def _cmd_margin(args) -> int:
    if args.generator == "clone":
        base = load_margin(args.margin)
        out_margin = clone(base, args.k)
    elif args.generator == "barvinok":
        out_margin = barvinok(args.n, args.s, args.t, args.rho)
    else:  # pragma: no cover - argparse restricts choices
        raise TiltBridgeError(f"unknown generator {args.generator}")
    save_margin(out_margin, args.out)
    print(f"margin: wrote {out_margin.m}x{out_margin.n} margin to {args.out}", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tiltbridge", description=__doc__)
    parser.add_argument("--version", action="version", version=f"tiltbridge {__version__}")
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help="cap worker threads (default: TILTBRIDGE_THREADS env var, else 1)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="compute potentials and the typical table")
    p.add_argument("--measure", required=True, help="family[:p1,p2], e.g. gamma:1.0,2.0")
    p.add_argument("--margin", required=True, help="margin file (.json or .csv)")
    p.add_argument("--tol", type=float, default=None, help="L1 residual tolerance")
    p.add_argument("--max-iters", type=int, default=2000)
    p.add_argument("--alpha0", default="zero", help="zero | random:<seed>")
    p.add_argument("--out", default=None, help="output JSON (stdout when omitted)")
    p.set_defaults(fn=_cmd_solve)

    p = sub.add_parser("phase", help="tameness verdicts for (s, t) extremes")
    p.add_argument("--measure", required=True)
    p.add_argument("--s", type=float)
    p.add_argument("--t", type=float)
    p.add_argument("--grid", default=None, help="s0:s1:k,t0:t1:k grid specification")
    p.add_argument("--out", default=None, help="output CSV: s,t,verdict,witness")
    p.set_defaults(fn=_cmd_phase)

    p = sub.add_parser("eg-check", help="deep-interior degree condition for symmetric margins")
    p.add_argument("--margin", required=True)
    p.add_argument("--B", type=float, required=True, help="support top")
    p.add_argument("--c1", type=float, required=True)
    p.add_argument("--c3", type=float, required=True)
    p.add_argument("--c2", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_eg_check)

    p = sub.add_parser("sample", help="draw tables from the fitted tilted model")
    p.add_argument("--measure", required=True)
    p.add_argument("--margin", required=True)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="CSV, one row per table (row-major entries)")
    p.set_defaults(fn=_cmd_sample)

    p = sub.add_parser("verify-mixture", help="TV distance of a block mixture to the tilted one")
    p.add_argument("--measure", required=True)
    p.add_argument("--margin", required=True)
    p.add_argument("--block", required=True, help="i0:i1,j0:j1 half-open row/col ranges")
    p.add_argument("--samples", type=int, default=4000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_verify_mixture)

    p = sub.add_parser("verify-cut", help="cut-norm concentration along a cloning sequence")
    p.add_argument("--measure", required=True)
    p.add_argument("--margin", required=True, help="base margin to clone")
    p.add_argument("--clone-max", type=int, default=3)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_verify_cut)

    p = sub.add_parser("esd", help="singular-value histogram of the centered tilted model")
    p.add_argument("--measure", required=True)
    p.add_argument("--margin", required=True)
    p.add_argument("--samples", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--convention", choices=("symmetric", "square"), default="symmetric")
    p.add_argument("--out", default=None, help="CSV: bin_lo,bin_hi,density")
    p.set_defaults(fn=_cmd_esd)

    p = sub.add_parser("dyson", help="limiting singular-value density from the variance profile")
    p.add_argument("--measure", required=True)
    p.add_argument("--margin", required=True)
    p.add_argument("--grid", default="0.01:2.5:200", help="x0:x1:points (singular values)")
    p.add_argument("--eta", type=float, default=0.02)
    p.add_argument("--out", default=None, help="CSV: x,density")
    p.set_defaults(fn=_cmd_dyson)

    p = sub.add_parser("stability", help="typical-table perturbation vs the Lipschitz bound")
    p.add_argument("--measure", required=True)
    p.add_argument("--margin-a", required=True)
    p.add_argument("--margin-b", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_stability)

    p = sub.add_parser("margin", help="margin generators")
    gen = p.add_subparsers(dest="generator", required=True)
    g = gen.add_parser("clone", help="k-fold cloning of a margin file")
    g.add_argument("--margin", required=True)
    g.add_argument("--k", type=int, required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(fn=_cmd_margin)
    g = gen.add_parser("barvinok", help="two-value probe margin")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--s", type=float, required=True)
    g.add_argument("--t", type=float, required=True)
    g.add_argument("--rho", type=float, default=0.0)
    g.add_argument("--out", required=True)
    g.set_defaults(fn=_cmd_margin)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.threads is not None:
        import os

        os.environ["TILTBRIDGE_THREADS"] = str(max(1, args.threads))
    try:
        return args.fn(args)
    except TiltBridgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
