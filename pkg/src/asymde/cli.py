"""Command-line entry point: ``asymde <subcommand> ...``.

Curves and tables are written as CSV, single results as JSON. Every output
file gets a ``<file>.manifest.json`` sidecar recording the parameters, the
code hash, the seed and the wall time; the output itself holds no timing,
so the same manifest reproduces it byte for byte. The ``sim`` result is the
exception: its schema carries ``wall_time``.

Exit codes: 0 success, 2 usage error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from asymde import __version__
from asymde.channels import ChannelSpecError, parse_channel, parse_family
from asymde.de import NoBracket, run_coset_de, run_de, threshold_search, typicality_compare
from asymde.density import GridSpec
from asymde.ensemble import (
    DegreeDistribution,
    InfeasibleDegrees,
    format_degree_file,
    resolve_code,
)

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3
SIG = 12

TABLE1_FAMILIES = ("bec", "bsc", "z", "biawgnc")
TABLE2_CODES = {
    "34": DegreeDistribution({3: 1.0}, {4: 1.0}, name="34"),
    "36": DegreeDistribution({3: 1.0}, {6: 1.0}, name="36"),
    "3-34": DegreeDistribution({3: 1.0}, {3: 0.5, 4: 0.5}, name="3-34"),
    "3-56": DegreeDistribution({3: 1.0}, {5: 0.5, 6: 0.5}, name="3-56"),
}


class UsageError(Exception):
    pass


def fmt(x) -> str:
    """12 significant digits; round-trips through ``float``."""
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.{SIG}g}"


def _num(x):
    # JSON numbers at the same precision as the CSVs
    if isinstance(x, float):
        return None if not math.isfinite(x) else float(fmt(x))
    if isinstance(x, dict):
        return {k: _num(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_num(v) for v in x]
    return x


@dataclass
class RunManifest:
    subcommand: str
    params: dict
    code_sha256: str | None = None
    seed: int | None = None
    version: str = __version__
    wall_time: float = 0.0
    outputs: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=str)


def code_hash(spec: str, d: DegreeDistribution) -> str:
    p = Path(spec)
    data = p.read_bytes() if p.is_file() else format_degree_file(d).encode()
    return hashlib.sha256(data).hexdigest()


# ---------------------------------------------------------------------------
# argument helpers


def _grid(args) -> GridSpec:
    try:
        return GridSpec.parse(args.grid, rounding=args.rounding)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _code(spec: str) -> DegreeDistribution:
    try:
        return resolve_code(spec)
    except (FileNotFoundError, KeyError, ValueError) as exc:
        raise UsageError(f"--code {spec}: {exc}") from None


def _family(args):
    try:
        fam = parse_family(args.family)
    except ChannelSpecError as exc:
        raise UsageError(f"--family: {exc}") from None
    return fam.with_bracket(args.lo, args.hi)


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


class _Outputs:
    """Collects output texts and writes them only once the run has succeeded."""

    def __init__(self):
        self.items: list[tuple[str | None, str]] = []

    def add(self, path, text: str):
        self.items.append((path, text))

    def flush(self, manifest: RunManifest):
        for path, text in self.items:
            if path is None or path == "-":
                sys.stdout.write(text)
                continue
            Path(path).write_text(text)
            manifest.outputs.append(str(path))
        for path, _ in self.items:
            if path not in (None, "-"):
                Path(f"{path}.manifest.json").write_text(manifest.to_json() + "\n")


def _json(obj) -> str:
    return json.dumps(_num(obj), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# subcommands


def cmd_de(args, out: _Outputs, man: RunManifest):
    d = _code(args.code)
    man.code_sha256 = code_hash(args.code, d)
    try:
        ch = parse_channel(args.channel)
    except ChannelSpecError as exc:
        raise UsageError(f"--channel: {exc}") from None
    grid = _grid(args)
    runner = run_coset_de if args.coset else run_de
    tr = runner(ch, d, grid, args.iters, stop_early=not args.full)
    buf = io.StringIO()
    tr.to_csv(buf)
    out.add(args.out, buf.getvalue())
    man.params["verdict"] = tr.verdict
    if args.out not in (None, "-"):
        print(f"{tr.verdict} after {tr.iterations_used} iterations", file=sys.stderr)


def cmd_threshold(args, out, man):
    d = _code(args.code)
    man.code_sha256 = code_hash(args.code, d)
    fam = _family(args)
    t = threshold_search(fam, d, _grid(args), args.iters, args.precision, coset=args.coset)
    res = {"code": str(d), "family": fam.name, "param": fam.param, "threshold": t,
           "bhattacharyya": fam(t).bhattacharyya(), "coset": args.coset,
           "precision": args.precision, "iters": args.iters}
    out.add(args.out, _json(res))


def cmd_typicality(args, out, man):
    d = _code(args.code)
    man.code_sha256 = code_hash(args.code, d)
    fam = _family(args)
    res = typicality_compare(d, fam, _grid(args), args.iters, args.precision, args.probe, args.probe_iters)
    summary = {"code": str(d), "family": fam.name, "linear_threshold": res.linear_threshold,
               "coset_threshold": res.coset_threshold, "gap": res.linear_threshold - res.coset_threshold,
               "probe": res.probe}
    if res.linear_trace is not None:
        summary["linear_verdict"] = res.linear_trace.verdict
        summary["coset_verdict"] = res.coset_trace.verdict
    out.add(args.out, _json(summary))
    if args.trace_out and res.linear_trace is not None:
        lin, cos, q = res.linear_trace.records, res.coset_trace.records, res.q_distance
        rows = ["l,linear_p_e,linear_cbp,coset_p_e,coset_cbp,q_distance"]
        for k in range(max(len(lin), len(cos))):
            a = lin[k] if k < len(lin) else None
            b = cos[k] if k < len(cos) else None
            qd = q[k - 1] if 0 < k <= len(q) else None
            rows.append(",".join([str(k), fmt(a and a.p_e), fmt(a and a.cbp), fmt(b and b.p_e),
                                  fmt(b and b.cbp), fmt(qd)]))
        out.add(args.trace_out, "\n".join(rows) + "\n")


def cmd_sim(args, out, man):
    from asymde.bpsim import EncoderFailure, SimConfig, default_workers, run_sim

    d = _code(args.code)
    man.code_sha256 = code_hash(args.code, d)
    man.seed = args.seed
    try:
        ch = parse_channel(args.channel)
    except ChannelSpecError as exc:
        raise UsageError(f"--channel: {exc}") from None
    try:
        cfg = SimConfig(d, args.n, ch, args.codewords, args.bp_iters, args.seed, default_workers())
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        res = run_sim(cfg)
    except EncoderFailure as exc:
        raise ArithmeticError(str(exc)) from None
    out.add(args.out, _json(asdict(res)))


def cmd_rank(args, out, man):
    from asymde.rankstats import appendix_bound, estimate_E2mr

    man.seed = args.seed
    if args.trials < 100:
        raise UsageError("--trials must be >= 100")
    ests = estimate_E2mr(args.dv, args.dc, args.n, args.m_prime, args.trials, args.seed)
    rows = ["n,mean,stderr,ratio,bound"]
    bound = appendix_bound(args.dv)
    for e in ests:
        rows.append(",".join([str(e.n), fmt(e.mean), fmt(e.stderr), fmt(e.ratio), fmt(bound)]))
    out.add(args.out, "\n".join(rows) + "\n")


def cmd_optimize(args, out, man):
    from asymde.optimize import Infeasible, OptConstraints, optimize_degrees

    man.seed = args.seed
    fam = _family(args)
    try:
        c = OptConstraints(args.max_dv, args.max_dc, args.rate, args.forbid_lambda2, _grid(args),
                           args.iters, args.budget)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        res = optimize_degrees(fam, c, seed=args.seed)
    except Infeasible as exc:
        raise UsageError(f"infeasible constraints: {exc}") from None
    text = f"# threshold {fmt(res.threshold)} on {fam.name} ({len(res.eval_log)} evaluations)\n"
    out.add(args.out, text + format_degree_file(res.best))
    if args.log:
        rows = ["index,param,decodable,best_param"]
        rows += [f"{e.index},{fmt(e.param)},{int(e.decodable)},{fmt(e.best_param)}" for e in res.eval_log]
        out.add(args.log, "\n".join(rows) + "\n")


def cmd_table1(args, out, man):
    grid = _grid(args)
    codes = [(s, _code(s)) for s in args.code]
    man.code_sha256 = ",".join(code_hash(s, d) for s, d in codes)
    fams = [parse_family(f) for f in TABLE1_FAMILIES]
    header = ["code"]
    for f in fams:
        header += [f.name, f"{f.name}_cbp"]
    header += ["stability"]
    rows = [",".join(header)]
    for spec, d in codes:
        row = [d.name or spec]
        for f in fams:
            try:
                t = threshold_search(f, d, grid, args.iters, args.precision)
            except NoBracket:
                row += ["nan", "nan"]
                continue
            # closed-form Bhattacharyya of the channel at the threshold
            row += [fmt(t), fmt(f(t).bhattacharyya())]
        row.append(fmt(d.stability_bound()))
        rows.append(",".join(row))
    out.add(args.out, "\n".join(rows) + "\n")


def cmd_table2(args, out, man):
    grid = _grid(args)
    fam = _family(args)
    rows = ["code,lambda,rho,linear,coset,gap"]
    for name, d in TABLE2_CODES.items():
        res = typicality_compare(d, fam, grid, args.iters, args.precision)
        lam = " ".join(f"{k}:{v:g}" for k, v in sorted(d.lam.items()))
        rho = " ".join(f"{k}:{v:g}" for k, v in sorted(d.rho.items()))
        rows.append(",".join([name, lam, rho, fmt(res.linear_threshold), fmt(res.coset_threshold),
                              fmt(res.linear_threshold - res.coset_threshold)]))
    out.add(args.out, "\n".join(rows) + "\n")


# ---------------------------------------------------------------------------
# parser


def _common(p, *, family=False, family_default="z", hi=None):
    p.add_argument("--grid", default="256:-15:15", help="bins:min:max (default 256:-15:15)")
    p.add_argument("--rounding", choices=("nearest", "pair"), default="nearest",
                   help="operator rounding rule (default nearest)")
    p.add_argument("--iters", type=int, default=100, help="DE iterations (default 100)")
    p.add_argument("--out", default=None, help="output file (default stdout)")
    if family:
        p.add_argument("--family", default=family_default, help="bec, bsc, z, basc[:eps0=..], biawgnc, cbiawgnc")
        p.add_argument("--lo", type=float, default=None, help="bracket low end")
        p.add_argument("--hi", type=float, default=hi, help="bracket high end")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="asymde", description="Density evolution for asymmetric channels.")
    ap.add_argument("--version", action="version", version=f"asymde {__version__}")
    sub = ap.add_subparsers(dest="cmd", required=True, metavar="SUBCOMMAND")

    p = sub.add_parser("de", help="one density-evolution trace (CSV)")
    p.add_argument("--code", required=True)
    p.add_argument("--channel", required=True, help="e.g. z:eps1=0.23, bsc:eps=0.08, biawgnc:sigma=0.88")
    p.add_argument("--coset", action="store_true", help="symmetrized-channel recursion")
    p.add_argument("--full", action="store_true", help="do not stop at the stability region")
    _common(p)
    p.set_defaults(func=cmd_de)

    p = sub.add_parser("threshold", help="threshold by bisection (JSON)")
    p.add_argument("--code", required=True)
    p.add_argument("--precision", type=float, default=1e-4)
    p.add_argument("--coset", action="store_true")
    _common(p, family=True)
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("typicality", help="linear vs coset thresholds (JSON, optional trace CSV)")
    p.add_argument("--code", required=True)
    p.add_argument("--precision", type=float, default=1e-4)
    p.add_argument("--probe", type=float, default=None, help="family parameter for full traces")
    p.add_argument("--probe-iters", type=int, default=None)
    p.add_argument("--trace-out", default=None)
    _common(p, family=True, hi=0.9)
    p.set_defaults(func=cmd_typicality)

    p = sub.add_parser("sim", help="Monte Carlo BP simulation (JSON)")
    p.add_argument("--code", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--channel", required=True)
    p.add_argument("--codewords", type=int, default=1000)
    p.add_argument("--bp-iters", type=int, default=40)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("rank", help="E[2^m_r] Monte Carlo (CSV)")
    p.add_argument("--dv", type=int, default=3)
    p.add_argument("--dc", type=int, default=6)
    p.add_argument("--n", type=_int_list, default=[120, 240, 480])
    p.add_argument("--m-prime", type=int, default=0)
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("optimize", help="degree-distribution search (degree file)")
    p.add_argument("--rate", type=float, default=0.5)
    p.add_argument("--max-dv", type=int, default=12)
    p.add_argument("--max-dc", type=int, default=9)
    p.add_argument("--forbid-lambda2", action="store_true")
    p.add_argument("--budget", type=int, default=500, help="DE evaluations")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--log", default=None, help="evaluation log CSV")
    _common(p, family=True)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("table1", help="thresholds with CBP columns over four families (CSV)")
    p.add_argument("--code", nargs="+", default=["36", "48"])
    p.add_argument("--precision", type=float, default=1e-4)
    _common(p)
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("table2", help="linear vs coset thresholds for four ensembles (CSV)")
    p.add_argument("--precision", type=float, default=1e-5)
    _common(p, family=True, hi=0.9)
    p.set_defaults(func=cmd_table2)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    params = {k: v for k, v in vars(args).items() if k not in ("func",)}
    man = RunManifest(args.cmd, params, seed=params.get("seed"))
    out = _Outputs()
    t0 = time.perf_counter()
    try:
        args.func(args, out, man)
    except UsageError as exc:
        print(f"asymde {args.cmd}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NoBracket, InfeasibleDegrees, ArithmeticError, FloatingPointError) as exc:
        print(f"asymde {args.cmd}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    man.wall_time = time.perf_counter() - t0
    out.flush(man)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
