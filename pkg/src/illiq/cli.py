"""Command-line front end.

Every command reads a model file (see README for the format), writes a JSON
report to ``--out`` (or stdout) and exits with 0 when a result was computed,
2 on bad input and 3 on a numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .arbitrage import check_na, check_robust_na, check_robust_no_scalable_arbitrage
from .certificates import check_arbitrage_witness, check_dual, check_hedge
from .errors import InputError, NotConicalError, NumericalError
from .event_tree import AdaptedVectorProcess, parse_fraction
from .geometry import lineality_space, polar_cone, recession_cone
from .lp import collect_stats
from .markets import MarketModel, recession_model
from .oracle import (
    brute_membership_AT,
    brute_polar_check,
    brute_superhedge_one_period,
    find_polar_counterexample,
    interval_martingale_feasibility,
)
from .pricing import (
    PriceSystem,
    dual_bound,
    find_consistent_price_system,
    superhedge_premium,
    verify_price_system,
)
from .schema import (
    aux_from_json,
    aux_to_json,
    build_model,
    build_process,
    canonical_digest,
    load_json,
    process_to_json,
)

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


def _matrix(M) -> list:
    return (np.asarray(M, dtype=float) + 0.0).tolist()


def _price_system_json(ps: PriceSystem | None):
    if ps is None:
        return None
    return {"y": process_to_json(ps.y), "strict": ps.strict, "delta": ps.delta}


class Context:
    def __init__(self, args):
        self.args = args
        self.inputs: dict = {}
        self._model: MarketModel | None = None

    @property
    def model(self) -> MarketModel:
        if self._model is None:
            doc = load_json(self.args.model)
            self.inputs["model"] = doc
            self._model = build_model(doc, name=str(self.args.model))
        return self._model

    def process(self, attr: str, required: bool = True) -> AdaptedVectorProcess | None:
        path = getattr(self.args, attr, None)
        if path is None:
            if required:
                raise InputError(f"--{attr} is required")
            return None
        doc = load_json(path)
        self.inputs[attr] = doc
        return build_process(doc, self.model, name=str(path))


# --- commands ---------------------------------------------------------------

def cmd_check_na(ctx: Context):
    m = ctx.model
    r = check_na(m)
    cert = None
    if r.witness is not None:
        cert = {"witness": process_to_json(r.witness), "aux": aux_to_json(m, r.aux)}
    return {"holds": r.holds, "value": r.value}, cert


def cmd_check_rna(ctx: Context):
    r = check_robust_na(ctx.model)
    return {"holds": r.holds}, {"price_system": _price_system_json(r.certificate)}


def cmd_check_rnsa(ctx: Context):
    r = check_robust_no_scalable_arbitrage(ctx.model)
    return {"holds": r.holds}, {"price_system": _price_system_json(r.certificate)}


def cmd_find_cps(ctx: Context):
    ps = find_consistent_price_system(ctx.model, strict=ctx.args.strict)
    return {"found": ps is not None, "strict": ctx.args.strict}, {"price_system": _price_system_json(ps)}


def cmd_superhedge(ctx: Context):
    m = ctx.model
    c = ctx.process("claim")
    r = superhedge_premium(m, c, ctx.args.numeraire, check_model=False)
    robust = check_robust_no_scalable_arbitrage(m).holds
    res = {"alpha": r.alpha if np.isfinite(r.alpha) else None, "status": r.status,
           "numeraire": ctx.args.numeraire, "robust_no_scalable_arbitrage": robust}
    cert = None
    if r.hedge is not None:
        cert = {"hedge": process_to_json(r.hedge), "premium": process_to_json(r.premium), "aux": aux_to_json(m, r.aux)}
    return res, cert


def cmd_dual_bound(ctx: Context):
    m = ctx.model
    c = ctx.process("claim")
    p = ctx.process("premium", required=False)
    r = dual_bound(m, c, p, encoding=ctx.args.encoding)
    cert = {"y": process_to_json(r.y), "lambda": aux_to_json(m, r.lam)}
    return {"sup_value": r.sup_value, "superhedges": r.sup_value <= 1e-6, "encoding": r.encoding,
            "normalization": r.normalization}, cert


def cmd_geometry(ctx: Context):
    m = ctx.model
    node = ctx.args.node if ctx.args.node is not None else str(m.tree.ids[0])
    lookup = {str(nid): k for k, nid in enumerate(m.tree.ids)}
    if node not in lookup:
        raise InputError(f"--node {node}: unknown node id")
    k = lookup[node]
    op = ctx.args.operation
    if op == "polar":
        if not m.conical:
            raise NotConicalError("polar needs a conical set; use the recession operation first")
        Q = polar_cone(m.cone_at(k))
        return {"node": node, "A": _matrix(Q.A), "b": _matrix(Q.b)}, None
    if op == "recession":
        R = recession_cone(m.projected_set(k))
        return {"node": node, "A": _matrix(R.A), "b": _matrix(R.b)}, None
    L = lineality_space(m.cone_hrep_at(k) if m.conical else recession_cone(m.projected_set(k)))
    return {"node": node, "basis": _matrix(L.lineality), "dimension": int(L.lineality.shape[0])}, None


def _leaf_claim_array(m: MarketModel, c: AdaptedVectorProcess) -> np.ndarray:
    return c.path_sums().leaf_values()


def cmd_oracle(ctx: Context):
    m = ctx.model
    sub = ctx.args.oracle
    if sub == "polar":
        node = ctx.args.node if ctx.args.node is not None else str(m.tree.ids[0])
        k = {str(nid): i for i, nid in enumerate(m.tree.ids)}.get(node)
        if k is None:
            raise InputError(f"--node {node}: unknown node id")
        rec = recession_model(m)
        K = rec.cone_at(k)
        bad = find_polar_counterexample(K, polar_cone(K), ctx.args.samples, seed=ctx.args.seed)
        return {"node": node, "agrees": bad is None, "samples": ctx.args.samples}, \
            {"counterexample": None if bad is None else bad.tolist()}
    if sub == "intervals":
        return _oracle_intervals(ctx), None
    c = ctx.process("claim")
    leaf = _leaf_claim_array(m, c)
    if sub == "membership":
        return {"member": brute_membership_AT(m, leaf, ctx.args.grid_step, ctx.args.grid_radius)}, None
    alpha = brute_superhedge_one_period(m, leaf, ctx.args.numeraire, ctx.args.grid_step, ctx.args.grid_radius)
    return {"alpha": alpha if np.isfinite(alpha) else None, "grid_step": ctx.args.grid_step}, None


def _oracle_intervals(ctx: Context):
    m = ctx.model
    doc = ctx.inputs["model"]
    if doc["model"]["kind"] != "bid_ask" or m.d != 2:
        raise InputError("interval oracle needs a two-asset bid_ask model")
    per = doc["model"]["per_node"]
    intervals = {}
    for nid in m.tree.ids:
        raw = per.get(str(nid), per.get("*"))
        pi12, pi21 = parse_fraction(raw[0][1]), parse_fraction(raw[1][0])
        intervals[nid] = (1 / pi21, pi12)
    ok = interval_martingale_feasibility(m.tree, intervals, strict=ctx.args.strict)
    return {"feasible": ok, "strict": ctx.args.strict,
            "intervals": {str(k): [str(Fraction(a)), str(Fraction(b))] for k, (a, b) in intervals.items()}}


def cmd_verify(args) -> tuple[int, dict]:
    """Re-check the certificates embedded in a report; no LP is solved."""
    report = load_json(args.report)
    for key in ("command", "inputs", "results"):
        if key not in report:
            raise InputError(f"{args.report}: field {key}: missing")
    inputs = report["inputs"]
    model = build_model(inputs["model"], name="report/inputs/model")
    cert = report.get("certificates") or {}
    cmd = report["command"]
    problems: list[str] = []
    checked = []

    def proc(doc):
        return None if doc is None else build_process(doc, model, "certificate")

    with collect_stats() as stats:
        if cmd == "check-na" and cert.get("witness") is not None:
            problems += check_arbitrage_witness(model, proc(cert["witness"]), aux_from_json(model, cert.get("aux")))
            checked.append("witness")
        if cmd in ("check-rna", "check-rnsa", "find-cps") and cert.get("price_system") is not None:
            ps = cert["price_system"]
            target = recession_model(model) if cmd == "check-rnsa" else model
            problems += verify_price_system(target, PriceSystem(proc(ps["y"]), ps["strict"], ps.get("delta", 0.0)),
                                            use_lp=False)
            checked.append("price_system")
        if cmd == "superhedge" and cert.get("hedge") is not None:
            c = build_process(inputs["claim"], model, "report/inputs/claim")
            problems += check_hedge(model, c, proc(cert["premium"]), proc(cert["hedge"]),
                                    aux_from_json(model, cert.get("aux")))
            checked.append("hedge")
        if cmd == "dual-bound" and cert.get("y") is not None:
            c = build_process(inputs["claim"], model, "report/inputs/claim")
            p = build_process(inputs["premium"], model, "report/inputs/premium") if "premium" in inputs else None
            problems += check_dual(model, c, p, proc(cert["y"]), aux_from_json(model, cert.get("lambda")),
                                   report["results"].get("sup_value"))
            checked.append("dual")
    if stats.lp_count:
        raise NumericalError("verification unexpectedly solved an LP")
    out = {"command": "verify", "tool_version": __version__, "verified_report": report.get("inputs_digest"),
           "results": {"valid": not problems, "checked": checked, "problems": problems}}
    return EXIT_OK, out


COMMANDS = {
    "check-na": cmd_check_na,
    "check-rna": cmd_check_rna,
    "check-rnsa": cmd_check_rnsa,
    "find-cps": cmd_find_cps,
    "superhedge": cmd_superhedge,
    "dual-bound": cmd_dual_bound,
    "geometry": cmd_geometry,
    "oracle": cmd_oracle,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", required=True, help="model JSON file")
    common.add_argument("--out", help="report path (default: stdout)")
    common.add_argument("--csv", help="also write scalar results as CSV to this path")
    common.add_argument("--seed", type=int, default=0, help="RNG seed for sampling oracles")

    parser = argparse.ArgumentParser(prog="illiq", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("check-na", parents=[common], help="no-arbitrage test")
    sub.add_parser("check-rna", parents=[common], help="robust no-arbitrage (conical models)")
    sub.add_parser("check-rnsa", parents=[common], help="robust no scalable arbitrage")
    p = sub.add_parser("find-cps", parents=[common], help="consistent price system search")
    p.add_argument("--strict", action="store_true")
    p = sub.add_parser("superhedge", parents=[common], help="minimal root premium")
    p.add_argument("--claim", required=True)
    p.add_argument("--numeraire", type=int, default=0)
    p = sub.add_parser("dual-bound", parents=[common], help="dual value of a claim and premium")
    p.add_argument("--claim", required=True)
    p.add_argument("--premium")
    p.add_argument("--encoding", choices=["auto", "epigraph", "polar"], default="auto")
    p = sub.add_parser("geometry", parents=[common], help="polar, recession cone or lineality at a node")
    p.add_argument("operation", choices=["polar", "recession", "lineality"])
    p.add_argument("--node")
    p = sub.add_parser("oracle", parents=[common], help="brute-force cross-checks")
    p.add_argument("oracle", choices=["polar", "membership", "superhedge", "intervals"])
    p.add_argument("--claim")
    p.add_argument("--node")
    p.add_argument("--numeraire", type=int, default=0)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--grid-step", type=float, default=1e-3)
    p.add_argument("--grid-radius", type=float, default=10.0)
    p.add_argument("--strict", action="store_true")
    p = sub.add_parser("verify", help="re-check the certificates of a report")
    p.add_argument("--report", required=True)
    p.add_argument("--out")
    p.add_argument("--csv")
    return parser


def _command_line(args) -> str:
    parts = [args.command]
    for key in ("operation", "oracle"):
        if getattr(args, key, None):
            parts.append(getattr(args, key))
    return " ".join(parts)


def _flatten(results: dict) -> list[tuple[str, object]]:
    return [(k, v) for k, v in results.items() if isinstance(v, (int, float, str, bool)) or v is None]


def _emit(report: dict, out: str | None, csv_path: str | None) -> None:
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)
    if csv_path:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["key", "value"])
        for k, v in _flatten(report.get("results", {})):
            w.writerow([k, v])
        Path(csv_path).write_text(buf.getvalue())


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    t0 = time.perf_counter()
    try:
        if args.command == "verify":
            code, report = cmd_verify(args)
        else:
            ctx = Context(args)
            with collect_stats() as stats:
                results, certs = COMMANDS[args.command](ctx)
            report = {
                "command": args.command,
                "invocation": _command_line(args),
                "tool_version": __version__,
                "inputs_digest": canonical_digest(ctx.inputs),
                "inputs": ctx.inputs,
                "results": results,
                "certificates": certs,
                "solver_stats": {"lp_count": stats.lp_count, "pivot_count": stats.pivot_count,
                                 "wall_time": round(time.perf_counter() - t0, 6)},
            }
            code = EXIT_OK
        _emit(report, args.out, args.csv)
        return code
    except InputError as exc:
        print(f"illiq: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, ArithmeticError) as exc:
        print(f"illiq: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
