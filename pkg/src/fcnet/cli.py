"""``fcnet`` command line.

Exit codes: 0 success / property holds, 1 property fails or a hypothesis is
violated (details in the report), 2 input or usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import analysis, throughput, timed
from .errors import (
    FCNetError, HypothesisViolated, NetFileError, NoConvergence, NotStronglyConnected, SpectralRadiusNotOne, Truncated,
)
from .net import classify, non_conflicting
from .netfile import NetFile, dumps_net, load_net
from .transforms import efcn_to_fcn, free_choice_expansion

OK, FAIL, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _emit(report: dict, args) -> None:
    if args.json:
        print(json.dumps(report, indent=2, sort_keys=True))
        return
    for key in sorted(report):
        value = report[key]
        if isinstance(value, (dict, list)):
            value = json.dumps(value, sort_keys=True)
        print(f"{key}: {value}")


def _marking(nf: NetFile, m) -> dict[str, int]:
    return nf.net.marking_dict(m, nonzero=True)


def _load(args) -> NetFile:
    return load_net(args.file)


# -- commands ---------------------------------------------------------------------

def cmd_classify(args) -> tuple[int, dict]:
    nf = _load(args)
    net = nf.net
    cls = classify(net)
    report = {"status": "ok", **cls.as_dict()}
    bound = analysis.is_bounded(net, node_cap=args.cap)
    report["bounded"] = bound.bound if bound.bounded else False
    if bound.bounded:
        live = analysis.is_live(net, args.cap)
        report["live"] = None if live is analysis.INCONCLUSIVE else live
    else:
        report["live"] = None
        report["unbounded_places"] = list(bound.places)
    if cls.is_free_choice:
        try:
            rep = analysis.commoner_live(net)
            report["commoner_live"] = rep.live
            if not rep.live:
                report["violating_siphon"] = sorted(rep.violating_siphon)
        except FCNetError as e:
            report["commoner_live"] = None
            report["commoner_note"] = str(e)
    return OK, report


def cmd_blocking(args) -> tuple[int, dict]:
    nf = _load(args)
    net = nf.net
    b = args.transition
    if not net.is_transition(b):
        raise UsageError(f"unknown transition {b!r}")
    report: dict = {"transition": b}
    try:
        if not non_conflicting(net, b) and not args.cluster:
            raise HypothesisViolated("non-conflicting", f"{b!r} is conflicting; pass --cluster to block its cluster")
        res = analysis.blocking_marking(net, b)
    except HypothesisViolated as e:
        report.update(status="fail", hypothesis=e.which, detail=e.detail)
        return FAIL, report
    report.update(
        status="ok",
        blocking_marking=_marking(nf, res.blocking_marking),
        witness=list(res.witness_sequence),
        parikh=net.parikh_dict(res.parikh, nonzero=True),
        enabled=sorted(res.enabled),
        cluster=res.cluster_variant,
    )
    if args.oracle:
        target = b if not res.cluster_variant else res.enabled
        rb, rb2 = analysis.blocking_oracle(net, target, args.cap)
        agree = rb == rb2 == {res.blocking_marking}
        report["oracle"] = {
            "agree": agree,
            "R_b": sorted((_marking(nf, m) for m in rb), key=lambda d: sorted(d.items())),
            "R_b_avoiding": sorted((_marking(nf, m) for m in rb2), key=lambda d: sorted(d.items())),
        }
        if not agree:
            report["status"] = "fail"
            return FAIL, report
    return OK, report


def _firings(spec: str) -> tuple[str, int]:
    t, _, n = spec.rpartition(":")
    if not t or not n.isdigit():
        raise argparse.ArgumentTypeError("expected TRANSITION:N")
    return t, int(n)


def cmd_simulate(args) -> tuple[int, dict]:
    nf = _load(args)
    net = nf.net
    if nf.timing is None:
        raise UsageError("net file has no 'timing' section")
    if nf.routing is None and any(len(x) > 1 for x in net.post_p):
        raise UsageError("net file has choice places but no 'routing' section")
    rules = [args.horizon is not None, args.firings is not None, args.events is not None]
    if sum(rules) != 1:
        raise UsageError("give exactly one of --horizon, --firings, --events")
    cfg = timed.SimConfig(seed=args.seed, horizon=args.horizon, max_firings=args.firings, max_events=args.events)
    try:
        res = timed.simulate(net, nf.routing, nf.timing, cfg)
    except FCNetError as e:
        raise UsageError(str(e)) from e
    clock = res.state.clock
    report = {"status": "ok", "clock": clock, "seed": args.seed,
              "completed": net.parikh_dict(res.state.completed)}
    if clock > 0:
        est = timed.throughput_estimate(res.log, clock)
        report["rates"] = est.rates
    else:
        report["rates"] = {t: 0.0 for t in net.transitions}
    if args.csv:
        Path(args.csv).write_text(res.log.to_csv(), encoding="utf-8")
        report["csv"] = str(args.csv)
    return OK, report


def _grid(text: Optional[str]) -> list[float]:
    if not text or text == "default":
        return [round(0.05 * k, 10) for k in range(1, 20)]
    return [float(x) for x in text.split(",")]


def cmd_throughput(args) -> tuple[int, dict]:
    report: dict = {}
    nf = None
    if args.matrix:
        if args.file:
            raise UsageError("give a net file or --matrix, not both")
        try:
            rm = throughput.RoutingMatrix.from_csv(Path(args.matrix).read_text(encoding="utf-8"))
        except (OSError, ValueError) as e:
            raise UsageError(f"bad matrix file: {e}") from e
    elif args.file:
        nf = _load(args)
        if nf.routing is None and any(len(x) > 1 for x in nf.net.post_p):
            raise UsageError("net file has choice places but no 'routing' section")
        try:
            rm = throughput.build_R(nf.net, nf.routing or throughput.RoutingSpec())
        except NotStronglyConnected as e:
            report.update(status="fail", error=str(e))
            return FAIL, report
        except FCNetError as e:
            raise UsageError(str(e)) from e
    elif args.grid is None:
        raise UsageError("give a net file, --matrix, or --grid")
    else:
        rm = throughput.RoutingMatrix(throughput.EXAMPLE_LABELS, throughput.EXAMPLE_MATRIX)

    status = OK
    try:
        tv = throughput.perron_vector(rm)
        report.update(x=tv.as_dict(), residual=tv.residual, spectral_radius=tv.spectral_radius)
    except (SpectralRadiusNotOne, NotStronglyConnected, NoConvergence) as e:
        report.update(status="fail", error=str(e))
        return FAIL, report

    if args.grid is not None:
        pc = throughput.parametric_check(_grid(args.grid))
        report["parametric"] = pc.to_json()
        if not pc.ok:
            status = FAIL
    if args.validate_sim:
        if nf is None or nf.timing is None:
            raise UsageError("--validate-sim needs a net file with a 'timing' section")
        cmp = throughput.compare_sim(nf.net, nf.routing, nf.timing, args.horizon, seed=args.seed)
        sim = cmp.to_json()
        report.update(sim_ratios=sim["sim_ratios"], max_rel_err=sim["max_rel_err"],
                      rates=sim["rates"], invariant_residual=sim["invariant_residual"])
        if cmp.max_rel_err > args.tolerance:
            status = FAIL
    report["status"] = "ok" if status == OK else "fail"
    return status, report


def cmd_expand(args) -> tuple[int, dict]:
    nf = _load(args)
    net = nf.net
    routing, timing = nf.routing, nf.timing
    try:
        if args.free_choice:
            out = free_choice_expansion(net)
            if routing is not None:
                from .routing import expand_routing
                routing = expand_routing(net, routing)
            timing = None
        elif args.efcn:
            out = efcn_to_fcn(net)
            if out is not net:
                routing = timing = None
        else:
            b = args.open
            if not net.is_transition(b):
                raise UsageError(f"unknown transition {b!r}")
            mb = analysis.blocking_marking(net, b).blocking_marking
            oe = timed.open_expansion(net, b, mb)
            out = oe.net
            routing = oe.routing(routing) if routing is not None else None
            timing = oe.timing(timing) if timing is not None else None
    except FCNetError as e:
        raise UsageError(f"precondition failed: {e}") from e
    text = dumps_net(out, routing, timing, generated=True)
    report = {"status": "ok", "places": len(out.places), "transitions": len(out.transitions),
              "fcn": classify(out).is_free_choice}
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
        report["output"] = str(args.output)
    else:
        report["net"] = json.loads(text)
    return OK, report


def cmd_tau(args) -> tuple[int, dict]:
    nf = _load(args)
    net = nf.net
    if nf.timing is None:
        raise UsageError("net file has no 'timing' section")
    routing = nf.routing or throughput.RoutingSpec()
    try:
        sample = timed.measure_tau(net, routing, nf.timing, args.transition, args.replications, seed=args.seed)
    except HypothesisViolated as e:
        return FAIL, {"status": "fail", "hypothesis": e.which, "detail": e.detail}
    finite = [v for v in sample.values if np.isfinite(v)]
    report = {
        "status": "ok" if sample.capouts == 0 else "fail",
        "replications": args.replications,
        "capouts": sample.capouts,
        "mean": sample.mean,
        "max": max(finite) if finite else None,
        "target": _marking(nf, sample.target),
    }
    return (OK if sample.capouts == 0 else FAIL), report


# -- parser -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="print the report as JSON")
    common.add_argument("--cap", type=int, default=None, help="state-space node cap (default: $FCNET_CAP or 10^6)")
    common.add_argument("--seed", type=int, default=0)

    parser = argparse.ArgumentParser(prog="fcnet", description="Free Choice net analysis", parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", parents=[common], help="net classes, liveness, boundedness")
    p.add_argument("file")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("blocking", parents=[common], help="blocking marking of a transition")
    p.add_argument("file")
    p.add_argument("transition")
    p.add_argument("--oracle", action="store_true", help="cross-check against exhaustive search")
    p.add_argument("--cluster", action="store_true", help="block the whole cluster of a conflicting transition")
    p.set_defaults(func=cmd_blocking)

    p = sub.add_parser("simulate", parents=[common], help="timed stochastic simulation")
    p.add_argument("file")
    p.add_argument("--horizon", type=float)
    p.add_argument("--firings", type=_firings, metavar="T:N")
    p.add_argument("--events", type=int)
    p.add_argument("--csv", help="write the dater log here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("throughput", parents=[common], help="Perron vector of the routing matrix")
    p.add_argument("file", nargs="?")
    p.add_argument("--matrix", help="CSV matrix with a header row of transition ids")
    p.add_argument("--grid", nargs="?", const="default", default=None,
                   help="parametric check of the example family, optional comma-separated x values")
    p.add_argument("--validate-sim", action="store_true")
    p.add_argument("--horizon", type=float, default=1e5)
    p.add_argument("--tolerance", type=float, default=0.03)
    p.set_defaults(func=cmd_throughput)

    p = sub.add_parser("expand", parents=[common], help="write a transformed net")
    p.add_argument("file")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--free-choice", action="store_true")
    g.add_argument("--open", metavar="B")
    g.add_argument("--efcn", action="store_true")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("tau", parents=[common], help="time to reach the blocking marking")
    p.add_argument("file")
    p.add_argument("transition")
    p.add_argument("--replications", type=int, default=1000)
    p.set_defaults(func=cmd_tau)
    return parser


def run(argv: Optional[Sequence[str]] = None) -> tuple[int, dict, argparse.Namespace]:
    """Parse ``argv`` and execute the command; argparse errors exit with status 2."""
    args = build_parser().parse_args(argv)
    if args.cap is None:
        args.cap = analysis.default_cap()
    try:
        code, report = args.func(args)
    except (NetFileError, UsageError) as e:
        code, report = USAGE, {"status": "error", "error": str(e)}
    except Truncated as e:
        code, report = USAGE, {"status": "error", "error": f"state space exceeds the cap: {e}"}
    return code, report, args


def main(argv: Optional[Sequence[str]] = None) -> int:
    code, report, args = run(argv)
    _emit(report, args)
    return code


if __name__ == "__main__":
    sys.exit(main())
